"""Supervised corpus generation: random multiuser scenarios, closed-form
weight labels, and a flat on-disk dataset format.

Each sample maps a normalized scenario geometry (features) to the phase and
magnitude decomposition of the unit-power LCMV weight vector (labels). Sample
i is drawn from its own seeded substream, so a corpus is reproducible and can
be regenerated in any order or in parallel without changing a single byte.
"""

import json
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .array_model import ArrayConfig, PolarPosition
from .beamformer import (
    CONDITION_LIMIT,
    DegenerateScenarioError,
    NcbfWeights,
    build_constraints,
    decompose,
    gram_condition_estimate,
    lcmv_weights,
    unit_power_normalize,
    wrap_to_two_pi,
)

# Fixed feature scaling: angles against a quarter turn, ranges against the
# 6 m service boundary. These are format constants, not sampling bounds.
ANGLE_SCALE = np.pi / 2.0
RANGE_SCALE = 6.0

# Magnitudes below this floor (in dB) are clamped and counted.
DB_FLOOR = -300.0

DATASET_FORMAT_VERSION = 1
_FEATURES_FILE = "features.f32"
_PHASE_FILE = "phase_labels.f32"
_MAG_FILE = "mag_labels_db.f32"


class SamplingError(RuntimeError):
    """Raised when rejection sampling cannot produce a well-conditioned scenario."""


class DatasetFormatError(RuntimeError):
    """Raised when an on-disk dataset is malformed, truncated, or from an
    unsupported format version."""


@dataclass(frozen=True)
class ScenarioBounds:
    """Sampling region for user positions. Angles in radians, ranges in meters.

    The region must stay inside the service area the feature scaling assumes:
    angles within [-pi/2, pi/2] and ranges within [0.5, 6.0].
    """

    angle_min: float = -ANGLE_SCALE
    angle_max: float = ANGLE_SCALE
    range_min: float = 0.5
    range_max: float = RANGE_SCALE

    def __post_init__(self):
        if not -ANGLE_SCALE <= self.angle_min < self.angle_max <= ANGLE_SCALE:
            raise ValueError("angle bounds must satisfy -pi/2 <= min < max <= pi/2")
        if not 0.5 <= self.range_min < self.range_max <= RANGE_SCALE:
            raise ValueError("range bounds must satisfy 0.5 <= min < max <= 6.0")


DEFAULT_BOUNDS = ScenarioBounds()


@dataclass(frozen=True)
class Scenario:
    """One desired user plus zero or more interferers."""

    desired: PolarPosition
    interferers: tuple

    def positions(self) -> list:
        """All user positions, desired first."""
        return [self.desired, *self.interferers]

    @property
    def num_users(self) -> int:
        return 1 + len(self.interferers)


@dataclass(frozen=True)
class FeatureVector:
    """Normalized scenario geometry, desired user first:
    (theta_u / (pi/2), r_u / 6, theta_2 / (pi/2), r_2 / 6, ...)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size % 2 != 0:
            raise ValueError("feature vector must be 1-D with two entries per user")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LabelPair:
    """Phase and magnitude labels of one unit-power weight vector.

    Phases are relative to element 1 (entry 0 is exactly 0.0) and wrapped into
    [0, 2*pi). Magnitudes are stored as power dB, 20*log10(a_n), clamped at
    DB_FLOOR; `clamped_count` says how many entries hit the floor.
    """

    phase: np.ndarray
    magnitude_db: np.ndarray
    clamped_count: int = 0


def _draw_scenario(cfg, num_users, rng, bounds, max_attempts):
    """Rejection-sample one scenario; returns it with the constraint set that
    passed the guard (columns in sampling order, desired first)."""
    if num_users < 1:
        raise ValueError(f"num_users must be >= 1, got {num_users}")
    if num_users > cfg.num_elements:
        raise ValueError(
            f"cannot null {num_users - 1} interferers with {cfg.num_elements} elements"
        )
    for _ in range(max_attempts):
        angles = rng.uniform(bounds.angle_min, bounds.angle_max, size=num_users)
        ranges = rng.uniform(bounds.range_min, bounds.range_max, size=num_users)
        positions = [PolarPosition(a, r) for a, r in zip(angles, ranges)]
        try:
            constraints = build_constraints(cfg, positions, desired_index=0)
        except DegenerateScenarioError:
            continue
        if not gram_condition_estimate(constraints) < CONDITION_LIMIT:
            continue
        scenario = Scenario(desired=positions[0], interferers=tuple(positions[1:]))
        return scenario, constraints
    raise SamplingError(f"no well-conditioned scenario found in {max_attempts} attempts")


def sample_scenario(
    cfg: ArrayConfig,
    num_users: int,
    rng: np.random.Generator,
    bounds: ScenarioBounds = DEFAULT_BOUNDS,
    max_attempts: int = 1000,
) -> Scenario:
    """Draw one scenario with positions uniform over `bounds`, rejecting any
    draw whose nulling constraint set fails the beamformer's condition guard.

    The first drawn position is the desired user. Draw order is fixed, so a
    given generator state always yields the same scenario.

    Raises
    ------
    SamplingError
        If `max_attempts` consecutive draws are rejected.
    """
    scenario, _ = _draw_scenario(cfg, num_users, rng, bounds, max_attempts)
    return scenario


def make_features(scenario: Scenario, canonical_order: bool = False) -> FeatureVector:
    """Encode a scenario as a flat normalized vector, desired user first.

    With `canonical_order`, interferers are sorted by angle (then range)
    before encoding.
    """
    interferers = list(scenario.interferers)
    if canonical_order:
        interferers.sort(key=lambda p: (p.angle, p.range_m))
    values = []
    for p in [scenario.desired, *interferers]:
        values.append(p.angle / ANGLE_SCALE)
        values.append(p.range_m / RANGE_SCALE)
    return FeatureVector(np.array(values))


def make_labels(weights: NcbfWeights) -> LabelPair:
    """Convert a weight vector into training labels.

    The vector is normalized to unit power, phases are referenced to element 1
    and wrapped into [0, 2*pi), and magnitudes become power dB. The encoding
    is invariant to any complex scaling of the input weights.
    """
    mags, phases = decompose(unit_power_normalize(weights))
    rel_phase = wrap_to_two_pi(phases - phases[0])
    rel_phase[0] = 0.0
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mags)
    clamped = int(np.count_nonzero(db < DB_FLOOR))
    if clamped:
        warnings.warn(f"clamped {clamped} magnitude label(s) at {DB_FLOOR} dB")
        db = np.maximum(db, DB_FLOOR)
    return LabelPair(phase=rel_phase, magnitude_db=db, clamped_count=clamped)


@dataclass(frozen=True)
class Dataset:
    """An in-memory supervised corpus with float32 storage and its provenance."""

    features: np.ndarray
    phase_labels: np.ndarray
    magnitude_labels_db: np.ndarray
    config: ArrayConfig
    bounds: ScenarioBounds
    seed: int
    num_users: int
    canonical_order: bool = False
    clamped_count: int = 0

    def __post_init__(self):
        for name in ("features", "phase_labels", "magnitude_labels_db"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float32)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = self.features.shape[0]
        if self.phase_labels.shape[0] != m or self.magnitude_labels_db.shape[0] != m:
            raise ValueError("feature and label row counts differ")
        if self.phase_labels.shape != self.magnitude_labels_db.shape:
            raise ValueError("phase and magnitude label shapes differ")

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def label_dim(self) -> int:
        return self.phase_labels.shape[1]

    def split(self, train_fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic shuffled split: permute rows with this dataset's seed,
        first `train_fraction` of the permutation is the training set."""
        if not 0.0 < train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        perm = np.random.default_rng(self.seed).permutation(self.count)
        n_train = int(self.count * train_fraction)
        return perm[:n_train], perm[n_train:]


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for sample `index` of a corpus seeded by `seed`."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate_dataset(
    cfg: ArrayConfig,
    count: int,
    seed: int,
    num_users: int = 3,
    bounds: ScenarioBounds = DEFAULT_BOUNDS,
    canonical_order: bool = False,
) -> Dataset:
    """Generate `count` labeled samples.

    Sample i is drawn from substream (seed, i): rejection sampling of one
    scenario, closed-form LCMV weights, then feature/label encoding. Sampling
    or solver failures abort with the offending sample index.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    features = np.empty((count, 2 * num_users), dtype=np.float32)
    phase = np.empty((count, cfg.num_elements), dtype=np.float32)
    mag_db = np.empty((count, cfg.num_elements), dtype=np.float32)
    clamped_total = 0
    for i in range(count):
        try:
            rng = _sample_rng(seed, i)
            scenario, constraints = _draw_scenario(cfg, num_users, rng, bounds, 1000)
            if canonical_order:
                interferers = sorted(
                    scenario.interferers, key=lambda p: (p.angle, p.range_m)
                )
                constraints = build_constraints(
                    cfg, [scenario.desired, *interferers], desired_index=0
                )
            labels = make_labels(lcmv_weights(constraints))
        except Exception as exc:
            raise RuntimeError(f"sample {i}: {exc}") from exc
        features[i] = make_features(scenario, canonical_order=canonical_order).values
        phase[i] = labels.phase
        mag_db[i] = labels.magnitude_db
        clamped_total += labels.clamped_count
    return Dataset(
        features=features,
        phase_labels=phase,
        magnitude_labels_db=mag_db,
        config=cfg,
        bounds=bounds,
        seed=seed,
        num_users=num_users,
        canonical_order=canonical_order,
        clamped_count=clamped_total,
    )


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset directory: manifest.json plus three row-major
    little-endian float32 blobs."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "count": dataset.count,
        "num_users": dataset.num_users,
        "feature_dim": dataset.feature_dim,
        "label_dim": dataset.label_dim,
        "seed": dataset.seed,
        "canonical_order": dataset.canonical_order,
        "clamped_count": dataset.clamped_count,
        "array": {
            "num_elements": dataset.config.num_elements,
            "element_spacing": dataset.config.element_spacing,
            "carrier_frequency": dataset.config.carrier_frequency,
        },
        "bounds": {
            "angle_min": dataset.bounds.angle_min,
            "angle_max": dataset.bounds.angle_max,
            "range_min": dataset.bounds.range_min,
            "range_max": dataset.bounds.range_max,
        },
        "files": {
            "features": _FEATURES_FILE,
            "phase_labels": _PHASE_FILE,
            "magnitude_labels_db": _MAG_FILE,
        },
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (path / _FEATURES_FILE).write_bytes(dataset.features.astype("<f4").tobytes())
    (path / _PHASE_FILE).write_bytes(dataset.phase_labels.astype("<f4").tobytes())
    (path / _MAG_FILE).write_bytes(dataset.magnitude_labels_db.astype("<f4").tobytes())


def _read_blob(path: Path, rows: int, cols: int) -> np.ndarray:
    if not path.is_file():
        raise DatasetFormatError(f"missing data file {path.name}")
    raw = path.read_bytes()
    expected = rows * cols * 4
    if len(raw) != expected:
        raise DatasetFormatError(
            f"{path.name}: expected {expected} bytes for {rows}x{cols} float32, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float32)


def load_dataset(path) -> Dataset:
    """Read a dataset directory written by save_dataset.

    Raises
    ------
    DatasetFormatError
        On a missing or malformed manifest, an unsupported format version, or
        data files whose sizes disagree with the manifest.
    """
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetFormatError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"manifest.json is not valid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset format version {version!r} (expected {DATASET_FORMAT_VERSION})"
        )
    try:
        count = int(manifest["count"])
        feature_dim = int(manifest["feature_dim"])
        label_dim = int(manifest["label_dim"])
        array = manifest["array"]
        cfg = ArrayConfig(
            num_elements=int(array["num_elements"]),
            element_spacing=float(array["element_spacing"]),
            carrier_frequency=float(array["carrier_frequency"]),
        )
        b = manifest["bounds"]
        bounds = ScenarioBounds(
            angle_min=float(b["angle_min"]),
            angle_max=float(b["angle_max"]),
            range_min=float(b["range_min"]),
            range_max=float(b["range_max"]),
        )
        files = manifest["files"]
        dataset = Dataset(
            features=_read_blob(path / files["features"], count, feature_dim),
            phase_labels=_read_blob(path / files["phase_labels"], count, label_dim),
            magnitude_labels_db=_read_blob(
                path / files["magnitude_labels_db"], count, label_dim
            ),
            config=cfg,
            bounds=bounds,
            seed=int(manifest["seed"]),
            num_users=int(manifest["num_users"]),
            canonical_order=bool(manifest["canonical_order"]),
            clamped_count=int(manifest["clamped_count"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"malformed dataset manifest: {exc}") from exc
    return dataset
