"""Spherical-wavefront evaluation of weight vectors.

Beam gains are evaluated against the normalized near-field channel, so the
distortionless target reads exactly 0 dB. The interference-suppression metric
(ratio of desired-position gain to interferer-position gain) and the null
placement search both work on angular cuts at the interferer's range, with a
supplementary radial search along the interferer's angle.
"""

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .array_model import ArrayConfig, PolarPosition, steering_matrix, steering_vector
from .beamformer import NcbfWeights, build_constraints, lcmv_weights, unit_power_normalize
from .datagen import DEFAULT_BOUNDS, make_features, sample_scenario
from .neural import forward, reconstruct_weights

# Gain-ratio ceiling and dB floor keeping aggregates finite around exact nulls.
NCBF_GAIN_CLAMP_DB = 300.0
PATTERN_FLOOR_DB = -300.0


@dataclass(frozen=True)
class PolarGrid:
    """Evaluation lattice: inclusive angle span (radians) and range span
    (meters), each with a positive step. A span whose start equals its stop
    yields a single sample regardless of step."""

    angle_start: float
    angle_stop: float
    angle_step: float
    range_start: float
    range_stop: float
    range_step: float

    def __post_init__(self):
        if not (self.angle_step > 0 and self.range_step > 0):
            raise ValueError("grid steps must be positive")
        if self.angle_stop < self.angle_start or self.range_stop < self.range_start:
            raise ValueError("grid spans must satisfy start <= stop")
        if self.range_start <= 0:
            raise ValueError("grid ranges must be positive")

    @staticmethod
    def _axis(start, stop, step):
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)

    def angles(self) -> np.ndarray:
        return self._axis(self.angle_start, self.angle_stop, self.angle_step)

    def ranges(self) -> np.ndarray:
        return self._axis(self.range_start, self.range_stop, self.range_step)


@dataclass(frozen=True)
class NullSearchResult:
    """Outcome of a null-placement search. `at_boundary` flags a minimum on
    the scan edge, meaning no interior null was found."""

    deviation_deg: float
    at_boundary: bool


def beam_gain(weights: NcbfWeights, cfg: ArrayConfig, position: PolarPosition) -> float:
    """Linear power gain |w.T @ h(p)|**2 of the weights at one position."""
    if weights.num_elements != cfg.num_elements:
        raise ValueError("weight length does not match the array size")
    response = weights.entries @ steering_vector(cfg, position).entries
    return float(np.abs(response) ** 2)


def _gain_cut(weights, cfg, angles, range_m):
    """Linear gains along an angular cut at one range."""
    h = steering_matrix(cfg, angles, np.full(len(angles), range_m))
    return np.abs(weights.entries @ h) ** 2


def beam_pattern(weights: NcbfWeights, cfg: ArrayConfig, grid: PolarGrid) -> np.ndarray:
    """Gain map in dB over the lattice, shape (num_angles, num_ranges).

    Entry (i, j) is 10*log10 of the linear gain at (angles[i], ranges[j]),
    floored at PATTERN_FLOOR_DB so exact nulls stay finite.
    """
    if weights.num_elements != cfg.num_elements:
        raise ValueError("weight length does not match the array size")
    angles = grid.angles()
    ranges = grid.ranges()
    out = np.empty((angles.size, ranges.size))
    for j, r in enumerate(ranges):
        out[:, j] = _gain_cut(weights, cfg, angles, r)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(out)
    return np.maximum(out, PATTERN_FLOOR_DB)


def write_pattern_csv(grid: PolarGrid, gains_db: np.ndarray, path) -> None:
    """Write one lattice row per line: theta_deg,range_m,gain_db."""
    angles = np.rad2deg(grid.angles())
    ranges = grid.ranges()
    if gains_db.shape != (angles.size, ranges.size):
        raise ValueError("gain map shape does not match the grid")
    lines = ["theta_deg,range_m,gain_db"]
    for i, theta in enumerate(angles):
        for j, r in enumerate(ranges):
            lines.append(f"{theta:.6f},{r:.6f},{gains_db[i, j]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def ncbf_gain(
    weights: NcbfWeights,
    cfg: ArrayConfig,
    desired: PolarPosition,
    interferer: PolarPosition,
) -> float:
    """Interference-suppression ratio in dB: desired-position gain over
    interferer-position gain, clamped at NCBF_GAIN_CLAMP_DB when the
    interferer gain underflows (an exact null)."""
    gain_desired = beam_gain(weights, cfg, desired)
    if gain_desired == 0.0:
        raise ValueError("degenerate weights: zero gain at the desired position")
    gain_interferer = beam_gain(weights, cfg, interferer)
    if gain_interferer == 0.0:
        return NCBF_GAIN_CLAMP_DB
    return float(min(10.0 * np.log10(gain_desired / gain_interferer), NCBF_GAIN_CLAMP_DB))


def null_angular_deviation(
    weights: NcbfWeights,
    cfg: ArrayConfig,
    interferer: PolarPosition,
    search_halfwidth_deg: float = 5.0,
    angle_step_deg: float = 0.01,
) -> NullSearchResult:
    """Angular offset between an interferer and the nearest null of the beam.

    Scans the angular cut at the interferer's range within +-halfwidth of its
    angle (clipped to +-90 degrees), locates the gain minimum, and refines it
    with one parabolic interpolation over the three bracketing samples.
    """
    if not (search_halfwidth_deg > 0 and angle_step_deg > 0):
        raise ValueError("search halfwidth and step must be positive")
    theta0 = np.rad2deg(interferer.angle)
    lo = max(theta0 - search_halfwidth_deg, -90.0)
    hi = min(theta0 + search_halfwidth_deg, 90.0)
    n = int(np.floor((hi - lo) / angle_step_deg + 1e-9)) + 1
    thetas = lo + angle_step_deg * np.arange(n)
    gains = _gain_cut(weights, cfg, np.deg2rad(thetas), interferer.range_m)
    k = int(np.argmin(gains))
    if k == 0 or k == n - 1:
        return NullSearchResult(deviation_deg=abs(thetas[k] - theta0), at_boundary=True)
    # parabola through the bracketing samples; near a null the linear gain is
    # locally quadratic, so the vertex lands on the true minimum
    denom = gains[k - 1] - 2.0 * gains[k] + gains[k + 1]
    shift = 0.0 if denom <= 0 else 0.5 * (gains[k - 1] - gains[k + 1]) / denom
    theta_min = thetas[k] + np.clip(shift, -1.0, 1.0) * angle_step_deg
    return NullSearchResult(deviation_deg=abs(theta_min - theta0), at_boundary=False)


def null_range_deviation(
    weights: NcbfWeights,
    cfg: ArrayConfig,
    interferer: PolarPosition,
    search_halfwidth_m: float = 0.5,
    range_step_m: float = 0.005,
) -> NullSearchResult:
    """Supplementary radial analogue of null_angular_deviation: scans ranges
    along the interferer's angle and reports the offset in meters (the
    `deviation_deg` field carries meters here)."""
    if not (search_halfwidth_m > 0 and range_step_m > 0):
        raise ValueError("search halfwidth and step must be positive")
    r0 = interferer.range_m
    lo = max(r0 - search_halfwidth_m, range_step_m)
    hi = r0 + search_halfwidth_m
    n = int(np.floor((hi - lo) / range_step_m + 1e-9)) + 1
    ranges = lo + range_step_m * np.arange(n)
    h = steering_matrix(cfg, np.full(n, interferer.angle), ranges)
    gains = np.abs(weights.entries @ h) ** 2
    k = int(np.argmin(gains))
    if k == 0 or k == n - 1:
        return NullSearchResult(deviation_deg=abs(ranges[k] - r0), at_boundary=True)
    denom = gains[k - 1] - 2.0 * gains[k] + gains[k + 1]
    shift = 0.0 if denom <= 0 else 0.5 * (gains[k - 1] - gains[k + 1]) / denom
    r_min = ranges[k] + np.clip(shift, -1.0, 1.0) * range_step_m
    return NullSearchResult(deviation_deg=abs(r_min - r0), at_boundary=False)


@dataclass(frozen=True)
class EvalReport:
    """Side-by-side metric study of predicted weights against closed-form
    LCMV over randomly sampled scenarios."""

    num_scenarios: int
    seed: int
    records: tuple
    aggregates: dict
    num_failures: int
    failure_messages: tuple

    def to_json(self, path) -> None:
        payload = {
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "num_scenarios": self.num_scenarios,
            "seed": self.seed,
            "num_failures": self.num_failures,
            "failure_messages": list(self.failure_messages),
            "aggregates": self.aggregates,
            "records": list(self.records),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _predict(model, batch):
    """Run whatever exposes .predict, else treat it as an MlpModel."""
    if hasattr(model, "predict"):
        return np.asarray(model.predict(batch))
    return forward(model, batch)


def _method_record(weights, cfg, scenario, search_halfwidth_deg, angle_step_deg):
    desired = scenario.desired
    rec = {
        "gain_at_desired_db": 10.0 * np.log10(beam_gain(weights, cfg, desired)),
        "ncbf_gain_db": [],
        "ncbf_clamped": [],
        "null_deviation_deg": [],
        "null_at_boundary": [],
        "null_range_deviation_m": [],
        "null_range_at_boundary": [],
    }
    for interferer in scenario.interferers:
        gain_db = ncbf_gain(weights, cfg, desired, interferer)
        rec["ncbf_gain_db"].append(gain_db)
        rec["ncbf_clamped"].append(gain_db >= NCBF_GAIN_CLAMP_DB)
        angular = null_angular_deviation(
            weights, cfg, interferer, search_halfwidth_deg, angle_step_deg
        )
        rec["null_deviation_deg"].append(angular.deviation_deg)
        rec["null_at_boundary"].append(angular.at_boundary)
        radial = null_range_deviation(weights, cfg, interferer)
        rec["null_range_deviation_m"].append(radial.deviation_deg)
        rec["null_range_at_boundary"].append(radial.at_boundary)
    return rec


def _aggregate_method(records, method):
    gains = [g for r in records for g in r[method]["ncbf_gain_db"]]
    unclamped = [
        g
        for r in records
        for g, c in zip(r[method]["ncbf_gain_db"], r[method]["ncbf_clamped"])
        if not c
    ]
    devs = [d for r in records for d in r[method]["null_deviation_deg"]]
    desired = [r[method]["gain_at_desired_db"] for r in records]
    boundary = sum(b for r in records for b in r[method]["null_at_boundary"])
    clamped = sum(c for r in records for c in r[method]["ncbf_clamped"])

    def stats(values):
        if not values:
            return {"mean": None, "min": None, "max": None}
        return {
            "mean": float(np.mean(values)),
            "min": float(np.min(values)),
            "max": float(np.max(values)),
        }

    return {
        "ncbf_gain_db": stats(gains),
        "ncbf_gain_db_excluding_clamped": stats(unclamped),
        "ncbf_clamped_count": int(clamped),
        "null_deviation_deg": stats(devs),
        "null_boundary_count": int(boundary),
        "gain_at_desired_db": stats(desired),
    }


def evaluate_model(
    phase_model,
    mag_model,
    cfg: ArrayConfig,
    num_scenarios: int,
    seed: int,
    bounds=DEFAULT_BOUNDS,
    search_halfwidth_deg: float = 5.0,
    angle_step_deg: float = 0.01,
    canonical_order: bool = False,
) -> EvalReport:
    """Sample fresh scenarios, predict weights with the two estimators, and
    score predicted and closed-form LCMV weights with the same metrics.

    Scenario sampling uses the dataset-generation bounds. `canonical_order`
    must match the feature ordering the models were trained on. Per-scenario
    failures are counted and reported, not raised. Scenarios are processed
    sequentially in sampling order, so a (seed, num_scenarios) pair always
    produces the same report.
    """
    if num_scenarios < 0:
        raise ValueError("num_scenarios must be >= 0")
    num_users = None
    for model in (phase_model, mag_model):
        dims = getattr(model, "input_dim", None), getattr(model, "output_dim", None)
        if dims[0] is not None:
            if dims[1] != cfg.num_elements:
                raise ValueError(
                    f"model outputs {dims[1]} values but the array has {cfg.num_elements} elements"
                )
            num_users = dims[0] // 2
    if num_users is None:
        num_users = 3

    rng = np.random.default_rng(seed)
    scenarios, failures = [], []
    for i in range(num_scenarios):
        try:
            scenarios.append(sample_scenario(cfg, num_users, rng, bounds=bounds))
        except Exception as exc:
            failures.append(f"scenario {i}: sampling failed: {exc}")

    records = []
    if scenarios:
        features = np.stack(
            [make_features(s, canonical_order=canonical_order).values for s in scenarios]
        )
        phase_pred = _predict(phase_model, features)
        mag_pred = _predict(mag_model, features)
        for i, scenario in enumerate(scenarios):
            try:
                w_dnn = reconstruct_weights(phase_pred[i], mag_pred[i])
                # normalized like the predictions, so the two records compare
                # gain for gain under the same power budget
                w_ref = unit_power_normalize(
                    lcmv_weights(
                        build_constraints(cfg, scenario.positions(), desired_index=0)
                    )
                )
                records.append(
                    {
                        "desired": [scenario.desired.angle, scenario.desired.range_m],
                        "interferers": [[p.angle, p.range_m] for p in scenario.interferers],
                        "dnn": _method_record(
                            w_dnn, cfg, scenario, search_halfwidth_deg, angle_step_deg
                        ),
                        "lcmv": _method_record(
                            w_ref, cfg, scenario, search_halfwidth_deg, angle_step_deg
                        ),
                    }
                )
            except Exception as exc:
                failures.append(f"scenario {i}: {exc}")

    aggregates = {
        "dnn": _aggregate_method(records, "dnn"),
        "lcmv": _aggregate_method(records, "lcmv"),
    }
    return EvalReport(
        num_scenarios=num_scenarios,
        seed=seed,
        records=tuple(records),
        aggregates=aggregates,
        num_failures=len(failures),
        failure_messages=tuple(failures[:50]),
    )
