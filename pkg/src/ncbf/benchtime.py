"""Wall-clock comparison of closed-form weight computation against neural
inference across array sizes and batch sizes.

Timing uses the monotonic performance counter, a warmup of roughly 10% of the
workload, and the median over repeated passes. Runs are pinned to one BLAS
thread by default so numbers are comparable across machines; a different
thread count is carried in the record, never mixed into the default label.
"""

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .array_model import ArrayConfig
from .beamformer import build_constraints, lcmv_weights
from .datagen import DEFAULT_BOUNDS, sample_scenario
from .neural import MlpModel, forward


@dataclass(frozen=True)
class BenchRecord:
    """One measured configuration. `time_per_sample` is always
    `wall_time_total / samples`."""

    method: str
    num_elements: int
    num_users: int
    batch_size: int
    samples: int
    wall_time_total: float
    time_per_sample: float
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        expected = self.wall_time_total / self.samples
        if not np.isclose(self.time_per_sample, expected, rtol=1e-9, atol=0.0):
            raise ValueError("time_per_sample must equal wall_time_total / samples")


def _record(method, n, k, batch, samples, wall, threads):
    return BenchRecord(
        method=method,
        num_elements=n,
        num_users=k,
        batch_size=batch,
        samples=samples,
        wall_time_total=wall,
        time_per_sample=wall / samples,
        threads=threads,
    )


def bench_lcmv(
    element_counts,
    num_users: int = 3,
    samples: int = 10000,
    repeats: int = 5,
    seed: int = 0,
    element_spacing: float = 0.04,
    carrier_frequency: float = 3.5e9,
    threads: int = 1,
) -> list:
    """Time closed-form weight computation per array size.

    For each N: draw `samples` scenarios up front (sampling is excluded from
    timing), then time constraint construction, explicit covariance build
    (identity here), and the LCMV solve per sample. The reported wall time is
    the median over `repeats` full passes, after a ~10% warmup.
    """
    if samples < 1 or repeats < 1:
        raise ValueError("samples and repeats must be >= 1")
    records = []
    for n in element_counts:
        cfg = ArrayConfig(n, element_spacing, carrier_frequency)
        rng = np.random.default_rng([seed, n])
        position_sets = [
            sample_scenario(cfg, num_users, rng, bounds=DEFAULT_BOUNDS).positions()
            for _ in range(samples)
        ]

        def solve(positions, cfg=cfg, n=n):
            constraints = build_constraints(cfg, positions, desired_index=0)
            covariance = np.eye(n, dtype=np.complex128)
            return lcmv_weights(constraints, covariance=covariance)

        with threadpool_limits(limits=threads):
            for positions in position_sets[: max(1, samples // 10)]:
                solve(positions)
            passes = []
            for _ in range(repeats):
                start = time.perf_counter()
                for positions in position_sets:
                    solve(positions)
                passes.append(time.perf_counter() - start)
        wall = float(np.median(passes))
        records.append(_record("lcmv", n, num_users, 1, samples, wall, threads))
    return records


def _float32_model(model: MlpModel) -> MlpModel:
    return MlpModel(
        layer_sizes=model.layer_sizes,
        weights=tuple(w.astype(np.float32) for w in model.weights),
        biases=tuple(b.astype(np.float32) for b in model.biases),
    )


def bench_dnn(
    phase_model: MlpModel,
    mag_model: MlpModel,
    batch_sizes,
    samples: int = 10000,
    repeats: int = 5,
    seed: int = 0,
    threads: int = 1,
) -> list:
    """Time dual-network inference per batch size.

    Each pass pushes `samples` inputs through both networks in ceil(M/B)
    batches (the last batch may be partial) using float32 parameters and
    inputs. Timing is value-independent, so random inputs stand in for
    features. Median over `repeats` passes after a ~10% warmup.
    """
    if samples < 1 or repeats < 1:
        raise ValueError("samples and repeats must be >= 1")
    if phase_model.input_dim != mag_model.input_dim:
        raise ValueError("phase and magnitude models must share an input size")
    phase32 = _float32_model(phase_model)
    mag32 = _float32_model(mag_model)
    x = np.random.default_rng(seed).standard_normal(
        (samples, phase_model.input_dim), dtype=np.float32
    )
    records = []
    for batch_size in batch_sizes:
        b = int(batch_size)
        if b < 1:
            raise ValueError("batch sizes must be >= 1")
        batches = [x[s : s + b] for s in range(0, samples, b)]
        with threadpool_limits(limits=threads):
            for xb in batches[: max(1, len(batches) // 10)]:
                forward(phase32, xb)
                forward(mag32, xb)
            passes = []
            for _ in range(repeats):
                start = time.perf_counter()
                for xb in batches:
                    forward(phase32, xb)
                    forward(mag32, xb)
                passes.append(time.perf_counter() - start)
        wall = float(np.median(passes))
        records.append(
            _record(
                "dnn",
                phase_model.output_dim,
                phase_model.input_dim // 2,
                b,
                samples,
                wall,
                threads,
            )
        )
    return records


def loglog_slope(records) -> float:
    """Least-squares slope of log(time_per_sample) against log(num_elements)
    over the given records. Needs at least two distinct array sizes."""
    sizes = np.array([r.num_elements for r in records], dtype=np.float64)
    times = np.array([r.time_per_sample for r in records], dtype=np.float64)
    if np.unique(sizes).size < 2:
        raise ValueError("need records at two or more distinct array sizes")
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def write_bench_csv(records, path) -> None:
    """One record per line under the header method,N,K,batch,samples,time_per_sample_s."""
    lines = ["method,N,K,batch,samples,time_per_sample_s"]
    for r in records:
        lines.append(
            f"{r.method},{r.num_elements},{r.num_users},{r.batch_size},"
            f"{r.samples},{r.time_per_sample!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
