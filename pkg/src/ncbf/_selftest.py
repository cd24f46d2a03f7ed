"""Built-in invariant suite behind the `verify` subcommand.

Each check re-derives an expected result through a route independent of the
code it exercises (scalar loops, dense KKT solves, finite differences) and
compares. The fast tier runs in seconds; the full tier adds the desk-scale
training, evaluation, and timing studies and takes minutes.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from . import array_model, beamformer, benchtime, datagen, evalmetrics, neural

REFERENCE_FAR_FIELD_M = 19.8


def _check_far_field_boundary():
    cfg = array_model.reference_array()
    d = array_model.rayleigh_distance(cfg)
    ok = abs(d - REFERENCE_FAR_FIELD_M) / REFERENCE_FAR_FIELD_M < 0.005
    return ok, f"2D^2/lambda = {d:.4f} m (reference {REFERENCE_FAR_FIELD_M} m)"


def _check_steering_model():
    cfg = array_model.reference_array()
    rng = np.random.default_rng(11)
    worst_mag, worst_phase = 0.0, 0.0
    for _ in range(50):
        p = array_model.PolarPosition(rng.uniform(-np.pi / 2, np.pi / 2), rng.uniform(0.5, 6.0))
        rc, ranges = array_model.element_ranges(cfg, p)
        h = array_model.steering_vector(cfg, p).entries
        worst_mag = max(worst_mag, np.abs(np.abs(h) - rc / ranges).max())
        expected_phase = np.mod(cfg.propagation_constant * ranges, 2 * np.pi)
        diff = np.abs(np.exp(1j * expected_phase) - h / np.abs(h)).max()
        worst_phase = max(worst_phase, diff)
        mirror = array_model.steering_vector(
            cfg, array_model.PolarPosition(-p.angle, p.range_m)
        ).entries
        worst_mag = max(worst_mag, np.abs(h - mirror[::-1]).max())
    ok = worst_mag < 1e-12 and worst_phase < 1e-12
    return ok, f"max magnitude/mirror error {worst_mag:.2e}, phase error {worst_phase:.2e}"


def _check_lcmv_constraints(num_scenarios=200):
    cfg = array_model.reference_array()
    worst_resid, worst_null, worst_desired = 0.0, 0.0, 0.0
    for i in range(num_scenarios):
        rng = np.random.default_rng([21, i])
        scenario = datagen.sample_scenario(cfg, 3, rng)
        con = beamformer.build_constraints(cfg, scenario.positions(), 0)
        w = beamformer.lcmv_weights(con)
        resid = con.constraint_matrix.conj().T @ w.entries - con.gain_vector
        worst_resid = max(worst_resid, np.abs(resid).max())
        worst_desired = max(
            worst_desired, abs(evalmetrics.beam_gain(w, cfg, scenario.desired) - 1.0)
        )
        for p in scenario.interferers:
            worst_null = max(worst_null, evalmetrics.beam_gain(w, cfg, p))
    # a residual r on C^H w = d bounds the desired-gain error by ~2r
    ok = worst_resid < 1e-9 and worst_null < 1e-16 and worst_desired < 1e-8
    return ok, (
        f"{num_scenarios} scenarios: residual {worst_resid:.2e}, "
        f"null gain {worst_null:.2e}, desired gain error {worst_desired:.2e}"
    )


def _kkt_solve(r, c, d):
    """Independent LCMV route: solve the full KKT system with a dense LU."""
    n, k = c.shape
    kkt = np.zeros((n + k, n + k), dtype=np.complex128)
    kkt[:n, :n] = r
    kkt[:n, n:] = c
    kkt[n:, :n] = c.conj().T
    rhs = np.concatenate([np.zeros(n, dtype=np.complex128), d.astype(np.complex128)])
    return np.linalg.solve(kkt, rhs)[:n]


def _check_kkt_agreement(instances=20):
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(3, 7))
        k = int(rng.integers(1, min(3, n) + 1))
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        r = a @ a.conj().T + n * np.eye(n)
        c = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
        d = rng.normal(size=k)
        d /= np.linalg.norm(d)
        con = beamformer.ScenarioConstraints(c, d, 0)
        w = beamformer.lcmv_weights(con, covariance=r).entries
        ref = _kkt_solve(r, c, d)
        worst = max(worst, np.linalg.norm(w - ref) / np.linalg.norm(ref))
    return worst < 1e-6, f"{instances} random instances, worst relative error {worst:.2e}"


def _check_loss_oracles(batches=50):
    rng = np.random.default_rng(41)
    worst = 0.0
    for _ in range(batches):
        b, n = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        p = rng.normal(scale=3.0, size=(b, n))
        t = rng.normal(scale=3.0, size=(b, n))
        ref_rmse = sum(
            math.sqrt(sum((p[i, j] - t[i, j]) ** 2 for j in range(n)) / n) for i in range(b)
        ) / b
        tot = 0.0
        for i in range(b):
            for j in range(n):
                d = math.fmod(abs(p[i, j] - t[i, j]), 2 * math.pi)
                tot += min(d, 2 * math.pi - d)
        ref_cmae = tot / (b * n)
        worst = max(worst, abs(neural.rmse_loss(p, t) - ref_rmse))
        worst = max(worst, abs(neural.cmae_loss(p, t) - ref_cmae))
    wrap = neural.cmae_loss(np.array([[0.1]]), np.array([[2 * np.pi - 0.1]]))
    ok = worst < 1e-12 and abs(wrap - 0.2) < 1e-12
    return ok, f"worst loss deviation {worst:.2e}, wraparound distance {wrap:.12f}"


def kink_margin(model, x, y) -> float:
    """Distance of a network evaluation from the nearest loss kink: the
    smallest |preactivation| over all hidden units, and for the circular loss
    the distance of every wrapped error from 0 and from a half turn."""
    from .neural import _forward_cached, wrap_to_pi

    pred, _, preacts = _forward_cached(list(model.weights), list(model.biases), x)
    margin = min(float(np.abs(z).min()) for z in preacts) if preacts else np.inf
    wrapped = np.abs(wrap_to_pi(pred - y))
    return min(margin, float(wrapped.min()), float((np.pi - wrapped).min()))


def _check_gradients(margin_limit=1e-3, step=1e-6, per_matrix=10):
    from .neural import _forward_cached, _loss_and_grads, _loss_value

    # pick a batch that keeps every evaluated quantity clear of a kink, so no
    # parameter needs excluding and the central difference is trustworthy
    model = neural.init_model([6, 8, 8, 24], seed=3)
    x = y = None
    for data_seed in range(100):
        rng = np.random.default_rng([51, data_seed])
        cand_x = rng.normal(size=(4, 6))
        cand_y = rng.normal(scale=2.0, size=(4, 24))
        if kink_margin(model, cand_x, cand_y) >= margin_limit:
            x, y = cand_x, cand_y
            break
    if x is None:
        return False, "no kink-free evaluation point found"
    pick = np.random.default_rng(52)
    worst = 0.0
    for kind in (neural.LOSS_RMSE, neural.LOSS_CMAE):
        ws = [w.copy() for w in model.weights]
        bs = [b.copy() for b in model.biases]
        _, gw, gb = _loss_and_grads(ws, bs, x, y, kind)
        for arr, grad in ((ws, gw), (bs, gb)):
            for li in range(len(arr)):
                flat = arr[li].reshape(-1)
                gflat = grad[li].reshape(-1)
                count = min(per_matrix, flat.size)
                for idx in pick.choice(flat.size, size=count, replace=False):
                    keep = flat[idx]
                    flat[idx] = keep + step
                    up = _loss_value(kind, _forward_cached(ws, bs, x)[0], y)
                    flat[idx] = keep - step
                    dn = _loss_value(kind, _forward_cached(ws, bs, x)[0], y)
                    flat[idx] = keep
                    fd = (up - dn) / (2 * step)
                    an = gflat[idx]
                    if max(abs(fd), abs(an)) < 1e-8:
                        continue  # both zero to within finite-difference noise
                    worst = max(worst, abs(fd - an) / max(abs(fd), abs(an)))
    return worst < 1e-4, f"worst finite-difference relative error {worst:.2e}"


def _check_label_gauge(vectors=200):
    rng = np.random.default_rng(61)
    mismatches = 0
    worst_recon = 0.0
    for _ in range(vectors):
        w = beamformer.NcbfWeights(rng.normal(size=24) + 1j * rng.normal(size=24))
        scale = complex(rng.normal(), rng.normal())
        if abs(scale) < 1e-3:
            scale = 1.0 + 1.0j
        a = datagen.make_labels(w)
        b = datagen.make_labels(beamformer.NcbfWeights(scale * w.entries))
        if (
            a.phase.astype(np.float32).tobytes() != b.phase.astype(np.float32).tobytes()
            or a.magnitude_db.astype(np.float32).tobytes()
            != b.magnitude_db.astype(np.float32).tobytes()
        ):
            mismatches += 1
        rebuilt = neural.reconstruct_weights(a.phase, a.magnitude_db).entries
        ref = beamformer.unit_power_normalize(w).entries
        ref = ref * np.exp(-1j * np.angle(ref[0]))
        worst_recon = max(worst_recon, np.abs(rebuilt - ref).max())
    ok = mismatches == 0 and worst_recon < 1e-6
    return ok, f"{mismatches} float32 mismatches, reconstruction error {worst_recon:.2e}"


def _check_dataset_roundtrip():
    cfg = array_model.reference_array()
    ds = datagen.generate_dataset(cfg, 20, seed=5)
    with tempfile.TemporaryDirectory() as td:
        datagen.save_dataset(ds, td)
        back = datagen.load_dataset(td)
        exact = (
            back.features.tobytes() == ds.features.tobytes()
            and back.phase_labels.tobytes() == ds.phase_labels.tobytes()
            and back.magnitude_labels_db.tobytes() == ds.magnitude_labels_db.tobytes()
        )
        blob = Path(td) / "features.f32"
        blob.write_bytes(blob.read_bytes()[:-4])
        try:
            datagen.load_dataset(td)
            truncation_caught = False
        except datagen.DatasetFormatError:
            truncation_caught = True
    ok = exact and truncation_caught
    return ok, f"bit-exact={exact}, truncation detected={truncation_caught}"


def _check_checkpoint_roundtrip():
    model = neural.init_model([6, 16, 24], seed=9)
    with tempfile.TemporaryDirectory() as td:
        first = Path(td) / "a"
        second = Path(td) / "b"
        neural.save_model(model, first, loss_kind=neural.LOSS_CMAE)
        back, _ = neural.load_model(first)
        neural.save_model(back, second, loss_kind=neural.LOSS_CMAE)
        exact = (first / "params.f32").read_bytes() == (second / "params.f32").read_bytes()
        (first / "params.f32").write_bytes(b"\x00" * 12)
        try:
            neural.load_model(first)
            size_caught = False
        except neural.CheckpointFormatError:
            size_caught = True
    ok = exact and size_caught
    return ok, f"re-save bit-exact={exact}, size mismatch detected={size_caught}"


def _check_null_search(num_scenarios=20):
    cfg = array_model.reference_array()
    worst = 0.0
    checked = 0
    for i in range(num_scenarios):
        rng = np.random.default_rng([71, i])
        scenario = datagen.sample_scenario(cfg, 3, rng)
        if any(
            abs(p.angle - scenario.desired.angle) < np.deg2rad(1.0)
            for p in scenario.interferers
        ):
            continue
        w = beamformer.lcmv_weights(
            beamformer.build_constraints(cfg, scenario.positions(), 0)
        )
        for p in scenario.interferers:
            res = evalmetrics.null_angular_deviation(w, cfg, p)
            if not res.at_boundary:
                worst = max(worst, res.deviation_deg)
                checked += 1
    return worst < 0.01 and checked > 0, f"{checked} nulls, worst deviation {worst:.2e} deg"


def _desk_models(seed=0):
    """Shared desk-scale study: 100k samples, [6,256,256,256,24], 50 epochs."""
    cfg = array_model.reference_array()
    ds = datagen.generate_dataset(cfg, 100_000, seed=seed, canonical_order=True)
    arch = (6, 256, 256, 256, 24)
    phase_cfg = neural.TrainConfig(
        loss_kind=neural.LOSS_CMAE, epochs=50, batch_size=1024,
        learning_rate=0.01, lr_decay=0.99, seed=seed,
    )
    mag_cfg = neural.TrainConfig(
        loss_kind=neural.LOSS_RMSE, epochs=50, batch_size=1024,
        learning_rate=0.001, lr_decay=0.99, seed=seed,
    )
    phase_model, phase_hist = neural.train(neural.init_model(arch, seed), ds, phase_cfg)
    mag_model, mag_hist = neural.train(neural.init_model(arch, seed + 1), ds, mag_cfg)
    return cfg, phase_model, phase_hist, mag_model, mag_hist


def _check_desk_training(state):
    cfg, phase_model, phase_hist, mag_model, mag_hist = _desk_models()
    state["models"] = (cfg, phase_model, mag_model)
    cmae = phase_hist.test_loss[-1]
    rmse = mag_hist.test_loss[-1]
    drop_p = cmae <= 0.5 * phase_hist.test_loss[0]
    drop_m = rmse <= 0.5 * mag_hist.test_loss[0]
    ok = cmae < 0.3 and rmse < 1.5 and drop_p and drop_m
    return ok, (
        f"test CMAE {cmae:.4f} rad (gate 0.3), test RMSE {rmse:.4f} dB (gate 1.5), "
        f"halved from epoch 1: {drop_p and drop_m}"
    )


def _check_desk_evaluation(state):
    if "models" not in state:
        return False, "skipped: desk training unavailable"
    cfg, phase_model, mag_model = state["models"]
    report = evalmetrics.evaluate_model(
        phase_model, mag_model, cfg, 1000, seed=202, canonical_order=True
    )
    gain = report.aggregates["dnn"]["ncbf_gain_db"]["mean"]
    dev = report.aggregates["dnn"]["null_deviation_deg"]["mean"]
    ok = gain is not None and gain >= 15.0 and dev is not None and dev <= 2.0
    return ok, (
        f"mean suppression {gain:.2f} dB (gate >= 15), mean null deviation {dev:.3f} deg "
        f"(gate <= 2), failures {report.num_failures}"
    )


def _check_bench_trend():
    lcmv = benchtime.bench_lcmv([24, 64, 128, 256], samples=300, repeats=3, seed=0)
    arch = [6] + [1024] * 6 + [24]
    dnn = benchtime.bench_dnn(
        neural.init_model(arch, 0), neural.init_model(arch, 1), [1024],
        samples=4096, repeats=3, seed=0,
    )
    slope = benchtime.loglog_slope(lcmv)
    crossover = dnn[0].time_per_sample < lcmv[-1].time_per_sample
    times = ", ".join(f"N={r.num_elements}:{r.time_per_sample * 1e6:.0f}us" for r in lcmv)
    ok = slope >= 2.0 and crossover
    return ok, (
        f"slope {slope:.3f} (gate >= 2.0), crossover {crossover} "
        f"(dnn {dnn[0].time_per_sample * 1e6:.0f}us vs lcmv@256 "
        f"{lcmv[-1].time_per_sample * 1e6:.0f}us); {times}"
    )


FAST_CHECKS = [
    ("far_field_boundary", _check_far_field_boundary),
    ("steering_model", _check_steering_model),
    ("lcmv_constraints", _check_lcmv_constraints),
    ("kkt_agreement", _check_kkt_agreement),
    ("loss_oracles", _check_loss_oracles),
    ("gradient_check", _check_gradients),
    ("label_gauge", _check_label_gauge),
    ("dataset_roundtrip", _check_dataset_roundtrip),
    ("checkpoint_roundtrip", _check_checkpoint_roundtrip),
    ("null_search", _check_null_search),
]


def run_checks(full: bool = False):
    """Run the suite; returns a list of (name, passed, detail) tuples."""
    results = []
    for name, fn in FAST_CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        # numpy comparison results are np.bool_; keep the tuples plain python
        results.append((name, bool(ok), detail))
    if full:
        state = {}
        for name, fn in [
            ("desk_training", _check_desk_training),
            ("desk_evaluation", _check_desk_evaluation),
        ]:
            try:
                ok, detail = fn(state)
            except Exception as exc:
                ok, detail = False, f"raised {type(exc).__name__}: {exc}"
            results.append((name, bool(ok), detail))
        try:
            ok, detail = _check_bench_trend()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(("bench_trend", bool(ok), detail))
    return results
