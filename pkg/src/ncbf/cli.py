"""Command-line driver for the toolkit.

One subcommand per workflow stage: gen-data, tune, train, eval, pattern,
bench, verify. Positions are given in degrees and meters at the flag boundary
(theta_deg,range_m pairs) and converted to radians internally. Every run with
an --out directory records a run_manifest.json with the resolved
configuration, seeds, and artifact list. The NCBF_THREADS environment
variable overrides the single-thread default of the benchmarks.
"""

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._selftest import run_checks
from .array_model import ArrayConfig, PolarPosition
from .beamformer import build_constraints, lcmv_weights
from .benchtime import bench_dnn, bench_lcmv, loglog_slope, write_bench_csv
from .datagen import Scenario, generate_dataset, load_dataset, make_features, save_dataset
from .evalmetrics import PolarGrid, beam_gain, beam_pattern, evaluate_model
from .neural import (
    LOSS_CMAE,
    LOSS_RMSE,
    TrainConfig,
    init_model,
    load_model,
    reconstruct_weights,
    save_model,
    train,
    tune_architectures,
)

# Flag-level loss names map onto the estimator losses; learning-rate defaults
# follow the reference recipe (0.01 for phase, 0.001 for magnitude).
_LOSS_BY_NAME = {"phase": LOSS_CMAE, "magnitude": LOSS_RMSE}
_DEFAULT_LR = {"phase": 0.01, "magnitude": 0.001}

DEFAULT_ARCH = "6,1024,1024,1024,1024,1024,1024,24"


def _ints(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _arch_list(text: str) -> list:
    archs = []
    for part in text.split(";"):
        if part.strip():
            archs.append(tuple(_ints(part)))
    if not archs:
        raise argparse.ArgumentTypeError("expected semicolon-separated architectures")
    return archs


def _position(text: str) -> PolarPosition:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected theta_deg,range_m, got {text!r}")
    return PolarPosition.from_degrees(float(parts[0]), float(parts[1]))


def _positions(text: str) -> list:
    parts = [p for p in text.split(",") if p.strip() != ""]
    if len(parts) % 2 != 0:
        raise argparse.ArgumentTypeError("expected flat theta_deg,range_m pairs")
    return [
        PolarPosition.from_degrees(float(parts[i]), float(parts[i + 1]))
        for i in range(0, len(parts), 2)
    ]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out: Path, subcommand: str, args, seeds: dict, artifacts: list, started: str):
    config = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        config[key] = str(value) if isinstance(value, (Path, PolarPosition)) else value
        if isinstance(value, list):
            config[key] = [str(v) if isinstance(v, PolarPosition) else v for v in value]
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "started_utc": started,
        "finished_utc": _now(),
        "config": config,
        "seeds": seeds,
        "artifacts": artifacts,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_data(args) -> int:
    started = _now()
    out = _out_dir(args)
    cfg = ArrayConfig(args.elements, args.spacing, args.carrier)
    dataset = generate_dataset(
        cfg, args.count, args.seed, num_users=args.users, canonical_order=args.canonical_order
    )
    save_dataset(dataset, out)
    print(
        f"wrote {dataset.count} samples ({dataset.feature_dim} features -> "
        f"{dataset.label_dim} labels, {dataset.clamped_count} clamped) to {out}"
    )
    _write_manifest(
        out, "gen-data", args, {"dataset": args.seed},
        ["manifest.json", "features.f32", "phase_labels.f32", "mag_labels_db.f32"], started,
    )
    return 0


def _train_config(args, loss_kind) -> TrainConfig:
    lr = args.lr if args.lr is not None else _DEFAULT_LR[args.loss]
    return TrainConfig(
        loss_kind=loss_kind,
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=lr,
        lr_decay=args.decay,
        seed=args.seed,
    )


def _cmd_train(args) -> int:
    started = _now()
    out = _out_dir(args)
    dataset = load_dataset(args.data)
    loss_kind = _LOSS_BY_NAME[args.loss]
    config = _train_config(args, loss_kind)
    model = init_model(_ints(args.arch), seed=args.seed)
    trained, history = train(model, dataset, config)
    save_model(
        trained, out / "model",
        loss_kind=loss_kind, seed=args.seed, train_config=config,
        final_train_loss=history.train_loss[-1], final_test_loss=history.test_loss[-1],
        canonical_features=dataset.canonical_order,
    )
    history.write_csv(out / "history.csv")
    unit = "rad" if loss_kind == LOSS_CMAE else "dB"
    print(
        f"trained {args.loss} estimator {args.arch} for {config.epochs} epochs: "
        f"train {history.train_loss[-1]:.4f} {unit}, test {history.test_loss[-1]:.4f} {unit}"
    )
    _write_manifest(
        out, "train", args, {"init": args.seed, "shuffle": args.seed, "split": dataset.seed},
        ["model/model.json", "model/params.f32", "history.csv"], started,
    )
    return 0


def _cmd_tune(args) -> int:
    started = _now()
    out = _out_dir(args)
    dataset = load_dataset(args.data)
    loss_kind = _LOSS_BY_NAME[args.loss]
    config = _train_config(args, loss_kind)
    results = tune_architectures(args.candidates, dataset, config, repeats=args.repeats)
    ranked = [
        {
            "layer_sizes": list(r.layer_sizes),
            "mean_test_loss": None if not np.isfinite(r.mean_test_loss) else r.mean_test_loss,
            "run_losses": list(r.run_losses),
            "failures": list(r.failures),
        }
        for r in results
    ]
    (out / "tuning.json").write_text(json.dumps({
        "loss": args.loss, "repeats": args.repeats, "ranked": ranked,
    }, indent=2) + "\n")
    unit = "rad" if loss_kind == LOSS_CMAE else "dB"
    for r in results:
        label = "x".join(str(s) for s in r.layer_sizes)
        mean = f"{r.mean_test_loss:.4f} {unit}" if np.isfinite(r.mean_test_loss) else "all runs failed"
        print(f"{label}: {mean} over {len(r.run_losses)} runs")
    _write_manifest(
        out, "tune", args, {"base": args.seed, "runs": [args.seed + r for r in range(args.repeats)]},
        ["tuning.json"], started,
    )
    return 0


def _load_model_pair(args):
    phase_model, phase_meta = load_model(args.phase_model)
    mag_model, mag_meta = load_model(args.mag_model)
    if phase_model.layer_sizes[0] != mag_model.layer_sizes[0] or \
            phase_model.layer_sizes[-1] != mag_model.layer_sizes[-1]:
        raise ValueError("phase and magnitude models disagree on input/output sizes")
    if bool(phase_meta.get("canonical_features")) != bool(mag_meta.get("canonical_features")):
        raise ValueError("phase and magnitude models disagree on feature ordering")
    return phase_model, phase_meta, mag_model, mag_meta


def _cmd_eval(args) -> int:
    started = _now()
    out = _out_dir(args)
    phase_model, phase_meta, mag_model, _ = _load_model_pair(args)
    cfg = ArrayConfig(phase_model.output_dim, args.spacing, args.carrier)
    report = evaluate_model(
        phase_model, mag_model, cfg, args.scenarios, args.seed,
        canonical_order=bool(phase_meta.get("canonical_features")),
    )
    report.to_json(out / "report.json")
    dnn = report.aggregates["dnn"]
    ref = report.aggregates["lcmv"]
    print(f"evaluated {len(report.records)} scenarios ({report.num_failures} failures)")
    if report.records:
        print(
            f"predicted weights: mean suppression {dnn['ncbf_gain_db']['mean']:.2f} dB, "
            f"mean null deviation {dnn['null_deviation_deg']['mean']:.3f} deg"
        )
        print(
            f"closed form: mean suppression {ref['ncbf_gain_db']['mean']:.2f} dB "
            f"({ref['ncbf_clamped_count']} exact nulls clamped)"
        )
    _write_manifest(out, "eval", args, {"scenarios": args.seed}, ["report.json"], started)
    return 0


def _pattern_weights(args, cfg, positions):
    if args.weights_from == "lcmv":
        return lcmv_weights(build_constraints(cfg, positions, desired_index=0))
    if not args.phase_model or not args.mag_model:
        raise ValueError("--weights-from model requires --phase-model and --mag-model")
    phase_model, phase_meta, mag_model, _ = _load_model_pair(args)
    if phase_model.output_dim != cfg.num_elements:
        raise ValueError(
            f"model outputs {phase_model.output_dim} weights but the array has "
            f"{cfg.num_elements} elements"
        )
    scenario = Scenario(desired=positions[0], interferers=tuple(positions[1:]))
    features = make_features(
        scenario, canonical_order=bool(phase_meta.get("canonical_features"))
    ).values[None, :]
    phase = phase_model.predict(features)[0]
    mag_db = mag_model.predict(features)[0]
    return reconstruct_weights(phase, mag_db)


def _cmd_pattern(args) -> int:
    started = _now()
    out = _out_dir(args)
    cfg = ArrayConfig(args.elements, args.spacing, args.carrier)
    positions = [args.desired, *args.interferers]
    weights = _pattern_weights(args, cfg, positions)
    reference_db = 10.0 * np.log10(beam_gain(weights, cfg, args.desired))

    if args.grid is not None:
        g = [float(v) for v in args.grid.split(",")]
        if len(g) != 6:
            raise ValueError(
                "--grid expects theta_start,theta_stop,theta_step,range_start,range_stop,range_step"
            )
        grids = [PolarGrid(np.deg2rad(g[0]), np.deg2rad(g[1]), np.deg2rad(g[2]), g[3], g[4], g[5])]
    else:
        # default: full angular sweep cut at each user's range
        cuts = sorted({p.range_m for p in positions})
        grids = [
            PolarGrid(np.deg2rad(-90.0), np.deg2rad(90.0), np.deg2rad(0.1), r, r, 1.0)
            for r in cuts
        ]

    lines = ["theta_deg,range_m,gain_db"]
    for grid in grids:
        gains_db = beam_pattern(weights, cfg, grid) - reference_db
        angles = np.rad2deg(grid.angles())
        ranges = grid.ranges()
        for i in range(angles.size):
            for j in range(ranges.size):
                lines.append(f"{angles[i]:.6f},{ranges[j]:.6f},{gains_db[i, j]:.6f}")
    (out / "pattern.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} lattice points to {out / 'pattern.csv'} (0 dB at desired)")
    _write_manifest(out, "pattern", args, {}, ["pattern.csv"], started)
    return 0


def _cmd_bench(args) -> int:
    started = _now()
    out = _out_dir(args)
    threads = int(os.environ.get("NCBF_THREADS", "1"))
    lcmv_records = bench_lcmv(
        args.grid_n, num_users=args.k, samples=args.samples,
        repeats=args.repeats, seed=args.seed, threads=threads,
    )
    arch = _ints(args.arch)
    dnn_records = bench_dnn(
        init_model(arch, seed=args.seed), init_model(arch, seed=args.seed + 1),
        args.batches, samples=args.samples, repeats=args.repeats,
        seed=args.seed, threads=threads,
    )
    write_bench_csv(lcmv_records + dnn_records, out / "bench.csv")
    for r in lcmv_records:
        print(f"lcmv N={r.num_elements:4d} K={r.num_users}: {r.time_per_sample * 1e6:9.1f} us/sample")
    for r in dnn_records:
        print(f"dnn  B={r.batch_size:4d}: {r.time_per_sample * 1e6:9.1f} us/sample")
    if len(args.grid_n) >= 2:
        print(f"lcmv log-log slope vs N: {loglog_slope(lcmv_records):.3f}")
    biggest = max(lcmv_records, key=lambda r: r.num_elements)
    fastest_dnn = min(dnn_records, key=lambda r: r.time_per_sample)
    print(
        f"crossover at N={biggest.num_elements}: dnn "
        f"{fastest_dnn.time_per_sample * 1e6:.1f} us vs lcmv "
        f"{biggest.time_per_sample * 1e6:.1f} us"
    )
    _write_manifest(
        out, "bench", args, {"scenarios": args.seed, "inputs": args.seed},
        ["bench.csv"], started,
    )
    return 0


def _cmd_verify(args) -> int:
    started = _now()
    results = run_checks(full=args.full)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out is not None:
        out = _out_dir(args)
        (out / "verify.json").write_text(json.dumps({
            "results": [
                {"name": name, "passed": ok, "detail": detail} for name, ok, detail in results
            ],
        }, indent=2) + "\n")
        _write_manifest(out, "verify", args, {}, ["verify.json"], started)
    return 0 if not failed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncbf",
        description="Near-field nulling beam focusing: data, training, evaluation, timing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_array_flags(p):
        p.add_argument("--elements", type=int, default=24, help="array elements (default 24)")
        p.add_argument("--spacing", type=float, default=0.04, help="element spacing in m (default 0.04)")
        p.add_argument("--carrier", type=float, default=3.5e9, help="carrier frequency in Hz (default 3.5e9)")

    def add_train_flags(p, epochs_default):
        p.add_argument("--data", required=True, help="dataset directory")
        p.add_argument("--loss", required=True, choices=("phase", "magnitude"))
        p.add_argument("--batch", type=int, default=1024)
        p.add_argument("--lr", type=float, default=None,
                       help="initial learning rate (default 0.01 phase / 0.001 magnitude)")
        p.add_argument("--decay", type=float, default=0.99, help="per-epoch LR decay (default 0.99)")
        p.add_argument("--epochs", type=int, default=epochs_default)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen-data", help="generate and save a labeled dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=3)
    p.add_argument("--canonical-order", action="store_true",
                   help="sort interferers by angle before encoding")
    add_array_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train one estimator on a dataset")
    add_train_flags(p, epochs_default=300)
    p.add_argument("--arch", default=DEFAULT_ARCH, help=f"layer sizes (default {DEFAULT_ARCH})")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("tune", help="rank candidate architectures by mean test loss")
    add_train_flags(p, epochs_default=150)
    p.add_argument("--candidates", type=_arch_list, required=True,
                   help="semicolon-separated architectures, e.g. '6,64,24;6,128,128,24'")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("eval", help="score predicted weights against closed-form LCMV")
    p.add_argument("--phase-model", required=True)
    p.add_argument("--mag-model", required=True)
    p.add_argument("--scenarios", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spacing", type=float, default=0.04)
    p.add_argument("--carrier", type=float, default=3.5e9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pattern", help="export a beam-pattern CSV cut")
    p.add_argument("--weights-from", choices=("lcmv", "model"), default="lcmv")
    p.add_argument("--desired", type=_position, required=True, help="theta_deg,range_m")
    p.add_argument("--interferers", type=_positions, default=[],
                   help="flat theta_deg,range_m pairs")
    p.add_argument("--phase-model")
    p.add_argument("--mag-model")
    p.add_argument("--grid", default=None,
                   help="theta_start,theta_stop,theta_step,range_start,range_stop,range_step "
                        "(deg and m; default: -90..90 by 0.1 deg cut at each user range)")
    add_array_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pattern)

    p = sub.add_parser("bench", help="time closed-form solves vs network inference")
    p.add_argument("--grid-n", type=_ints, default=[24, 64, 128, 256])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--batches", type=_ints, default=[1, 64, 1024])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arch", default=DEFAULT_ARCH)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="run the built-in invariant suite")
    p.add_argument("--full", action="store_true",
                   help="also run the desk-scale training/evaluation/timing studies (minutes)")
    p.add_argument("--out", default=None, help="optional directory for verify.json")
    p.set_defaults(func=_cmd_verify)

    return parser


# Flags whose values may start with a minus sign (negative angles); their
# value token is folded into --flag=value form so argparse does not mistake
# it for an option.
_VALUE_FLAGS = ("--desired", "--interferers", "--grid")


def _fold_negative_values(argv):
    if argv is None:
        argv = sys.argv[1:]
    folded = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            folded.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            folded.append(tok)
            i += 1
    return folded


def run(argv=None) -> int:
    """Parse argv and execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(_fold_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
