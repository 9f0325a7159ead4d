"""Command-line runner: train, benchmark, sweep, diagnose, evaluate.

Every training command materializes a timestamped run directory holding
the canonical config snapshot, the epoch log, the metrics table, the
prediction grid, a parameter checkpoint, and a plain-text summary. The
summary and snapshot are written even when the run aborts, and module
errors surface as a nonzero exit status with the message in the summary.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .benchmarks import (
    CASE_IDS,
    REYNOLDS_SWEEP,
    SAMPLING_VARIANTS,
    BenchmarkCase,
    build_network,
    build_problem,
    evaluation_grid,
    exact_solution,
    metrics_report,
    predict_fields,
    write_grid_csv,
    write_metrics_csv,
)
from .config import (
    ConfigError,
    RunConfig,
    build_case,
    config_snapshot,
    parse_config,
)
from .diagnostics import (
    empirical_ntk,
    gradient_histograms,
    write_histograms_csv,
    write_ntk_csv,
)
from .network import MultiscaleNetwork, init_params, multimodes_network, pinn_network
from .training import train

OUTPUT_ROOT_ENV = "MHDPINN_RUNS"

SNAPSHOT_FILE = "config.snapshot"
LOG_FILE = "log.csv"
METRICS_FILE = "metrics.csv"
GRID_FILE = "grid.csv"
SUMMARY_FILE = "summary"
CHECKPOINT_FILE = "checkpoint.npz"
DIAGNOSTICS_DIR = "diagnostics"

SWEEP_AXES = ("reynolds", "sampling", "boundary_mask")

# 1D probe grid for the scalar-net kernel diagnostic
NTK_PROBE_POINTS = 16


def output_root(explicit: str | None = None) -> Path:
    """Run-directory root: flag beats config beats environment beats ./runs."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def make_run_dir(root: Path, tag: str) -> Path:
    """Timestamped unique directory <root>/<stamp>-<tag>[-n]."""
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = root / f"{stamp}-{tag}"
    path, n = base, 1
    while path.exists():
        path = Path(f"{base}-{n}")
        n += 1
    path.mkdir(parents=True)
    return path


def save_checkpoint(path, cfg: RunConfig, values: np.ndarray,
                    epoch: int) -> None:
    """Parameter vector + config snapshot + epoch tag, one npz file."""
    np.savez(path, values=np.asarray(values, dtype=np.float64),
             epoch=np.int64(epoch), config=np.str_(config_snapshot(cfg)))


def load_checkpoint(path) -> tuple[RunConfig, np.ndarray, int]:
    with np.load(path) as data:
        try:
            values = np.asarray(data["values"], dtype=np.float64)
            epoch = int(data["epoch"])
            cfg = parse_config(str(data["config"]))
        except KeyError as exc:
            raise ConfigError(
                f"checkpoint {path} is missing entry {exc}") from None
    return cfg, values, epoch


def _rebuild(cfg: RunConfig) -> tuple[BenchmarkCase, MultiscaleNetwork]:
    case = build_case(cfg)
    net = build_network(case, cfg.formulation, cfg.architecture,
                        seed=cfg.seed_init)
    return case, net


def write_summary(run_dir: Path, lines: dict) -> None:
    text = "\n".join(f"{k} = {v}" for k, v in lines.items()) + "\n"
    (run_dir / SUMMARY_FILE).write_text(text)


def _metrics_lines(report) -> dict:
    out = {}
    for name in sorted(report.errors):
        suffix = "_absnorm" if name in report.absolute_norm else ""
        out[f"eps_{name}{suffix}"] = f"{report.errors[name]:.17g}"
    return out


def execute_run(cfg: RunConfig, run_dir: Path,
                resolution: int | None = None) -> int:
    """Full pipeline for one config inside an existing run directory.

    Always leaves config.snapshot and summary behind; returns a
    process exit status (0 = trained and evaluated without divergence).
    """
    (run_dir / SNAPSHOT_FILE).write_text(config_snapshot(cfg))
    (run_dir / DIAGNOSTICS_DIR).mkdir(exist_ok=True)
    t0 = time.perf_counter()
    try:
        case, net = _rebuild(cfg)
        params = init_params(net, seed=cfg.seed_init)
        problem = build_problem(case, cfg.formulation, seed=cfg.seed_sampling)
        params, log = train(net, params, problem, cfg.loss_weights,
                            cfg.schedule, seed=cfg.seed_init,
                            log_path=run_dir / LOG_FILE)
        grid = evaluation_grid(case, resolution=resolution)
        predicted = predict_fields(net, params, cfg.formulation, case,
                                   grid.points)
        sol = exact_solution(case, grid.points)
        exact = {n: sol[n] for n in predicted}
        report = metrics_report(case, grid, predicted, exact)
        write_metrics_csv(report, run_dir / METRICS_FILE)
        write_grid_csv(case, grid, predicted, exact, run_dir / GRID_FILE)
        epoch = log.records[-1].epoch if log.records else 0
        save_checkpoint(run_dir / CHECKPOINT_FILE, cfg, params.values, epoch)
        summary = {
            "status": "aborted" if log.aborted else "ok",
            "benchmark": cfg.benchmark,
            "formulation": cfg.formulation,
            "architecture": cfg.architecture,
            "epochs": epoch,
            "final_total": f"{log.final_total:.17g}" if log.records else "",
            "grid": grid.description,
            "seconds": f"{time.perf_counter() - t0:.3f}",
        }
        summary.update(_metrics_lines(report))
        write_summary(run_dir, summary)
        return 1 if log.aborted else 0
    except Exception as exc:
        write_summary(run_dir, {
            "status": "error",
            "benchmark": cfg.benchmark,
            "formulation": cfg.formulation,
            "error": f"{type(exc).__name__}: {exc}",
            "seconds": f"{time.perf_counter() - t0:.3f}",
        })
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _print_summary(run_dir: Path) -> None:
    print(f"run directory: {run_dir}")
    print((run_dir / SUMMARY_FILE).read_text(), end="")


# ---------------------------------------------------------------------------
# commands


def _load_config(args) -> RunConfig:
    text = Path(args.config).read_text() if args.config else ""
    return parse_config(text, overrides=tuple(args.set))


def command_train(args) -> int:
    cfg = _load_config(args)
    root = output_root(args.output_root or cfg.output_dir or None)
    run_dir = make_run_dir(root, f"train-{cfg.benchmark}-{cfg.formulation}")
    status = execute_run(cfg, run_dir, resolution=args.resolution)
    _print_summary(run_dir)
    return status


def command_benchmark(args) -> int:
    overrides = [f"run.benchmark={args.case}"]
    if args.formulation:
        overrides.append(f"run.formulation={args.formulation}")
    if args.architecture:
        overrides.append(f"run.architecture={args.architecture}")
    if args.mask:
        overrides.append(f"supervision.mask={args.mask}")
    if args.desk:
        overrides += ["schedule.n_adam=5000", "schedule.n_lbfgs_max=2000"]
    cfg = parse_config("", overrides=tuple(overrides) + tuple(args.set))
    root = output_root(args.output_root or cfg.output_dir or None)
    run_dir = make_run_dir(
        root, f"benchmark-{cfg.benchmark}-{cfg.formulation}")
    status = execute_run(cfg, run_dir, resolution=args.resolution)
    _print_summary(run_dir)
    return status


def _sweep_points(axis: str, values: list[str]) -> list[tuple[str, list[str]]]:
    """(label, extra overrides) per sweep value; defaults cover the axis."""
    if axis == "reynolds":
        vals = values or [f"{v:g}" for v in REYNOLDS_SWEEP]
        return [(f"re{v}", [f"physics.reynolds={v}"]) for v in vals]
    if axis == "sampling":
        vals = values or [f"{i}x{b}" for i, b in SAMPLING_VARIANTS]
        out = []
        for v in vals:
            interior, sep, boundary = v.partition("x")
            if not sep:
                raise ConfigError(
                    f"sampling value {v!r} must look like 2500x400")
            out.append((f"s{v}", [f"sampling.interior={interior}",
                                  f"sampling.boundary={boundary}"]))
        return out
    from .geometry import PRESETS
    vals = values or list(PRESETS)
    return [(v, [f"supervision.mask={v}"]) for v in vals]


def command_sweep(args) -> int:
    points = _sweep_points(args.axis, args.values)
    base_over = []
    if args.desk:
        base_over += ["schedule.n_adam=5000", "schedule.n_lbfgs_max=2000"]
    base_text = Path(args.config).read_text() if args.config else ""
    # validate the base config before creating any directories
    parse_config(base_text, overrides=tuple(base_over) + tuple(args.set))
    root = output_root(args.output_root)
    sweep_dir = make_run_dir(root, f"sweep-{args.axis}")
    worst = 0
    rows = []
    for label, extra in points:
        cfg = parse_config(base_text, overrides=tuple(
            base_over + extra + list(args.set)))
        run_dir = sweep_dir / label
        run_dir.mkdir()
        status = execute_run(cfg, run_dir, resolution=args.resolution)
        worst = max(worst, status)
        rows.append((label, status, run_dir))
    print(f"sweep directory: {sweep_dir}")
    for label, status, run_dir in rows:
        state = "ok" if status == 0 else "FAILED"
        print(f"  {label:<16} {state}  {run_dir / SUMMARY_FILE}")
    return worst


def command_diagnose(args) -> int:
    cfg, values, epoch = load_checkpoint(args.checkpoint)
    out = Path(args.out) if args.out \
        else Path(args.checkpoint).parent / DIAGNOSTICS_DIR
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "gradients":
        case, net = _rebuild(cfg)
        params = init_params(net, seed=cfg.seed_init).with_values(values)
        problem = build_problem(case, cfg.formulation, seed=cfg.seed_sampling)
        hists = gradient_histograms(net, params, problem, cfg.loss_weights,
                                    epoch=epoch)
        write_histograms_csv(hists, out / "gradients.csv")
        print(f"wrote {out / 'gradients.csv'}")
        return 0
    # the kernel diagnostic stays at scalar-net scale: probe a single-output
    # net from the same embedding family on a 1D grid
    if cfg.architecture == "mhdnet":
        net = multimodes_network(
            1, 1, subnets=cfg.subnets, modes=cfg.modes, scale=cfg.scale,
            width=cfg.width, hidden_layers=cfg.hidden_layers,
            stddev_step=cfg.stddev_step, seed=cfg.seed_init)
    else:
        net = pinn_network(1, 1, width=cfg.baseline_width,
                           hidden_layers=cfg.hidden_layers)
    pts = np.linspace(0.0, 1.0, NTK_PROBE_POINTS, endpoint=False)[:, None]
    report = empirical_ntk(net, pts, seed=cfg.seed_init)
    write_ntk_csv(report, out / "ntk.csv")
    print(f"wrote {out / 'ntk.csv'}"
          + ("" if report.converged else " (eigensolver hit sweep budget)"))
    return 0


def command_evaluate(args) -> int:
    cfg, values, epoch = load_checkpoint(args.checkpoint)
    root = output_root(args.output_root or cfg.output_dir or None)
    run_dir = make_run_dir(
        root, f"evaluate-{cfg.benchmark}-{cfg.formulation}")
    (run_dir / SNAPSHOT_FILE).write_text(config_snapshot(cfg))
    t0 = time.perf_counter()
    try:
        case, net = _rebuild(cfg)
        params = init_params(net, seed=cfg.seed_init).with_values(values)
        grid = evaluation_grid(case, resolution=args.resolution)
        predicted = predict_fields(net, params, cfg.formulation, case,
                                   grid.points)
        sol = exact_solution(case, grid.points)
        exact = {n: sol[n] for n in predicted}
        report = metrics_report(case, grid, predicted, exact)
        write_metrics_csv(report, run_dir / METRICS_FILE)
        write_grid_csv(case, grid, predicted, exact, run_dir / GRID_FILE)
        summary = {
            "status": "ok",
            "benchmark": cfg.benchmark,
            "formulation": cfg.formulation,
            "architecture": cfg.architecture,
            "epochs": epoch,
            "checkpoint": str(args.checkpoint),
            "grid": grid.description,
            "seconds": f"{time.perf_counter() - t0:.3f}",
        }
        summary.update(_metrics_lines(report))
        write_summary(run_dir, summary)
        _print_summary(run_dir)
        return 0
    except Exception as exc:
        write_summary(run_dir, {
            "status": "error",
            "checkpoint": str(args.checkpoint),
            "error": f"{type(exc).__name__}: {exc}",
        })
        print(f"error: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key by dot path, e.g. "
                        "schedule.n_adam=100")
    p.add_argument("--output-root", default=None,
                   help=f"run-directory root (default ${OUTPUT_ROOT_ENV} "
                        "or ./runs)")
    p.add_argument("--resolution", type=int, default=None,
                   help="evaluation grid points per axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mhdpinn",
        description="Train and evaluate physics-preserving MHD solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one config file")
    p.add_argument("--config", default=None, help="INI config path")
    _add_common(p)
    p.set_defaults(func=command_train)

    p = sub.add_parser("benchmark", help="run a published benchmark case")
    p.add_argument("case", choices=CASE_IDS)
    p.add_argument("--formulation", choices=("b", "a1", "a2"), default=None)
    p.add_argument("--architecture", choices=("mhdnet", "pinn_baseline"),
                   default=None)
    p.add_argument("--mask", default=None, help="boundary supervision preset")
    p.add_argument("--desk", action="store_true",
                   help="desk-scale schedule (5000 Adam + 2000 L-BFGS)")
    _add_common(p)
    p.set_defaults(func=command_benchmark)

    p = sub.add_parser("sweep", help="run one config per value of an axis")
    p.add_argument("axis", choices=SWEEP_AXES)
    p.add_argument("--values", nargs="*", default=[],
                   help="axis values (default: the published sweep)")
    p.add_argument("--config", default=None, help="base INI config path")
    p.add_argument("--desk", action="store_true",
                   help="desk-scale schedule (5000 Adam + 2000 L-BFGS)")
    _add_common(p)
    p.set_defaults(func=command_sweep)

    p = sub.add_parser("diagnose",
                       help="emit diagnostics CSVs for a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--kind", choices=("gradients", "ntk"), required=True)
    p.add_argument("--out", default=None,
                   help="output directory (default: <run>/diagnostics)")
    p.set_defaults(func=command_diagnose)

    p = sub.add_parser("evaluate",
                       help="grade a checkpoint without training")
    p.add_argument("checkpoint")
    p.add_argument("--output-root", default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.set_defaults(func=command_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
