"""Command line: render <run_dir> <kind> [options] writes one image."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib.pyplot as plt

from . import figures as fig
from .tables import SchemaError, load_table

KINDS = ("loss", "contours", "streamlines", "gradients", "hartmann",
         "robustness")


@dataclass(frozen=True)
class FigureJob:
    run_dir: Path
    kind: str
    out: Path
    cmap: str = "viridis"
    field: str = "abserr"
    components: tuple[str, ...] = ()
    component: str = "u1"
    vector: str = "velocity"
    slices: tuple[tuple[str, float], ...] = ()
    along: str = "y"
    at: float = 2.0
    epoch: int = -1
    dpi: int = 150


def render(job: FigureJob) -> Path:
    """Build the figure for one job and write it to job.out.

    Output inside the run directory is refused: run directories are
    read-only inputs here.
    """
    run_dir = Path(job.run_dir)
    if not run_dir.is_dir():
        raise SchemaError(f"{run_dir}: not a directory")
    if job.kind not in KINDS:
        raise SchemaError(f"unknown figure kind '{job.kind}'; have "
                          + ", ".join(KINDS))
    out = Path(job.out).resolve()
    if out.is_relative_to(run_dir.resolve()):
        raise SchemaError(f"refusing to write inside the run directory: "
                          f"{job.out}")
    slices = dict(job.slices)
    if job.kind == "loss":
        figure = fig.fig_loss(load_table(run_dir / "log.csv"))
    elif job.kind == "contours":
        figure = fig.fig_contours(load_table(run_dir / "grid.csv"),
                                  slices=slices, field=job.field,
                                  cmap=job.cmap, components=job.components)
    elif job.kind == "streamlines":
        figure = fig.fig_streamlines(load_table(run_dir / "grid.csv"),
                                     slices=slices, vector=job.vector,
                                     cmap=job.cmap)
    elif job.kind == "gradients":
        path = run_dir / "diagnostics" / "gradients.csv"
        figure = fig.fig_gradients(load_table(path), epoch=job.epoch)
    elif job.kind == "hartmann":
        figure = fig.fig_profile(load_table(run_dir / "grid.csv"),
                                 component=job.component, along=job.along,
                                 at=job.at, slices=slices)
    else:
        figure = fig.fig_robustness(run_dir, component=job.component)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        figure.savefig(out, dpi=job.dpi)
    finally:
        plt.close(figure)
    return out


def parse_slices(spec: str) -> tuple[tuple[str, float], ...]:
    """'t=0.5,z=0' into ((axis, value), ...) pairs."""
    pairs = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        axis, eq, value = chunk.partition("=")
        try:
            if not eq:
                raise ValueError
            pairs.append((axis.strip(), float(value)))
        except ValueError:
            raise SchemaError(f"slice '{chunk}' must look like t=0.5")\
                from None
    return tuple(pairs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render one figure from a run directory's CSV files.")
    parser.add_argument("run_dir", type=Path,
                        help="run directory (for robustness: a sweep "
                             "directory of run subdirectories)")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--out", type=Path, default=None,
                        help="output image path (default <kind>.png)")
    parser.add_argument("--cmap", default="viridis")
    parser.add_argument("--field", choices=("pred", "exact", "abserr"),
                        default="abserr", help="column family for contours")
    parser.add_argument("--components", default="",
                        help="comma list of components for contours")
    parser.add_argument("--component", default="u1",
                        help="component for hartmann and robustness")
    parser.add_argument("--vector", choices=("velocity", "magnetic"),
                        default="velocity")
    parser.add_argument("--slice", dest="slice_spec", default="",
                        help="fix extra axes, e.g. 't=0.5' or 'z=0,t=0.25'")
    parser.add_argument("--along", choices=("x", "y"), default="y",
                        help="profile axis for hartmann")
    parser.add_argument("--at", type=float, default=2.0,
                        help="cut position on the other axis for hartmann")
    parser.add_argument("--epoch", type=int, default=-1,
                        help="histogram epoch (default: latest)")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    components = tuple(c.strip() for c in args.components.split(",")
                       if c.strip())
    try:
        job = FigureJob(run_dir=args.run_dir, kind=args.kind,
                        out=args.out or Path(f"{args.kind}.png"),
                        cmap=args.cmap, field=args.field,
                        components=components, component=args.component,
                        vector=args.vector,
                        slices=parse_slices(args.slice_spec),
                        along=args.along, at=args.at, epoch=args.epoch,
                        dpi=args.dpi)
        out = render(job)
    except SchemaError as err:
        print(f"figure error: {err}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
