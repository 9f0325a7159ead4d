"""Unsteady runs: the 2D hidden-pressure study and the 3D Beltrami case.

The 2D case trains the primitive formulation with no pressure data and
reports the temporal-mean pressure error; the 3D case exercises the
potential formulations at 3D scale. The 3D runs are expensive, so they
sit behind --with-3d.
"""

import argparse
import sys

from mhdpinn.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--output-root", default=None)
    ap.add_argument("--with-3d", action="store_true")
    args = ap.parse_args(argv)
    jobs = [("unsteady2d", "b")]
    if args.with_3d:
        jobs += [("unsteady3d", "a1"), ("unsteady3d", "a2")]
    worst = 0
    for case, form in jobs:
        cmd = ["benchmark", case, "--formulation", form]
        if args.desk:
            cmd.append("--desk")
        if args.output_root:
            cmd += ["--output-root", args.output_root]
        print(f"== {case} {form}")
        worst = max(worst, main(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())
