"""Reynolds, sampling-budget, and boundary-robustness sweeps in one place."""

import argparse
import sys

from mhdpinn.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("axes", nargs="*",
                    default=["reynolds", "sampling", "boundary_mask"],
                    choices=["reynolds", "sampling", "boundary_mask"])
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--output-root", default=None)
    args = ap.parse_args(argv)
    worst = 0
    for axis in args.axes:
        cmd = ["sweep", axis]
        if args.desk:
            cmd.append("--desk")
        if args.output_root:
            cmd += ["--output-root", args.output_root]
        print(f"== sweep {axis}")
        worst = max(worst, main(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())
