"""Steady 2D accuracy study: every formulation against both architectures.

Runs the steady Kovasznay-type benchmark for the b / a1 / a2 formulations
with the multiscale net and the wide-baseline net, which is the data
behind the headline accuracy table. Full scale takes tens of minutes per
combination; pass --desk for the 5000+2000 epoch profile.
"""

import argparse
import sys

from mhdpinn.cli import main

FORMULATIONS = ("b", "a1", "a2")
ARCHITECTURES = ("mhdnet", "pinn_baseline")


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--output-root", default=None)
    ap.add_argument("--formulations", nargs="*", default=FORMULATIONS)
    ap.add_argument("--architectures", nargs="*", default=ARCHITECTURES)
    args = ap.parse_args(argv)
    worst = 0
    for arch in args.architectures:
        for form in args.formulations:
            cmd = ["benchmark", "steady2d", "--formulation", form,
                   "--architecture", arch]
            if args.desk:
                cmd.append("--desk")
            if args.output_root:
                cmd += ["--output-root", args.output_root]
            print(f"== steady2d {form} {arch}")
            worst = max(worst, main(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())
