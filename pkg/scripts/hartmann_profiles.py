"""Hartmann channel runs over the published (Re, Rm, s) parameter sets."""

import argparse
import sys

from mhdpinn.benchmarks import HARTMANN_SETS
from mhdpinn.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--desk", action="store_true")
    ap.add_argument("--output-root", default=None)
    ap.add_argument("--formulation", default="b")
    args = ap.parse_args(argv)
    worst = 0
    for re, rm, s in HARTMANN_SETS:
        cmd = ["benchmark", "hartmann", "--formulation", args.formulation,
               "--set", f"physics.reynolds={re}",
               "--set", f"physics.magnetic_reynolds={rm}",
               "--set", f"physics.coupling={s}"]
        if args.desk:
            cmd.append("--desk")
        if args.output_root:
            cmd += ["--output-root", args.output_root]
        print(f"== hartmann Re={re:g} Rm={rm:g} s={s:g} "
              f"(Ha={(s * re * rm) ** 0.5:g})")
        worst = max(worst, main(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())
