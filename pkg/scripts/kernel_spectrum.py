"""Empirical-kernel spectra for the scalar probe nets, plus the
gradient-descent trajectory the kernel prediction is graded against.

Emits, per architecture: the eigenvalue spectrum CSV and a trajectory CSV
comparing the observed full-batch GD error norm with the kernel-predicted
one at each step. Small nets, runs in seconds.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from mhdpinn.diagnostics import (
    empirical_ntk,
    ntk_error_prediction,
    write_ntk_csv,
)
from mhdpinn.network import (
    forward,
    init_params,
    multimodes_network,
    pinn_network,
)
from mhdpinn.jets import jet_space
from mhdpinn.tape import Tape
from mhdpinn import tape as tp

N_POINTS = 16
WIDTH = 1024
STEPS = 500
LR = 2e-4


def _net(kind: str):
    if kind == "mhdnet":
        return multimodes_network(1, 1, subnets=4, modes=32, width=WIDTH // 4,
                                  hidden_layers=1, seed=0)
    return pinn_network(1, 1, width=WIDTH, hidden_layers=1)


def gd_trajectory(net, x, y, steps: int, lr: float):
    """Observed error rows (steps+1, N) under full-batch gradient descent."""
    space = jet_space(("x1",), 0)
    params = init_params(net, seed=0)
    vals = params.values.copy()
    rows = np.empty((steps + 1, len(y)))
    for k in range(steps + 1):
        live = params.with_values(vals)
        tape = Tape()
        out = forward(net, live, space, x, tape=tape)
        val = tp.extract(out, 0, 0, 1.0)
        rows[k] = val.data - y
        loss = tp.scale(tp.sum_all(tp.square(val - tp.constant(y))), 0.5)
        vals = vals - lr * tape.gradient(loss, len(params))
    return rows


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/kernel")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x = np.linspace(0.0, 1.0, N_POINTS, endpoint=False)[:, None]
    y = np.sin(2.0 * np.pi * x[:, 0])
    for kind in ("pinn_baseline", "mhdnet"):
        net = _net(kind)
        report = empirical_ntk(net, x, params=init_params(net, seed=0))
        write_ntk_csv(report, out / f"spectrum_{kind}.csv")
        observed = gd_trajectory(net, x, y, STEPS, LR)
        with open(out / f"trajectory_{kind}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "observed_norm", "predicted_norm"])
            for k in range(STEPS + 1):
                pred = ntk_error_prediction(report, observed[0], LR * k)
                w.writerow([k, f"{np.linalg.norm(observed[k]):.17g}",
                            f"{np.linalg.norm(pred):.17g}"])
        print(f"{kind}: top eigenvalue {report.eigenvalues[0]:.3g}, "
              f"wrote {out}/spectrum_{kind}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(run())
