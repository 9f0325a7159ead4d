"""Fixture run directories built from synthetic CSV files.

No import of the package under test here: collection must succeed even
where mhdfigures is not installed.
"""

import csv

import numpy as np
import pytest

COMPONENTS = ("b1", "b2", "p", "u1", "u2")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fields(x, y):
    return {
        "u1": 1.0 - y ** 2,
        "u2": 0.1 * np.sin(np.pi * x),
        "p": -0.1 * x,
        "b1": y ** 3 - y,
        "b2": np.ones_like(x),
    }


def grid_rows(xs, ys, t=None, wobble=1e-3):
    mesh_x, mesh_y = np.meshgrid(xs, ys, indexing="ij")
    x, y = mesh_x.ravel(), mesh_y.ravel()
    exact = _fields(x, y)
    header = ["x", "y"] + (["t"] if t is not None else [])
    cols = [x, y] + ([np.full_like(x, t)] if t is not None else [])
    for name in COMPONENTS:
        e = exact[name]
        p = e + wobble * np.cos(3 * x + 2 * y)
        header += [f"{name}_pred", f"{name}_exact", f"{name}_abserr"]
        cols += [p, e, np.abs(p - e)]
    return header, np.column_stack(cols).tolist()


def log_rows(n_adam=40, n_lbfgs=20):
    rows = []
    for k in range(1, n_adam + 1):
        total = 50.0 * np.exp(-0.08 * k) + 0.5 * np.cos(1.7 * k) ** 2
        rows.append([k, "adam", total, 0.7 * total, 0.0, 0.3 * total, 0.0,
                     0.1 * k])
    base = rows[-1][2]
    for k in range(1, n_lbfgs + 1):
        total = base * np.exp(-0.3 * k)
        rows.append([n_adam + k, "lbfgs", total, 0.7 * total, 0.0,
                     0.3 * total, 0.0, 0.1 * (n_adam + k)])
    return rows


def metrics_rows(scale=1.0):
    rows = []
    for i, name in enumerate(COMPONENTS):
        rows.append([name, "", scale * (1.0 + i) * 1e-3, 0,
                     int(name == "p")])
    return rows


def gradient_rows(epoch=40):
    rng = np.random.default_rng(3)
    rows = []
    for term in ("equation", "boundary"):
        for i in range(3):
            sample = rng.normal(0.0, 10.0 ** -i, 400)
            counts, edges = np.histogram(sample, bins=8)
            for j, c in enumerate(counts):
                rows.append([term, f"net.layer{i}", epoch, edges[j],
                             edges[j + 1], int(c)])
    return rows


LOG_HEADER = ["epoch", "phase", "total", "L_f", "L_g", "L_h", "L_data",
              "seconds"]
METRICS_HEADER = ["component", "time", "error", "absolute", "aligned"]
GRADIENTS_HEADER = ["term", "layer", "epoch", "bin_lo", "bin_hi", "count"]


@pytest.fixture
def run_dir(tmp_path):
    rd = tmp_path / "20260101-000000-train-demo"
    (rd / "diagnostics").mkdir(parents=True)
    xs = np.linspace(0.0, 4.0, 21)
    ys = np.linspace(-1.0, 1.0, 11)
    header, rows = grid_rows(xs, ys)
    write_csv(rd / "grid.csv", header, rows)
    write_csv(rd / "log.csv", LOG_HEADER, log_rows())
    write_csv(rd / "metrics.csv", METRICS_HEADER, metrics_rows())
    write_csv(rd / "diagnostics" / "gradients.csv", GRADIENTS_HEADER,
              gradient_rows())
    (rd / "summary").write_text("status = ok\n")
    (rd / "config.snapshot").write_text("[run]\nbenchmark = steady2d\n")
    return rd


@pytest.fixture
def unsteady_run_dir(tmp_path):
    rd = tmp_path / "20260101-000001-train-unsteady"
    rd.mkdir()
    xs = np.linspace(0.0, 1.0, 9)
    ys = np.linspace(0.0, 1.0, 9)
    header, rows = grid_rows(xs, ys, t=0.25)
    _, more = grid_rows(xs, ys, t=0.75, wobble=5e-3)
    write_csv(rd / "grid.csv", header, rows + more)
    write_csv(rd / "log.csv", LOG_HEADER, log_rows(10, 5))
    return rd


@pytest.fixture
def sweep_dir(tmp_path):
    sd = tmp_path / "20260101-000002-sweep-boundary_mask"
    for i, preset in enumerate(("standard", "inlet", "noisy")):
        sub = sd / preset
        sub.mkdir(parents=True)
        write_csv(sub / "metrics.csv", METRICS_HEADER,
                  metrics_rows(scale=1.0 + 3.0 * i))
    return sd
