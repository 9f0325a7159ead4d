"""Exact-solution benchmark catalogue, evaluation grids, and error metrics.

Each case bundles a domain, physical parameters, and one closure producing
every field the three formulations can ask for: velocity, magnetic field,
pressure, and both potentials, all written against the jet primitives so the
same formulas evaluate as plain arrays or as jets of any order. Potentials
are analytic antiderivatives of the published fields, fixed once here and
verified by curl identities in the test suite.

The Hartmann case maps its coupling number s onto the residual coefficients
as permeability = 1/s and conductivity = Rm*s, which reproduces the
published profiles with zero interior sources in the B formulation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import jets as jm
from .geometry import (
    Domain,
    NoiseSpec,
    apply_noise,
    boundary_mask_preset,
    latin_hypercube,
    sample_boundary,
    sample_initial,
)
from .jets import jet_space
from .network import (
    MultiscaleNetwork,
    init_params,
    multimodes_network,
    pinn_network,
)
from .operators import (
    PhysParams,
    formulation_space,
    head_names,
    manufactured_sources,
    reader_from_network,
)
from .tape import ParameterVector
from .training import (
    ConditionBatch,
    LossWeights,
    Problem,
    RunLog,
    Schedule,
    train,
)

__all__ = [
    "ARCHITECTURES",
    "CASE_IDS",
    "HARTMANN_SETS",
    "REYNOLDS_SWEEP",
    "SAMPLING_VARIANTS",
    "BenchmarkCase",
    "BenchmarkResult",
    "EvalGrid",
    "MetricsReport",
    "NetworkDefaults",
    "benchmark_case",
    "build_network",
    "build_problem",
    "evaluation_grid",
    "exact_solution",
    "hartmann_case",
    "metrics_report",
    "metrics_to_rows",
    "predict_fields",
    "relative_l2",
    "run_benchmark",
    "sampling_variant",
    "steady2d_case",
    "write_grid_csv",
    "write_metrics_csv",
]

CASE_IDS = ("steady2d", "unsteady2d", "hartmann", "unsteady3d")

ARCHITECTURES = ("mhdnet", "pinn_baseline")

# (Re, Rm, s) parameter sets for the Hartmann family
HARTMANN_SETS = ((1.0, 1.0, 1.0), (20.0, 20.0, 4.0), (40.0, 40.0, 2.0),
                 (50.0, 50.0, 2.0))

# steady2d Reynolds numbers for the accuracy-vs-Re study
REYNOLDS_SWEEP = (1.0, 10.0, 20.0, 30.0, 40.0)

# (interior, total boundary) point budgets for the sampling ablation
SAMPLING_VARIANTS = ((2500, 400), (2500, 1000), (5000, 400), (5000, 1000))

DEFAULT_TIME_SLICES = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class NetworkDefaults:
    """Architecture and weighting defaults a case was published with."""

    subnets: int = 4
    width: int = 50
    hidden_layers: int = 4
    modes: int = 32
    scale: float = 1.0
    stddev_step: float = 0.1
    baseline_width: int = 200
    adam_lr: float = 1e-3
    constraint_weight: float = 100.0


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    domain: Domain
    phys: PhysParams
    closure: Callable
    n_interior: int
    n_per_face: int
    n_initial: int
    defaults: NetworkDefaults
    # Hartmann tangential boundary data (b1, b2); None elsewhere
    ambient_magnetic: tuple[float, float] | None = None
    mask: str = "standard"
    noise: NoiseSpec | None = None
    notes: str = ""

    def with_supervision(self, mask: str, noise: NoiseSpec | None = None):
        return replace(self, mask=mask, noise=noise)


# ---------------------------------------------------------------------------
# exact closures

_RE_STEADY = 40.0
_TWO_PI = 2.0 * math.pi


def _steady_eta(re: float) -> float:
    return re / 2.0 - math.sqrt(re * re / 4.0 + 4.0 * math.pi ** 2)


_ETA = _steady_eta(_RE_STEADY)


def _steady2d_closure(re: float):
    eta = _steady_eta(re)

    def fields(c):
        x, y = c["x"], c["y"]
        ex = jm.exp(eta * x)
        return {
            "u1": 1.0 - ex * jm.cos(_TWO_PI * y),
            "u2": (eta / _TWO_PI) * (ex * jm.sin(_TWO_PI * y)),
            "p": 0.5 * (1.0 - jm.exp((2.0 * eta) * x)),
            "b1": jm.sin(y),
            "b2": jm.sin(x),
            "a1": jm.cos(x) - jm.cos(y),
            "a2": y - (ex * jm.sin(_TWO_PI * y)) / _TWO_PI,
        }

    return fields


def _unsteady2d_fields(c):
    x, y, t = c["x"], c["y"], c["t"]
    t2 = t * t
    x2, y2 = x * x, y * y
    x5, y5 = x2 * x2 * x, y2 * y2 * y
    return {
        "u1": y5 + t2,
        "u2": x5 + t2,
        "p": 10.0 * ((2.0 * x - 1.0) * (2.0 * y - 1.0)),
        "b1": jm.sin(8.0 * y) + t2,
        "b2": jm.sin(8.0 * x) + t2,
        "a1": jm.cos(8.0 * x) / 8.0 - jm.cos(8.0 * y) / 8.0 + t2 * (y - x),
        "a2": (y5 * y) / 6.0 - (x5 * x) / 6.0 + t2 * (y - x),
    }


def _hartmann_closure(re: float, rm: float, s: float, g: float, p0: float):
    ha = math.sqrt(s * re * rm)
    cu = g * re / (ha * math.tanh(ha))
    cosh_ha, sinh_ha = math.cosh(ha), math.sinh(ha)

    def fields(c):
        x, y = c["x"], c["y"]
        cosh_y, sinh_y = jm.cosh(ha * y), jm.sinh(ha * y)
        b1 = (g / s) * (sinh_y / sinh_ha - y)
        return {
            "u1": cu * (1.0 - cosh_y / cosh_ha),
            "u2": 0.0,
            "p": (-g) * x - (s / 2.0) * (b1 * b1) + p0,
            "b1": b1,
            "b2": 1.0,
            "a1": (g / s) * (cosh_y / (ha * sinh_ha) - 0.5 * y * y) - x,
            "a2": cu * (y - sinh_y / (ha * cosh_ha)),
        }

    return fields


def _unsteady3d_fields(c):
    # exponential Beltrami flow with a = d = 1: curl u = u, so the velocity
    # is its own vector potential
    x, y, z, t = c["x"], c["y"], c["z"], c["t"]
    decay = jm.exp(-1.0 * t)
    decay2 = decay * decay
    ex, ey, ez = jm.exp(x), jm.exp(y), jm.exp(z)
    u1 = -1.0 * ((ex * jm.sin(y + z) + ez * jm.cos(x + y)) * decay)
    u2 = -1.0 * ((ey * jm.sin(z + x) + ex * jm.cos(y + z)) * decay)
    u3 = -1.0 * ((ez * jm.sin(x + y) + ey * jm.cos(z + x)) * decay)
    p = (-0.5) * ((ex * ex + ey * ey + ez * ez
                   + 2.0 * (jm.sin(x + y) * jm.cos(z + x)) * (ey * ez)
                   + 2.0 * (jm.sin(y + z) * jm.cos(x + y)) * (ez * ex)
                   + 2.0 * (jm.sin(z + x) * jm.cos(y + z)) * (ex * ey)) * decay2)
    return {
        "u1": u1, "u2": u2, "u3": u3, "p": p,
        "b1": jm.sin(z), "b2": jm.sin(x), "b3": jm.sin(t + y),
        "a1_1": jm.cos(t + y), "a1_2": jm.cos(z), "a1_3": jm.cos(x),
        "a2_1": u1, "a2_2": u2, "a2_3": u3,
    }


# ---------------------------------------------------------------------------
# case catalogue


def hartmann_case(re: float = 1.0, rm: float = 1.0, s: float = 1.0,
                  g: float = 0.1, p0: float = 0.0) -> BenchmarkCase:
    return BenchmarkCase(
        id="hartmann",
        domain=Domain(bounds=((0.0, 4.0), (-1.0, 1.0))),
        phys=PhysParams(reynolds=re, magnetic_reynolds=rm,
                        conductivity=rm * s, permeability=1.0 / s,
                        coupling=s, pressure_gradient=g),
        closure=_hartmann_closure(re, rm, s, g, p0),
        n_interior=2500, n_per_face=100, n_initial=0,
        defaults=NetworkDefaults(width=100),
        ambient_magnetic=(0.0, 1.0),
    )


def steady2d_case(re: float = _RE_STEADY) -> BenchmarkCase:
    if re <= 0.0:
        raise ValueError("Reynolds number must be positive")
    return BenchmarkCase(
        id="steady2d",
        domain=Domain(bounds=((-0.5, 1.0), (-0.5, 0.5))),
        phys=PhysParams(reynolds=re, magnetic_reynolds=1.0,
                        conductivity=1.0, permeability=1.0),
        closure=_steady2d_closure(re),
        n_interior=2500, n_per_face=100, n_initial=0,
        defaults=NetworkDefaults(),
        notes="y extent read as [-0.5, 0.5]",
    )


def benchmark_case(case_id: str) -> BenchmarkCase:
    if case_id == "steady2d":
        return steady2d_case()
    if case_id == "unsteady2d":
        return BenchmarkCase(
            id="unsteady2d",
            domain=Domain(bounds=((0.0, 1.0), (0.0, 1.0)), duration=1.0),
            phys=PhysParams(reynolds=1.0, magnetic_reynolds=1.0,
                            conductivity=1.0, permeability=1.0),
            closure=_unsteady2d_fields,
            n_interior=2500, n_per_face=100, n_initial=100,
            defaults=NetworkDefaults(),
        )
    if case_id == "hartmann":
        return hartmann_case()
    if case_id == "unsteady3d":
        return BenchmarkCase(
            id="unsteady3d",
            domain=Domain(bounds=((-1.0, 1.0),) * 3, duration=1.0),
            phys=PhysParams(reynolds=40.0, magnetic_reynolds=1.0,
                            conductivity=1.0, permeability=1.0),
            closure=_unsteady3d_fields,
            n_interior=500, n_per_face=67, n_initial=100,
            defaults=NetworkDefaults(),
        )
    raise ValueError(f"unknown benchmark case {case_id!r}; have {CASE_IDS}")


def exact_solution(case: BenchmarkCase, points: np.ndarray) -> dict:
    """All exact fields (including potentials) at plain points (N, axes)."""
    pts = np.asarray(points, dtype=np.float64)
    axes = case.domain.axes
    if pts.ndim != 2 or pts.shape[1] != len(axes):
        raise ValueError(f"points must be (N, {len(axes)}) for axes {axes}")
    coords = {a: pts[:, i] for i, a in enumerate(axes)}
    n = pts.shape[0]
    out = {}
    for name, val in case.closure(coords).items():
        out[name] = np.broadcast_to(np.asarray(val, dtype=np.float64), (n,)).copy()
    return out


def sampling_variant(case: BenchmarkCase, n_interior: int,
                     n_boundary: int) -> BenchmarkCase:
    """Same case with a different interior/boundary point budget."""
    faces = len(case.domain.face_names)
    per_face, rem = divmod(n_boundary, faces)
    if rem or per_face < 1:
        raise ValueError(
            f"boundary budget {n_boundary} must split evenly over {faces} faces")
    return replace(case, n_interior=n_interior, n_per_face=per_face)


# ---------------------------------------------------------------------------
# problem and network assembly


def _boundary_batches(case: BenchmarkCase, formulation: str,
                      batch) -> tuple[ConditionBatch, ...]:
    """Split one boundary sample into per-condition batches.

    Channel-flow cases (ambient_magnetic set) get no-slip walls, traction
    inflow/outflow with the exact pressure trace, and the ambient tangential
    magnetic condition on the whole boundary. Everything else supervises
    Dirichlet traces on the faces its mask marks; potentials are pinned only
    where both velocity and magnetic traces are available.
    """

    def sub(sel: np.ndarray, kind: str) -> ConditionBatch:
        return ConditionBatch(
            points=batch.points[sel], kind=kind,
            targets={n: v[sel] for n, v in batch.targets.items()},
            normals=batch.normals[sel])

    out: list[ConditionBatch] = []
    if case.ambient_magnetic is not None:
        walls = np.isin(batch.faces, ("y_lo", "y_hi"))
        out.append(sub(walls, "velocity_dirichlet"))
        out.append(sub(~walls, "traction"))
        amb1, amb2 = case.ambient_magnetic
        n = len(batch)
        out.append(ConditionBatch(
            points=batch.points, kind="magnetic_tangential",
            targets={"b1": np.full(n, amb1), "b2": np.full(n, amb2)},
            normals=batch.normals))
        if formulation != "b":
            out.append(sub(np.ones(n, dtype=bool), "potential_dirichlet"))
        return tuple(out)
    vel = batch.supervised["velocity"]
    mag = batch.supervised["magnetic"]
    if vel.any():
        out.append(sub(vel, "velocity_dirichlet"))
    if mag.any():
        out.append(sub(mag, "magnetic_dirichlet"))
    if formulation != "b" and (vel & mag).any():
        out.append(sub(vel & mag, "potential_dirichlet"))
    return tuple(out)


def build_problem(case: BenchmarkCase, formulation: str,
                  seed: int = 0) -> Problem:
    """Sampled training problem for one case: interior residual points with
    manufactured sources, boundary condition batches, and (when unsteady)
    initial data."""
    domain = case.domain
    dim, unsteady = domain.dim, not domain.steady
    interior = latin_hypercube(case.n_interior, domain, seed=seed).points
    sources = manufactured_sources(
        case.closure, formulation, formulation_space(formulation, dim, unsteady),
        interior, case.phys)

    def trace(pts):
        return exact_solution(case, pts)

    bnd = sample_boundary(domain, case.n_per_face,
                          boundary_mask_preset(case.mask, domain),
                          exact=trace, seed=seed)
    if case.noise is not None:
        bnd = apply_noise(bnd, case.noise, where=bnd.noisy)
    initial = None
    if unsteady and case.n_initial > 0:
        ini = sample_initial(domain, case.n_initial, exact=trace, seed=seed)
        initial = ConditionBatch(points=ini.points, targets=ini.targets)
    return Problem(
        formulation=formulation, phys=case.phys, dim=dim, unsteady=unsteady,
        interior=interior, sources=sources,
        boundary=_boundary_batches(case, formulation, bnd), initial=initial)


def build_network(case: BenchmarkCase, formulation: str,
                  architecture: str = "mhdnet",
                  seed: int = 0) -> MultiscaleNetwork:
    d = case.defaults
    n_in = len(case.domain.axes)
    n_out = len(head_names(formulation, case.domain.dim))
    if architecture == "mhdnet":
        return multimodes_network(
            n_in, n_out, subnets=d.subnets, modes=d.modes, scale=d.scale,
            width=d.width, hidden_layers=d.hidden_layers,
            stddev_step=d.stddev_step, seed=seed)
    if architecture == "pinn_baseline":
        return pinn_network(n_in, n_out, width=d.baseline_width,
                            hidden_layers=d.hidden_layers)
    raise ValueError(f"unknown architecture {architecture!r}; have {ARCHITECTURES}")


def predict_fields(net: MultiscaleNetwork, params: ParameterVector,
                   formulation: str, case: BenchmarkCase, points: np.ndarray,
                   chunk: int = 4096) -> dict:
    """Physical fields (u, b, p) at plain points, chunked, no tape.

    Potential formulations reconstruct u and b through the curl, so they
    evaluate at jet order 1; the primitive formulation reads values only.
    """
    if chunk < 1:
        raise ValueError("chunk must be positive")
    domain = case.domain
    dim = domain.dim
    order = 0 if formulation == "b" else 1
    caps = (order,) * dim + ((0,) if not domain.steady else ())
    space = jet_space(domain.axes, order, caps)
    names = tuple(f"u{i}" for i in range(1, dim + 1)) \
        + tuple(f"b{i}" for i in range(1, dim + 1)) + ("p",)
    pts = np.asarray(points, dtype=np.float64)
    parts: dict = {n: [] for n in names}
    for lo in range(0, pts.shape[0], chunk):
        reader = reader_from_network(net, params, formulation, space,
                                     pts[lo:lo + chunk])
        for n in names:
            val = reader.d(n)
            val = val.data if hasattr(val, "data") else val
            parts[n].append(np.asarray(val, dtype=np.float64))
    return {n: np.concatenate(v) for n, v in parts.items()}


# ---------------------------------------------------------------------------
# evaluation grids


@dataclass(frozen=True)
class EvalGrid:
    points: np.ndarray  # (N, axes); includes the time column when unsteady
    resolution: tuple[int, ...]
    time_slices: tuple[float, ...]  # empty for steady cases
    description: str

    @property
    def slice_size(self) -> int:
        return int(np.prod(self.resolution))


def evaluation_grid(case: BenchmarkCase, resolution: int | None = None,
                    time_slices=None) -> EvalGrid:
    """Uniform tensor grid over the domain, repeated per time slice."""
    dim = case.domain.dim
    if resolution is None:
        resolution = 101 if dim == 2 else 51
    if resolution < 2:
        raise ValueError("resolution must be at least 2 per axis")
    axes_1d = [np.linspace(lo, hi, resolution) for lo, hi in case.domain.bounds]
    mesh = np.meshgrid(*axes_1d, indexing="ij")
    spatial = np.stack([m.ravel() for m in mesh], axis=1)
    if case.domain.steady:
        return EvalGrid(spatial, (resolution,) * dim, (),
                        f"{case.id}:{'x'.join([str(resolution)] * dim)}")
    if time_slices is None:
        time_slices = DEFAULT_TIME_SLICES
    time_slices = tuple(float(t) for t in time_slices)
    blocks = []
    for t in time_slices:
        col = np.full((spatial.shape[0], 1), t)
        blocks.append(np.hstack([spatial, col]))
    desc = (f"{case.id}:{'x'.join([str(resolution)] * dim)}"
            f"@t={','.join(f'{t:g}' for t in time_slices)}")
    return EvalGrid(np.vstack(blocks), (resolution,) * dim, time_slices, desc)


# ---------------------------------------------------------------------------
# error metrics


def relative_l2(predicted, exact) -> tuple[float, bool]:
    """Relative discrete L2 error; absolute norm (flagged) if exact is zero."""
    predicted = np.asarray(predicted, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if predicted.shape != exact.shape:
        raise ValueError("prediction and reference shapes differ")
    num = float(np.linalg.norm(predicted - exact))
    den = float(np.linalg.norm(exact))
    if den == 0.0:
        return num, True
    return num / den, False


@dataclass(frozen=True)
class MetricsReport:
    errors: dict  # component -> pooled error over the whole grid
    per_slice: dict  # time -> {component -> error}; empty for steady
    absolute_norm: frozenset  # components reported as absolute norms
    aligned: frozenset  # components mean-aligned before comparing
    grid: str

    def __post_init__(self):
        for v in self.errors.values():
            if not v >= 0.0:
                raise ValueError("errors must be nonnegative")


def _align(predicted, exact, name, aligned):
    if name not in aligned:
        return predicted
    return predicted - (np.mean(predicted) - np.mean(exact))


def metrics_report(case: BenchmarkCase, grid: EvalGrid, predicted: dict,
                   exact: dict, align=("p",)) -> MetricsReport:
    """Componentwise errors on an evaluation grid, per slice and pooled.

    Pressure is compared after mean alignment (per time slice): nothing in
    the loss pins its additive constant, so only the shape is meaningful.
    The pooled number concatenates all slices after alignment.
    """
    aligned = frozenset(n for n in align if n in exact)
    names = [n for n in exact if n in predicted]
    errors, per_slice = {}, {}
    flags = set()
    if grid.time_slices:
        m = grid.slice_size
        chunks = {}
        for name in names:
            parts_p, parts_e = [], []
            for i, t in enumerate(grid.time_slices):
                sl = slice(i * m, (i + 1) * m)
                pred = _align(predicted[name][sl], exact[name][sl], name, aligned)
                parts_p.append(pred)
                parts_e.append(exact[name][sl])
                err, flag = relative_l2(pred, exact[name][sl])
                per_slice.setdefault(t, {})[name] = err
                if flag:
                    flags.add(name)
            chunks[name] = (np.concatenate(parts_p), np.concatenate(parts_e))
        for name in names:
            err, flag = relative_l2(*chunks[name])
            errors[name] = err
            if flag:
                flags.add(name)
    else:
        for name in names:
            pred = _align(predicted[name], exact[name], name, aligned)
            err, flag = relative_l2(pred, exact[name])
            errors[name] = err
            if flag:
                flags.add(name)
    return MetricsReport(errors=errors, per_slice=per_slice,
                         absolute_norm=frozenset(flags), aligned=aligned,
                         grid=grid.description)


def metrics_to_rows(report: MetricsReport) -> list[dict]:
    """Flatten a report into CSV-ready rows (slice column empty = pooled)."""
    rows = []
    for name in sorted(report.errors):
        rows.append({
            "component": name,
            "time": "",
            "error": report.errors[name],
            "absolute": int(name in report.absolute_norm),
            "aligned": int(name in report.aligned),
        })
    for t in sorted(report.per_slice):
        for name in sorted(report.per_slice[t]):
            rows.append({
                "component": name,
                "time": t,
                "error": report.per_slice[t][name],
                "absolute": int(name in report.absolute_norm),
                "aligned": int(name in report.aligned),
            })
    return rows


# ---------------------------------------------------------------------------
# the benchmark driver


@dataclass(frozen=True)
class BenchmarkResult:
    case: BenchmarkCase
    formulation: str
    architecture: str
    report: MetricsReport
    log: RunLog
    net: MultiscaleNetwork
    params: ParameterVector
    grid: EvalGrid
    predicted: dict
    exact: dict


def run_benchmark(case: BenchmarkCase | str, formulation: str,
                  architecture: str = "mhdnet", schedule: Schedule | None = None,
                  seed: int = 0, weights: LossWeights | None = None,
                  params: ParameterVector | None = None, log_path=None,
                  resolution: int | None = None,
                  time_slices=None) -> BenchmarkResult:
    """Train one case/formulation/architecture combination and grade it.

    Divergent runs still produce a report: training hands back the last
    finite parameters and marks the log as aborted. Passing params skips
    the fresh initialization (evaluation-only runs, warm starts).
    """
    if isinstance(case, str):
        case = benchmark_case(case)
    d = case.defaults
    if schedule is None:
        schedule = Schedule(adam_lr=d.adam_lr)
    if weights is None:
        w = d.constraint_weight
        weights = LossWeights(initial=w, boundary=w, data=w)
    net = build_network(case, formulation, architecture, seed=seed)
    if params is None:
        params = init_params(net, seed=seed)
    problem = build_problem(case, formulation, seed=seed)
    params, log = train(net, params, problem, weights, schedule, seed=seed,
                        log_path=log_path)
    grid = evaluation_grid(case, resolution=resolution, time_slices=time_slices)
    predicted = predict_fields(net, params, formulation, case, grid.points)
    sol = exact_solution(case, grid.points)
    exact = {n: sol[n] for n in predicted}
    report = metrics_report(case, grid, predicted, exact)
    return BenchmarkResult(case=case, formulation=formulation,
                           architecture=architecture, report=report, log=log,
                           net=net, params=params, grid=grid,
                           predicted=predicted, exact=exact)


# ---------------------------------------------------------------------------
# CSV emission

METRICS_COLUMNS = ("component", "time", "error", "absolute", "aligned")


def write_metrics_csv(report: MetricsReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        writer.writerows(metrics_to_rows(report))


def write_grid_csv(case: BenchmarkCase, grid: EvalGrid, predicted: dict,
                   exact: dict, path) -> None:
    """Pointwise prediction table: coordinates, then per component the
    predicted value, exact value, and absolute error."""
    axes = case.domain.axes
    names = sorted(n for n in predicted if n in exact)
    if not names:
        raise ValueError("no components shared between predicted and exact")
    header = list(axes)
    cols = [grid.points[:, i] for i in range(len(axes))]
    for n in names:
        header += [f"{n}_pred", f"{n}_exact", f"{n}_abserr"]
        cols += [predicted[n], exact[n], np.abs(predicted[n] - exact[n])]
    table = np.column_stack(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in table:
            writer.writerow([f"{v:.17g}" for v in row])
