"""Composite loss assembly, Adam and L-BFGS, and the two-stage schedule.

The loss is full batch: collocation sets stay in the low thousands, the
reduction order is fixed, and repeated runs with one seed are bitwise
identical. Every term is the batch mean of the summed squared residual
components produced by the operators module; the total recomposes exactly
as the weighted sum of the logged terms, in the order equation, initial,
boundary, data.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import tape as tp
from .jets import jet_space
from .network import MultiscaleNetwork, embed_points
from .operators import (
    PhysParams,
    SourceTerms,
    boundary_order,
    boundary_residuals,
    formulation_space,
    initial_residuals,
    pde_residuals,
    reader_from_network,
)
from .tape import ParameterVector, Tape, Tensor

__all__ = [
    "AdamState",
    "ConditionBatch",
    "LBFGSState",
    "LogRecord",
    "LossBreakdown",
    "LossWeights",
    "Problem",
    "RunLog",
    "Schedule",
    "adam_init",
    "adam_step",
    "assemble_loss",
    "lbfgs_init",
    "lbfgs_step",
    "read_runlog",
    "train",
    "train_on_loss",
    "write_runlog",
]

LOG_COLUMNS = ("epoch", "phase", "total", "L_f", "L_g", "L_h", "L_data",
               "seconds")


@dataclass(frozen=True)
class LossWeights:
    """Term weights; the supervised constraint terms default to 100."""

    equation: float = 1.0
    initial: float = 100.0
    boundary: float = 100.0
    data: float = 100.0

    def __post_init__(self):
        vals = (self.equation, self.initial, self.boundary, self.data)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if all(v == 0 for v in vals):
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    equation: float = 0.0
    initial: float = 0.0
    boundary: float = 0.0
    data: float = 0.0


@dataclass(frozen=True)
class ConditionBatch:
    """Point set with supervision targets for one constraint.

    kind is a boundary condition name for boundary batches and is ignored
    for initial/data batches. Targets map component names to (N,) arrays.
    """

    points: np.ndarray
    kind: str = ""
    targets: dict | None = None
    normals: np.ndarray | None = None

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Problem:
    """Everything assemble_loss needs besides the network and weights."""

    formulation: str
    phys: PhysParams
    dim: int
    unsteady: bool
    interior: np.ndarray
    sources: SourceTerms | None = None
    boundary: tuple[ConditionBatch, ...] = ()
    initial: ConditionBatch | None = None
    data: ConditionBatch | None = None

    def __post_init__(self):
        want = self.dim + (1 if self.unsteady else 0)
        if self.interior.ndim != 2 or self.interior.shape[1] != want:
            raise ValueError(f"interior points must be (N, {want})")

    @property
    def axes(self) -> tuple[str, ...]:
        spatial = ("x", "y", "z")[: self.dim]
        return spatial + (("t",) if self.unsteady else ())


@lru_cache(maxsize=None)
def _constraint_space(dim: int, unsteady: bool, order: int):
    axes = ("x", "y", "z")[:dim] + (("t",) if unsteady else ())
    caps = (order,) * dim + ((0,) if unsteady else ())
    return jet_space(axes, order, caps)


def _supervision_order(formulation: str) -> int:
    # u and B are curls of potential heads, one derivative deep
    return 0 if formulation == "b" else 1


def _term_mean(residuals: dict) -> Tensor:
    comps = [residuals[k] for k in sorted(residuals)]
    acc = tp.square(comps[0])
    for r in comps[1:]:
        acc = acc + tp.square(r)
    return tp.mean_all(acc)


def _term_sum(residuals: dict) -> Tensor:
    comps = [residuals[k] for k in sorted(residuals)]
    acc = tp.square(comps[0])
    for r in comps[1:]:
        acc = acc + tp.square(r)
    return tp.sum_all(acc)


def assemble_loss(
    net: MultiscaleNetwork,
    params: ParameterVector,
    problem: Problem,
    weights: LossWeights,
    tape: Tape | None = None,
    embed_cache: dict | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """Weighted composite loss; differentiable when a tape is passed.

    Boundary batches pool into one term: the mean over all boundary points
    of the summed squared components, whatever mixture of condition kinds
    the batches carry.

    Embeddings depend on the collocation points but not the parameters, so
    a full-batch driver evaluating one fixed problem many times may pass a
    dict as embed_cache to compute them once per batch.
    """

    def reader_for(key, space, points):
        feats = None
        if embed_cache is not None:
            feats = embed_cache.get(key)
            if feats is None:
                feats = embed_points(net, space, points)
                embed_cache[key] = feats
        return reader_from_network(net, params, problem.formulation, space,
                                   points, tape=tape, features=feats)

    if problem.interior.shape[0] == 0:
        raise ValueError("equation batch is empty")
    space = formulation_space(problem.formulation, problem.dim,
                              problem.unsteady)
    reader = reader_for("interior", space, problem.interior)
    res = pde_residuals(reader, problem.formulation, problem.phys,
                        sources=problem.sources)
    l_equation = _term_mean(res)

    l_initial = None
    if problem.initial is not None:
        if len(problem.initial) == 0:
            raise ValueError("initial batch is empty")
        sup = _constraint_space(problem.dim, problem.unsteady,
                                _supervision_order(problem.formulation))
        r = reader_for("initial", sup, problem.initial.points)
        l_initial = _term_mean(initial_residuals(r, problem.initial.targets))

    l_boundary = None
    if problem.boundary:
        parts = []
        n_total = 0
        for pos, batch in enumerate(problem.boundary):
            if len(batch) == 0:
                raise ValueError(f"boundary batch {batch.kind!r} is empty")
            order = boundary_order(problem.formulation, batch.kind)
            bspace = _constraint_space(problem.dim, problem.unsteady, order)
            r = reader_for(("boundary", pos), bspace, batch.points)
            res_b = boundary_residuals(r, batch.normals, batch.kind,
                                       batch.targets, problem.phys,
                                       problem.formulation)
            parts.append(_term_sum(res_b))
            n_total += len(batch)
        acc = parts[0]
        for p in parts[1:]:
            acc = acc + p
        l_boundary = tp.scale(acc, 1.0 / n_total)

    l_data = None
    if problem.data is not None:
        if len(problem.data) == 0:
            raise ValueError("data batch is empty")
        sup = _constraint_space(problem.dim, problem.unsteady,
                                _supervision_order(problem.formulation))
        r = reader_for("data", sup, problem.data.points)
        l_data = _term_mean(initial_residuals(r, problem.data.targets))

    total = tp.scale(l_equation, weights.equation)
    if l_initial is not None:
        total = total + tp.scale(l_initial, weights.initial)
    if l_boundary is not None:
        total = total + tp.scale(l_boundary, weights.boundary)
    if l_data is not None:
        total = total + tp.scale(l_data, weights.data)

    def f(t):
        return 0.0 if t is None else float(t.data)

    breakdown = LossBreakdown(total=float(total.data),
                              equation=f(l_equation), initial=f(l_initial),
                              boundary=f(l_boundary), data=f(l_data))
    return total, breakdown


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params),
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: ParameterVector,
              grad: np.ndarray) -> tuple[AdamState, ParameterVector]:
    """One bias-corrected update. Non-finite gradients refuse the step."""
    grad = np.asarray(grad)
    if grad.shape != state.m.shape:
        raise ValueError("gradient length does not match optimizer state")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient; step refused")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    values = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return (replace(state, m=m, v=v, step=step),
            params.with_values(values))


# ---------------------------------------------------------------------------
# L-BFGS with a strong Wolfe line search


@dataclass(frozen=True)
class LBFGSState:
    pairs: tuple = ()  # ((s, y), ...) newest last, curvature s.y > 0
    history: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-9
    iteration: int = 0
    converged: bool = False
    fallbacks: int = 0  # line-search failures resolved by steepest descent
    f: float | None = None  # cached objective at current params
    g: np.ndarray | None = None


def lbfgs_init(history: int = 50, c1: float = 1e-4, c2: float = 0.9,
               grad_tol: float = 1e-9) -> LBFGSState:
    if history < 1:
        raise ValueError("history must be positive")
    return LBFGSState(history=history, c1=c1, c2=c2, grad_tol=grad_tol)


def _two_loop_direction(pairs, grad):
    q = grad.copy()
    alphas = []
    for s, y in reversed(pairs):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        q -= a * y
        alphas.append((a, rho, s, y))
    if pairs:
        s, y = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _strong_wolfe(loss_fn, x, f0, g0, d, c1, c2, max_trials=25):
    """Line search returning (alpha, f, g) or None.

    Falls back to the best Armijo point seen when the curvature condition
    cannot be met within the trial budget; the caller's curvature guard on
    stored pairs keeps the inverse-Hessian model sound regardless.
    """
    dphi0 = float(g0 @ d)
    if dphi0 >= 0:
        return None
    best = None

    def armijo(alpha, f_a):
        return np.isfinite(f_a) and f_a <= f0 + c1 * alpha * dphi0

    def evaluate(alpha):
        f_a, g_a = loss_fn(x + alpha * d)
        return f_a, g_a, (float(g_a @ d) if np.all(np.isfinite(g_a)) else
                          math.inf)

    def zoom(lo, f_lo, dphi_lo, hi, f_hi, trials):
        nonlocal best
        for _ in range(trials):
            # quadratic model on [lo, hi] from (f_lo, dphi_lo, f_hi),
            # bisection whenever the model step leaves the safe interior
            span = hi - lo
            denom = 2.0 * (f_hi - f_lo - dphi_lo * span)
            alpha = lo + (-dphi_lo * span * span / denom if denom != 0
                          else 0.5 * span)
            low, high = min(lo, hi), max(lo, hi)
            margin = 0.1 * (high - low)
            if not (low + margin <= alpha <= high - margin):
                alpha = 0.5 * (lo + hi)
            f_a, g_a, dphi_a = evaluate(alpha)
            if not armijo(alpha, f_a) or f_a >= f_lo:
                hi, f_hi = alpha, f_a
                continue
            if best is None or f_a < best[1]:
                best = (alpha, f_a, g_a)
            if abs(dphi_a) <= -c2 * dphi0:
                return alpha, f_a, g_a
            if dphi_a * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, dphi_lo = alpha, f_a, dphi_a
        return best

    alpha_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    alpha = 1.0
    for trial in range(max_trials):
        f_a, g_a, dphi_a = evaluate(alpha)
        if not armijo(alpha, f_a) or (trial > 0 and f_a >= f_prev):
            return zoom(alpha_prev, f_prev, dphi_prev, alpha, f_a,
                        max_trials - trial)
        if best is None or f_a < best[1]:
            best = (alpha, f_a, g_a)
        if abs(dphi_a) <= -c2 * dphi0:
            return alpha, f_a, g_a
        if dphi_a >= 0:
            return zoom(alpha, f_a, dphi_a, alpha_prev, f_prev,
                        max_trials - trial)
        alpha_prev, f_prev, dphi_prev = alpha, f_a, dphi_a
        alpha *= 2.0
    return best


def lbfgs_step(state: LBFGSState, params: ParameterVector,
               loss_fn: Callable) -> tuple[LBFGSState, ParameterVector, float]:
    """One quasi-Newton iteration; loss never increases between iterates.

    loss_fn maps a parameter value array to (loss, gradient).
    """
    x = params.values
    if state.f is None:
        f0, g0 = loss_fn(x)
        if not np.isfinite(f0):
            raise FloatingPointError("loss is non-finite at the start point")
    else:
        f0, g0 = state.f, state.g
    if float(np.max(np.abs(g0))) <= state.grad_tol:
        return replace(state, converged=True, f=f0, g=g0), params, f0

    d = _two_loop_direction(state.pairs, g0)
    fallbacks = state.fallbacks
    hit = _strong_wolfe(loss_fn, x, f0, g0, d, state.c1, state.c2)
    if hit is None:
        # steepest descent with plain backtracking keeps progress alive
        fallbacks += 1
        d = -g0
        alpha = 1.0
        hit = None
        for _ in range(60):
            f_a, g_a = loss_fn(x + alpha * d)
            if np.isfinite(f_a) and f_a < f0:
                hit = (alpha, f_a, g_a)
                break
            alpha *= 0.5
        if hit is None:
            # no descent in a numerically exhausted neighborhood
            return (replace(state, converged=True, fallbacks=fallbacks,
                            f=f0, g=g0), params, f0)
    alpha, f_new, g_new = hit
    x_new = x + alpha * d
    s = x_new - x
    y = g_new - g0
    pairs = state.pairs
    if np.all(np.isfinite(y)) and float(s @ y) > 0.0:
        pairs = (pairs + ((s, y),))[-state.history:]
    new_state = replace(state, pairs=pairs, iteration=state.iteration + 1,
                        fallbacks=fallbacks, f=f_new, g=g_new)
    return new_state, params.with_values(x_new), f_new


# ---------------------------------------------------------------------------
# schedule, logging, and the driver


@dataclass(frozen=True)
class Schedule:
    n_adam: int = 30000
    adam_lr: float = 1e-3
    n_lbfgs_max: int = 1000
    grad_tol: float = 1e-9

    def __post_init__(self):
        if self.n_adam < 0 or self.n_lbfgs_max < 0:
            raise ValueError("schedule epoch counts must be nonnegative")

    @staticmethod
    def desk() -> "Schedule":
        """CI-speed profile."""
        return Schedule(n_adam=5000, n_lbfgs_max=2000)


@dataclass(frozen=True)
class LogRecord:
    epoch: int
    phase: str
    breakdown: LossBreakdown
    seconds: float


@dataclass
class RunLog:
    records: list = field(default_factory=list)
    aborted: bool = False

    def append(self, record: LogRecord):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.records.append(record)

    @property
    def final_total(self) -> float:
        return self.records[-1].breakdown.total if self.records else math.nan


def _record_row(r: LogRecord) -> list:
    b = r.breakdown
    return [r.epoch, r.phase, f"{b.total:.17g}", f"{b.equation:.17g}",
            f"{b.initial:.17g}", f"{b.boundary:.17g}", f"{b.data:.17g}",
            f"{r.seconds:.3f}"]


def write_runlog(log: RunLog, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for r in log.records:
            w.writerow(_record_row(r))


def read_runlog(path) -> RunLog:
    log = RunLog()
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        if rows.fieldnames is None or tuple(rows.fieldnames) != LOG_COLUMNS:
            raise ValueError(f"run log needs columns {LOG_COLUMNS}")
        for row in rows:
            log.append(LogRecord(
                epoch=int(row["epoch"]), phase=row["phase"],
                breakdown=LossBreakdown(
                    total=float(row["total"]), equation=float(row["L_f"]),
                    initial=float(row["L_g"]), boundary=float(row["L_h"]),
                    data=float(row["L_data"])),
                seconds=float(row["seconds"])))
    return log


class _Stream:
    """Appends log rows to CSV as they arrive; header written eagerly."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="") if path is not None else None
        if self.fh is not None:
            csv.writer(self.fh).writerow(LOG_COLUMNS)
            self.fh.flush()

    def push(self, record: LogRecord):
        if self.fh is not None:
            csv.writer(self.fh).writerow(_record_row(record))
            self.fh.flush()

    def close(self):
        if self.fh is not None:
            self.fh.close()


def train_on_loss(params: ParameterVector, loss_fn: Callable,
                  schedule: Schedule,
                  log_path=None) -> tuple[ParameterVector, RunLog]:
    """Two-stage Adam then L-BFGS drive over an arbitrary objective.

    loss_fn maps ParameterVector -> (total, gradient, LossBreakdown).
    Divergence aborts with the last parameters whose loss was finite.
    """
    log = RunLog()
    stream = _Stream(log_path)
    t0 = time.perf_counter()
    epoch = 0

    def push(phase, breakdown):
        rec = LogRecord(epoch, phase, breakdown,
                        time.perf_counter() - t0)
        log.append(rec)
        stream.push(rec)

    last_good = params
    try:
        adam = adam_init(len(params), lr=schedule.adam_lr)
        for _ in range(schedule.n_adam):
            total, grad, breakdown = loss_fn(params)
            if not math.isfinite(total):
                log.aborted = True
                return last_good, log
            last_good = params
            epoch += 1
            push("adam", breakdown)
            try:
                adam, params = adam_step(adam, params, grad)
            except FloatingPointError:
                log.aborted = True
                return last_good, log

        state = lbfgs_init(grad_tol=schedule.grad_tol)
        cache = {}

        def values_fn(values):
            total, grad, breakdown = loss_fn(params.with_values(values))
            cache[values.tobytes()] = breakdown
            return total, grad

        for _ in range(schedule.n_lbfgs_max):
            cache.clear()
            try:
                state, new_params, f_new = lbfgs_step(state, params,
                                                      values_fn)
            except FloatingPointError:
                log.aborted = True
                return last_good, log
            if not math.isfinite(f_new):
                log.aborted = True
                return last_good, log
            moved = new_params is not params
            params = new_params
            last_good = params
            if moved:
                epoch += 1
                breakdown = cache.get(params.values.tobytes())
                if breakdown is None:
                    total, _, breakdown = loss_fn(params)
                push("lbfgs", breakdown)
            if state.converged:
                break
    finally:
        stream.close()
    return params, log


def train(net: MultiscaleNetwork, params: ParameterVector, problem: Problem,
          weights: LossWeights, schedule: Schedule, seed: int = 0,
          log_path=None) -> tuple[ParameterVector, RunLog]:
    """Fit the network to the problem; full batch, deterministic.

    The seed is accepted for interface symmetry with samplers; nothing in
    the full-batch drive draws randomness.
    """
    del seed
    embed_cache: dict = {}

    def loss_fn(p):
        tape = Tape()
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            total, breakdown = assemble_loss(net, p, problem, weights, tape,
                                             embed_cache=embed_cache)
            if not math.isfinite(breakdown.total):
                return breakdown.total, np.zeros(len(p)), breakdown
            grad = tape.gradient(total, len(p))
        return breakdown.total, grad, breakdown

    return train_on_loss(params, loss_fn, schedule, log_path=log_path)
