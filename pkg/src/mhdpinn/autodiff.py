"""Public nested-differentiation API.

Input derivatives come from forward-mode jet propagation (`jets`); parameter
gradients from reverse accumulation over a tape whose forward pass operates
on jets (`tape`). `finite_difference_check` is the shared test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import jets
from .jets import JetArray, JetSpace, jet_space, seed_coordinates
from .tape import ParameterVector, Tape, Tensor

__all__ = [
    "AXIS_NAMES",
    "DerivativeBundle",
    "FiniteDifferenceReport",
    "evaluate_with_input_derivatives",
    "parameter_gradient",
    "finite_difference_check",
]

AXIS_NAMES = ("x", "y", "z", "t")


@dataclass
class DerivativeBundle:
    """Values and derivatives of a vector function at a batch of points."""

    space: JetSpace
    outputs: tuple[JetArray, ...]
    scalar_point: bool = False

    def _pick(self, arr: np.ndarray):
        return float(arr[0]) if self.scalar_point else arr

    def value(self, output: int = 0):
        return self._pick(self.outputs[output].value)

    def derivative(self, spec, output: int = 0):
        return self._pick(self.outputs[output].derivative(spec))

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)


def _as_points(point) -> tuple[np.ndarray, bool]:
    arr = np.asarray(point, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        return arr.reshape(1, -1), True
    return arr, False


def _axis_names(d: int) -> tuple[str, ...]:
    if d <= len(AXIS_NAMES):
        return AXIS_NAMES[:d]
    return tuple(f"x{i}" for i in range(d))


def evaluate_with_input_derivatives(
    fn: Callable,
    point,
    order: int,
    directions: Sequence | None = None,
) -> DerivativeBundle:
    """Evaluate fn and all its derivatives up to `order` along `directions`.

    fn receives one jet argument per input coordinate and must be built from
    the analytic primitives in `jets` (plus arithmetic); it returns one jet
    or a sequence of jets. Axes not in `directions` are treated as constants.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    points, scalar = _as_points(point)
    d = points.shape[1]
    names = _axis_names(d)
    if directions is None:
        active = set(range(d))
    else:
        active = set()
        for a in directions:
            active.add(names.index(a) if isinstance(a, str) else int(a))
    caps = tuple(order if i in active else 0 for i in range(d))
    space = jet_space(names, order, caps)
    coords = seed_coordinates(space, points)
    out = fn(*(coords[n] for n in names))
    outputs = tuple(out) if isinstance(out, (tuple, list)) else (out,)
    for o in outputs:
        if not isinstance(o, JetArray):
            raise TypeError("fn must return jet arrays (build it from jets primitives)")
    return DerivativeBundle(space=space, outputs=outputs, scalar_point=scalar)


def parameter_gradient(
    loss_fn: Callable[[ParameterVector, Tape | None], Tensor],
    params: ParameterVector,
) -> ParameterVector:
    """Gradient of a scalar loss w.r.t. params, with finiteness flagging.

    loss_fn(params, tape) must build its scalar output through tape ops
    (network forwards pass the tape down); it may evaluate jets internally.
    """
    if not np.all(np.isfinite(params.values)):
        raise ValueError("params contain non-finite entries")
    tp = Tape(check_finite=True)
    loss = loss_fn(params, tp)
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise TypeError("loss_fn must return a scalar Tensor")
    grad = tp.gradient(loss, len(params))
    return params.with_values(grad)


# ---------------------------------------------------------------------------
# finite-difference oracle

_STENCILS = {
    0: ((0, 1.0),),
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def fd_derivative(fn_plain: Callable, point: np.ndarray, alpha: Sequence[int], step: float):
    """Central finite difference for the mixed derivative `alpha` of fn."""
    point = np.asarray(point, dtype=np.float64)
    total = 0.0
    per_axis = [_STENCILS[a] for a in alpha]
    for combo in product(*per_axis):
        q = point.copy()
        w = 1.0
        for axis, (k, wk) in enumerate(combo):
            q[axis] += k * step
            w *= wk
        total = total + w * fn_plain(*q)
    return total / step ** sum(alpha)


@dataclass
class FiniteDifferenceReport:
    entries: list = field(default_factory=list)  # (label, analytic, numeric)
    max_abs_discrepancy: float = 0.0
    max_rel_discrepancy: float = 0.0

    def add(self, label: str, analytic: float, numeric: float):
        self.entries.append((label, analytic, numeric))
        diff = abs(analytic - numeric)
        scale = max(abs(analytic), abs(numeric))
        self.max_abs_discrepancy = max(self.max_abs_discrepancy, diff)
        if scale > 1e-12:
            self.max_rel_discrepancy = max(self.max_rel_discrepancy, diff / scale)

    def max_discrepancy(self, floor: float = 1.0) -> float:
        """Max of |analytic - fd| / max(|analytic|, |fd|, floor).

        The floor keeps near-zero derivatives from being judged relatively:
        a central difference cannot resolve them below its roundoff level.
        """
        worst = 0.0
        for _, a, n in self.entries:
            worst = max(worst, abs(a - n) / max(abs(a), abs(n), floor))
        return worst

    def __str__(self):
        lines = [
            f"{label}: analytic={a:.12g} fd={n:.12g} diff={abs(a - n):.3g}"
            for label, a, n in self.entries
        ]
        lines.append(
            f"max abs {self.max_abs_discrepancy:.3g}, "
            f"max rel {self.max_rel_discrepancy:.3g}"
        )
        return "\n".join(lines)


def _label(names, alpha) -> str:
    s = "".join(n * a for n, a in zip(names, alpha))
    return s if s else "value"


def finite_difference_check(
    fn: Callable,
    at,
    step: float = 1e-5,
    order: int = 1,
    directions: Sequence | None = None,
    loss_fn: Callable | None = None,
) -> FiniteDifferenceReport:
    """Compare analytic derivatives against central finite differences.

    Input mode (default): `fn` maps jets to one jet; every multi-index up to
    `order` along `directions` is compared at the point `at`.

    Parameter mode (`loss_fn` given, `at` a ParameterVector): the analytic
    parameter gradient is compared entrywise against central differences.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    report = FiniteDifferenceReport()
    if loss_fn is not None:
        params: ParameterVector = at
        grad = parameter_gradient(loss_fn, params).values

        def value_at(v: np.ndarray) -> float:
            t = loss_fn(params.with_values(v), None)
            return float(t.data)

        base = params.values
        for i in range(base.size):
            vp, vm = base.copy(), base.copy()
            vp[i] += step
            vm[i] -= step
            report.add(f"theta[{i}]", float(grad[i]), (value_at(vp) - value_at(vm)) / (2 * step))
        return report

    points, scalar = _as_points(at)
    if not scalar:
        raise ValueError("finite_difference_check expects a single point")
    bundle = evaluate_with_input_derivatives(fn, at, order=order, directions=directions)
    names = bundle.space.axes
    pt = points[0]
    for alpha in bundle.space.indices:
        if sum(alpha) == 0:
            analytic = bundle.value()
            numeric = float(fn_plain_eval(fn, pt))
        else:
            analytic = bundle.derivative(alpha)
            numeric = float(fd_derivative(lambda *q: fn_plain_eval(fn, np.array(q)), pt, alpha, step))
        report.add(_label(names, alpha), analytic, numeric)
    return report


def fn_plain_eval(fn: Callable, point: np.ndarray):
    """Evaluate a jet-generic function on plain floats."""
    out = fn(*np.asarray(point, dtype=np.float64))
    if isinstance(out, (tuple, list)):
        return np.asarray(out[0])
    return np.asarray(out)
