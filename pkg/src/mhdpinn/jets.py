"""Truncated multivariate Taylor jets over batched float64 arrays.

A jet space fixes a set of seeded axes, per-axis order caps, and a total
order cap k <= 3. A jet is stored as an ndarray whose last two axes are
(coefficient, batch); coefficient ``c[alpha]`` is the Taylor coefficient
(derivative divided by alpha!) along the seeded axes. Propagating jets
through arithmetic and analytic primitives yields exact derivatives of the
composed function up to rounding.

Two kernel implementations exist for the truncated product and the analytic
composition: a pure-numpy reference and an optional numba fast path. Both
apply table rows in the same order, so per-element accumulation order (and
hence the floating-point result) is identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3

__all__ = [
    "MAX_ORDER",
    "JetSpace",
    "JetArray",
    "NonDifferentiablePrimitiveError",
    "jet_space",
    "seed_coordinates",
    "constant",
    "sin",
    "cos",
    "tan",
    "exp",
    "log",
    "sinh",
    "cosh",
    "tanh",
    "sqrt",
    "reciprocal",
    "power",
    "absolute",
]


class NonDifferentiablePrimitiveError(TypeError):
    """Raised when a non-differentiable primitive meets a jet of order >= 1."""


def _multi_indices(caps: tuple[int, ...], order: int) -> list[tuple[int, ...]]:
    ranges = [range(min(c, order) + 1) for c in caps]
    idx = [a for a in product(*ranges) if sum(a) <= order]
    # graded order, x before y before z before t within a grade
    idx.sort(key=lambda a: (sum(a), a[::-1]))
    return idx


@dataclass(frozen=True, eq=False)
class JetSpace:
    axes: tuple[str, ...]
    caps: tuple[int, ...]
    order: int
    indices: tuple[tuple[int, ...], ...] = field(repr=False)
    index_of: dict = field(repr=False)
    factorials: np.ndarray = field(repr=False)
    # product rows (o, i, j) with alpha_o = alpha_i + alpha_j, grouped by the
    # accumulation target so kernels build each output row in a private
    # buffer (keeps SIMD-friendly no-alias inner loops, fixed summation order)
    mul_ptr: np.ndarray = field(repr=False)  # group = o, rows sorted (o,i,j)
    mul_i: np.ndarray = field(repr=False)
    mul_j: np.ndarray = field(repr=False)
    corr_a_ptr: np.ndarray = field(repr=False)  # group = i, rows sorted (i,o,j)
    corr_a_o: np.ndarray = field(repr=False)
    corr_a_j: np.ndarray = field(repr=False)
    corr_b_ptr: np.ndarray = field(repr=False)  # group = j, rows sorted (j,o,i)
    corr_b_o: np.ndarray = field(repr=False)
    corr_b_i: np.ndarray = field(repr=False)
    # rows with j != 0 (second factor has zero constant term), group = o
    nc_ptr: np.ndarray = field(repr=False)
    nc_i: np.ndarray = field(repr=False)
    nc_j: np.ndarray = field(repr=False)
    # nilpotent-part power tables: x̂·x̂ (both factors nonconstant) and
    # x̂²·x̂ (first factor supported on grade >= 2 only), group = o
    p2_ptr: np.ndarray = field(repr=False)
    p2_i: np.ndarray = field(repr=False)
    p2_j: np.ndarray = field(repr=False)
    p3_ptr: np.ndarray = field(repr=False)
    p3_i: np.ndarray = field(repr=False)
    p3_j: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.indices)

    def position(self, alpha: "str | Sequence[int]") -> int:
        key = self.parse(alpha)
        try:
            return self.index_of[key]
        except KeyError:
            raise KeyError(
                f"multi-index {key} not in jet space "
                f"(axes {self.axes}, caps {self.caps}, order {self.order})"
            ) from None

    def parse(self, spec: "str | Sequence[int]") -> tuple[int, ...]:
        """Accept 'xxy'-style strings or explicit multi-index tuples."""
        if isinstance(spec, str):
            alpha = [0] * len(self.axes)
            for ch in spec:
                if ch not in self.axes:
                    raise KeyError(f"axis {ch!r} not among {self.axes}")
                alpha[self.axes.index(ch)] += 1
            return tuple(alpha)
        return tuple(int(a) for a in spec)


@lru_cache(maxsize=None)
def jet_space(
    axes: tuple[str, ...], order: int, caps: tuple[int, ...] | None = None
) -> JetSpace:
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    if caps is None:
        caps = tuple(order for _ in axes)
    if len(caps) != len(axes):
        raise ValueError("caps length must match axes length")
    indices = _multi_indices(caps, order)
    index_of = {a: p for p, a in enumerate(indices)}
    factorials = np.array(
        [math.prod(math.factorial(k) for k in a) for a in indices], dtype=np.float64
    )
    rows = []
    for (i, ai), (j, aj) in product(enumerate(indices), repeat=2):
        o = index_of.get(tuple(x + y for x, y in zip(ai, aj)))
        if o is not None:
            rows.append((o, i, j))

    def grouped(triples, key, cols):
        triples = sorted(triples, key=key)
        size = len(indices)
        ptr = np.zeros(size + 1, dtype=np.int64)
        for t in triples:
            ptr[key(t)[0] + 1] += 1
        ptr = np.cumsum(ptr)
        arrs = [
            np.ascontiguousarray([t[c] for t in triples], dtype=np.int64)
            if triples
            else np.zeros(0, dtype=np.int64)
            for c in cols
        ]
        return (ptr, *arrs)

    mul_ptr, mul_i, mul_j = grouped(rows, lambda t: (t[0], t[1], t[2]), (1, 2))
    ca_ptr, ca_o, ca_j = grouped(rows, lambda t: (t[1], t[0], t[2]), (0, 2))
    cb_ptr, cb_o, cb_i = grouped(rows, lambda t: (t[2], t[0], t[1]), (0, 1))
    nc_rows = [t for t in rows if t[2] != 0]
    nc_ptr, nc_i, nc_j = grouped(nc_rows, lambda t: (t[0], t[1], t[2]), (1, 2))
    grade = [sum(a) for a in indices]
    p2_rows = [t for t in rows if t[1] != 0 and t[2] != 0]
    p2_ptr, p2_i, p2_j = grouped(p2_rows, lambda t: (t[0], t[1], t[2]), (1, 2))
    p3_rows = [t for t in rows if grade[t[1]] >= 2 and t[2] != 0]
    p3_ptr, p3_i, p3_j = grouped(p3_rows, lambda t: (t[0], t[1], t[2]), (1, 2))
    return JetSpace(
        axes=tuple(axes),
        caps=tuple(caps),
        order=order,
        indices=tuple(indices),
        index_of=index_of,
        factorials=factorials,
        mul_ptr=mul_ptr,
        mul_i=mul_i,
        mul_j=mul_j,
        corr_a_ptr=ca_ptr,
        corr_a_o=ca_o,
        corr_a_j=ca_j,
        corr_b_ptr=cb_ptr,
        corr_b_o=cb_o,
        corr_b_i=cb_i,
        nc_ptr=nc_ptr,
        nc_i=nc_i,
        nc_j=nc_j,
        p2_ptr=p2_ptr,
        p2_i=p2_i,
        p2_j=p2_j,
        p3_ptr=p3_ptr,
        p3_i=p3_i,
        p3_j=p3_j,
    )


# ---------------------------------------------------------------------------
# raw kernels on (U, C, N) views
#
# Both implementations accumulate each output row from zero through the same
# row sequence, so their floating-point results are bit-identical.


def _mul_np(out, a, b, ptr, ti, tj):
    C = out.shape[1]
    for o in range(C):
        s, e = ptr[o], ptr[o + 1]
        acc = out[:, o, :]
        for r in range(s, e):
            acc += a[:, ti[r], :] * b[:, tj[r], :]


def _corr_np(out, co, x, ptr, to, txs):
    C = out.shape[1]
    for g in range(C):
        s, e = ptr[g], ptr[g + 1]
        acc = out[:, g, :]
        for r in range(s, e):
            acc += co[:, to[r], :] * x[:, txs[r], :]


def _compose_np(out, g, rows, ptr, ni, nj):
    """Horner evaluation of sum_j rows[j] * h^j where h = g minus constant.

    rows has shape (k+1, U, N); rows[j] already includes the 1/j! factor.
    The constant coefficient of g is never read (nc table), so g itself is
    passed for h.
    """
    k = rows.shape[0] - 1
    U, C, N = out.shape
    acc = np.zeros((U, C, N))
    acc[:, 0, :] = rows[k]
    if k == 0:
        out[...] = acc
        return
    tmp = np.empty((U, C, N))
    for j in range(k - 1, -1, -1):
        for o in range(C):
            s, e = ptr[o], ptr[o + 1]
            row = tmp[:, o, :]
            row[...] = 0.0
            for r in range(s, e):
                row += acc[:, ni[r], :] * g[:, nj[r], :]
            if o == 0:
                row += rows[j]
        acc, tmp = tmp, acc
    out[...] = acc


def _blend_np(out, x, p2, p3, rows):
    """out = sum_j rows[j] * x̂^j, value slot pinned to rows[0]."""
    k = rows.shape[0] - 1
    if k == 0:
        out[...] = 0.0
    else:
        np.multiply(x, rows[1][:, None, :], out=out)
        if k >= 2:
            out += p2 * rows[2][:, None, :]
        if k >= 3:
            out += p3 * rows[3][:, None, :]
    out[:, 0, :] = rows[0]


_USE_NUMBA = False
if not os.environ.get("MHDPINN_NO_NUMBA"):
    try:
        import numba

        @numba.njit(cache=True, fastmath=False)
        def _gather_rows_nb(buf, src_a, src_b, ptr, sel_a, sel_b, group):
            # buf = sum over the group's rows of src_a[sel_a]*src_b[sel_b]
            N = buf.shape[0]
            for n in range(N):
                buf[n] = 0.0
            for r in range(ptr[group], ptr[group + 1]):
                x = src_a[sel_a[r]]
                y = src_b[sel_b[r]]
                for n in range(N):
                    buf[n] += x[n] * y[n]

        @numba.njit(cache=True, fastmath=False)
        def _mul_nb(out, a, b, ptr, ti, tj):  # pragma: no cover - mirrors _mul_np
            U, C, N = out.shape
            buf = np.empty(N)
            for u in range(U):
                au, bu, ou = a[u], b[u], out[u]
                for o in range(C):
                    _gather_rows_nb(buf, au, bu, ptr, ti, tj, o)
                    dst = ou[o]
                    for n in range(N):
                        dst[n] = buf[n]

        @numba.njit(cache=True, fastmath=False)
        def _corr_nb(out, co, x, ptr, to, txs):  # pragma: no cover
            U, C, N = out.shape
            buf = np.empty(N)
            for u in range(U):
                cu, xu, ou = co[u], x[u], out[u]
                for g in range(C):
                    _gather_rows_nb(buf, cu, xu, ptr, to, txs, g)
                    dst = ou[g]
                    for n in range(N):
                        dst[n] = buf[n]

        @numba.njit(cache=True, fastmath=False)
        def _blend_nb(out, x, p2, p3, rows):  # pragma: no cover - mirrors _blend_np
            k = rows.shape[0] - 1
            U, C, N = out.shape
            for u in range(U):
                for n in range(N):
                    out[u, 0, n] = rows[0, u, n]
                if k == 0:
                    continue
                r1 = rows[1, u]
                for c in range(1, C):
                    xc, oc = x[u, c], out[u, c]
                    if k == 1:
                        for n in range(N):
                            oc[n] = r1[n] * xc[n]
                    elif k == 2:
                        r2 = rows[2, u]
                        pc = p2[u, c]
                        for n in range(N):
                            oc[n] = r1[n] * xc[n] + r2[n] * pc[n]
                    else:
                        r2, r3 = rows[2, u], rows[3, u]
                        pc, qc = p2[u, c], p3[u, c]
                        for n in range(N):
                            oc[n] = (r1[n] * xc[n] + r2[n] * pc[n]) + r3[n] * qc[n]

        @numba.njit(cache=True, fastmath=False)
        def _compose_nb(out, g, rows, ptr, ni, nj):  # pragma: no cover
            k = rows.shape[0] - 1
            U, C, N = out.shape
            acc = np.empty((C, N))
            nxt = np.empty((C, N))
            buf = np.empty(N)
            for u in range(U):
                gu = g[u]
                for n in range(N):
                    acc[0, n] = rows[k, u, n]
                for c in range(1, C):
                    for n in range(N):
                        acc[c, n] = 0.0
                for j in range(k - 1, -1, -1):
                    for o in range(C):
                        _gather_rows_nb(buf, acc, gu, ptr, ni, nj, o)
                        if o == 0:
                            for n in range(N):
                                buf[n] += rows[j, u, n]
                        dst = nxt[o]
                        for n in range(N):
                            dst[n] = buf[n]
                    acc, nxt = nxt, acc
                for c in range(C):
                    for n in range(N):
                        out[u, c, n] = acc[c, n]

        _USE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is optional
        pass


def _as3d(data: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(data).reshape(-1, data.shape[-2], data.shape[-1])


def _tabled_product(a: np.ndarray, b: np.ndarray, ptr, ti, tj) -> np.ndarray:
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape)
    a3 = _as3d(np.broadcast_to(a, shape))
    b3 = _as3d(np.broadcast_to(b, shape))
    o3 = out.reshape(-1, shape[-2], shape[-1])
    if _USE_NUMBA:
        _mul_nb(o3, a3, b3, ptr, ti, tj)
    else:
        _mul_np(o3, a3, b3, ptr, ti, tj)
    return out


def mul_raw(space: JetSpace, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _tabled_product(a, b, space.mul_ptr, space.mul_i, space.mul_j)


def nilpotent_powers(space: JetSpace, x: np.ndarray):
    """Truncated powers (x̂², x̂³) of the nonconstant part of x.

    The value slot of x is never read and the results carry zero value
    slots; entries above the space order are None.
    """
    if space.order < 2:
        return None, None
    p2 = _tabled_product(x, x, space.p2_ptr, space.p2_i, space.p2_j)
    if space.order < 3:
        return p2, None
    return p2, _tabled_product(p2, x, space.p3_ptr, space.p3_i, space.p3_j)


def blend_rows(space: JetSpace, x: np.ndarray, p2, p3,
               rows: np.ndarray) -> np.ndarray:
    """Composition from precomputed powers: sum_j rows[j]·x̂^j.

    rows[j] = f^(j)(x0)/j!, shape (k+1,) + x.shape-without-coeff-axis; the
    value slot of the result is exactly rows[0]. Together with
    nilpotent_powers this evaluates the same truncated composition as
    compose_raw while reusing the powers across forward and adjoint passes.
    """
    k = rows.shape[0] - 1
    if k > space.order:
        raise ValueError("more rows than the space order supports")
    if (k >= 2 and p2 is None) or (k >= 3 and p3 is None):
        raise ValueError("blend_rows needs the nilpotent powers up to order k")
    out = np.empty_like(x)
    C, N = x.shape[-2], x.shape[-1]
    o3 = out.reshape(-1, C, N)
    x3 = _as3d(x)
    r3 = np.ascontiguousarray(rows).reshape(rows.shape[0], -1, N)
    dummy = np.zeros((1, 1, 1))
    q2 = _as3d(p2) if k >= 2 else dummy
    q3 = _as3d(p3) if k >= 3 else dummy
    if _USE_NUMBA:
        _blend_nb(o3, x3, q2, q3, r3)
    else:
        _blend_np(o3, x3, q2, q3, r3)
    return out


def corr_raw(space: JetSpace, co: np.ndarray, x: np.ndarray, swap: bool = False) -> np.ndarray:
    """Adjoint of mul_raw c = a*b: dL/da = corr(dL/dc, b) (swap=False) or
    dL/db = corr(dL/dc, a) (swap=True)."""
    shape = np.broadcast_shapes(co.shape, x.shape)
    out = np.zeros(shape)
    co3 = _as3d(np.broadcast_to(co, shape))
    x3 = _as3d(np.broadcast_to(x, shape))
    o3 = out.reshape(-1, shape[-2], shape[-1])
    if swap:
        ptr, to, txs = space.corr_b_ptr, space.corr_b_o, space.corr_b_i
    else:
        ptr, to, txs = space.corr_a_ptr, space.corr_a_o, space.corr_a_j
    if _USE_NUMBA:
        _corr_nb(o3, co3, x3, ptr, to, txs)
    else:
        _corr_np(o3, co3, x3, ptr, to, txs)
    return out


def compose_raw(space: JetSpace, g: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Truncated composition: coefficients of f(g) given Taylor rows of f.

    rows[j] = f^(j)(g0)/j!, shape (order+1,) + g.shape-without-coeff-axis.
    """
    out = np.empty_like(g)
    g3, o3 = _as3d(g), out.reshape(-1, g.shape[-2], g.shape[-1])
    r3 = np.ascontiguousarray(rows).reshape(rows.shape[0], -1, g.shape[-1])
    if _USE_NUMBA:
        _compose_nb(o3, g3, r3, space.nc_ptr, space.nc_i, space.nc_j)
    else:
        _compose_np(o3, g3, r3, space.nc_ptr, space.nc_i, space.nc_j)
    return out


# ---------------------------------------------------------------------------
# analytic primitive derivative chains


def _chain_tanh(x0, k):
    u = np.tanh(x0)
    out = [u]
    if k >= 1:
        d1 = 1.0 - u * u
        out.append(d1)
    if k >= 2:
        out.append(-2.0 * u * d1)
    if k >= 3:
        out.append(-2.0 * (d1 * d1 + u * out[2]))
    if k >= 4:
        out.append(-2.0 * (3.0 * d1 * out[2] + u * out[3]))
    return out


def _chain_cycle(fns):
    def chain(x0, k):
        return [fns[j % 4](x0) for j in range(k + 1)]

    return chain


def _chain_exp(x0, k):
    e = np.exp(x0)
    return [e] * (k + 1)


def _chain_log(x0, k):
    out = [np.log(x0)]
    if k >= 1:
        inv = 1.0 / x0
        p = inv
        out.append(p)
        sign_fac = 1.0
        for j in range(2, k + 1):
            sign_fac *= -(j - 1)
            p = p * inv
            out.append(sign_fac * p)
    return out


def _chain_recip(x0, k):
    inv = 1.0 / x0
    out = [inv]
    p = inv
    fac = 1.0
    for j in range(1, k + 1):
        fac *= -j
        p = p * inv
        out.append(fac * p)
    return out


def _chain_power(p: float):
    def chain(x0, k):
        out = []
        coef = 1.0
        for j in range(k + 1):
            e = p - j
            if coef == 0.0:
                out.append(np.zeros_like(x0))
            else:
                out.append(coef * np.power(x0, e))
            coef *= e
        return out

    return chain


_SINS = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
_COSS = (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin)


def _chain_sinh(x0, k):
    s, c = np.sinh(x0), np.cosh(x0)
    return [s if j % 2 == 0 else c for j in range(k + 1)]


def _chain_cosh(x0, k):
    s, c = np.sinh(x0), np.cosh(x0)
    return [c if j % 2 == 0 else s for j in range(k + 1)]


PRIMITIVE_CHAINS: dict[str, Callable] = {
    "tanh": _chain_tanh,
    "sin": _chain_cycle(_SINS),
    "cos": _chain_cycle(_COSS),
    "exp": _chain_exp,
    "log": _chain_log,
    "reciprocal": _chain_recip,
    "sinh": _chain_sinh,
    "cosh": _chain_cosh,
    "sqrt": _chain_power(0.5),
}


def chain_rows(
    chain: Callable, g0: np.ndarray, order: int, shift: int = 0
) -> np.ndarray:
    """Taylor rows rows[j] = f^(j+shift)(g0)/j! for j = 0..order."""
    derivs = chain(g0, order + shift)
    rows = np.empty((order + 1,) + np.shape(g0))
    fac = 1.0
    for j in range(order + 1):
        if j > 1:
            fac *= j
        rows[j] = derivs[j + shift] / fac
    return rows


# ---------------------------------------------------------------------------
# user-facing jet arrays


class JetArray:
    """Batched jet: ndarray with trailing axes (coefficient, batch)."""

    __slots__ = ("space", "data")

    def __init__(self, space: JetSpace, data: np.ndarray):
        if data.shape[-2] != space.size:
            raise ValueError(
                f"coefficient axis {data.shape[-2]} != space size {space.size}"
            )
        self.space = space
        self.data = np.asarray(data, dtype=np.float64)

    # -- construction -------------------------------------------------
    @staticmethod
    def zeros(space: JetSpace, shape_head: tuple[int, ...], n: int) -> "JetArray":
        return JetArray(space, np.zeros(shape_head + (space.size, n)))

    # -- views ----------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.data[..., 0, :]

    def coefficient(self, spec) -> np.ndarray:
        return self.data[..., self.space.position(self.space.parse(spec)), :]

    def derivative(self, spec) -> np.ndarray:
        alpha = self.space.parse(spec)
        pos = self.space.position(alpha)
        return self.data[..., pos, :] * self.space.factorials[pos]

    # -- arithmetic -------------------------------------------------------
    def _coerce_const(self, other) -> np.ndarray | None:
        """Scalars and plain arrays act as seeded-variable constants."""
        if isinstance(other, JetArray):
            return None
        return np.asarray(other, dtype=np.float64)

    def __add__(self, other):
        if isinstance(other, JetArray):
            self._check(other)
            return JetArray(self.space, self.data + other.data)
        c = self._coerce_const(other)
        out = self.data.copy()
        out[..., 0, :] += c
        return JetArray(self.space, out)

    __radd__ = __add__

    def __neg__(self):
        return JetArray(self.space, -self.data)

    def __sub__(self, other):
        return self + (-other if isinstance(other, JetArray) else np.negative(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, JetArray):
            self._check(other)
            return JetArray(self.space, mul_raw(self.space, self.data, other.data))
        c = self._coerce_const(other)
        return JetArray(self.space, self.data * np.expand_dims(c, (-2,)) if np.ndim(c) else self.data * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, JetArray):
            return self * reciprocal(other)
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, int) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p < 0:
                return reciprocal(self) ** (-p)
            if p == 0:
                return constant(self.space, np.ones(self.data.shape[:-2] + self.data.shape[-1:]))
            acc = None
            base = self
            while p:
                if p & 1:
                    acc = base if acc is None else acc * base
                p >>= 1
                if p:
                    base = base * base
            return acc
        return power(self, float(p))

    def _check(self, other: "JetArray"):
        if other.space is not self.space:
            raise ValueError("jet arrays from different jet spaces")


def seed_coordinates(space: JetSpace, points: np.ndarray) -> dict[str, JetArray]:
    """Seed one first-order jet per axis from points of shape (N, d)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != len(space.axes):
        raise ValueError(f"points must be (N, {len(space.axes)})")
    n = points.shape[0]
    out = {}
    for a, name in enumerate(space.axes):
        data = np.zeros((space.size, n))
        data[0] = points[:, a]
        if space.caps[a] >= 1 and space.order >= 1:
            alpha = tuple(1 if k == a else 0 for k in range(len(space.axes)))
            data[space.position(alpha)] = 1.0
        out[name] = JetArray(space, data)
    return out


def constant(space: JetSpace, values) -> JetArray:
    values = np.asarray(values, dtype=np.float64)
    data = np.zeros(values.shape[:-1] + (space.size,) + values.shape[-1:])
    data[..., 0, :] = values
    return JetArray(space, data)


def _apply_primitive(name: str, x):
    if isinstance(x, JetArray):
        rows = chain_rows(PRIMITIVE_CHAINS[name], x.value, x.space.order)
        return JetArray(x.space, compose_raw(x.space, x.data, rows))
    return getattr(np, name if name != "reciprocal" else "reciprocal")(
        np.asarray(x, dtype=np.float64)
    )


def sin(x):
    return _apply_primitive("sin", x)


def cos(x):
    return _apply_primitive("cos", x)


def exp(x):
    return _apply_primitive("exp", x)


def log(x):
    return _apply_primitive("log", x)


def sinh(x):
    return _apply_primitive("sinh", x)


def cosh(x):
    return _apply_primitive("cosh", x)


def tanh(x):
    return _apply_primitive("tanh", x)


def sqrt(x):
    return _apply_primitive("sqrt", x)


def reciprocal(x):
    return _apply_primitive("reciprocal", x)


def tan(x):
    if isinstance(x, JetArray):
        return sin(x) * reciprocal(cos(x))
    return np.tan(np.asarray(x, dtype=np.float64))


def power(x, p: float):
    if isinstance(x, JetArray):
        rows = chain_rows(_chain_power(p), x.value, x.space.order)
        return JetArray(x.space, compose_raw(x.space, x.data, rows))
    return np.power(np.asarray(x, dtype=np.float64), p)


def absolute(x):
    if isinstance(x, JetArray):
        if x.space.order >= 1:
            raise NonDifferentiablePrimitiveError(
                "non-differentiable primitive 'abs' inside a differentiated function"
            )
        return JetArray(x.space, np.abs(x.data))
    return np.abs(x)
