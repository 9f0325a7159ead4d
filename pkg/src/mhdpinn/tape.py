"""Reverse-mode tape over jet-valued and plain tensors.

The forward pass of a loss runs on `Tensor` objects whose payload is either a
jet coefficient array (trailing axes (C, N), see `jets`) or a plain ndarray.
Each recorded operation stores a backward closure; `Tape.gradient` replays
them in reverse, accumulating parameter adjoints into a flat vector. Running
ops with ``tape=None`` skips recording entirely (pure evaluation).

Adjoint buffers may alias an upstream adjoint on their first contribution,
so accumulation always allocates (``adj = adj + more``) instead of ``+=``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import jets
from .jets import (
    JetSpace,
    blend_rows,
    chain_rows,
    corr_raw,
    mul_raw,
    nilpotent_powers,
)

__all__ = [
    "NonFiniteIntermediateError",
    "ParameterVector",
    "Tape",
    "Tensor",
    "parameter_vector",
]


class NonFiniteIntermediateError(FloatingPointError):
    def __init__(self, record_index: int, context: str):
        self.record_index = record_index
        super().__init__(
            f"non-finite intermediate at tape record {record_index} ({context})"
        )


@dataclass(frozen=True)
class ParamEntry:
    name: str
    shape: tuple[int, ...]
    offset: int
    size: int


class ParameterVector:
    """Flat float64 parameter storage plus a structured layout."""

    def __init__(self, values: np.ndarray, layout: Sequence[ParamEntry]):
        self.values = np.asarray(values, dtype=np.float64)
        self.layout = tuple(layout)
        self._by_name = {e.name: e for e in self.layout}
        total = sum(e.size for e in self.layout)
        if self.values.shape != (total,):
            raise ValueError(f"flat length {self.values.shape} != layout total {total}")

    def __len__(self) -> int:
        return self.values.size

    def entry(self, name: str) -> ParamEntry:
        return self._by_name[name]

    def view(self, name: str) -> np.ndarray:
        e = self._by_name[name]
        return self.values[e.offset : e.offset + e.size].reshape(e.shape)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.layout)

    def with_values(self, values: np.ndarray) -> "ParameterVector":
        return ParameterVector(values, self.layout)

    def zeros_like(self) -> np.ndarray:
        return np.zeros_like(self.values)


def parameter_vector(parts: Sequence[tuple[str, np.ndarray]]) -> ParameterVector:
    """Pack named arrays (in order) into a flat vector with layout."""
    layout = []
    offset = 0
    chunks = []
    for name, arr in parts:
        arr = np.asarray(arr, dtype=np.float64)
        layout.append(ParamEntry(name, arr.shape, offset, arr.size))
        offset += arr.size
        chunks.append(arr.reshape(-1))
    values = np.concatenate(chunks) if chunks else np.zeros(0)
    return ParameterVector(values, layout)


class Tape:
    """Single-use record of one forward pass."""

    def __init__(self, check_finite: bool = False):
        self.records: list[tuple[tuple[int, ...], Callable | None, tuple | None]] = []
        self.check_finite = check_finite

    def _add(self, parents: tuple[int, ...], backward, leaf_slice, data, context: str) -> int:
        idx = len(self.records)
        if self.check_finite and not np.all(np.isfinite(data)):
            raise NonFiniteIntermediateError(idx, context)
        self.records.append((parents, backward, leaf_slice))
        return idx

    def leaf(self, params: ParameterVector, name: str) -> "Tensor":
        e = params.entry(name)
        idx = self._add((), None, (e.offset, e.size), params.view(name), f"leaf {name}")
        return Tensor(params.view(name), None, self, idx)

    def gradient(self, loss: "Tensor", n_params: int) -> np.ndarray:
        grad = np.zeros(n_params)
        if loss.tape is None or loss.idx < 0:
            return grad
        if loss.tape is not self:
            raise ValueError("loss tensor does not belong to this tape")
        adj: dict[int, np.ndarray] = {loss.idx: np.ones_like(loss.data)}
        for idx in range(len(self.records) - 1, -1, -1):
            a = adj.pop(idx, None)
            if a is None:
                continue
            parents, backward, leaf_slice = self.records[idx]
            if leaf_slice is not None:
                off, size = leaf_slice
                grad[off : off + size] += np.asarray(a).reshape(-1)
                continue
            if backward is None:
                continue
            contributions = backward(a)
            for pidx, pa in zip(parents, contributions):
                if pa is None or pidx < 0:
                    continue
                prev = adj.get(pidx)
                adj[pidx] = pa if prev is None else prev + pa
        return grad


class Tensor:
    """Jet-valued (space set) or plain (space None) node."""

    __slots__ = ("data", "space", "tape", "idx")

    # ndarray <op> Tensor must hit the reflected methods below, not numpy's
    # elementwise loop (which would build object arrays of Tensors)
    __array_ufunc__ = None

    def __init__(self, data: np.ndarray, space: JetSpace | None, tape: Tape | None, idx: int = -1):
        self.data = np.asarray(data, dtype=np.float64)
        self.space = space
        self.tape = tape
        self.idx = idx

    # -- operator sugar (plain and jet addition/multiplication rules) -----
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal_plain(other))
        return scale(self, 1.0 / np.asarray(other, dtype=np.float64))


def _wrap(data, space, tape, parents, backward, context) -> Tensor:
    if tape is None:
        return Tensor(data, space, None)
    idx = tape._add(tuple(p.idx for p in parents), backward, None, data, context)
    return Tensor(data, space, tape, idx)


def constant(data, space: JetSpace | None = None, tape: Tape | None = None) -> Tensor:
    """Embed a constant (no gradient flows into it)."""
    if space is not None and np.ndim(data) >= 2 and np.shape(data)[-2] == space.size:
        arr = np.asarray(data, dtype=np.float64)
    elif space is not None:
        arr = np.asarray(data, dtype=np.float64)
        full = np.zeros(arr.shape[:-1] + (space.size,) + arr.shape[-1:])
        full[..., 0, :] = arr
        arr = full
    else:
        arr = np.asarray(data, dtype=np.float64)
    return Tensor(arr, space, None)


def _same_space(a: Tensor, b: Tensor):
    if a.space is not b.space:
        raise ValueError("tensors live in different jet spaces")


# ---------------------------------------------------------------------------
# shared arithmetic


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=np.float64)
        if a.space is not None and (c.ndim < 2 or c.shape[-2] != a.space.size):
            data = a.data.copy()
            data[..., 0, :] += c
        else:
            data = a.data + c
        return _wrap(data, a.space, a.tape, (a,), lambda adj: (adj,), "add-const")
    _same_space(a, b)
    data = a.data + b.data
    # capture shapes, not the tensors: a closure holding a Tensor would tie
    # the tape into a reference cycle the allocator only frees on gc passes
    ashape, bshape = a.data.shape, b.data.shape

    def backward(adj):
        return _unbroadcast(adj, ashape), _unbroadcast(adj, bshape)

    tape = a.tape or b.tape
    return _wrap(data, a.space, tape, (a, b), backward, "add")


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, np.negative(np.asarray(b, dtype=np.float64)))
    _same_space(a, b)
    data = a.data - b.data
    ashape, bshape = a.data.shape, b.data.shape

    def backward(adj):
        return _unbroadcast(adj, ashape), _unbroadcast(-adj, bshape)

    tape = a.tape or b.tape
    return _wrap(data, a.space, tape, (a, b), backward, "sub")


def scale(a: Tensor, c) -> Tensor:
    """Multiply by a constant scalar or per-batch array (no gradient into c)."""
    c = np.asarray(c, dtype=np.float64)
    if a.space is not None and c.ndim:
        c = np.expand_dims(c, -2)
    data = a.data * c
    return _wrap(data, a.space, a.tape, (a,), lambda adj: (adj * c,), "scale")


def _unbroadcast(adj: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if adj.shape == shape:
        return adj
    extra = adj.ndim - len(shape)
    if extra:
        adj = adj.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (s, t) in enumerate(zip(adj.shape, shape)) if t == 1 and s != 1)
    if axes:
        adj = adj.sum(axis=axes, keepdims=True)
    return adj


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, b)
    tape = a.tape or b.tape
    if a.space is not None and b.space is not None:
        _same_space(a, b)
        space = a.space
        data = mul_raw(space, a.data, b.data)
        adata, bdata = a.data, b.data

        def backward(adj):
            return (
                _unbroadcast(corr_raw(space, adj, bdata), adata.shape),
                _unbroadcast(corr_raw(space, adj, adata, swap=True), bdata.shape),
            )

        return _wrap(data, space, tape, (a, b), backward, "jet-mul")
    if a.space is None and b.space is None:
        data = a.data * b.data
        adata, bdata = a.data, b.data

        def backward(adj):
            return (
                _unbroadcast(adj * bdata, adata.shape),
                _unbroadcast(adj * adata, bdata.shape),
            )

        return _wrap(data, None, tape, (a, b), backward, "mul")
    raise ValueError("cannot multiply jet tensor by plain tensor; extract first")


def reciprocal_plain(a: Tensor) -> Tensor:
    if a.space is not None:
        raise ValueError("reciprocal_plain is for plain tensors")
    inv = 1.0 / a.data

    def backward(adj):
        return (-adj * inv * inv,)

    return _wrap(inv, None, a.tape, (a,), backward, "reciprocal")


def square(a: Tensor) -> Tensor:
    if a.space is not None:
        raise ValueError("square is for plain tensors; jet tensors use mul")
    data = a.data * a.data
    adata = a.data

    def backward(adj):
        return (2.0 * adj * adata,)

    return _wrap(data, None, a.tape, (a,), backward, "square")


def mean_all(a: Tensor) -> Tensor:
    if a.space is not None:
        raise ValueError("mean_all is for plain tensors")
    n = a.data.size
    data = np.asarray(a.data.mean())
    shape = a.data.shape

    def backward(adj):
        return (np.broadcast_to(adj / n, shape),)

    return _wrap(data, None, a.tape, (a,), backward, "mean")


def sum_all(a: Tensor) -> Tensor:
    if a.space is not None:
        raise ValueError("sum_all is for plain tensors")
    data = np.asarray(a.data.sum())
    shape = a.data.shape

    def backward(adj):
        return (np.broadcast_to(adj, shape),)

    return _wrap(data, None, a.tape, (a,), backward, "sum")


# ---------------------------------------------------------------------------
# network building blocks


def matmul_stacked(w: Tensor, x: Tensor) -> Tensor:
    """Batched linear map: w (M, out, fin) @ x (M, fin, C, N)."""
    M, fout, fin = w.data.shape
    _, _, C, N = x.data.shape
    x3 = x.data.reshape(M, fin, C * N)
    data = (w.data @ x3).reshape(M, fout, C, N)
    wdata = w.data

    def backward(adj):
        adj3 = np.ascontiguousarray(adj).reshape(M, fout, C * N)
        adj_w = adj3 @ x3.transpose(0, 2, 1)
        adj_x = (wdata.transpose(0, 2, 1) @ adj3).reshape(M, fin, C, N)
        return adj_w, adj_x

    tape = w.tape or x.tape
    return _wrap(data, x.space, tape, (w, x), backward, "matmul-stacked")


def affine_stacked(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """matmul_stacked plus bias on the constant coefficient, one node.

    Writing the bias into the product's fresh output avoids the full-array
    copy a separate bias node would make.
    """
    M, fout, fin = w.data.shape
    _, _, C, N = x.data.shape
    x3 = x.data.reshape(M, fin, C * N)
    data = (w.data @ x3).reshape(M, fout, C, N)
    data[:, :, 0, :] += b.data[..., None]
    wdata = w.data

    def backward(adj):
        adj3 = np.ascontiguousarray(adj).reshape(M, fout, C * N)
        adj_w = adj3 @ x3.transpose(0, 2, 1)
        adj_x = (wdata.transpose(0, 2, 1) @ adj3).reshape(M, fin, C, N)
        return adj_w, adj_x, adj[:, :, 0, :].sum(axis=-1)

    tape = w.tape or x.tape or b.tape
    return _wrap(data, x.space, tape, (w, x, b), backward, "affine-stacked")


def matmul(w: Tensor, x: Tensor) -> Tensor:
    """Plain linear map: w (out, fin) @ x (fin, C, N) or (fin, N)."""
    fout, fin = w.data.shape
    tail = x.data.shape[1:]
    x2 = x.data.reshape(fin, -1)
    data = (w.data @ x2).reshape((fout,) + tail)
    wdata = w.data

    def backward(adj):
        adj2 = np.ascontiguousarray(adj).reshape(fout, -1)
        return adj2 @ x2.T, (wdata.T @ adj2).reshape((fin,) + tail)

    tape = w.tape or x.tape
    return _wrap(data, x.space, tape, (w, x), backward, "matmul")


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """Add per-unit bias to the constant coefficient (jet) or value (plain)."""
    if x.space is not None:
        data = x.data.copy()
        data[..., 0, :] += b.data[..., None]

        def backward(adj):
            return adj, adj[..., 0, :].sum(axis=-1)

    else:
        data = x.data + b.data[..., None]

        def backward(adj):
            return adj, adj.sum(axis=-1)

    tape = x.tape or b.tape
    return _wrap(data, x.space, tape, (x, b), backward, "bias")


def compose(name: str, x: Tensor) -> Tensor:
    """Apply an analytic primitive through the jet space."""
    space = x.space
    if space is None:
        chain = jets.PRIMITIVE_CHAINS[name]
        data = chain(x.data, 0)[0]
        xdata = x.data

        def backward(adj):
            return (adj * chain(xdata, 1)[1],)

        return _wrap(data, None, x.tape, (x,), backward, f"{name}")
    chain = jets.PRIMITIVE_CHAINS[name]
    k = space.order
    g0 = np.ascontiguousarray(x.data[..., 0, :])
    # one extra derivative row so the adjoint pass reuses this chain call
    rows = chain_rows(chain, g0, k + 1)
    p2, p3 = nilpotent_powers(space, x.data)
    data = blend_rows(space, x.data, p2, p3, rows[: k + 1])
    xdata = x.data

    def backward(adj):
        # d(f∘g)/dg as a jet is T_k(f'∘g); the adjoint is its correlation
        # with the output adjoint. T_k(f'∘g) = sum_j (j+1)·rows[j+1]·x̂^j
        # reuses the stored powers, so only the correlation costs anything.
        scale = np.arange(1.0, k + 2.0).reshape((k + 1,) + (1,) * (rows.ndim - 1))
        w = blend_rows(space, xdata, p2, p3, rows[1:] * scale)
        return (corr_raw(space, adj, w),)

    return _wrap(data, space, x.tape, (x,), backward, f"jet-{name}")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = x.data.reshape(shape)
    orig = x.data.shape

    def backward(adj):
        return (adj.reshape(orig),)

    return _wrap(data, x.space, x.tape, (x,), backward, "reshape")


def extract(x: Tensor, head: int, position: int, factor: float = 1.0) -> Tensor:
    """Take one (head, coefficient) slice of a jet tensor as a plain tensor.

    x has shape (heads, C, N); the result is (N,) scaled by `factor`
    (the multi-index factorial when extracting a derivative).
    """
    if x.space is None:
        raise ValueError("extract needs a jet tensor")
    data = x.data[head, position, :] * factor
    shape = x.data.shape

    def backward(adj):
        out = np.zeros(shape)
        out[head, position, :] = adj * factor
        return (out,)

    return _wrap(data, None, x.tape, (x,), backward, "extract")


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack plain (N,) tensors into (K, N) for batched supervision terms."""
    if any(t.space is not None for t in tensors):
        raise ValueError("stack_rows needs plain tensors")
    data = np.stack([t.data for t in tensors])
    tape = next((t.tape for t in tensors if t.tape is not None), None)
    n = len(tensors)

    def backward(adj):
        return tuple(adj[k] for k in range(n))

    return _wrap(data, None, tape, tuple(tensors), backward, "stack")
