"""Training diagnostics: gradient histograms and an empirical NTK probe.

The histogram side answers "which layers still receive signal from which
loss term"; the kernel side is a scalar-network probe whose spectrum
predicts per-eigendirection error decay under full-batch gradient descent.
Both emit CSV for the figures component.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .jets import jet_space
from .network import MultiscaleNetwork, forward, init_params
from .tape import ParameterVector, Tape
from .training import LossWeights, Problem, assemble_loss

# ---------------------------------------------------------------------------
# gradient histograms


@dataclass(frozen=True)
class GradientHistogram:
    """Binned gradient entries of one weighted loss term in one layer."""

    term: str
    layer: str
    epoch: int
    bin_edges: np.ndarray  # (bins + 1,), symmetric about zero
    counts: np.ndarray  # (bins,)

    def __post_init__(self):
        if self.bin_edges.ndim != 1 or self.bin_edges.size < 2:
            raise ValueError("need at least one bin")
        if self.counts.shape != (self.bin_edges.size - 1,):
            raise ValueError("counts must have one entry per bin")

    @property
    def n_parameters(self) -> int:
        return int(self.counts.sum())


_TERMS = ("equation", "initial", "boundary", "data")


def _single_term_weights(term: str, lam: float) -> LossWeights:
    kw = {t: 0.0 for t in _TERMS}
    kw[term] = lam
    return LossWeights(**kw)


def _layer_entries(params: ParameterVector, grad: np.ndarray):
    """(label, gradient entries) per affine layer; stacked subnet layers
    split into one group per subnet so vanishing gradients show up where
    they happen."""
    g = params.with_values(grad)
    out = []
    for e in params.layout:
        if not e.name.endswith(".w"):
            continue
        base = e.name[:-2]
        w = g.view(f"{base}.w")
        b = g.view(f"{base}.b")
        if w.ndim == 3 and w.shape[0] > 1:
            for m in range(w.shape[0]):
                out.append((f"subnet{m + 1}.{base}",
                            np.concatenate([w[m].ravel(), b[m].ravel()])))
        else:
            out.append((base, np.concatenate([w.ravel(), b.ravel()])))
    return out


def gradient_histograms(net: MultiscaleNetwork, params: ParameterVector,
                        problem: Problem, weights: LossWeights, epoch: int,
                        bins: int = 64) -> tuple[GradientHistogram, ...]:
    """Histogram the gradient of each weighted loss term, layer by layer.

    Each term is differentiated separately (others weighted to zero), so a
    histogram shows exactly the update pressure that term puts on a layer.
    Bins span the symmetric range [-a, a] with a the largest magnitude in
    the layer (a = 1 when the gradient vanishes, keeping the zero bin).
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    lam = {"equation": weights.equation, "initial": weights.initial,
           "boundary": weights.boundary, "data": weights.data}
    present = ["equation"]
    if problem.initial is not None:
        present.append("initial")
    if problem.boundary:
        present.append("boundary")
    if problem.data is not None:
        present.append("data")
    out = []
    for term in present:
        if lam[term] == 0.0:
            grad = np.zeros(len(params))
        else:
            tape = Tape()
            total, _ = assemble_loss(net, params, problem,
                                     _single_term_weights(term, lam[term]),
                                     tape)
            grad = tape.gradient(total, len(params))
        for layer, entries in _layer_entries(params, grad):
            a = float(np.max(np.abs(entries)))
            if a == 0.0:
                a = 1.0
            edges = np.linspace(-a, a, bins + 1)
            counts, _ = np.histogram(entries, bins=edges)
            out.append(GradientHistogram(term=term, layer=layer, epoch=epoch,
                                         bin_edges=edges, counts=counts))
    return tuple(out)


HISTOGRAM_COLUMNS = ("term", "layer", "epoch", "bin_lo", "bin_hi", "count")


def write_histograms_csv(histograms, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTOGRAM_COLUMNS)
        for h in histograms:
            for lo, hi, c in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts):
                w.writerow([h.term, h.layer, h.epoch,
                            f"{lo:.17g}", f"{hi:.17g}", int(c)])


# ---------------------------------------------------------------------------
# empirical neural tangent kernel


@dataclass(frozen=True)
class NTKReport:
    kernel: np.ndarray  # (N, N)
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # column i pairs with eigenvalue i
    converged: bool


def _offdiag_norm(a: np.ndarray) -> float:
    # Summing squares of off-diagonal entries directly; subtracting the
    # diagonal sum from the total cancels catastrophically once the
    # off-diagonal mass is small and reports zero too early.
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.linalg.norm(b))


def jacobi_eigh(matrix, max_sweeps: int = 50,
                tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray, bool]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps every (p, q) pair in order, rotating the pair plane to zero the
    off-diagonal entry, until the off-diagonal Frobenius mass falls under
    tol relative to the full norm. Returns eigenvalues in descending order,
    the matching orthogonal column eigenvectors, and a convergence flag
    (False when the sweep budget ran out).
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if n else 0.0
    if n and float(np.max(np.abs(a - a.T))) > 1e-12 * max(scale, 1.0):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    q = np.eye(n)
    norm = float(np.linalg.norm(a))

    def done() -> bool:
        return _offdiag_norm(a) <= tol * max(norm, np.finfo(np.float64).tiny)

    converged = done()
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                t = math.copysign(1.0, theta) / (abs(theta)
                                                 + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp, cr = a[:, p].copy(), a[:, r].copy()
                a[:, p] = c * cp - s * cr
                a[:, r] = s * cp + c * cr
                rp, rr = a[p, :].copy(), a[r, :].copy()
                a[p, :] = c * rp - s * rr
                a[r, :] = s * rp + c * rr
                qp, qr = q[:, p].copy(), q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
        converged = done()
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return lam[order], q[:, order], converged


def ntk_report(kernel, max_sweeps: int = 50, tol: float = 1e-14) -> NTKReport:
    """Eigendecompose a kernel matrix into a report (see jacobi_eigh)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    lam, q, ok = jacobi_eigh(kernel, max_sweeps=max_sweeps, tol=tol)
    return NTKReport(kernel=kernel, eigenvalues=lam, eigenvectors=q,
                     converged=ok)


def _gradient_rows(net: MultiscaleNetwork, params: ParameterVector,
                   points: np.ndarray) -> np.ndarray:
    axes = tuple(f"x{i + 1}" for i in range(points.shape[1]))
    space = jet_space(axes, 0)
    rows = np.empty((points.shape[0], len(params)))
    for i in range(points.shape[0]):
        tape = Tape()
        out = forward(net, params, space, points[i:i + 1], tape=tape)
        rows[i] = tape.gradient(out, len(params))
    return rows


def empirical_ntk(net: MultiscaleNetwork, points, params=None,
                  reinits: int = 10, seed: int = 0, max_sweeps: int = 50,
                  tol: float = 1e-14) -> NTKReport:
    """Parameter-gradient Gram matrix of a scalar network over a point set.

    K[i, j] is the inner product of the parameter gradients of the output
    at points i and j. With explicit params the kernel is that single
    draw; otherwise it averages reinits fresh initializations (seeds
    seed, seed + 1, ...), approximating the expectation over weights.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be (N, dim)")
    if net.output_dim != 1:
        raise ValueError("kernel probe needs a single scalar output head")
    if params is not None:
        draws = [params]
    else:
        if reinits < 1:
            raise ValueError("reinits must be >= 1")
        draws = [init_params(net, seed=seed + r) for r in range(reinits)]
    n = pts.shape[0]
    kernel = np.zeros((n, n))
    for p in draws:
        rows = _gradient_rows(net, p, pts)
        kernel += rows @ rows.T
    kernel /= len(draws)
    return ntk_report(kernel, max_sweeps=max_sweeps, tol=tol)


def ntk_error_prediction(report: NTKReport, e0, t: float) -> np.ndarray:
    """Predicted error after gradient-flow time t (= learning rate x steps):
    e(t) = sum_i exp(-lambda_i t) (q_i . e0) q_i."""
    e0 = np.asarray(e0, dtype=np.float64)
    n = report.kernel.shape[0]
    if e0.shape != (n,):
        raise ValueError(f"e0 must have shape ({n},)")
    if not t >= 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        # the eigenbasis round trip is identity only up to rounding
        return e0.copy()
    coef = report.eigenvectors.T @ e0
    return report.eigenvectors @ (np.exp(-report.eigenvalues * t) * coef)


NTK_COLUMNS = ("index", "eigenvalue")


def write_ntk_csv(report: NTKReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NTK_COLUMNS)
        for i, lam in enumerate(report.eigenvalues):
            w.writerow([i, f"{lam:.17g}"])
