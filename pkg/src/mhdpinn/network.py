"""Feature embeddings, stacked subnetworks, and the multiscale merge.

A surrogate is M parallel MLP subnets, each reading its own frozen feature
embedding of the spacetime point; a trainable linear merge maps the
concatenated subnet outputs to the final heads. M = 1 with an identity
embedding is the plain baseline on the same code path.

Embeddings carry no trainable parameters, so a batch's embedded features are
computed once (pure numpy on jet coefficients) and reused across epochs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import tape as tp
from .jets import JetArray, JetSpace, chain_rows, compose_raw, jet_space, seed_coordinates
from .tape import ParameterVector, Tape, Tensor, parameter_vector

__all__ = [
    "EmbeddingSpec",
    "SubnetSpec",
    "MultiscaleNetwork",
    "embed_points",
    "embedding_dim",
    "embedding_matrix",
    "forward",
    "forward_from_features",
    "init_params",
    "load_checkpoint",
    "multimodes_network",
    "network_from_dict",
    "pinn_network",
    "save_checkpoint",
]

VARIANTS = ("identity", "original", "gaussian", "multiscale", "positional", "multimodes")


@dataclass(frozen=True)
class EmbeddingSpec:
    """One frozen feature map applied to the raw spacetime point."""

    variant: str = "identity"
    stddev: float = 1.0  # row std of the frequency matrix (gaussian/multimodes)
    modes: int = 32  # frequency count (rows of the matrix)
    scale: float = 1.0  # input scale factor (multiscale/multimodes)
    octaves: int = 4  # doubling levels (positional)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown embedding variant {self.variant!r}")
        if self.variant in ("gaussian", "multimodes") and self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.variant == "positional" and self.octaves < 1:
            raise ValueError("octaves must be >= 1")


@dataclass(frozen=True)
class SubnetSpec:
    output_dim: int
    hidden_layers: int = 4
    width: int = 50
    activation: str = "tanh"

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1 or self.output_dim < 1:
            raise ValueError("subnet needs >= 1 layers, width, outputs")


@dataclass(frozen=True)
class MultiscaleNetwork:
    """M parallel (embedding, subnet) pairs plus the linear merge head."""

    input_dim: int
    embeddings: tuple[EmbeddingSpec, ...]
    subnets: tuple[SubnetSpec, ...]

    def __post_init__(self):
        if len(self.embeddings) != len(self.subnets) or not self.embeddings:
            raise ValueError("need one subnet per embedding, at least one pair")
        s0 = self.subnets[0]
        if any(s != s0 for s in self.subnets):
            # stacked-matmul fast path needs one shared subnet shape
            raise ValueError("all subnets must share one shape")
        dims = {embedding_dim(e, self.input_dim) for e in self.embeddings}
        if len(dims) != 1:
            raise ValueError("all embeddings must produce the same feature dim")

    @property
    def n_subnets(self) -> int:
        return len(self.subnets)

    @property
    def output_dim(self) -> int:
        return self.subnets[0].output_dim

    @property
    def feature_dim(self) -> int:
        return embedding_dim(self.embeddings[0], self.input_dim)


def multimodes_network(
    input_dim: int,
    output_dim: int,
    subnets: int = 4,
    modes: int = 32,
    scale: float = 1.0,
    width: int = 50,
    hidden_layers: int = 4,
    stddev_step: float = 0.1,
    seed: int = 0,
) -> MultiscaleNetwork:
    """Multi-modes surrogate: subnet i uses row std = stddev_step * (i+1)."""
    embeds = tuple(
        EmbeddingSpec(
            variant="multimodes",
            stddev=stddev_step * (i + 1),
            modes=modes,
            scale=scale,
            seed=seed * 1000 + i,
        )
        for i in range(subnets)
    )
    nets = tuple(SubnetSpec(output_dim, hidden_layers, width) for _ in range(subnets))
    return MultiscaleNetwork(input_dim, embeds, nets)


def pinn_network(
    input_dim: int, output_dim: int, width: int = 200, hidden_layers: int = 4
) -> MultiscaleNetwork:
    """Single wide subnet on raw coordinates (the baseline)."""
    return MultiscaleNetwork(
        input_dim,
        (EmbeddingSpec(variant="identity"),),
        (SubnetSpec(output_dim, hidden_layers, width),),
    )


# ---------------------------------------------------------------------------
# embeddings


def embedding_dim(spec: EmbeddingSpec, d: int) -> int:
    return {
        "identity": d,
        "original": 2 * d,
        "gaussian": 2 * spec.modes,
        "multiscale": d,
        "positional": 2 * d * spec.octaves,
        "multimodes": 2 * spec.modes + d,
    }[spec.variant]


@lru_cache(maxsize=None)
def embedding_matrix(spec: EmbeddingSpec, d: int) -> np.ndarray:
    """Frozen frequency matrix (modes, d), rows ~ N(0, stddev^2)."""
    rng = np.random.default_rng(spec.seed)
    return rng.normal(0.0, spec.stddev, size=(spec.modes, d))


def _jet_sin_cos(space: JetSpace, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    from .jets import PRIMITIVE_CHAINS

    g0 = np.ascontiguousarray(g[..., 0, :])
    s = compose_raw(space, g, chain_rows(PRIMITIVE_CHAINS["sin"], g0, space.order))
    c = compose_raw(space, g, chain_rows(PRIMITIVE_CHAINS["cos"], g0, space.order))
    return s, c


def _embed_stacked(spec: EmbeddingSpec, space: JetSpace, coords: np.ndarray) -> np.ndarray:
    """coords (d, C, N) -> features (F, C, N) for one subnet."""
    d = coords.shape[0]
    if spec.variant == "identity":
        return coords
    if spec.variant == "multiscale":
        return spec.scale * coords
    if spec.variant == "original":
        s, c = _jet_sin_cos(space, 2.0 * np.pi * coords)
        return np.concatenate([c, s])
    if spec.variant == "gaussian":
        lin = np.tensordot(2.0 * np.pi * embedding_matrix(spec, d), coords, axes=1)
        s, c = _jet_sin_cos(space, lin)
        return np.concatenate([c, s])
    if spec.variant == "multimodes":
        lin = np.tensordot(2.0 * np.pi * embedding_matrix(spec, d), coords, axes=1)
        s, c = _jet_sin_cos(space, lin)
        return np.concatenate([c, spec.scale * coords, s])
    blocks = []
    for level in range(spec.octaves):
        s, c = _jet_sin_cos(space, float(2 ** level) * coords)
        blocks.extend([s, c])
    return np.concatenate(blocks)


def embed_points(
    net: MultiscaleNetwork, space: JetSpace, points: np.ndarray
) -> np.ndarray:
    """All subnet embeddings of a batch: (M, F, C, N), pure numpy."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != net.input_dim:
        raise ValueError(f"points must be (N, {net.input_dim})")
    coords = seed_coordinates(space, points)
    stacked = np.stack([coords[a].data for a in space.axes])
    return np.stack([_embed_stacked(e, space, stacked) for e in net.embeddings])


# ---------------------------------------------------------------------------
# parameters


def _layer_dims(net: MultiscaleNetwork) -> list[tuple[str, int, int]]:
    sub = net.subnets[0]
    dims = [("layer0", sub.width, net.feature_dim)]
    for layer in range(1, sub.hidden_layers):
        dims.append((f"layer{layer}", sub.width, sub.width))
    dims.append(("head", sub.output_dim, sub.width))
    return dims


def init_params(net: MultiscaleNetwork, seed: int = 0) -> ParameterVector:
    """Glorot-uniform weights, zero biases, deterministic under seed."""
    rng = np.random.default_rng(seed)
    M = net.n_subnets
    parts: list[tuple[str, np.ndarray]] = []
    for name, fout, fin in _layer_dims(net):
        lim = np.sqrt(6.0 / (fin + fout))
        parts.append((f"{name}.w", rng.uniform(-lim, lim, size=(M, fout, fin))))
        parts.append((f"{name}.b", np.zeros((M, fout))))
    out = net.output_dim
    lim = np.sqrt(6.0 / (M * out + out))
    parts.append(("merge.w", rng.uniform(-lim, lim, size=(out, M * out))))
    parts.append(("merge.b", np.zeros(out)))
    return parameter_vector(parts)


def _leaf(params: ParameterVector, name: str, tape: Tape | None) -> Tensor:
    if tape is None:
        return Tensor(params.view(name), None, None)
    return tape.leaf(params, name)


# ---------------------------------------------------------------------------
# forward pass


def forward_from_features(
    net: MultiscaleNetwork,
    params: ParameterVector,
    feats: np.ndarray,
    space: JetSpace,
    tape: Tape | None = None,
) -> Tensor:
    """Run the stacked subnets plus merge on embedded features (M, F, C, N)."""
    M, _, C, N = feats.shape
    act = net.subnets[0].activation
    t = Tensor(feats, space, None)
    for name, _, _ in _layer_dims(net):
        w = _leaf(params, f"{name}.w", tape)
        b = _leaf(params, f"{name}.b", tape)
        t = tp.affine_stacked(w, t, b)
        if name != "head":
            t = tp.compose(act, t)
    out = net.output_dim
    t = tp.reshape(t, (M * out, C, N))
    t = tp.bias_add(tp.matmul(_leaf(params, "merge.w", tape), t), _leaf(params, "merge.b", tape))
    return t


def forward(
    net: MultiscaleNetwork,
    params: ParameterVector,
    space: JetSpace,
    points: np.ndarray,
    tape: Tape | None = None,
    features: np.ndarray | None = None,
) -> Tensor:
    """Embed a batch and run the network; output tensor is (out, C, N).

    The embedding depends only on the points, so callers evaluating the
    same batch repeatedly may pass features precomputed by embed_points.
    """
    feats = embed_points(net, space, points) if features is None else features
    t = forward_from_features(net, params, feats, space, tape)
    if tape is None and not np.all(np.isfinite(t.data)):
        raise FloatingPointError("network output is non-finite")
    return t


def forward_jet(
    net: MultiscaleNetwork,
    params: ParameterVector,
    space: JetSpace,
    points: np.ndarray,
) -> JetArray:
    """Evaluation-mode forward returning a jet array (no tape)."""
    return JetArray(space, forward(net, params, space, points).data)


def value_space(input_axes: Sequence[str]) -> JetSpace:
    """Order-0 space for plain value evaluation through the same path."""
    return jet_space(tuple(input_axes), 0)


# ---------------------------------------------------------------------------
# checkpoints: one JSON header line, then hex floats in layout order


def network_to_dict(net: MultiscaleNetwork) -> dict:
    return {
        "input_dim": net.input_dim,
        "embeddings": [asdict(e) for e in net.embeddings],
        "subnets": [asdict(s) for s in net.subnets],
    }


def network_from_dict(d: dict) -> MultiscaleNetwork:
    return MultiscaleNetwork(
        input_dim=int(d["input_dim"]),
        embeddings=tuple(EmbeddingSpec(**e) for e in d["embeddings"]),
        subnets=tuple(SubnetSpec(**s) for s in d["subnets"]),
    )


def save_checkpoint(
    path, net: MultiscaleNetwork, params: ParameterVector, extra: dict | None = None
):
    header = {
        "network": network_to_dict(net),
        "layout": [[e.name, list(e.shape)] for e in params.layout],
        "extra": extra or {},
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for v in params.values:
            f.write(float(v).hex() + "\n")


def load_checkpoint(path) -> tuple[MultiscaleNetwork, ParameterVector, dict]:
    with open(path) as f:
        header = json.loads(f.readline())
        values = np.array([float.fromhex(line.strip()) for line in f if line.strip()])
    net = network_from_dict(header["network"])
    layout = []
    offset = 0
    for name, shape in header["layout"]:
        size = int(np.prod(shape)) if shape else 1
        layout.append(tp.ParamEntry(name, tuple(shape), offset, size))
        offset += size
    return net, ParameterVector(values, layout), header.get("extra", {})
