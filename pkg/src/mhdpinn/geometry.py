"""Spacetime box domains, collocation sampling, and boundary perturbations.

Sampling draws from named RNG streams (interior / boundary / initial / noise)
derived from one run seed, so toggling one sampler never shifts another.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "BoundaryMask",
    "Domain",
    "NoiseSpec",
    "PRESETS",
    "SampleBatch",
    "apply_noise",
    "boundary_mask_preset",
    "export_csv",
    "latin_hypercube",
    "sample_boundary",
    "sample_initial",
    "stream",
]

_SPATIAL_AXES = ("x", "y", "z")
_STREAMS = {"interior": 0, "boundary": 1, "initial": 2, "noise": 3, "evaluation": 4}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one sampling role under one run seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), _STREAMS[name])))


@dataclass(frozen=True)
class Domain:
    bounds: tuple[tuple[float, float], ...]
    duration: float | None = None  # None = steady

    def __post_init__(self):
        if len(self.bounds) not in (2, 3):
            raise ValueError("spatial dimension must be 2 or 3")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty axis interval ({lo}, {hi})")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def steady(self) -> bool:
        return self.duration is None

    @property
    def axes(self) -> tuple[str, ...]:
        names = _SPATIAL_AXES[: self.dim]
        return names if self.steady else names + ("t",)

    @property
    def face_names(self) -> tuple[str, ...]:
        out = []
        for a in range(self.dim):
            out += [f"{_SPATIAL_AXES[a]}_lo", f"{_SPATIAL_AXES[a]}_hi"]
        return tuple(out)


@dataclass
class SampleBatch:
    points: np.ndarray  # (N, dim [+1 for time]), time last
    role: str  # interior | boundary | initial
    normals: np.ndarray | None = None  # (N, dim), boundary only
    targets: dict[str, np.ndarray] | None = None
    faces: np.ndarray | None = None  # per-point face label, boundary only
    supervised: dict[str, np.ndarray] | None = None  # field group -> bool mask
    noisy: np.ndarray | None = None  # bool mask, boundary only

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class BoundaryMask:
    """Which faces supervise which field group, and which carry noise."""

    velocity_faces: frozenset
    magnetic_faces: frozenset
    noisy_faces: frozenset = frozenset()


@dataclass(frozen=True)
class NoiseSpec:
    amplitude_ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude_ratio < 0:
            raise ValueError("amplitude_ratio must be >= 0")


PRESETS = (
    "standard",
    "right",
    "upper_right",
    "upper_down",
    "middle",
    "noisy",
    "middle_noisy",
    "stagger",
)


def boundary_mask_preset(name: str, domain: Domain) -> BoundaryMask:
    """The named 2D supervision/noise configurations for box boundaries."""
    faces = frozenset(domain.face_names)
    if domain.dim != 2:
        if name != "standard":
            raise ValueError("named presets other than 'standard' are 2D-only")
        return BoundaryMask(faces, faces)
    drop = {
        "standard": frozenset(),
        "right": frozenset({"x_hi"}),
        "upper_right": frozenset({"y_hi", "x_hi"}),
        "upper_down": frozenset({"y_hi", "y_lo"}),
        "middle": frozenset({"x_lo", "x_hi"}),
        "noisy": frozenset(),
        "middle_noisy": frozenset(),
        "stagger": None,  # asymmetric, handled below
    }
    if name not in drop:
        raise ValueError(f"unknown boundary preset {name!r}")
    if name == "stagger":
        return BoundaryMask(faces - {"y_lo"}, faces - {"y_hi"})
    kept = faces - drop[name]
    noise = {"noisy": faces, "middle_noisy": frozenset({"x_lo", "x_hi"})}.get(
        name, frozenset()
    )
    return BoundaryMask(kept, kept, noise)


# ---------------------------------------------------------------------------
# samplers


def latin_hypercube(n: int, domain: Domain, seed: int = 0) -> SampleBatch:
    """One point per stratum per axis, strictly interior; time is an axis."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = stream(seed, "interior")
    intervals = list(domain.bounds)
    if not domain.steady:
        intervals.append((0.0, domain.duration))
    cols = []
    for lo, hi in intervals:
        strata = rng.permutation(n)
        u = np.maximum(rng.random(n), 1e-12)  # keep points off stratum edges
        cols.append(lo + (hi - lo) * (strata + u) / n)
    return SampleBatch(points=np.column_stack(cols), role="interior")


def _face_points(domain: Domain, face: str, n: int, rng) -> np.ndarray:
    axis = _SPATIAL_AXES.index(face[0])
    side = 1 if face.endswith("hi") else 0
    pts = np.empty((n, domain.dim))
    for a, (lo, hi) in enumerate(domain.bounds):
        if a == axis:
            pts[:, a] = domain.bounds[a][side]
        else:
            pts[:, a] = lo + (hi - lo) * rng.random(n)
    return pts


def _face_normal(domain: Domain, face: str) -> np.ndarray:
    axis = _SPATIAL_AXES.index(face[0])
    normal = np.zeros(domain.dim)
    normal[axis] = 1.0 if face.endswith("hi") else -1.0
    return normal


def sample_boundary(
    domain: Domain,
    per_face: int,
    mask: BoundaryMask | None = None,
    exact: Callable[[np.ndarray], dict] | None = None,
    seed: int = 0,
) -> SampleBatch:
    """Uniform points on each face that supervises at least one field group.

    Unsteady domains pair every spatial boundary point with a time drawn
    uniformly from (0, T].
    """
    if per_face < 1:
        raise ValueError("need at least one point per face")
    if mask is None:
        faces = frozenset(domain.face_names)
        mask = BoundaryMask(faces, faces)
    active = [
        f
        for f in domain.face_names
        if f in mask.velocity_faces or f in mask.magnetic_faces
    ]
    if not active:
        raise ValueError("mask excludes every face for every field")
    rng = stream(seed, "boundary")
    blocks, normals, labels, vel, mag, noisy = [], [], [], [], [], []
    for f in active:
        pts = _face_points(domain, f, per_face, rng)
        if not domain.steady:
            t = domain.duration * (1.0 - rng.random(per_face))  # (0, T]
            pts = np.column_stack([pts, t])
        blocks.append(pts)
        normals.append(np.tile(_face_normal(domain, f), (per_face, 1)))
        labels += [f] * per_face
        vel.append(np.full(per_face, f in mask.velocity_faces))
        mag.append(np.full(per_face, f in mask.magnetic_faces))
        noisy.append(np.full(per_face, f in mask.noisy_faces))
    points = np.vstack(blocks)
    return SampleBatch(
        points=points,
        role="boundary",
        normals=np.vstack(normals),
        targets=exact(points) if exact is not None else None,
        faces=np.array(labels),
        supervised={"velocity": np.concatenate(vel), "magnetic": np.concatenate(mag)},
        noisy=np.concatenate(noisy),
    )


def sample_initial(
    domain: Domain,
    n: int,
    exact: Callable[[np.ndarray], dict] | None = None,
    seed: int = 0,
) -> SampleBatch:
    """Latin-hypercube spatial points at t = 0 with exact-field targets."""
    if domain.steady:
        raise ValueError("initial sampling needs an unsteady domain")
    if n < 1:
        raise ValueError("need at least one sample")
    rng = stream(seed, "initial")
    cols = []
    for lo, hi in domain.bounds:
        strata = rng.permutation(n)
        u = np.maximum(rng.random(n), 1e-12)
        cols.append(lo + (hi - lo) * (strata + u) / n)
    cols.append(np.zeros(n))
    points = np.column_stack(cols)
    return SampleBatch(
        points=points,
        role="initial",
        targets=exact(points) if exact is not None else None,
    )


def apply_noise(
    batch: SampleBatch, spec: NoiseSpec, where: np.ndarray | None = None
) -> SampleBatch:
    """Additive Gaussian noise, per-component std = ratio x sample std."""
    if batch.targets is None:
        raise ValueError("batch has no targets to perturb")
    if spec.amplitude_ratio == 0.0:
        return batch
    rng = stream(spec.seed, "noise")
    sel = np.ones(len(batch), dtype=bool) if where is None else where
    new = {}
    for name, values in batch.targets.items():
        std = float(np.std(values))
        # draw unconditionally so the stream stays aligned across components
        noise = rng.normal(0.0, spec.amplitude_ratio * std, size=values.shape)
        out = values.copy()
        if std > 0:
            out[sel] += noise[sel]
        new[name] = out
    return replace(batch, targets=new)


def export_csv(batch: SampleBatch, domain: Domain, path):
    """Points plus targets, one header row; normals are not exported."""
    names = list(domain.axes)
    targets = batch.targets or {}
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + list(targets))
        for i in range(len(batch)):
            row = [f"{v:.17g}" for v in batch.points[i]]
            row += [f"{targets[k][i]:.17g}" for k in targets]
            w.writerow(row)
