"""Run configuration: INI text in, validated RunConfig out.

One config file describes one run. Files are flat INI sections of
key = value pairs; every key is validated against the owning module's
preconditions before any compute happens, and unknown sections or keys
are rejected by name. Command-line overrides use dot paths
("schedule.n_adam=100") and pass through the same validation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

from .benchmarks import (
    ARCHITECTURES,
    CASE_IDS,
    BenchmarkCase,
    NetworkDefaults,
    benchmark_case,
    hartmann_case,
    sampling_variant,
    steady2d_case,
)
from .geometry import PRESETS, NoiseSpec
from .operators import FORMULATIONS
from .training import LossWeights, Schedule

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_config",
    "parse_overrides",
    "config_snapshot",
    "build_case",
]


class ConfigError(ValueError):
    """Invalid run configuration; message names the key and constraint."""


@dataclass(frozen=True)
class RunConfig:
    benchmark: str = "steady2d"
    formulation: str = "a2"
    architecture: str = "mhdnet"
    output_dir: str = ""
    # physics overrides; nan means "use the benchmark's published value"
    reynolds: float = float("nan")
    magnetic_reynolds: float = float("nan")
    coupling: float = float("nan")
    # architecture; negative / nan means "use the benchmark's published value"
    subnets: int = -1
    width: int = -1
    hidden_layers: int = -1
    modes: int = -1
    scale: float = float("nan")
    stddev_step: float = float("nan")
    baseline_width: int = -1
    # sampling budget; negative means "use the benchmark's published count"
    # (parse_config resolves these, so snapshots echo concrete numbers)
    interior: int = -1
    boundary: int = -1
    initial: int = -1
    # loss weights
    weight_equation: float = 1.0
    weight_initial: float = 100.0
    weight_boundary: float = 100.0
    weight_data: float = 100.0
    # optimizer schedule
    n_adam: int = 30000
    adam_lr: float = 1e-3
    n_lbfgs_max: int = 1000
    grad_tol: float = 1e-9
    # boundary supervision
    mask: str = "standard"
    noise_ratio: float = 0.0
    # rng streams
    seed_sampling: int = 0
    seed_init: int = 0
    seed_noise: int = 0

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(equation=self.weight_equation,
                           initial=self.weight_initial,
                           boundary=self.weight_boundary,
                           data=self.weight_data)

    @property
    def schedule(self) -> Schedule:
        return Schedule(n_adam=self.n_adam, adam_lr=self.adam_lr,
                        n_lbfgs_max=self.n_lbfgs_max, grad_tol=self.grad_tol)

    def network_defaults(self, base: NetworkDefaults) -> NetworkDefaults:
        """Architecture settings with unset fields taken from `base`."""

        def pick(mine, published):
            return published if (mine == -1 or mine != mine) else mine

        return NetworkDefaults(
            subnets=pick(self.subnets, base.subnets),
            width=pick(self.width, base.width),
            hidden_layers=pick(self.hidden_layers, base.hidden_layers),
            modes=pick(self.modes, base.modes),
            scale=pick(self.scale, base.scale),
            stddev_step=pick(self.stddev_step, base.stddev_step),
            baseline_width=pick(self.baseline_width, base.baseline_width),
            adam_lr=self.adam_lr,
            constraint_weight=self.weight_boundary)


def _check_positive(v):
    return v > 0


def _check_nonnegative(v):
    return v >= 0


def _check_nan_or_positive(v):
    return v != v or v > 0


def _check_set_or_positive(v):
    return v >= 1 or v == -1


def _anything(v):
    return True


# section -> key -> (RunConfig field, caster, constraint, constraint text)
_SCHEMA = {
    "run": {
        "benchmark": ("benchmark", str, lambda v: v in CASE_IDS,
                      f"one of {CASE_IDS}"),
        "formulation": ("formulation", str.lower,
                        lambda v: v in FORMULATIONS,
                        f"one of {FORMULATIONS}"),
        "architecture": ("architecture", str, lambda v: v in ARCHITECTURES,
                         f"one of {ARCHITECTURES}"),
        "output_dir": ("output_dir", str, _anything, ""),
    },
    "physics": {
        "reynolds": ("reynolds", float, _check_nan_or_positive, "> 0"),
        "magnetic_reynolds": ("magnetic_reynolds", float,
                              _check_nan_or_positive, "> 0"),
        "coupling": ("coupling", float, _check_nan_or_positive, "> 0"),
    },
    "network": {
        "subnets": ("subnets", int, _check_set_or_positive, ">= 1"),
        "width": ("width", int, _check_set_or_positive, ">= 1"),
        "hidden_layers": ("hidden_layers", int, _check_set_or_positive,
                          ">= 1"),
        "modes": ("modes", int, _check_set_or_positive, ">= 1"),
        "scale": ("scale", float, _check_nan_or_positive, "> 0"),
        "stddev_step": ("stddev_step", float, _check_nan_or_positive, "> 0"),
        "baseline_width": ("baseline_width", int, _check_set_or_positive,
                           ">= 1"),
    },
    "sampling": {
        "interior": ("interior", int, _check_set_or_positive,
                     ">= 1 (-1 keeps the benchmark's count)"),
        "boundary": ("boundary", int, _check_set_or_positive,
                     ">= 1 (-1 keeps the benchmark's count)"),
        "initial": ("initial", int, lambda v: v >= -1,
                    ">= 0 (-1 keeps the benchmark's count)"),
    },
    "weights": {
        "equation": ("weight_equation", float, _check_nonnegative, ">= 0"),
        "initial": ("weight_initial", float, _check_nonnegative, ">= 0"),
        "boundary": ("weight_boundary", float, _check_nonnegative, ">= 0"),
        "data": ("weight_data", float, _check_nonnegative, ">= 0"),
    },
    "schedule": {
        "n_adam": ("n_adam", int, _check_nonnegative, ">= 0"),
        "adam_lr": ("adam_lr", float, _check_positive, "> 0"),
        "n_lbfgs_max": ("n_lbfgs_max", int, _check_nonnegative, ">= 0"),
        "grad_tol": ("grad_tol", float, _check_positive, "> 0"),
    },
    "supervision": {
        "mask": ("mask", str, lambda v: v in PRESETS, f"one of {PRESETS}"),
        "noise_ratio": ("noise_ratio", float, _check_nonnegative, ">= 0"),
    },
    "seeds": {
        "sampling": ("seed_sampling", int, _anything, ""),
        "init": ("seed_init", int, _anything, ""),
        "noise": ("seed_noise", int, _anything, ""),
    },
}

_FIELD_TO_PATH = {
    spec[0]: (section, key)
    for section, keys in _SCHEMA.items()
    for key, spec in keys.items()
}


def _set(values: dict, section: str, key: str, raw: str) -> None:
    if section not in _SCHEMA:
        raise ConfigError(
            f"unknown section [{section}]; have {tuple(_SCHEMA)}")
    if key not in _SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]; "
                          f"have {tuple(_SCHEMA[section])}")
    field, caster, check, constraint = _SCHEMA[section][key]
    try:
        value = caster(raw.strip() if isinstance(raw, str) else raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"[{section}] {key}: cannot read {raw!r} as "
            f"{ {int: 'an integer', float: 'a number'}.get(caster, 'text') }"
        ) from None
    if not check(value):
        raise ConfigError(f"[{section}] {key}: {value!r} violates {constraint}")
    values[field] = value


def _validate_crossfield(cfg: RunConfig) -> RunConfig:
    # resolve "keep the benchmark's count" sentinels so the snapshot echoes
    # the numbers the run will actually use
    base = benchmark_case(cfg.benchmark)
    faces = len(base.domain.face_names)
    if cfg.interior == -1:
        cfg = replace(cfg, interior=base.n_interior)
    if cfg.boundary == -1:
        cfg = replace(cfg, boundary=base.n_per_face * faces)
    if cfg.initial == -1 and not base.domain.steady:
        cfg = replace(cfg, initial=base.n_initial)
    d = cfg.network_defaults(base.defaults)
    cfg = replace(cfg, subnets=d.subnets, width=d.width,
                  hidden_layers=d.hidden_layers, modes=d.modes,
                  scale=d.scale, stddev_step=d.stddev_step,
                  baseline_width=d.baseline_width)
    # building the case exercises every benchmark-side precondition
    # (Reynolds positivity, boundary budget divisibility, preset names)
    build_case(cfg)
    return cfg


def parse_config(text: str, overrides: tuple[str, ...] = ()) -> RunConfig:
    """Parse INI text plus dot-path overrides into a validated RunConfig."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values: dict = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            _set(values, section, key, raw)
    for path, raw in parse_overrides(overrides):
        section, _, key = path.partition(".")
        _set(values, section, key, raw)
    cfg = RunConfig(**values)
    return _validate_crossfield(cfg)


def parse_overrides(pairs) -> list[tuple[str, str]]:
    """Split "section.key=value" strings; malformed entries are named."""
    out = []
    for item in pairs:
        path, sep, raw = item.partition("=")
        if not sep or "." not in path:
            raise ConfigError(
                f"override {item!r} must look like section.key=value")
        out.append((path.strip(), raw.strip()))
    return out


def config_snapshot(cfg: RunConfig) -> str:
    """Canonical INI text for a RunConfig; parse_config round-trips it."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (field, _, _, _) in keys.items():
            lines.append(f"{key} = {getattr(cfg, field)}")
        lines.append("")
    return "\n".join(lines)


def build_case(cfg: RunConfig) -> BenchmarkCase:
    """Benchmark case with every configured override applied."""
    has_re = cfg.reynolds == cfg.reynolds
    has_rm = cfg.magnetic_reynolds == cfg.magnetic_reynolds
    has_s = cfg.coupling == cfg.coupling
    if cfg.benchmark == "steady2d":
        if has_rm or has_s:
            raise ConfigError("[physics] magnetic_reynolds/coupling apply "
                              "to the hartmann benchmark only")
        case = steady2d_case(cfg.reynolds) if has_re else steady2d_case()
    elif cfg.benchmark == "hartmann":
        base = hartmann_case()
        case = hartmann_case(
            re=cfg.reynolds if has_re else base.phys.reynolds,
            rm=cfg.magnetic_reynolds if has_rm else base.phys.magnetic_reynolds,
            s=cfg.coupling if has_s else base.phys.coupling)
    else:
        if has_re or has_rm or has_s:
            raise ConfigError(
                f"[physics] overrides are not supported for {cfg.benchmark}")
        case = benchmark_case(cfg.benchmark)
    if cfg.interior != -1 or cfg.boundary != -1:
        interior = cfg.interior if cfg.interior != -1 else case.n_interior
        boundary = cfg.boundary if cfg.boundary != -1 \
            else case.n_per_face * len(case.domain.face_names)
        try:
            case = sampling_variant(case, interior, boundary)
        except ValueError as exc:
            raise ConfigError(f"[sampling] boundary: {exc}") from None
    if cfg.initial >= 0:
        if case.domain.steady:
            raise ConfigError("[sampling] initial: "
                              f"{cfg.benchmark} has no initial condition")
        case = replace(case, n_initial=cfg.initial)
    noise = NoiseSpec(cfg.noise_ratio, seed=cfg.seed_noise) \
        if cfg.noise_ratio > 0 else None
    case = case.with_supervision(cfg.mask, noise)
    if cfg.mask != "standard" and case.domain.dim != 2:
        raise ConfigError("[supervision] mask: named presets other than "
                          "'standard' are 2D-only")
    return replace(case, defaults=cfg.network_defaults(case.defaults))
