"""Experiment configuration: flat dotted-key text files, fail-closed.

One experiment per file; lines are `key = value` with `#` comments. Values
are ints, reals, `inf`, booleans, bare strings, or comma lists. Unknown keys
are rejected with the offending line number. parse -> serialize -> parse is
a fixed point, and the serialization is what gets hashed into the manifest.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

from .drift import (AtomicMeasureDrift, ConstantDrift, DriftSpec,
                    ExpressionDrift, LinearDrift, PowerSingularityDrift,
                    SineDrift, ZeroDrift)
from .grids import DomainKind, DomainSetup, Grid1D, TimeGrid


class ConfigError(ValueError):
    pass


_SETUP_KINDS = {k.value: k for k in DomainKind}

#: every accepted dotted key (fail-closed: anything else is an error)
KNOWN_KEYS = {
    "setup.kind", "setup.torus_width",
    "grid.n_space", "grid.n_time", "grid.horizon",
    "drift.form", "drift.beta", "drift.q", "drift.value", "drift.slope",
    "drift.amplitude", "drift.frequency", "drift.phase", "drift.expression",
    "drift.exponent", "drift.support_radius", "drift.locations",
    "drift.weights",
    "mollify.levels",
    "run.realizations", "run.master_seed", "run.workers",
    "probe.x_stride", "probe.t_stride",
    "kappa.moment", "kappa.lag_exponents", "kappa.p",
    "sewing.gamma", "sewing.psi", "sewing.f_scale",
    "equivalence.resolutions", "uniqueness.mode", "uniqueness.resolutions",
    "besov.radius",
    "initial.value",
    "output.format",
}


def _parse_scalar(tok: str):
    tok = tok.strip()
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    return tok


def _parse_value(tok: str):
    tok = tok.strip()
    if "," in tok:
        return tuple(_parse_scalar(p) for p in tok.split(",") if p.strip())
    return _parse_scalar(tok)


def _format_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def _format_value(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(_format_scalar(p) for p in v)
    return _format_scalar(v)


def parse_config_text(text: str) -> dict:
    """Dotted-key dict; raises ConfigError with a line anchor on any problem."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        out[key] = _parse_value(val)
    return out


def _as_tuple(v) -> tuple:
    return tuple(v) if isinstance(v, (tuple, list)) else (v,)


def drift_from_keys(kv: dict) -> DriftSpec:
    form = kv.get("drift.form", "sin")
    beta = float(kv.get("drift.beta", {"sin": 1.0, "const": 1.0, "linear": 1.0,
                                       "zero": 1.0, "expr": 0.0, "bounded": 0.0,
                                       "power_singularity": -0.5,
                                       "atomic": -1.0}.get(form, 0.0)))
    q = float(kv.get("drift.q", math.inf))
    if form == "zero":
        return ZeroDrift(beta=beta, q=q)
    if form == "const":
        return ConstantDrift(beta=beta, q=q, value=float(kv.get("drift.value", 1.0)))
    if form == "linear":
        return LinearDrift(beta=beta, q=q, slope=float(kv.get("drift.slope", 1.0)))
    if form == "sin":
        return SineDrift(beta=beta, q=q,
                         amplitude=float(kv.get("drift.amplitude", 1.0)),
                         frequency=float(kv.get("drift.frequency", 1.0)),
                         phase=float(kv.get("drift.phase", 0.0)))
    if form in ("expr", "bounded"):
        return ExpressionDrift(beta=beta, q=q,
                               expression=str(kv.get("drift.expression", "0*u")),
                               bounded=form == "bounded")
    if form == "power_singularity":
        return PowerSingularityDrift(
            beta=beta, q=q,
            exponent=float(kv.get("drift.exponent", 0.5)),
            support_radius=float(kv.get("drift.support_radius", 1.0)))
    if form == "atomic":
        locs = tuple(float(v) for v in _as_tuple(kv.get("drift.locations", (0.0,))))
        wts = tuple(float(v) for v in _as_tuple(kv.get("drift.weights", (1.0,))))
        return AtomicMeasureDrift(beta=beta, q=q, locations=locs, weights=wts)
    raise ConfigError(f"unknown drift form {form!r}")


def drift_to_keys(spec: DriftSpec) -> dict:
    kv = {"drift.form": spec.form, "drift.beta": float(spec.beta),
          "drift.q": float(spec.q)}
    for name, value in spec.params().items():
        kv[f"drift.{name}"] = tuple(value) if isinstance(value, list) else value
    return kv


@dataclass(frozen=True)
class ExperimentConfig:
    setup_kind: DomainKind = DomainKind.PERIODIC_UNIT
    torus_width: float = 16.0
    n_space: int = 64
    n_time: int = 64
    horizon: float = 1.0
    drift: DriftSpec = field(default_factory=SineDrift)
    mollify_levels: tuple = (8, 16, 32, 64)
    realizations: int = 100
    master_seed: int = 20240 + 817
    workers: int = 1
    probe_x_stride: int = 4
    probe_t_stride: int = 2
    kappa_moment: int = 2
    kappa_lag_exponents: tuple = (3, 4, 5, 6, 7, 8)
    kappa_p: float = math.inf
    sewing_gamma: float = -1.0
    sewing_psi: str = "zero"
    sewing_f_scale: float = 0.01
    equivalence_resolutions: tuple = (64, 128, 256)
    uniqueness_mode: str = "schemes"
    uniqueness_resolutions: tuple = (64, 128, 256)
    besov_radius: float = 8.0
    initial_value: float = 0.0
    out_format: str = "csv"

    def setup(self) -> DomainSetup:
        return DomainSetup(self.setup_kind, self.torus_width)

    def grid(self) -> Grid1D:
        return Grid1D(self.setup(), self.n_space)

    def tgrid(self) -> TimeGrid:
        return TimeGrid(self.n_time, self.horizon)

    def with_overrides(self, seed=None, workers=None, out_format=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, master_seed=int(seed))
        if workers is not None:
            cfg = replace(cfg, workers=int(workers))
        if out_format is not None:
            cfg = replace(cfg, out_format=out_format)
        return cfg


def build_config(kv: dict, strict: bool = True) -> ExperimentConfig:
    kind_tok = str(kv.get("setup.kind", "periodic"))
    if kind_tok not in _SETUP_KINDS:
        raise ConfigError(f"setup.kind must be one of {sorted(_SETUP_KINDS)}")
    fmt = str(kv.get("output.format", "csv"))
    if fmt not in ("csv", "ndjson"):
        raise ConfigError("output.format must be csv or ndjson")
    psi = str(kv.get("sewing.psi", "zero"))
    if psi not in ("zero", "path"):
        raise ConfigError("sewing.psi must be zero or path")
    mode = str(kv.get("uniqueness.mode", "schemes"))
    if mode not in ("schemes", "mollification"):
        raise ConfigError("uniqueness.mode must be schemes or mollification")
    try:
        cfg = _construct(kv, _SETUP_KINDS[kind_tok], fmt, psi, mode)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if strict:
        violations = validate_config(cfg)
        if violations:
            raise ConfigError("; ".join(violations))
    return cfg


def _construct(kv, kind, fmt, psi, mode) -> ExperimentConfig:
    return ExperimentConfig(
        setup_kind=kind,
        torus_width=float(kv.get("setup.torus_width", 16.0)),
        n_space=int(kv.get("grid.n_space", 64)),
        n_time=int(kv.get("grid.n_time", 64)),
        horizon=float(kv.get("grid.horizon", 1.0)),
        drift=drift_from_keys(kv),
        mollify_levels=tuple(int(v) for v in _as_tuple(kv.get("mollify.levels", (8, 16, 32, 64)))),
        realizations=int(kv.get("run.realizations", 100)),
        master_seed=int(kv.get("run.master_seed", 21057)),
        workers=int(kv.get("run.workers", 1)),
        probe_x_stride=int(kv.get("probe.x_stride", 4)),
        probe_t_stride=int(kv.get("probe.t_stride", 2)),
        kappa_moment=int(kv.get("kappa.moment", 2)),
        kappa_lag_exponents=tuple(int(v) for v in _as_tuple(kv.get("kappa.lag_exponents", (3, 4, 5, 6, 7, 8)))),
        kappa_p=float(kv.get("kappa.p", kv.get("drift.q", math.inf))),
        sewing_gamma=float(kv.get("sewing.gamma", -1.0)),
        sewing_psi=psi,
        sewing_f_scale=float(kv.get("sewing.f_scale", 0.01)),
        equivalence_resolutions=tuple(int(v) for v in _as_tuple(kv.get("equivalence.resolutions", (64, 128, 256)))),
        uniqueness_mode=mode,
        uniqueness_resolutions=tuple(int(v) for v in _as_tuple(kv.get("uniqueness.resolutions", (64, 128, 256)))),
        besov_radius=float(kv.get("besov.radius", 8.0)),
        initial_value=float(kv.get("initial.value", 0.0)),
        out_format=fmt,
    )


def parse_config(path, strict: bool = True) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()), strict=strict)


def config_to_keys(cfg: ExperimentConfig) -> dict:
    kv = {
        "setup.kind": cfg.setup_kind.value,
        "grid.n_space": cfg.n_space,
        "grid.n_time": cfg.n_time,
        "grid.horizon": cfg.horizon,
        "mollify.levels": cfg.mollify_levels,
        "run.realizations": cfg.realizations,
        "run.master_seed": cfg.master_seed,
        "run.workers": cfg.workers,
        "probe.x_stride": cfg.probe_x_stride,
        "probe.t_stride": cfg.probe_t_stride,
        "kappa.moment": cfg.kappa_moment,
        "kappa.lag_exponents": cfg.kappa_lag_exponents,
        "kappa.p": cfg.kappa_p,
        "sewing.gamma": cfg.sewing_gamma,
        "sewing.psi": cfg.sewing_psi,
        "sewing.f_scale": cfg.sewing_f_scale,
        "equivalence.resolutions": cfg.equivalence_resolutions,
        "uniqueness.mode": cfg.uniqueness_mode,
        "uniqueness.resolutions": cfg.uniqueness_resolutions,
        "besov.radius": cfg.besov_radius,
        "initial.value": cfg.initial_value,
        "output.format": cfg.out_format,
    }
    if cfg.setup_kind is DomainKind.WHOLE_LINE:
        kv["setup.torus_width"] = cfg.torus_width
    kv.update(drift_to_keys(cfg.drift))
    return kv


def serialize_config(cfg: ExperimentConfig) -> str:
    kv = config_to_keys(cfg)
    lines = [f"{k} = {_format_value(kv[k])}" for k in sorted(kv)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def derived_quantities(cfg: ExperimentConfig) -> list[str]:
    grid, tgrid = cfg.grid(), cfg.tgrid()
    moll = 1.0 / max(tgrid.dt, grid.dx**2)
    lines = [
        f"dx = {grid.dx!r}",
        f"dt = {tgrid.dt!r}",
        f"dx^2 = {grid.dx**2!r} (kernel-matrix switch point)",
        f"grid-tied mollification level = {moll!r}",
        f"drift form = {cfg.drift.form}, declared (beta, q) = "
        f"({cfg.drift.beta}, {cfg.drift.q})",
    ]
    if cfg.setup_kind is DomainKind.WHOLE_LINE:
        lines.append(
            f"torus_width = {cfg.torus_width} (needs >= "
            f"{8.0 * math.sqrt(cfg.horizon):.6g} = 8*sqrt(horizon))")
    return lines


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Violation list (empty when valid); construction errors also surface here."""
    violations = []
    try:
        cfg.setup().validate_for_horizon(cfg.horizon)
    except ValueError as exc:
        violations.append(str(exc))
    try:
        cfg.grid()
        cfg.tgrid()
    except (ValueError, AssertionError) as exc:
        violations.append(str(exc))
    if cfg.realizations < 1:
        violations.append("run.realizations must be >= 1")
    if cfg.workers < 1:
        violations.append("run.workers must be >= 1")
    if any(b <= a for a, b in zip(cfg.mollify_levels, cfg.mollify_levels[1:])):
        violations.append("mollify.levels must be strictly increasing")
    if cfg.kappa_moment < 2:
        violations.append("kappa.moment must be >= 2")
    for res in set(cfg.equivalence_resolutions) | set(cfg.uniqueness_resolutions):
        if res < 2:
            violations.append(f"resolution {res} too small")
    return violations
