"""Drift specifications, Gaussian mollification, and a windowed Besov surrogate.

Drifts act on the solution value. Distributional drifts (atomic measures) have
no pointwise values and must be mollified before any solver sees them; the
mollifier is the heat semigroup at scale 1/level. Mollification is exact where
a closed form exists (constants, linear, pure trig, atoms) and Gauss-Hermite
quadrature with 64 nodes otherwise.

The Besov estimator is a surrogate, not the true nonhomogeneous norm: the
input is windowed onto [-R, R] with a smooth bump, periodized, and split into
sharp dyadic Fourier blocks; the low block enters with weight 1 (the standard
convention, and the only choice consistent with monotonicity of the estimate
in beta). All verdicts built on it are calibrated-constant comparisons.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import gaussian_kernel

#: calibrated once over the development test family (max observed ratio ~1.7
#: for mollified deltas, indicators and power singularities); 2x margin.
EMBEDDING_SURROGATE_CONSTANT = 4.0

_GH_NODES = 64


@lru_cache(maxsize=1)
def _hermgauss():
    nodes, weights = np.polynomial.hermite.hermgauss(_GH_NODES)
    return nodes, weights / math.sqrt(math.pi)


def gauss_smooth(fn, eps: float):
    """G_eps fn as a vectorized callable (Gauss-Hermite, spectrally accurate)."""
    nodes, weights = _hermgauss()
    shift = math.sqrt(2.0 * eps) * nodes

    def smoothed(v):
        v = np.asarray(v, dtype=float)
        return np.tensordot(fn(v[..., None] - shift), weights, axes=([-1], [0]))

    return smoothed


# ---------------------------------------------------------------------------
# drift specifications


@dataclass(frozen=True)
class DriftSpec:
    """Base: a drift with declared Besov regularity (beta, q)."""

    beta: float = 0.0
    q: float = math.inf

    form = "abstract"

    def __post_init__(self):
        if not 1.0 <= self.q:
            raise ValueError("integrability q must lie in [1, inf]")

    def values(self, v, cell: float | None = None):
        raise NotImplementedError

    def mollified_values(self, v, eps: float):
        return gauss_smooth(lambda w: self.values(w), eps)(v)

    def params(self) -> dict:
        """Config round-trip payload."""
        return {}


@dataclass(frozen=True)
class ZeroDrift(DriftSpec):
    form = "zero"

    def values(self, v, cell=None):
        return np.zeros_like(np.asarray(v, dtype=float))

    def mollified_values(self, v, eps):
        return self.values(v)


@dataclass(frozen=True)
class ConstantDrift(DriftSpec):
    value: float = 1.0
    form = "const"

    def values(self, v, cell=None):
        return np.full_like(np.asarray(v, dtype=float), self.value)

    def mollified_values(self, v, eps):
        # the Gaussian semigroup fixes constants
        return self.values(v)

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class LinearDrift(DriftSpec):
    slope: float = 1.0
    form = "linear"

    def values(self, v, cell=None):
        return self.slope * np.asarray(v, dtype=float)

    def mollified_values(self, v, eps):
        return self.values(v)

    def params(self):
        return {"slope": self.slope}


@dataclass(frozen=True)
class SineDrift(DriftSpec):
    """amplitude * sin(frequency * v + phase); mollification is the exact
    Fourier multiplier exp(-eps * frequency^2 / 2)."""

    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    form = "sin"

    def values(self, v, cell=None):
        v = np.asarray(v, dtype=float)
        return self.amplitude * np.sin(self.frequency * v + self.phase)

    def mollified_values(self, v, eps):
        damp = math.exp(-eps * self.frequency**2 / 2.0)
        return damp * self.values(v)

    def params(self):
        return {"amplitude": self.amplitude, "frequency": self.frequency,
                "phase": self.phase}


_EXPR_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh,
               "abs": np.abs, "sign": np.sign, "sqrt": np.sqrt,
               "arctan": np.arctan}
_EXPR_CONSTS = {"pi": math.pi, "e": math.e}


@lru_cache(maxsize=128)
def _compile_expression(expression: str):
    """Vectorized u -> f(u) from a whitelisted arithmetic expression."""
    tree = ast.parse(expression, mode="eval")
    allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name,
               ast.Load, ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div,
               ast.Pow, ast.USub, ast.UAdd)
    for node in ast.walk(tree):
        if not isinstance(node, allowed):
            raise ValueError(f"disallowed syntax in drift expression: "
                             f"{type(node).__name__}")
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name)
                    and node.func.id in _EXPR_FUNCS and not node.keywords):
                raise ValueError("only whitelisted function calls allowed")
        if isinstance(node, ast.Name) and node.id not in (
                {"u"} | set(_EXPR_FUNCS) | set(_EXPR_CONSTS)):
            raise ValueError(f"unknown name {node.id!r} in drift expression")
    code = compile(tree, "<drift>", "eval")
    env = {"__builtins__": {}} | _EXPR_FUNCS | _EXPR_CONSTS

    def fn(v):
        return np.asarray(eval(code, env, {"u": np.asarray(v, dtype=float)}),
                          dtype=float)

    return fn


@dataclass(frozen=True)
class ExpressionDrift(DriftSpec):
    """Closed-form or bounded-measurable drift given as an expression in u."""

    expression: str = "0*u"
    bounded: bool = False

    def __post_init__(self):
        super().__post_init__()
        _compile_expression(self.expression)  # validate eagerly

    @property
    def form(self):  # noqa: D102 - config tag
        return "bounded" if self.bounded else "expr"

    def values(self, v, cell=None):
        return _compile_expression(self.expression)(v)

    def params(self):
        return {"expression": self.expression}


@dataclass(frozen=True)
class PowerSingularityDrift(DriftSpec):
    """|v|^{-exponent} on |v| <= support_radius; in L_p exactly for
    p < 1/exponent."""

    exponent: float = 0.5
    support_radius: float = 1.0
    form = "power_singularity"

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.exponent < 1.0:
            raise ValueError("exponent must lie in (0, 1) for local integrability")
        if self.support_radius <= 0:
            raise ValueError("support_radius must be positive")
        if math.isfinite(self.q) and self.q >= 1.0 / self.exponent:
            raise ValueError(
                f"declared q={self.q} incompatible with exponent {self.exponent}: "
                f"need q < {1.0 / self.exponent:.6g}")

    def values(self, v, cell=None):
        v = np.asarray(v, dtype=float)
        a = np.abs(v)
        out = np.zeros_like(a)
        inside = a <= self.support_radius
        if cell:
            # cell average across the singular cell keeps values finite
            half = 0.5 * cell
            sing = inside & (a < half)
            reg = inside & ~sing
            out[reg] = a[reg] ** (-self.exponent)
            if np.any(sing):
                g1 = 1.0 - self.exponent
                lo, hi = a[sing] - half, a[sing] + half
                out[sing] = ((-lo) ** g1 + hi**g1) / (cell * g1)
        else:
            nz = inside & (a > 0)
            out[nz] = a[nz] ** (-self.exponent)
            out[inside & (a == 0)] = np.inf
        return out

    def mollified_values(self, v, eps):
        # feed the quadrature cell averages at the node spacing; a raw node
        # falling next to the singularity would otherwise spike the sum
        nodes, weights = _hermgauss()
        shift = math.sqrt(2.0 * eps) * nodes
        cell = float(np.diff(shift).min())
        v = np.asarray(v, dtype=float)
        vals = self.values(v[..., None] - shift, cell=cell)
        return np.tensordot(vals, weights, axes=([-1], [0]))

    def lp_norm(self, p: float) -> float:
        if p >= 1.0 / self.exponent:
            return math.inf
        pw = 1.0 - self.exponent * p
        return (2.0 * self.support_radius**pw / pw) ** (1.0 / p)

    def params(self):
        return {"exponent": self.exponent, "support_radius": self.support_radius}


@dataclass(frozen=True)
class AtomicMeasureDrift(DriftSpec):
    """Sum of weighted Dirac atoms; mollification is an exact Gaussian sum."""

    locations: tuple = (0.0,)
    weights: tuple = (1.0,)
    beta: float = -1.0
    q: float = math.inf
    form = "atomic"

    def __post_init__(self):
        super().__post_init__()
        if len(self.locations) != len(self.weights):
            raise ValueError("locations and weights must have equal length")
        limit = -1.0 + (0.0 if math.isinf(self.q) else 1.0 / self.q)
        if self.beta > limit + 1e-12:
            raise ValueError(
                f"atomic measure needs declared beta <= {limit} for q={self.q}")

    def values(self, v, cell=None):
        raise TypeError("atomic measures have no pointwise values; mollify first")

    def mollified_values(self, v, eps):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for loc, w in zip(self.locations, self.weights):
            out += w * gaussian_kernel(eps, v - loc)
        return out

    def params(self):
        return {"locations": list(self.locations), "weights": list(self.weights)}


@dataclass(frozen=True)
class MollifiedDrift:
    """G_{1/level} base: smooth and bounded for every finite level."""

    base: DriftSpec
    level: float

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("mollification level must be >= 1")

    @property
    def eps(self) -> float:
        return 1.0 / self.level

    def __call__(self, v):
        return self.base.mollified_values(v, self.eps)

    values = __call__


def mollify(spec: DriftSpec, n: float) -> MollifiedDrift:
    return MollifiedDrift(spec, n)


# ---------------------------------------------------------------------------
# windowed Besov-norm surrogate


@dataclass(frozen=True)
class BesovEstimate:
    window_radius: float
    block_norms: np.ndarray  # index 0 is the low block (j = -1)
    beta: float
    q: float
    value: float
    aliased: bool
    #: windowed dyadic surrogate, not the true nonhomogeneous norm; verdicts
    #: built on it are calibrated-constant comparisons
    surrogate: bool = True


def _bump_window(x: np.ndarray, radius: float, flat: float = 0.8) -> np.ndarray:
    s = (np.abs(x) / radius - flat) / (1.0 - flat)
    w = np.ones_like(x)
    roll = (s > 0) & (s < 1)
    w[roll] = np.exp(1.0 - 1.0 / (1.0 - s[roll] ** 2))
    w[s >= 1] = 0.0
    return w


def besov_grid(radius: float = 8.0, n_grid: int = 2**14) -> np.ndarray:
    """Midpoint sampling grid of the estimator window [-R, R]."""
    return -radius + (np.arange(n_grid) + 0.5) * (2.0 * radius / n_grid)


def estimate_besov_norm(f, beta: float, q: float = math.inf,
                        radius: float = 8.0, n_grid: int = 2**14) -> BesovEstimate:
    """Windowed dyadic-block surrogate of the B^beta_{q,inf} norm."""
    if not -2.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [-2, 1]")
    x = besov_grid(radius, n_grid)
    samples = np.asarray(f, dtype=float) if isinstance(f, np.ndarray) else \
        np.asarray(f(x), dtype=float)
    if samples.shape != x.shape:
        raise ValueError("gridded input must match the estimator grid")
    windowed = samples * _bump_window(x, radius)
    spec = np.fft.rfft(windowed)
    dx = 2.0 * radius / n_grid

    def block_norm(mask: np.ndarray) -> float:
        sig = np.fft.irfft(np.where(mask, spec, 0.0), n=n_grid)
        if math.isinf(q):
            return float(np.abs(sig).max())
        return float((np.abs(sig) ** q).sum() * dx) ** (1.0 / q)

    bins = np.arange(spec.size)
    n_blocks = int(math.ceil(math.log2(spec.size - 1))) + 1 if spec.size > 2 else 1
    norms = [block_norm(bins == 0)]
    weighted = [norms[0]]  # low block: weight 1
    for j in range(1, n_blocks + 1):
        mask = (bins >= 2 ** (j - 1)) & (bins < 2**j)
        if not mask.any():
            break
        norms.append(block_norm(mask))
        weighted.append(2.0 ** (j * beta) * norms[-1])
    energy = np.abs(spec) ** 2
    energy[1:] *= 2.0
    top = energy[bins >= 2 ** (len(norms) - 2)].sum() if len(norms) > 1 else 0.0
    total = energy.sum()
    aliased = bool(total > 0 and top / total > 0.01)
    return BesovEstimate(radius, np.array(norms), beta, q,
                         float(max(weighted)), aliased)


@dataclass(frozen=True)
class DriftConvergenceReport:
    """Boundedness at beta plus Cauchy decrease of cross-differences below it."""

    levels: tuple
    sup_estimates: tuple
    bounded: bool
    probe_betas: tuple
    differences: dict
    cauchy_ok: bool

    @property
    def passed(self) -> bool:
        return self.bounded and self.cauchy_ok


def _cauchy_decreasing(levels, diffs) -> bool:
    """Decreasing trend: negative fitted log-log slope plus net decrease.

    Slow rates (the beta-0.1 probe decays like level^-0.05 for Gaussian
    mollifiers) sit under the dyadic block quantization wiggle, so pointwise
    monotonicity would be noise-rejected; the fitted trend is the robust
    verdict.
    """
    d = np.maximum(np.asarray(diffs, dtype=float), 1e-300)
    x = np.log(np.asarray(levels[:-1], dtype=float))
    slope = np.polyfit(x, np.log(d), 1)[0]
    return bool(slope <= 0.0 and d[-1] < d[0] * 1.02)


def check_c_beta_minus_convergence(sequence: list[MollifiedDrift],
                                   target: DriftSpec, beta: float,
                                   q: float = math.inf,
                                   probe_offsets=(0.1, 0.25, 0.5),
                                   radius: float = 8.0) -> DriftConvergenceReport:
    """Empirical version of C^{beta-} convergence for a mollification ladder.

    Boundedness of the beta-norms along the ladder, and Cauchy decrease of
    consecutive cross-differences at each probe regularity beta' < beta.
    Failure is a report verdict, never an exception.
    """
    if len(sequence) < 3:
        raise ValueError("need at least three levels")
    levels = tuple(m.level for m in sequence)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be increasing")
    sups = tuple(estimate_besov_norm(m, beta, q, radius).value for m in sequence)
    # bounded = no growth trend in log-log
    lv, sv = np.log(levels), np.log(np.maximum(sups, 1e-300))
    slope = np.polyfit(lv, sv, 1)[0] if max(sups) > 0 else 0.0
    bounded = bool(slope <= 0.1)
    probes = tuple(beta - off for off in probe_offsets)
    diffs = {}
    cauchy_ok = True
    for bp in probes:
        d = []
        for lo, hi in zip(sequence, sequence[1:]):
            diff_fn = (lambda lo, hi: lambda v: hi(v) - lo(v))(lo, hi)
            d.append(estimate_besov_norm(diff_fn, bp, q, radius).value)
        diffs[bp] = tuple(d)
        if max(d) > 1e-13:  # identical ladders pass trivially
            cauchy_ok = cauchy_ok and _cauchy_decreasing(levels, d)
    return DriftConvergenceReport(levels, sups, bounded, probes, diffs, cauchy_ok)
