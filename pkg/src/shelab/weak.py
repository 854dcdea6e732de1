"""Test functions, seminorms, duality pairings, weak residuals, and the
left-endpoint Riemann machinery for nonlinear time integrals.

Pairings integrate over the whole discretized domain; for the whole-line
setup that is the full torus (the default Hermite family up to k=12 reaches
well past a quarter-width window, and the weak identity needs one consistent
pairing domain). Time integrals in residuals use the trapezoid rule; the
telescoped nonlinear sums use left endpoints exactly as constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import DomainKind, Grid1D
from .kernels import SemigroupOperator, apply_semigroup, kernel_row
from .noise import pair_with_test
from .solver import FieldPath

trapezoid = getattr(np, "trapezoid", None) or np.trapz

# ---------------------------------------------------------------------------
# test function families


class TestFunction:
    """Common surface: values and exact derivatives up to order 8."""

    family = "abstract"
    domain = "unit"  # quadrature hint: "unit" interval or whole "line"

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        raise NotImplementedError

    def laplacian(self, x):
        return self.derivative(x, 2)

    def label(self) -> str:
        return f"{self.family}"


@dataclass(frozen=True)
class TrigPeriodic(TestFunction):
    """sin or cos of 2 pi k x; 1-periodic; k = 0 cos is the constant 1."""

    k: int
    kind: str = "sin"
    family = "trig_periodic"

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError("kind must be sin or cos")
        if self.k < 0:
            raise ValueError("k must be >= 0")

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        w = 2.0 * math.pi * self.k
        shift = (0.0 if self.kind == "sin" else math.pi / 2) + order * math.pi / 2
        return w**order * np.sin(w * x + shift) if self.k or order == 0 else \
            np.zeros_like(x)

    def label(self):
        return f"{self.kind}(2pi*{self.k}x)"


@dataclass(frozen=True)
class CosineNeumann(TestFunction):
    """cos(pi k x): derivative vanishes at both endpoints."""

    k: int
    family = "cosine_neumann"

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        w = math.pi * self.k
        if self.k == 0 and order > 0:
            return np.zeros_like(x)
        return w**order * np.cos(w * x + order * math.pi / 2)

    def label(self):
        return f"cos(pi*{self.k}x)"


def _hermite_functions(x: np.ndarray, kmax: int) -> np.ndarray:
    """Rows h_0..h_kmax of the orthonormal Hermite functions at x."""
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = math.pi ** (-0.25) * np.exp(-0.5 * x * x)
    if kmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, kmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] \
            - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass(frozen=True)
class HermiteWholeLine(TestFunction):
    """Orthonormal Hermite function h_k; Schwartz-class on the line."""

    k: int
    family = "hermite"
    domain = "line"

    def _deriv_coeffs(self, order: int) -> np.ndarray:
        # ladder: h_j' = sqrt(j/2) h_{j-1} - sqrt((j+1)/2) h_{j+1}
        coeffs = np.zeros(self.k + order + 1)
        coeffs[self.k] = 1.0
        for _ in range(order):
            new = np.zeros_like(coeffs)
            for j, c in enumerate(coeffs):
                if c == 0.0:
                    continue
                if j >= 1:
                    new[j - 1] += c * math.sqrt(j / 2.0)
                new[j + 1] -= c * math.sqrt((j + 1) / 2.0)
            coeffs = new
        return coeffs

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        coeffs = self._deriv_coeffs(order)
        basis = _hermite_functions(x, len(coeffs) - 1)
        return np.tensordot(coeffs, basis, axes=(0, 0))

    def label(self):
        return f"hermite_{self.k}"


def _probabilists_hermite(z: np.ndarray, order: int) -> np.ndarray:
    he_prev, he = np.ones_like(z), z.copy()
    if order == 0:
        return he_prev
    for p in range(1, order):
        he_prev, he = he, z * he - p * he_prev
    return he


@dataclass(frozen=True)
class GaussianBump(TestFunction):
    """Gaussian probe exp(-(x-c)^2 / (2 w^2)), optionally with mirror images
    so the boundary conditions of the setup hold to machine precision."""

    center: float
    width: float
    images: tuple = ()
    domain: str = "unit"
    family = "gaussian_bump"

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for c in (self.center, *self.images):
            z = (x - c) / self.width
            total += (-1.0 / self.width) ** order \
                * _probabilists_hermite(z, order) * np.exp(-0.5 * z * z)
        return total

    def label(self):
        return f"bump({self.center},{self.width})"


def reflected_bump(center: float, width: float, kind: DomainKind) -> GaussianBump:
    """Bump adapted to the setup: periodized or evenly reflected."""
    if kind is DomainKind.PERIODIC_UNIT:
        return GaussianBump(center, width, images=(center - 1.0, center + 1.0))
    if kind is DomainKind.NEUMANN_UNIT:
        imgs = (-center, 2.0 - center, center - 2.0, -center + 2.0,
                -center - 2.0, center + 2.0)
        return GaussianBump(center, width, images=tuple(dict.fromkeys(imgs)))
    return GaussianBump(center, width, domain="line")


BUMP_CENTERS_UNIT = (0.1, 0.2, 0.35, 0.45, 0.6, 0.7, 0.85, 0.9)
BUMP_CENTERS_LINE = (-2.5, -1.5, -0.8, -0.25, 0.25, 0.8, 1.5, 2.5)


def default_test_family(kind: DomainKind, size: int | None = None
                        ) -> list[TestFunction]:
    """The default probe catalog: trig up to k = 16 (cosines for Neumann),
    Hermite up to k = 12 on the line, plus 8 localized bumps.

    `size` selects a low-frequency-plus-bumps subset for cheaper runs
    (interleaved so both probe kinds survive truncation).
    """
    out: list[TestFunction] = []
    if kind is DomainKind.PERIODIC_UNIT:
        for k in range(1, 17):
            out.append(TrigPeriodic(k, "sin"))
            out.append(TrigPeriodic(k, "cos"))
        bumps = [reflected_bump(c, 0.08, kind) for c in BUMP_CENTERS_UNIT]
    elif kind is DomainKind.NEUMANN_UNIT:
        out.extend(CosineNeumann(k) for k in range(1, 17))
        bumps = [reflected_bump(c, 0.08, kind) for c in BUMP_CENTERS_UNIT]
    else:
        out.extend(HermiteWholeLine(k) for k in range(13))
        bumps = [reflected_bump(c, 0.4, kind) for c in BUMP_CENTERS_LINE]
    if size is None:
        return out + bumps
    keep = max(size - size // 4, 1)
    return (out[:keep] + bumps[: size - keep])[:size]


# ---------------------------------------------------------------------------
# pairings and seminorms


def pair(f: np.ndarray, phi, grid: Grid1D) -> float:
    """<f, phi>: quadrature of the product over the discretized domain."""
    vals = phi if isinstance(phi, np.ndarray) else np.asarray(
        phi(grid.coords), dtype=float)
    return float((np.asarray(f) * vals) @ grid.weights)


def _seminorm_quadrature(phi: TestFunction):
    if phi.domain == "line":
        half = 16.0
        n = 1 << 14
        x = -half + (np.arange(n) + 0.5) * (2 * half / n)
        return x, 2 * half / n
    n = 1 << 13
    x = (np.arange(n) + 0.5) / n
    return x, 1.0 / n


@dataclass(frozen=True)
class SchwartzSeminorm:
    m: int
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("seminorm value must be nonnegative")


def schwartz_seminorm(phi: TestFunction, m: int) -> SchwartzSeminorm:
    """sum_{i<=m} int (1+|x|^m)^2 |phi^(i)|^2 dx (nondecreasing in m)."""
    if m < 0 or m > 8:
        raise ValueError("m must lie in 0..8 (derivative availability)")
    x, dx = _seminorm_quadrature(phi)
    weight = (1.0 + np.abs(x) ** m) ** 2
    total = 0.0
    for i in range(m + 1):
        d = phi.derivative(x, i)
        total += float((weight * d * d).sum() * dx)
    return SchwartzSeminorm(m, total)


# ---------------------------------------------------------------------------
# weak residuals


@dataclass(frozen=True)
class WeakResidualReport:
    phi_label: str
    times: np.ndarray
    residuals: np.ndarray
    drift_term_used: str  # "direct_integral" | "riemann_k"

    def to_records(self):
        for t, r in zip(self.times, self.residuals):
            yield {"phi": self.phi_label, "t": float(t), "residual": float(r),
                   "drift_term": self.drift_term_used}


def weak_residual(path: FieldPath, drift_eval, phi, t: float,
                  drift_term: str = "direct_integral") -> float:
    """<u_t,phi> - <u_0,phi> - int <u_s, Lap phi/2> ds - drift term - W_t(phi)."""
    grid, tgrid = path.grid, path.tgrid
    mt = tgrid.index_of(t)
    phivals = np.asarray(phi(grid.coords), dtype=float)
    lapvals = np.asarray(phi.laplacian(grid.coords), dtype=float)
    w = grid.weights
    lap_series = path.u[: mt + 1] @ (0.5 * lapvals * w)
    value = pair(path.u[mt], phivals, grid) - pair(path.u0, phivals, grid)
    value -= float(trapezoid(lap_series, dx=tgrid.dt))
    if drift_eval is not None:
        bfields = np.asarray(drift_eval(path.u[: mt + 1]), dtype=float)
        drift_series = bfields @ (phivals * w)
        if drift_term == "direct_integral":
            value -= float(trapezoid(drift_series, dx=tgrid.dt))
        elif drift_term == "riemann_k":
            value -= float(drift_series[:mt].sum() * tgrid.dt)
        else:
            raise ValueError("drift_term must be direct_integral or riemann_k")
    value -= pair_with_test(path.conv.noise, phi, t)
    return value


def weak_residual_report(path: FieldPath, drift_eval, phi,
                         times=None, drift_term: str = "direct_integral"):
    tg = path.tgrid
    times = np.asarray(times if times is not None else tg.times[:: max(1, tg.n_time // 8)])
    res = np.array([weak_residual(path, drift_eval, phi, t, drift_term)
                    for t in times])
    return WeakResidualReport(phi.label(), times, res, drift_term)


def write_residual_reports(reports, path) -> None:
    """NDJSON serialization: one record per (phi, t)."""
    import json

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rep in reports:
            for record in rep.to_records():
                fh.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# nonlinear time integrals, telescoped sums, and the kernel reconstruction


def riemann_nonlinear_integral(H, f, t: float, n: int, horizon: float = 1.0) -> float:
    """sum_{i=1}^{floor(n t / horizon)} H_{tau_i}(f_{tau_{i-1}}) - H_{tau_{i-1}}(f_{tau_{i-1}})."""
    if n < 1:
        raise ValueError("n must be >= 1")
    taus = np.arange(n + 1) * (horizon / n)
    last = min(int(math.floor(n * t / horizon + 1e-9)), n)
    total = 0.0
    for i in range(1, last + 1):
        probe = f(taus[i - 1])
        total += H(taus[i], probe) - H(taus[i - 1], probe)
    return total


class DriftFunctional:
    """H_t(phi) = int_0^t <drift(u_s), phi> ds along one path (left sums).

    The canonical functional of the weak-regularized description; evaluable
    against TestFunctions and against gridded fields such as kernel rows.
    """

    def __init__(self, path: FieldPath, drift_eval):
        self.path = path
        self.grid = path.grid
        self.tgrid = path.tgrid
        self.fields = np.asarray(drift_eval(path.u), dtype=float)

    def __call__(self, tau: float, phi) -> float:
        idx = self.tgrid.index_of(tau)
        if idx == 0:
            return 0.0
        vals = phi if isinstance(phi, np.ndarray) else np.asarray(
            phi(self.grid.coords), dtype=float)
        return float((self.fields[:idx] @ (vals * self.grid.weights)).sum()
                     * self.tgrid.dt)


@dataclass(frozen=True)
class LimitReport:
    """Vanishing-cutoff reconstruction of the drift field from a functional."""

    epsilons: tuple
    values: tuple
    extrapolated: float
    reference: float | None
    cauchy_ok: bool

    @property
    def cauchy_differences(self) -> tuple:
        return tuple(abs(b - a) for a, b in zip(self.values, self.values[1:]))

    @property
    def agreement(self) -> float | None:
        if self.reference is None:
            return None
        return abs(self.extrapolated - self.reference)


def _sqrt_eps_extrapolate(epsilons, values) -> float:
    """Exact solve of v = a + b1 sqrt(eps) + b2 eps on the last three points
    (repeated Richardson in powers of sqrt(eps))."""
    eps = np.asarray(epsilons[-3:], dtype=float)
    val = np.asarray(values[-3:], dtype=float)
    design = np.stack([np.ones(3), np.sqrt(eps), eps], axis=1)
    return float(np.linalg.solve(design, val)[0])


def reconstruct_R(H: DriftFunctional, t: float, x: float, epsilons) -> LimitReport:
    """Limit of int_0^{t-eps} H(dr, p_{t-r}(x, .)) with sqrt(eps) Richardson.

    Cross-checked against u_t(x) - P_t u0(x) - V_t(x) on the same path.
    """
    grid, tgrid = H.grid, H.tgrid
    epsilons = tuple(sorted(float(e) for e in epsilons))[::-1]
    if len(epsilons) < 3:
        raise ValueError("need at least three cutoff values")
    if epsilons[-1] < 2.0 * tgrid.dt - 1e-12:
        raise ValueError("cutoffs must stay >= 2*dt")
    n = tgrid.n_time
    horizon = tgrid.horizon

    values = []
    for eps in epsilons:
        f = lambda r: kernel_row(grid, t - r, x)  # noqa: E731 - offset >= eps
        values.append(riemann_nonlinear_integral(H, f, t - eps, n, horizon))
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    cauchy_ok = all(b <= a * 1.1 for a, b in zip(diffs, diffs[1:])) if diffs else True
    extrap = _sqrt_eps_extrapolate(epsilons, values)

    mt = tgrid.index_of(t)
    idx = int(np.argmin(np.abs(grid.coords - x)))
    pu0 = apply_semigroup(SemigroupOperator(grid, t), H.path.u0)
    reference = float(H.path.u[mt, idx] - pu0[idx] - H.path.V[mt, idx])
    return LimitReport(tuple(epsilons), tuple(values), extrap, reference, cauchy_ok)


# ---------------------------------------------------------------------------
# seminorm domination fit


@dataclass(frozen=True)
class DominationFit:
    m: int
    gamma: float
    valid: bool
    max_ratio: float


def fit_seminorm_domination(path: FieldPath, family, m_max: int = 8,
                            safety: float = 2.0) -> DominationFit:
    """Smallest m <= m_max with sup_t |<u_t, phi>| <= Gamma ||phi||_{S,m}.

    Gamma is fitted on the even-indexed half of the family (times `safety`)
    and validated on the whole family.
    """
    grid = path.grid
    w = grid.weights
    sups = []
    for phi in family:
        series = path.u @ (np.asarray(phi(grid.coords)) * w)
        sups.append(float(np.abs(series).max()))
    sups = np.asarray(sups)
    for m in range(m_max + 1):
        norms = np.asarray([schwartz_seminorm(phi, m).value for phi in family])
        fit = sups[::2] / norms[::2]
        gamma = safety * float(fit.max())
        ratios = sups / (gamma * norms)
        if ratios.max() <= 1.0:
            return DominationFit(m, gamma, True, float(ratios.max()))
    return DominationFit(m_max, gamma, False, float(ratios.max()))
