"""Gridded approximation of the solution field, its drift part, and residuals.

The splitting scheme advances the drift-carrying part with the exact spectral
semigroup and adds the exactly-sampled fresh noise of the step, so the
decomposition u = (propagated u0) + K + V holds to rounding at every step.
The semi-implicit scheme transports the drift-carrying part with an
implicit-Euler finite-difference resolvent instead, while sharing the same
sampled stochastic convolution: two genuinely different discretizations of
the same realization, as the coupling experiments require.

Time quadrature of the kernel integral uses exact mass per slice (the kernel
is a probability density in space for every offset) with the spatial profile
frozen at the slice midpoint; the offset therefore never drops below dt/2 and
the quadrature stays regular up to r = t.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .drift import DriftSpec, mollify
from .grids import DomainKind, Grid1D, TimeGrid
from .kernels import (Representation, SemigroupOperator, apply_semigroup,
                      apply_spectral_multiplier, spectral_eigenvalues)
from .noise import StochasticConvolution

DIVERGENCE_SENTINEL = 1e12


class SolverBlowup(RuntimeError):
    """Drift evaluation produced a non-finite value; realization is flagged."""

    def __init__(self, step: int):
        super().__init__(f"non-finite drift value at step {step}")
        self.step = step


class SchemeKind(enum.Enum):
    SPLITTING_EXACT = "splitting_exact"
    SEMI_IMPLICIT = "semi_implicit"


@dataclass(frozen=True)
class SchemeSpec:
    """Scheme kind plus the (bounded) drift evaluation it may call."""

    kind: SchemeKind
    drift_eval: object  # MollifiedDrift or bounded callable

    def __post_init__(self):
        if isinstance(self.drift_eval, DriftSpec):
            raise TypeError("schemes never evaluate raw drift specs; mollify first")
        if not callable(self.drift_eval):
            raise TypeError("drift_eval must be callable")


def grid_mollification_level(grid: Grid1D, tgrid: TimeGrid) -> float:
    """Default level tied to the grid: 1/level = max(dt, dx^2)."""
    return 1.0 / max(tgrid.dt, grid.dx**2)


def scheme_for(kind: SchemeKind, base: DriftSpec, grid: Grid1D, tgrid: TimeGrid,
               level: float | None = None) -> SchemeSpec:
    """Scheme with the drift mollified at the grid-tied level (or `level`)."""
    n = level if level is not None else grid_mollification_level(grid, tgrid)
    return SchemeSpec(kind, mollify(base, n))


@dataclass(frozen=True)
class FieldPath:
    """One realization of the solution on the grid.

    u[m] - (scheme-propagated u0)[m] - V[m] = K[m] holds to rounding.
    """

    scheme: SchemeSpec
    conv: StochasticConvolution
    u0: np.ndarray
    u: np.ndarray
    K: np.ndarray

    @property
    def grid(self) -> Grid1D:
        return self.conv.grid

    @property
    def tgrid(self) -> TimeGrid:
        return self.conv.tgrid

    @property
    def V(self) -> np.ndarray:
        return self.conv.values


def _implicit_fd_multiplier(grid: Grid1D, dt: float) -> np.ndarray:
    """Resolvent symbol of (I - dt/2 * discrete Laplacian)^{-1}."""
    dx = grid.dx
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        theta = np.pi * np.arange(grid.n_space + 1) / grid.n_space
    else:
        theta = 2.0 * np.pi * np.arange(grid.n_space // 2 + 1) / grid.n_space
    return 1.0 / (1.0 + dt * (1.0 - np.cos(theta)) / dx**2)


def materialize_initial(grid: Grid1D, u0) -> np.ndarray:
    if callable(u0):
        u0 = u0(grid.coords)
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), (grid.npts,)).copy()
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial condition must be bounded")
    return u0


class PathSimulator:
    """Steps one realization forward; see `simulate_path` for the one-shot API."""

    def __init__(self, scheme: SchemeSpec, conv: StochasticConvolution):
        self.scheme = scheme
        self.conv = conv
        self.grid = conv.grid
        self.tgrid = conv.tgrid
        dt = self.tgrid.dt
        # stepping stays in the spectral basis V is sampled in: the matrix
        # path's cell-averaging defect would accumulate over the steps
        self._exact = SemigroupOperator(self.grid, dt, Representation.SPECTRAL)
        if scheme.kind is SchemeKind.SEMI_IMPLICIT:
            self._resolvent = _implicit_fd_multiplier(self.grid, dt)

    def step(self, m: int, u_m: np.ndarray, k_m: np.ndarray):
        """State at t_m plus the step's noise -> state at t_{m+1}."""
        dt = self.tgrid.dt
        b = np.asarray(self.scheme.drift_eval(u_m), dtype=float)
        if not np.all(np.isfinite(b)):
            raise SolverBlowup(m)
        if self.scheme.kind is SchemeKind.SPLITTING_EXACT:
            u_next = apply_semigroup(self._exact, u_m + dt * b)
            u_next += self.conv.increment_fields[m]
            k_next = apply_semigroup(self._exact, k_m + dt * b)
        else:
            y = (u_m - self.conv.values[m]) + dt * b
            u_next = apply_spectral_multiplier(self.grid, y, self._resolvent)
            u_next += self.conv.values[m + 1]
            k_next = apply_spectral_multiplier(self.grid, k_m + dt * b,
                                               self._resolvent)
        return u_next, k_next

    def run(self, u0) -> FieldPath:
        grid, tgrid = self.grid, self.tgrid
        u0 = materialize_initial(grid, u0)
        u = np.empty((tgrid.n_time + 1, grid.npts))
        k = np.zeros_like(u)
        u[0] = u0
        k[0] = 0.0
        for m in range(tgrid.n_time):
            u[m + 1], k[m + 1] = self.step(m, u[m], k[m])
        return FieldPath(self.scheme, self.conv, u0, u, k)


def step(scheme: SchemeSpec, conv: StochasticConvolution, m: int,
         u_m: np.ndarray, k_m: np.ndarray):
    """Single step at index m (one-off form of PathSimulator.step)."""
    return PathSimulator(scheme, conv).step(m, u_m, k_m)


def simulate_path(scheme: SchemeSpec, conv: StochasticConvolution, u0=0.0) -> FieldPath:
    return PathSimulator(scheme, conv).run(u0)


# ---------------------------------------------------------------------------
# kernel-weighted drift integrals and residuals


def drift_integral_profile(path: FieldPath, drift_eval, s: float, t: float,
                           drift_fields: np.ndarray | None = None) -> np.ndarray:
    """int_s^t int p_{t-r}(x, y) drift(u_r(y)) dy dr for every grid x.

    Slice rule: spatial profile frozen at the slice's left state, kernel
    integrated in time as (exact mass dt) x (profile at the slice midpoint).
    """
    grid, tgrid = path.grid, path.tgrid
    ms, mt = tgrid.index_of(s), tgrid.index_of(t)
    if ms > mt:
        raise ValueError("need s <= t")
    if ms == mt:
        return np.zeros(grid.npts)
    dt = tgrid.dt
    lam = spectral_eigenvalues(grid)
    if drift_fields is None:
        drift_fields = np.asarray(drift_eval(path.u[ms:mt]), dtype=float)
    else:
        drift_fields = drift_fields[ms:mt]
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        coeff = scipy.fft.dct(drift_fields, type=1, axis=-1)
    else:
        coeff = np.fft.rfft(drift_fields, axis=-1)
    offsets = t - (tgrid.times[ms:mt] + 0.5 * dt)
    acc = np.zeros(lam.size, dtype=coeff.dtype)
    for row, tau in zip(coeff, offsets):
        acc += np.exp(-lam * tau) * row
        if abs(acc[0]) * dt > DIVERGENCE_SENTINEL:
            raise FloatingPointError("drift integral exceeded divergence sentinel")
    acc *= dt
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        return scipy.fft.idct(acc, type=1)
    return np.fft.irfft(acc, n=grid.n_space)


def drift_integral_K(path: FieldPath, drift_eval, s: float, t: float,
                     x: float) -> float:
    """The kernel-weighted drift integral at one grid point."""
    profile = drift_integral_profile(path, drift_eval, s, t)
    idx = int(np.argmin(np.abs(path.grid.coords - x)))
    if abs(path.grid.coords[idx] - x) > 1e-9:
        raise ValueError(f"x={x} is not a grid coordinate")
    return float(profile[idx])


def drift_integral_series(path: FieldPath, drift_eval) -> np.ndarray:
    """Midpoint-offset drift integral from 0 to every grid time at once.

    Uses the recursion K~[m+1] = P_dt K~[m] + dt * P_{dt/2} drift(u_m), which
    reproduces drift_integral_profile(0, t_m) exactly (semigroup composition
    is exact in mode space).
    """
    grid, tgrid = path.grid, path.tgrid
    lam = spectral_eigenvalues(grid)
    dt = tgrid.dt
    fields = np.asarray(drift_eval(path.u[:-1]), dtype=float)
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        coeff = scipy.fft.dct(fields, type=1, axis=-1)
    else:
        coeff = np.fft.rfft(fields, axis=-1)
    from ._backend import ou_scan
    out = np.zeros((tgrid.n_time + 1, lam.size), dtype=coeff.dtype)
    decay = np.exp(-lam * dt)
    gain = dt * np.exp(-lam * dt * 0.5)
    ou_scan(decay, gain, coeff, out)
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        return scipy.fft.idct(out, type=1, axis=-1)
    return np.fft.irfft(out, n=grid.n_space, axis=-1)


def mild_residual(path: FieldPath, drift_eval, t: float, x: float) -> float:
    """u_t(x) - P_t u0(x) - drift integral - V_t(x)."""
    grid, tgrid = path.grid, path.tgrid
    mt = tgrid.index_of(t)
    idx = int(np.argmin(np.abs(grid.coords - x)))
    if abs(grid.coords[idx] - x) > 1e-9:
        raise ValueError(f"x={x} is not a grid coordinate")
    pu0 = apply_semigroup(SemigroupOperator(grid, t), path.u0) if t > 0 else path.u0
    k_val = drift_integral_K(path, drift_eval, 0.0, t, x)
    return float(path.u[mt, idx] - pu0[idx] - k_val - path.V[mt, idx])


def mild_residual_profile(path: FieldPath, drift_eval, t: float) -> np.ndarray:
    grid, tgrid = path.grid, path.tgrid
    mt = tgrid.index_of(t)
    pu0 = apply_semigroup(SemigroupOperator(grid, t), path.u0) if t > 0 else path.u0
    prof = drift_integral_profile(path, drift_eval, 0.0, t)
    return path.u[mt] - pu0 - prof - path.V[mt]


@dataclass(frozen=True)
class CauchyReport:
    """Consecutive-level sup differences of the regularized drift integral."""

    levels: tuple
    sup_differences: tuple
    probe_t_stride: int
    probe_x_stride: int

    @property
    def decreasing(self) -> bool:
        d = self.sup_differences
        return all(b <= a * 1.05 for a, b in zip(d, d[1:])) and d[-1] < d[0]

    @property
    def passed(self) -> bool:
        return self.decreasing


def checkpoint_fieldpath(path: FieldPath, directory) -> dict:
    """Write u, K, V and the driving increments in the binary dump format."""
    import os

    from .noise import write_array_dump

    os.makedirs(directory, exist_ok=True)
    files = {}
    for name, arr in (("u", path.u), ("K", path.K), ("V", path.V),
                      ("noise", path.conv.noise.increments)):
        files[name] = os.path.join(directory, f"{name}.bin")
        write_array_dump(files[name], arr)
    return files


def load_fieldpath_arrays(directory) -> dict:
    """Arrays of a checkpointed path, keyed like `checkpoint_fieldpath`."""
    import os

    from .noise import read_array_dump

    return {name: read_array_dump(os.path.join(directory, f"{name}.bin"))
            for name in ("u", "K", "V", "noise")}


def regularized_mild_limit_check(base: DriftSpec, levels, conv: StochasticConvolution,
                                 u0=0.0, kind: SchemeKind = SchemeKind.SPLITTING_EXACT,
                                 t_stride: int = 1, x_stride: int = 4) -> CauchyReport:
    """Cauchy behaviour of the mollified drift integrals along one path.

    The path is solved once with the finest-level drift (the proxy for u);
    each ladder level re-integrates its own mollification along that path.
    """
    levels = tuple(sorted(levels))
    scheme = SchemeSpec(kind, mollify(base, levels[-1]))
    path = simulate_path(scheme, conv, u0)
    window = path.grid.window_mask[::x_stride]
    series = []
    for n in levels:
        s = drift_integral_series(path, mollify(base, n))
        series.append(s[::t_stride, ::x_stride][:, window])
    sups = tuple(float(np.abs(b - a).max()) for a, b in zip(series, series[1:]))
    return CauchyReport(levels, sups, t_stride, x_stride)
