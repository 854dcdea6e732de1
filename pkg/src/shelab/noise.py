"""Discrete space-time white noise and the stochastic convolution.

Noise increments live on space-time cells with variance dt*dx and are drawn
from a counter-based Philox stream keyed by (master_seed, realization_index),
so any realization can be regenerated bit-exactly in any order and from any
worker. The stochastic convolution is simulated exactly in law at grid points:
each spectral mode is an Ornstein-Uhlenbeck chain driven by the transformed
cell increments, with the per-step gain rescaled from Euler's sqrt(dt) to the
exact value sqrt((1-e^{-2*lam*dt})/(2*lam)). The gain tends to 1 as dt -> 0,
which keeps the exact simulation coupled to Euler schemes on the same noise.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from ._backend import ou_scan
from .grids import DomainKind, Grid1D, TimeGrid
from .kernels import apply_spectral_multiplier, spectral_eigenvalues


class SnappedTimeWarning(UserWarning):
    """A requested time was moved to the left grid point."""


@dataclass(frozen=True)
class NoiseRealization:
    """One realization of the discrete white noise.

    increments[m, j] integrates the noise over [t_m, t_{m+1}] x cell_j and has
    variance dt*dx. Regeneration with the same key is bit-exact.
    """

    grid: Grid1D
    tgrid: TimeGrid
    master_seed: int
    realization_index: int
    increments: np.ndarray

    def __post_init__(self):
        expected = (self.tgrid.n_time, self.grid.n_space)
        if self.increments.shape != expected:
            raise ValueError(f"increments must have shape {expected}")


def sample_noise(grid: Grid1D, tgrid: TimeGrid, master_seed: int,
                 realization_index: int = 0) -> NoiseRealization:
    """Draw a realization from the Philox stream keyed by (seed, index)."""
    bits = np.random.Philox(key=np.array(
        [master_seed & 0xFFFFFFFFFFFFFFFF, realization_index & 0xFFFFFFFFFFFFFFFF],
        dtype=np.uint64,
    ))
    rng = np.random.Generator(bits)
    scale = np.sqrt(tgrid.dt * grid.dx)
    incr = rng.standard_normal((tgrid.n_time, grid.n_space)) * scale
    incr.setflags(write=False)
    return NoiseRealization(grid, tgrid, master_seed, realization_index, incr)


def coarsen_noise(noise: NoiseRealization, factor_time: int = 2,
                  factor_space: int = 2) -> NoiseRealization:
    """Block-sum increments onto coarser grids (same underlying realization)."""
    grid = noise.grid.coarsen(factor_space) if factor_space > 1 else noise.grid
    tgrid = noise.tgrid.coarsen(factor_time) if factor_time > 1 else noise.tgrid
    incr = noise.increments.reshape(
        tgrid.n_time, factor_time, grid.n_space, factor_space
    ).sum(axis=(1, 3))
    incr.setflags(write=False)
    return NoiseRealization(grid, tgrid, noise.master_seed,
                            noise.realization_index, incr)


def pair_with_test(noise: NoiseRealization, phi, t: float) -> float:
    """W_t(phi): noise increments paired with phi at the cell centers."""
    m, snapped = noise.tgrid.snap_index(t)
    if snapped:
        warnings.warn(f"time {t} snapped to grid index {m}", SnappedTimeWarning,
                      stacklevel=2)
    vals = phi if isinstance(phi, np.ndarray) else np.asarray(
        phi(noise.grid.cell_centers), dtype=float)
    if m == 0:
        return 0.0
    return float(noise.increments[:m].sum(axis=0) @ vals)


@lru_cache(maxsize=128)
def _ou_coefficients(grid: Grid1D, tgrid: TimeGrid):
    """Per-mode decay e^{-lam dt} and increment gain in transform units.

    Periodic/torus: modes are rfft coefficients of the cell values; the gain
    (n/L)*g_k applied to rfft(dW) delivers the exact OU increment variance.
    Neumann: modes are the packed DCT-I coefficients of the node values; the
    driving coefficients are DCT-II/2 of the cell increments and the top mode
    is silent (the k=n cosine vanishes at every cell center).
    """
    lam = spectral_eigenvalues(grid)
    dt = tgrid.dt
    decay = np.exp(-lam * dt)
    g = np.ones_like(lam)
    pos = lam > 0
    g[pos] = np.sqrt(-np.expm1(-2.0 * lam[pos] * dt) / (2.0 * lam[pos] * dt))
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        gain = g.copy()
        gain[-1] = 0.0
    else:
        gain = g * (grid.n_space / grid.extent)
    decay.setflags(write=False)
    gain.setflags(write=False)
    return decay, gain


def _mode_increments(noise: NoiseRealization) -> np.ndarray:
    """Transform cell increments into per-mode driving coefficients."""
    grid = noise.grid
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        zeta = scipy.fft.dct(noise.increments, type=2, axis=1) * 0.5
        out = np.zeros((noise.tgrid.n_time, grid.n_space + 1))
        out[:, :-1] = zeta
        return out
    return np.fft.rfft(noise.increments, axis=1)


def _modes_to_fields(grid: Grid1D, modes: np.ndarray) -> np.ndarray:
    # Neumann packing: field = a_0 + (-1)^i a_n + 2 sum a_k cos(pi k i/n),
    # which is exactly the unnormalized DCT-I of the mode vector.
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        return scipy.fft.dct(modes, type=1, axis=-1)
    return np.fft.irfft(modes, n=grid.n_space, axis=-1)


def _rho_profile(grid: Grid1D, tgrid: TimeGrid) -> np.ndarray:
    """Var(V_{t_m}(x_i)) in closed form from the mode sums, shape (M+1, npts)."""
    lam = spectral_eigenvalues(grid)
    times = tgrid.times[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        mode_var = np.where(lam > 0, -np.expm1(-2.0 * lam * times) / (2.0 * lam),
                            times)
    if grid.setup.kind is DomainKind.NEUMANN_UNIT:
        k = np.arange(grid.n_space + 1)
        basis_sq = 2.0 * np.cos(np.pi * np.outer(k, grid.coords)) ** 2
        basis_sq[0] = 1.0
        basis_sq[-1] = 0.0  # silent top mode
        return mode_var @ basis_sq
    weights = np.full(lam.size, 2.0)
    weights[0] = 1.0
    if grid.n_space % 2 == 0:
        weights[-1] = 1.0
    profile = (mode_var @ weights) / grid.extent
    return np.repeat(profile[:, None], grid.npts, axis=1)


@dataclass(frozen=True)
class StochasticConvolution:
    """Exact-in-law solution of the linear equation driven by one realization.

    values[m] is V at time t_m; increment_fields[m] = V_{m+1} - P_dt V_m is
    the fresh noise entering step m; rho is the closed-form variance profile.
    """

    noise: NoiseRealization
    values: np.ndarray
    increment_fields: np.ndarray
    rho: np.ndarray

    @property
    def grid(self) -> Grid1D:
        return self.noise.grid

    @property
    def tgrid(self) -> TimeGrid:
        return self.noise.tgrid


def simulate_convolution(noise: NoiseRealization) -> StochasticConvolution:
    grid, tgrid = noise.grid, noise.tgrid
    decay, gain = _ou_coefficients(grid, tgrid)
    z = _mode_increments(noise)
    modes = np.zeros((tgrid.n_time + 1, z.shape[1]), dtype=z.dtype)
    ou_scan(decay, gain, z, modes)
    values = _modes_to_fields(grid, modes)
    values[0] = 0.0
    incr = _modes_to_fields(grid, gain * z)
    return StochasticConvolution(noise, values, incr, _rho_profile(grid, tgrid))


def convolution_increment_residual(conv: StochasticConvolution, s: float,
                                   t: float) -> np.ndarray:
    """V_t - P_{t-s} V_s: the convolution of the noise on (s, t] alone."""
    if t < s:
        raise ValueError("need s <= t")
    ms = conv.tgrid.index_of(s)
    mt = conv.tgrid.index_of(t)
    if ms == mt:
        return np.zeros(conv.grid.npts)
    mult = np.exp(-spectral_eigenvalues(conv.grid) * (t - s))
    return conv.values[mt] - apply_spectral_multiplier(conv.grid,
                                                       conv.values[ms], mult)


def write_array_dump(path, array: np.ndarray) -> None:
    """Binary dump for cross-implementation comparison: a shape header of two
    little-endian int64 (rows, cols) followed by float64 LE data, row-major."""
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("dump format is 2-d")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_array_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError("truncated array dump")
        rows, cols = struct.unpack("<qq", header)
        if rows < 0 or cols < 0:
            raise ValueError("corrupt array dump header")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise ValueError("truncated array dump")
    return data.reshape(rows, cols).copy()
