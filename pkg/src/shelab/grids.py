"""Domains, space-time grids, the time simplex, and the left grid projection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

#: slack absorbed by the floor in :func:`kappa_n` so that exact grid points
#: k/n (whose float product n*(k/n) may round just below k) map to themselves.
KAPPA_SNAP = 1e-9

_REL_TOL = 1e-12


class DomainKind(enum.Enum):
    PERIODIC_UNIT = "periodic"
    NEUMANN_UNIT = "neumann"
    WHOLE_LINE = "whole_line"


@dataclass(frozen=True)
class DomainSetup:
    """One of the three domain options: unit circle, unit interval with
    reflecting ends, or the real line approximated by a wide torus."""

    kind: DomainKind
    torus_width: float = 1.0

    def __post_init__(self):
        if self.kind is DomainKind.WHOLE_LINE:
            if not (self.torus_width > 0 and math.isfinite(self.torus_width)):
                raise ValueError("torus_width must be a positive real")
        else:
            object.__setattr__(self, "torus_width", 1.0)

    @property
    def extent(self) -> float:
        return self.torus_width if self.kind is DomainKind.WHOLE_LINE else 1.0

    def validate_for_horizon(self, horizon: float) -> None:
        """Boundary influence at the horizon must be below truncation level."""
        if self.kind is DomainKind.WHOLE_LINE:
            need = 8.0 * math.sqrt(horizon)
            if self.torus_width < need:
                raise ValueError(
                    f"torus_width {self.torus_width} < 8*sqrt(horizon) = {need:.6g}"
                )


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid.

    Fields live on cell centers for periodic/whole-line setups and on the
    n_space+1 cell nodes (including both endpoints) for Neumann, so that the
    reflection symmetry of the Neumann kernel holds exactly on the grid.
    White-noise increments always live on the n_space cells.
    """

    setup: DomainSetup
    n_space: int

    def __post_init__(self):
        if self.n_space < 2:
            raise ValueError("n_space must be >= 2")
        if abs(self.dx * self.n_space - self.extent) > _REL_TOL * self.extent:
            raise AssertionError("dx * n_space must reproduce the extent")

    @property
    def extent(self) -> float:
        return self.setup.extent

    @property
    def dx(self) -> float:
        return self.extent / self.n_space

    @property
    def x_left(self) -> float:
        return -0.5 * self.extent if self.setup.kind is DomainKind.WHOLE_LINE else 0.0

    @property
    def npts(self) -> int:
        """Number of field values."""
        if self.setup.kind is DomainKind.NEUMANN_UNIT:
            return self.n_space + 1
        return self.n_space

    @property
    def coords(self) -> np.ndarray:
        """Coordinates carrying field values (strictly increasing)."""
        if self.setup.kind is DomainKind.NEUMANN_UNIT:
            return np.arange(self.n_space + 1) * self.dx
        return self.x_left + (np.arange(self.n_space) + 0.5) * self.dx

    @property
    def cell_centers(self) -> np.ndarray:
        """Centers of the noise cells (= coords except for Neumann)."""
        return self.x_left + (np.arange(self.n_space) + 0.5) * self.dx

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights matching `coords` (trapezoid for Neumann)."""
        if self.setup.kind is DomainKind.NEUMANN_UNIT:
            w = np.full(self.n_space + 1, self.dx)
            w[0] = w[-1] = 0.5 * self.dx
            return w
        return np.full(self.n_space, self.dx)

    @property
    def window_mask(self) -> np.ndarray:
        """Observation window: central half of the torus for WHOLE_LINE,
        everything otherwise."""
        if self.setup.kind is DomainKind.WHOLE_LINE:
            return np.abs(self.coords) <= 0.25 * self.extent + 1e-12
        return np.ones(self.npts, dtype=bool)

    def coarsen(self, factor: int = 2) -> "Grid1D":
        if self.n_space % factor:
            raise ValueError("n_space not divisible by coarsening factor")
        return Grid1D(self.setup, self.n_space // factor)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon], horizon <= 1."""

    n_time: int
    horizon: float = 1.0

    def __post_init__(self):
        if self.n_time < 1:
            raise ValueError("n_time must be >= 1")
        if not (0.0 < self.horizon <= 1.0):
            raise ValueError("horizon must lie in (0, 1]")
        if abs(self.dt * self.n_time - self.horizon) > _REL_TOL * self.horizon:
            raise AssertionError("dt * n_time must reproduce the horizon")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_time

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_time + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Exact grid index of t; raises if t is off-grid."""
        m = int(round(t / self.dt))
        if m < 0 or m > self.n_time or abs(m * self.dt - t) > 1e-9:
            raise ValueError(f"time {t} is not on the grid (dt={self.dt})")
        return m

    def snap_index(self, t: float) -> tuple[int, bool]:
        """Left grid index of t; second value reports whether snapping moved t."""
        if t < -1e-12 or t > self.horizon + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        m = min(int(math.floor(t / self.dt + KAPPA_SNAP)), self.n_time)
        return m, abs(m * self.dt - t) > 1e-9

    def coarsen(self, factor: int = 2) -> "TimeGrid":
        if self.n_time % factor:
            raise ValueError("n_time not divisible by coarsening factor")
        return TimeGrid(self.n_time // factor, self.horizon)


@dataclass(frozen=True)
class SimplexPair:
    """An ordered pair 0 <= s <= t <= horizon."""

    s: float
    t: float
    horizon: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.s <= self.t <= self.horizon):
            raise ValueError(f"need 0 <= s <= t <= horizon, got ({self.s}, {self.t})")


def kappa_n(t: float, n: int) -> float:
    """Left projection of t onto the grid {0, 1/n, ..., 1}: floor(n*t)/n."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if t < 0.0 or t > 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    k = min(math.floor(n * t + KAPPA_SNAP), n)
    return k / n


def dyadic_partitions(s: float, t: float, max_level: int) -> list[np.ndarray]:
    """Partitions of [s, t] with 2^l equal subintervals, l = 0..max_level.

    Points are built as s + j*(t-s)/2^l so that every level-l point is
    bit-identical to the corresponding level-(l+1) point.
    """
    if not s < t:
        raise ValueError("need s < t")
    if max_level > 16:
        raise ValueError("max_level must be <= 16")
    span = t - s
    out = []
    for level in range(max_level + 1):
        h = span / (1 << level)
        out.append(s + np.arange((1 << level) + 1) * h)
    return out
