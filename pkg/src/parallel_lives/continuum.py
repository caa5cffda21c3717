"""Discretized position-space scenarios.

Square-well collapse redistribution, delayed-choice eraser screen
distributions, and a transport lower bound on how long a collapse can
take given that no life outruns the speed limit.  Profiles are bin-mass
vectors on a uniform grid; everything is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qmath import Basis, Ket

PROFILE_ATOL = 1e-9
TAIL_LIMIT = 1e-8


class ContinuumError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    bins: int

    def __post_init__(self):
        if self.bins < 8:
            raise ContinuumError("grid needs at least 8 bins")
        if not self.x_max > self.x_min:
            raise ContinuumError("grid needs x_max > x_min")

    @property
    def width(self) -> float:
        return (self.x_max - self.x_min) / self.bins

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.bins) + 0.5) * self.width

    def doubled(self) -> "Grid":
        return Grid(self.x_min, self.x_max, self.bins * 2)


@dataclass(frozen=True)
class DensityProfile:
    """Probability mass per bin; non-negative, sums to one."""

    grid: Grid
    values: np.ndarray

    def __init__(self, grid: Grid, values):
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != grid.bins:
            raise ContinuumError(f"{vals.shape[0]} values on a {grid.bins}-bin grid")
        if np.any(vals < -PROFILE_ATOL):
            raise ContinuumError("negative bin mass")
        vals = np.clip(vals, 0.0, None)
        total = float(vals.sum())
        if abs(total - 1.0) > PROFILE_ATOL:
            raise ContinuumError(f"profile mass {total!r} out of tolerance")
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def density(self) -> np.ndarray:
        return self.values / self.grid.width

    def to_csv(self) -> str:
        lines = ["x,value"]
        for x, v in zip(self.grid.centers(), self.values):
            lines.append(f"{x:.17g},{v:.17g}")
        return "\n".join(lines) + "\n"


def _normalize(grid: Grid, raw: np.ndarray) -> DensityProfile:
    total = float(raw.sum())
    if total <= 0.0:
        raise ContinuumError("cannot normalize an empty profile")
    return DensityProfile(grid, raw / total)


def fringe_visibility(profile: DensityProfile, window: tuple[float, float] | None = None
                      ) -> float:
    """(max - min) / (max + min) over the bins inside ``window``."""
    vals = profile.values
    if window is not None:
        x = profile.grid.centers()
        sel = (x >= window[0]) & (x <= window[1])
        vals = vals[sel]
    hi, lo = float(vals.max()), float(vals.min())
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)


def cosine_correlation(profile: DensityProfile, k: float) -> float:
    """|<P, cos(2kx)>| relative to ||P||; zero for a fringe-free profile."""
    x = profile.grid.centers()
    num = abs(float(np.dot(profile.values, np.cos(2.0 * k * x))))
    return num / float(np.linalg.norm(profile.values))


# ---------------------------------------------------------------------------
# square well


def square_well_profiles(length: float, superposition: Sequence[tuple[int, complex]],
                         bins: int = 1024) -> tuple[DensityProfile, DensityProfile]:
    """Life density before and after an energy measurement in the well.

    ``before`` is the coherent density |sum c_n phi_n|^2; ``after`` is the
    incoherent sum of |c_n phi_n|^2, the redistribution forced once each
    relative world holds a single energy eigenstate.
    """
    norm2 = sum(abs(c) ** 2 for _, c in superposition)
    if abs(norm2 - 1.0) > 1e-9:
        raise ContinuumError("superposition coefficients must be normalized")
    grid = Grid(0.0, float(length), bins)
    x = grid.centers()
    amp = np.zeros(grid.bins, dtype=np.complex128)
    incoherent = np.zeros(grid.bins, dtype=np.float64)
    for n, c in superposition:
        mode = np.sin(n * math.pi * x / length)
        amp += c * mode
        incoherent += abs(c) ** 2 * mode ** 2
    return _normalize(grid, np.abs(amp) ** 2), _normalize(grid, incoherent)


def wasserstein_1d(a: DensityProfile, b: DensityProfile) -> float:
    """Exact 1-D optimal-transport distance via cumulative sums."""
    if a.grid != b.grid:
        raise ContinuumError("profiles live on different grids")
    diff = np.cumsum(a.values - b.values)
    return float(np.sum(np.abs(diff)) * a.grid.width)


def collapse_time_lower_bound(before: DensityProfile, after: DensityProfile,
                              c: float) -> float:
    """W1(before, after) / c: no redistribution of lives can finish faster."""
    if c <= 0.0:
        raise ContinuumError("speed limit must be positive")
    return wasserstein_1d(before, after) / c


# ---------------------------------------------------------------------------
# delayed-choice eraser


@dataclass(frozen=True)
class EraserConfig:
    """Screen geometry: Gaussian envelope of width sigma, phase tilt k."""

    sigma: float
    k: float
    grid: Grid

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ContinuumError("envelope width must be positive")
        span = self.grid.x_max - self.grid.x_min
        if self.k * span < 4.0 * math.pi:
            raise ContinuumError("need at least two fringes across the screen")
        # Gaussian tail left outside the grid must be negligible
        from math import erf

        def mass_inside(lo, hi):
            s = self.sigma * math.sqrt(2.0)
            return 0.5 * (erf(hi / s) - erf(lo / s))

        tail = 1.0 - mass_inside(self.grid.x_min, self.grid.x_max)
        if tail > TAIL_LIMIT:
            raise ContinuumError(f"envelope tail mass {tail:.3e} exceeds {TAIL_LIMIT}")


def default_eraser_config(bins: int = 1024) -> EraserConfig:
    """16-sigma-wide screen with a 4*pi tilt.

    The grid is shifted by half a bin so that bin centers land exactly on
    the extrema of cos^2(kx) and sin^2(kx): sampled fringes then reach
    their true maxima and zeros at every resolution.
    """
    length = 16.0
    half_bin = length / bins / 2.0
    grid = Grid(-length / 2.0 - half_bin, length / 2.0 - half_bin, bins)
    return EraserConfig(sigma=1.0, k=4.0 * math.pi, grid=grid)


def _envelope_mass(cfg: EraserConfig) -> np.ndarray:
    x = cfg.grid.centers()
    g2 = np.exp(-(x ** 2) / (2.0 * cfg.sigma ** 2))
    return g2 / g2.sum()


def screen_qubit_ket(cfg: EraserConfig, screen: str = "S", qubit: str = "q") -> Ket:
    """Discretized joint state of screen position and tag qubit.

    Amplitudes carry the opposite phase tilts exp(+-ikx) on the two qubit
    components over a common Gaussian envelope.
    """
    x = cfg.grid.centers()
    g = np.sqrt(_envelope_mass(cfg))
    amp = np.stack([g * np.exp(1j * cfg.k * x), g * np.exp(-1j * cfg.k * x)],
                   axis=1) / math.sqrt(2.0)
    return Ket(((screen, cfg.grid.bins), (qubit, 2)), amp.reshape(-1))


def unconditional_density(cfg: EraserConfig) -> DensityProfile:
    """Screen density before any qubit conditioning: the bare envelope."""
    return DensityProfile(cfg.grid, _envelope_mass(cfg))


def eraser_distributions(cfg: EraserConfig, qubit_basis: Basis
                         ) -> dict[str, DensityProfile]:
    """Conditional screen distribution met by each qubit relative world."""
    psi = screen_qubit_ket(cfg)
    tens = psi.amplitudes.reshape(cfg.grid.bins, 2)
    out: dict[str, DensityProfile] = {}
    for lab, vec in zip(qubit_basis.labels, qubit_basis.vectors):
        cond = tens @ np.conj(vec)
        out[lab] = _normalize(cfg.grid, np.abs(cond) ** 2)
    return out


def eraser_fringe_visibility(cfg: EraserConfig, profile: DensityProfile,
                             window_sigmas: float = 2.0) -> float:
    """Fringe visibility of a conditional screen profile.

    The profile is divided by the envelope before taking
    (max - min) / (max + min), restricted to |x| <= window_sigmas * sigma,
    so a fringe-free conditional reads 0 regardless of envelope shape.
    """
    x = cfg.grid.centers()
    env = _envelope_mass(cfg)
    sel = np.abs(x) <= window_sigmas * cfg.sigma
    ratio = profile.values[sel] / env[sel]
    hi, lo = float(ratio.max()), float(ratio.min())
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)


def eraser_outcome_masses(cfg: EraserConfig, qubit_basis: Basis) -> dict[str, float]:
    """Proportion of qubit lives in each relative world (before conditioning)."""
    psi = screen_qubit_ket(cfg)
    tens = psi.amplitudes.reshape(cfg.grid.bins, 2)
    return {
        lab: float(np.sum(np.abs(tens @ np.conj(vec)) ** 2))
        for lab, vec in zip(qubit_basis.labels, qubit_basis.vectors)
    }


def analytic_eraser_profile(cfg: EraserConfig, kind: str) -> np.ndarray:
    """Reference bin masses for G^2 cos^2(kx) / G^2 sin^2(kx) / G^2."""
    x = cfg.grid.centers()
    g2 = _envelope_mass(cfg)
    if kind == "cos2":
        raw = g2 * np.cos(cfg.k * x) ** 2
    elif kind == "sin2":
        raw = g2 * np.sin(cfg.k * x) ** 2
    elif kind == "flat":
        raw = g2.copy()
    else:
        raise ContinuumError(f"unknown profile kind {kind!r}")
    return raw / raw.sum()


# ---------------------------------------------------------------------------
# scattering scenarios live in the catalog; thin wrappers keep them reachable
# from this module as well


def ballistic_scatter():
    """Run the symmetric two-particle scattering event; returns its table."""
    from . import scenarios

    report = scenarios.run(scenarios.builtin("ballistic_scatter"))
    return report.split_tables["scatter"]
