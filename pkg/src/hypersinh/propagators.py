"""Exact per-mode propagation for the damped Klein-Gordon and wave flows.

Each Fourier mode of the linear equation x'' + x' + <n>^2 x = sqrt(2) dB
is an underdamped oscillator (since <n> >= 1 > 1/2, no overdamped branch
exists).  The 2x2 fundamental matrix and the accumulated noise covariance
are known in closed form, so one step of any size is exact in law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NegativeTime
from .grid import (
    RealField,
    SpectralField,
    TorusGrid,
    coeffs_to_grid,
    forward_dft,
    grid_to_coeffs,
    inverse_dft,
    smooth_projector,
)
from .randfields import RngStream, hermitian_unit_noise


def _sin_ratio(t, mu):
    """sin(t mu)/mu with the removable singularity at mu = 0."""
    mu = np.asarray(mu, dtype=float)
    out = np.where(mu == 0.0, t, np.sin(t * mu) / np.where(mu == 0.0, 1.0, mu))
    return out


def kg_multiplier(t: float, n) -> float:
    """Damped Klein-Gordon propagator symbol e^{-t/2} sin(t [n]) / [n]."""
    from .grid import kg_bracket

    w = kg_bracket(n)
    return math.exp(-0.5 * t) * math.sin(t * w) / w


def wave_multiplier(t: float, n) -> float:
    """Damped wave propagator symbol e^{-t/2} sin(t |n|) / |n| (t e^{-t/2} at n=0)."""
    n1, n2 = n
    mu = math.hypot(n1, n2)
    if mu == 0.0:
        return t * math.exp(-0.5 * t)
    return math.exp(-0.5 * t) * math.sin(t * mu) / mu


def kg_table(grid: TorusGrid, t: float) -> np.ndarray:
    return math.exp(-0.5 * t) * np.sin(t * grid.kg_t) / grid.kg_t


def wave_table(grid: TorusGrid, t: float) -> np.ndarray:
    return math.exp(-0.5 * t) * _sin_ratio(t, grid.abs_n)


def diff_table(grid: TorusGrid, t: float) -> np.ndarray:
    """Symbol of D(t) - S(t), the two-derivative smoothing difference."""
    return kg_table(grid, t) - wave_table(grid, t)


@dataclass(frozen=True)
class ModeMatrix:
    """Fundamental matrix and exact noise covariance of one mode over time t."""

    n: tuple
    t: float
    a11: float
    a12: float
    a21: float
    a22: float
    q11: float
    q12: float
    q22: float


def _matrix_blocks(omega, t):
    """Vectorized fundamental-matrix entries in (x, x') coordinates."""
    e = np.exp(-0.5 * t)
    s = np.sin(omega * t)
    c = np.cos(omega * t)
    a11 = e * (c + s / (2.0 * omega))
    a12 = e * s / omega
    a21 = -e * s * (omega + 0.25 / omega)  # = -<n>^2 a12
    a22 = e * (c - s / (2.0 * omega))
    return a11, a12, a21, a22


def _covariance_blocks(omega, t):
    """Exact covariance of sqrt(2) * int_0^t Phi(tau) dB, Phi = (D, dD/dt)."""
    c = 1.0 + 4.0 * omega * omega  # = 4 <n>^2
    e = np.exp(-t)
    cos2 = np.cos(2.0 * omega * t)
    sin2 = np.sin(2.0 * omega * t)
    big_i = (1.0 - e * cos2 + 2.0 * omega * e * sin2) / c
    big_j = (2.0 * omega - 2.0 * omega * e * cos2 - e * sin2) / c
    one_me = 1.0 - e
    q11 = (one_me - big_i) / (omega * omega)
    q12 = e * np.sin(omega * t) ** 2 / (omega * omega)
    q22 = one_me + big_i - big_j / omega + (one_me - big_i) / (4.0 * omega * omega)
    return q11, q12, q22


def mode_matrix(t: float, n) -> ModeMatrix:
    if t < 0:
        raise NegativeTime(f"mode_matrix needs t >= 0, got {t}")
    from .grid import kg_bracket

    w = kg_bracket(n)
    a11, a12, a21, a22 = (float(v) for v in _matrix_blocks(np.float64(w), t))
    q11, q12, q22 = (float(v) for v in _covariance_blocks(np.float64(w), t))
    return ModeMatrix(tuple(n), t, a11, a12, a21, a22, q11, q12, q22)


@lru_cache(maxsize=32)
def step_tables(grid: TorusGrid, dt: float) -> dict:
    """Per-mode matrices and the Cholesky factor of the noise covariance."""
    if dt < 0:
        raise NegativeTime(f"step_tables needs dt >= 0, got {dt}")
    w = grid.kg_t
    a11, a12, a21, a22 = _matrix_blocks(w, dt)
    q11, q12, q22 = _covariance_blocks(w, dt)
    l11 = np.sqrt(np.maximum(q11, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        l21 = np.where(l11 > 0, q12 / np.where(l11 > 0, l11, 1.0), 0.0)
    l22 = np.sqrt(np.maximum(q22 - l21 * l21, 0.0))
    return {
        "a11": a11, "a12": a12, "a21": a21, "a22": a22,
        "q11": q11, "q12": q12, "q22": q22,
        "l11": l11, "l21": l21, "l22": l22,
    }


@dataclass(frozen=True)
class StatePair:
    """Phase-space point (u, du/dt) for the second-order dynamics."""

    u: RealField
    ut: RealField

    def __post_init__(self):
        if self.u.grid.M != self.ut.grid.M:
            raise ValueError("u and ut live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    def spectra(self) -> tuple[np.ndarray, np.ndarray]:
        return forward_dft(self.u).coeffs, forward_dft(self.ut).coeffs

    @staticmethod
    def from_spectra(grid: TorusGrid, u_hat: np.ndarray, ut_hat: np.ndarray) -> "StatePair":
        return StatePair(
            RealField(grid, coeffs_to_grid(grid, u_hat)),
            RealField(grid, coeffs_to_grid(grid, ut_hat)),
        )

    @staticmethod
    def zero(grid: TorusGrid) -> "StatePair":
        z = np.zeros((grid.M, grid.M))
        return StatePair(RealField(grid, z), RealField(grid, z.copy()))


def evolve_spectral(grid, u_hat, ut_hat, dt, rng=None, noise_symbol=None):
    """One exact step of the linear damped Klein-Gordon SDE on spectra.

    Arrays may carry leading batch dimensions.  With rng=None the
    deterministic flow is applied.  noise_symbol multiplies the increment
    (frequency projection of the noise); the deterministic part is left
    untouched, so states already supported in the projected band stay there.
    """
    tab = step_tables(grid, dt)
    new_u = tab["a11"] * u_hat + tab["a12"] * ut_hat
    new_ut = tab["a21"] * u_hat + tab["a22"] * ut_hat
    if rng is not None:
        shape = u_hat.shape[:-2]
        z1 = hermitian_unit_noise(rng, grid, shape)
        z2 = hermitian_unit_noise(rng, grid, shape)
        w1 = tab["l11"] * z1
        w2 = tab["l21"] * z1 + tab["l22"] * z2
        if noise_symbol is not None:
            w1 = noise_symbol * w1
            w2 = noise_symbol * w2
        new_u = new_u + w1
        new_ut = new_ut + w2
    return new_u, new_ut


def evolve_psi(state: StatePair, dt: float, rng: RngStream | None, cutoff: int | None = None) -> StatePair:
    """Advance the stochastic convolution by dt, exactly in law.

    With a cutoff N the noise is projected through the smooth frequency
    projector; initial data must already live in the projected band for the
    result to be the marginal of the projected flow.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    sym = smooth_projector(grid, cutoff).symbol if cutoff is not None else None
    u_hat, ut_hat = state.spectra()
    new_u, new_ut = evolve_spectral(grid, u_hat, ut_hat, dt, rng, sym)
    return StatePair.from_spectra(grid, new_u, new_ut)


def diff_smoothing_ratio(t: float, s: float, grid: TorusGrid) -> float:
    """Operator norm of D(t)-S(t) from H^s to H^{s+2} over grid frequencies."""
    if t < 0:
        raise NegativeTime(f"diff_smoothing_ratio needs t >= 0, got {t}")
    num = grid.bracket_t ** (s + 2.0) * np.abs(diff_table(grid, t))
    den = grid.bracket_t ** s
    return float(np.max(num / den))


def riemann_covariance(n, t: float, substeps: int = 10_000):
    """Riemann-sum check value for the q-blocks (independent of closed forms)."""
    from .grid import kg_bracket

    w = kg_bracket(n)
    tau = (np.arange(substeps) + 0.5) * (t / substeps)
    d = np.exp(-0.5 * tau) * np.sin(w * tau) / w
    ddt = np.exp(-0.5 * tau) * (np.cos(w * tau) - np.sin(w * tau) / (2.0 * w))
    h = t / substeps
    q11 = 2.0 * float(np.sum(d * d)) * h
    q12 = 2.0 * float(np.sum(d * ddt)) * h
    q22 = 2.0 * float(np.sum(ddt * ddt)) * h
    return q11, q12, q22
