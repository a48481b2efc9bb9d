"""Gaussian free field data, white-noise increments, renormalization constants.

Samplers are pure functions of (stream, grid); a stream yields one
deterministic draw sequence and must not be shared across workers.  Ensemble
members get counter-based Philox substreams so parallel runs reproduce
bit-for-bit regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CutoffExceedsGrid
from .grid import RealField, SpectralField, TorusGrid, coeffs_to_grid, smooth_projector

TWO_PI = 2.0 * math.pi


class RngStream:
    """Deterministic Philox-backed stream keyed by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def substream(self, i: int) -> "RngStream":
        """Derived stream for ensemble member i (independent of this one)."""
        return RngStream(self.seed, i)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def hermitian_unit_noise(rng: RngStream, grid: TorusGrid, shape=()) -> np.ndarray:
    """Complex Gaussian coefficients with E|z(n)|^2 = 1 and z(-n) = conj(z(n)).

    Built by conjugate-symmetrizing iid complex Gaussians, which leaves the
    self-conjugate FFT modes (components in {0, -M/2}) real with the full
    complex-mode variance.
    """
    M = grid.M
    w = rng.generator.standard_normal(tuple(shape) + (M, M, 2))
    z = (w[..., 0] + 1j * w[..., 1]) * 0.5  # CN with E|z|^2 = 1/2
    z_fl = np.conj(np.roll(z[..., ::-1, ::-1], shift=(1, 1), axis=(-2, -1)))
    return z + z_fl


def sample_mu1_pair(rng: RngStream, grid: TorusGrid) -> tuple[RealField, RealField]:
    """Draw (u0, u1) with coefficients g_n/<n> and h_n, g/h iid standard."""
    c0, c1 = sample_mu1_spectral(rng, grid)
    return (
        RealField(grid, coeffs_to_grid(grid, c0)),
        RealField(grid, coeffs_to_grid(grid, c1)),
    )


def sample_mu1_spectral(rng: RngStream, grid: TorusGrid, shape=()) -> tuple[np.ndarray, np.ndarray]:
    """Spectral version of sample_mu1_pair (optionally batched)."""
    z0 = hermitian_unit_noise(rng, grid, shape)
    z1 = hermitian_unit_noise(rng, grid, shape)
    return z0 / grid.bracket_t, z1


def white_noise_increment(rng: RngStream, grid: TorusGrid, dt: float) -> SpectralField:
    """Increment of the cylindrical Wiener process over a step of size dt.

    Per-mode variance is dt, matching Var(B_n(t)) = t.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return SpectralField(grid, math.sqrt(dt) * hermitian_unit_noise(rng, grid))


@dataclass(frozen=True)
class RenormConstants:
    """Cutoff-dependent variance sigma_N and counterterm gamma_N(beta)."""

    N: int
    sigma_N: float

    def __post_init__(self):
        if self.sigma_N <= 0:
            raise ValueError("sigma_N must be positive")

    def gamma_at(self, beta: float) -> float:
        """gamma_N(beta) = exp(-beta^2 sigma_N / 2); even in beta."""
        return math.exp(-0.5 * beta * beta * self.sigma_N)


def compute_sigma_N(N: int, grid: TorusGrid) -> RenormConstants:
    """Variance of the smoothly truncated free field at a point.

    sigma_N = E[(P_N u0(x))^2] = (2 pi)^{-2} sum_n chi_N(n)^2 / <n>^2.
    The factor (2 pi)^{-2} is |e_n(x)|^2 for the orthonormal modes; with it,
    sigma_N grows like log(N)/(2 pi).  N <= M/2 guarantees the multiplier
    support lies inside the grid band, so the lattice sum is untruncated.
    """
    if N > grid.M // 2:
        raise CutoffExceedsGrid(f"sigma_N needs N <= M/2, got N={N}, M={grid.M}")
    chi = smooth_projector(grid, N).symbol
    total = float(np.sum(chi * chi / grid.bracket2))
    return RenormConstants(N, total / (TWO_PI ** 2))


@lru_cache(maxsize=None)
def sigma_for(M: int, N: int) -> RenormConstants:
    from .grid import get_grid

    return compute_sigma_N(N, get_grid(M))
