"""Discrete anisotropic space-time norms ||<grad_x>^s <d_t>^b u||_p.

Restriction norms over [0, T] are not computable as the infimum over
extensions; the fixed competitor used throughout multiplies by a smooth time
cutoff equal to 1 on [0, T] and supported in [-T/4, 5T/4], then periodizes
on a 2T window for the temporal transform.  Every value reported here is
therefore an upper bound of the restriction norm, and all tests are phrased
against this fixed extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterOutOfRange
from .grid import RealField, TorusGrid, smoothstep

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Uniform time slices of a scalar field over [0, T]."""

    grid: TorusGrid
    times: np.ndarray
    values: np.ndarray  # (K, M, M)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if len(times) < 8:
            raise ValueError("need at least 8 time slices")
        if values.shape != (len(times), self.grid.M, self.grid.M):
            raise ValueError("slice array does not match time grid and grid size")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_slices(cls, slices: list[RealField], times) -> "SpaceTimeField":
        grid = slices[0].grid
        return cls(grid, np.asarray(times, float), np.stack([s.values for s in slices]))


def _extended_signal(u: SpaceTimeField):
    """Cutoff extension of u onto a 2T-periodic window, plus its time grid.

    The window keeps the sample spacing (samples land on window slots when
    K is odd); values are reflected evenly about t = 0 and t = T into the
    wings and then damped by the smooth cutoff, so the extension agrees
    with u on [0, T] and keeps its oscillation content in the wings.
    """
    T = u.T
    K = len(u.times)
    step = T / (K - 1)
    n_window = 2 * (K - 1)
    t_window = -0.5 * T + step * np.arange(n_window)
    t_fold = np.where(t_window < 0.0, -t_window, t_window)
    t_fold = np.where(t_fold > T, 2.0 * T - t_fold, t_fold)
    pos = np.clip((t_fold - u.times[0]) / step, 0.0, K - 1.0)
    lo = np.clip(np.floor(pos).astype(int), 0, K - 1)
    hi = np.clip(lo + 1, 0, K - 1)
    frac = (pos - lo)[:, None, None]
    vals = (1.0 - frac) * u.values[lo] + frac * u.values[hi]
    # smooth cutoff: 1 on [0, T], 0 outside [-T/4, 5T/4]
    ramp_in = smoothstep((t_window + 0.25 * T) / (0.25 * T))
    ramp_out = smoothstep((1.25 * T - t_window) / (0.25 * T))
    cutoff = np.minimum(ramp_in, ramp_out)
    return t_window, cutoff[:, None, None] * vals


def lambda_norm(
    u: SpaceTimeField,
    s: float,
    b: float,
    p: float,
    lam: float = 0.0,
    extend: bool = True,
) -> float:
    """Anisotropic norm of the extended signal, weight exp(-lam |t|) last.

    <grad_x>^s acts spectrally per slice, <d_t>^b through the discrete
    temporal transform on the 2T-periodic window.  extend=False skips the
    cutoff wings and periodizes [0, T) directly (used by exact constants
    checks).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = u.grid
    if extend:
        t_window, sig = _extended_signal(u)
    else:
        t_window, sig = u.times[:-1], u.values[:-1]
    # spatial multiplier
    spec = np.fft.fft2(sig, axes=(-2, -1))
    spec *= grid.bracket_t ** s
    sig = np.fft.ifft2(spec, axes=(-2, -1)).real
    # temporal multiplier on the periodic window
    n_t = len(t_window)
    span = n_t * (t_window[1] - t_window[0])
    tau = TWO_PI * np.fft.fftfreq(n_t, d=span / n_t)
    mult = (1.0 + tau ** 2) ** (b / 2.0)
    sig = np.fft.ifft(mult[:, None, None] * np.fft.fft(sig, axis=0), axis=0).real
    if lam > 0.0:
        sig = sig * np.exp(-lam * np.abs(t_window))[:, None, None]
    if math.isinf(p):
        return float(np.abs(sig).max())
    dt = t_window[1] - t_window[0]
    return float((np.sum(np.abs(sig) ** p) * grid.cell_area * dt) ** (1.0 / p))


def random_band_limited(rng, grid: TorusGrid, band: int, k_t: int, times) -> SpaceTimeField:
    """Random field with spatial band |n| <= band and k_t temporal harmonics."""
    times = np.asarray(times, dtype=float)
    T = times[-1]
    vals = np.zeros((len(times), grid.M, grid.M))
    mask = grid.abs_n <= band
    for k in range(k_t):
        z = np.fft.fft2(rng.standard_normal((grid.M, grid.M))) / grid.M
        coeffs = np.where(mask, z, 0.0)
        slice_field = (grid.M ** 2 / TWO_PI) * np.fft.ifft2(grid.phase * coeffs).real
        osc = np.cos(math.pi * k * times / T + rng.uniform(0.0, TWO_PI))
        vals += osc[:, None, None] * slice_field[None]
    return SpaceTimeField(grid, times, vals)


def coherent_band_limited(grid: TorusGrid, band: int, times) -> SpaceTimeField:
    """All-ones-phase member: the concentrating worst case of the family."""
    mask = (grid.abs_n <= band).astype(complex)
    slice_field = (grid.M ** 2 / TWO_PI) * np.fft.ifft2(grid.phase * mask).real
    osc = np.ones(len(times))
    return SpaceTimeField(grid, np.asarray(times, float), osc[:, None, None] * slice_field[None])


def embedding_check(
    grid: TorusGrid,
    s: float,
    b: float,
    p: float,
    band_limits=(4, 8, 16),
    n_fields: int = 100,
    k_t: int = 8,
    T: float = TWO_PI,
    n_slices: int = 65,
    seed: int = 0,
    enforce_range: bool = True,
) -> dict:
    """sup-norm to lambda-norm ratio over a family of band-limited fields.

    PASS iff the max ratio grows by at most 2x per doubling of the band
    limit; requires s > 2/p and b > 1/p strictly (set enforce_range=False to
    probe the violation regime).
    """
    if enforce_range and (s <= 2.0 / p or b <= 1.0 / p):
        raise ParameterOutOfRange("embedding needs s > 2/p and b > 1/p")
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, T, n_slices)
    max_ratio = {}
    for band in band_limits:
        ratios = []
        for _ in range(n_fields - 1):
            u = random_band_limited(rng, grid, band, k_t, times)
            ratios.append(np.abs(u.values).max() / lambda_norm(u, s, b, p))
        u = coherent_band_limited(grid, band, times)
        ratios.append(np.abs(u.values).max() / lambda_norm(u, s, b, p))
        max_ratio[band] = float(np.max(ratios))
    bands = sorted(max_ratio)
    growths = [max_ratio[b2] / max_ratio[b1] for b1, b2 in zip(bands[:-1], bands[1:])]
    return {
        "max_ratio": max_ratio,
        "growth_per_doubling": growths,
        "pass": bool(all(g <= 2.0 for g in growths)),
    }
