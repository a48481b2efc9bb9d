"""Torus grid, discrete Fourier analysis, and frequency-space projectors.

Everything downstream works on a uniform M x M grid over the square torus of
side 2*pi, with Fourier modes n in {-M/2, ..., M/2-1}^2 kept in the standard
FFT layout (negative frequencies in the upper half of each axis).  The
Fourier pairing is u(x) = sum_n c(n) e_n(x) with e_n = (2*pi)^{-1} e^{i n.x},
so the modes are orthonormal in L^2 and Parseval holds exactly on the grid:
sum_j |u(x_j)|^2 h^2 = sum_n |c(n)|^2.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as _sfft

from .errors import CutoffExceedsGrid

TWO_PI = 2.0 * math.pi

_FFT_CHUNK = 256


def _chunked(op, a: np.ndarray) -> np.ndarray:
    """Apply a planar FFT op in batch chunks (cache-friendlier for big stacks)."""
    if a.ndim <= 2 or a.shape[0] <= _FFT_CHUNK:
        return op(a)
    out = np.empty(a.shape, dtype=complex)
    for i in range(0, a.shape[0], _FFT_CHUNK):
        out[i:i + _FFT_CHUNK] = op(a[i:i + _FFT_CHUNK])
    return out


def fft2(a: np.ndarray) -> np.ndarray:
    """FFT over the trailing two axes (scipy backend, chunked over the batch)."""
    return _chunked(lambda x: _sfft.fft2(x, axes=(-2, -1), workers=-1), a)


def ifft2(a: np.ndarray) -> np.ndarray:
    """Inverse FFT over the trailing two axes."""
    return _chunked(lambda x: _sfft.ifft2(x, axes=(-2, -1), workers=-1), a)


def bracket(n) -> float:
    """Japanese bracket <n> = (1 + |n|^2)^(1/2) of a frequency pair."""
    n1, n2 = n
    return math.sqrt(1.0 + n1 * n1 + n2 * n2)


def kg_bracket(n) -> float:
    """Damped Klein-Gordon frequency (3/4 + |n|^2)^(1/2).

    Satisfies kg_bracket(n)^2 = bracket(n)^2 - 1/4, the underdamped
    oscillation frequency of x'' + x' + <n>^2 x = 0.
    """
    n1, n2 = n
    return math.sqrt(0.75 + n1 * n1 + n2 * n2)


def _exp_bump(x: np.ndarray) -> np.ndarray:
    """exp(-1/x) for x > 0, zero otherwise (C^inf at the origin)."""
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def smoothstep(x) -> np.ndarray:
    """C^inf monotone ramp: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    g1 = _exp_bump(x)
    g2 = _exp_bump(1.0 - x)
    return g1 / (g1 + g2 + np.finfo(float).tiny)


def chi_profile(r) -> np.ndarray:
    """Radial cutoff profile: 1 on [0, 1/2], 0 on [1, inf), smooth between."""
    r = np.asarray(r, dtype=float)
    return smoothstep(2.0 * (1.0 - r))


def mollifier_profile(r) -> np.ndarray:
    """Radial bump exp(-1/(1-r^2)) on [0, 1), zero outside (unnormalized)."""
    r = np.asarray(r, dtype=float)
    return _exp_bump(1.0 - r * r)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform M x M grid on the torus (R / 2 pi Z)^2.

    Physical points are x_j = -pi + j * spacing; frequencies follow the FFT
    layout with the negative half in the upper part of each axis.  All
    derived tables are precomputed once (hot path of every simulation step).
    """

    M: int

    def __post_init__(self):
        if self.M < 4 or self.M % 2 != 0:
            raise ValueError("grid size M must be an even integer >= 4")
        M = self.M
        freqs = np.fft.fftfreq(M, d=1.0 / M).astype(int)  # 0..M/2-1, -M/2..-1
        n1, n2 = np.meshgrid(freqs, freqs, indexing="ij")
        abs2 = (n1 * n1 + n2 * n2).astype(float)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "n2", n2)
        object.__setattr__(self, "abs_n", np.sqrt(abs2))
        object.__setattr__(self, "bracket2", 1.0 + abs2)
        object.__setattr__(self, "bracket_t", np.sqrt(1.0 + abs2))
        object.__setattr__(self, "kg_t", np.sqrt(0.75 + abs2))
        # (-1)^(n1+n2) converts FFT sums to sums against e^{-i n.x_j} with
        # x_j = -pi + j h; real because n1+n2 is an integer.
        object.__setattr__(self, "phase", np.where((n1 + n2) % 2 == 0, 1.0, -1.0))
        x = -math.pi + self.spacing * np.arange(M)
        object.__setattr__(self, "x", x)
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.M

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    def torus_radius(self, center=(0.0, 0.0)) -> np.ndarray:
        """Torus distance |x_j - center| for every grid point."""
        d1 = np.mod(self.x1 - center[0] + math.pi, TWO_PI) - math.pi
        d2 = np.mod(self.x2 - center[1] + math.pi, TWO_PI) - math.pi
        return np.sqrt(d1 * d1 + d2 * d2)


@lru_cache(maxsize=None)
def get_grid(M: int) -> TorusGrid:
    return TorusGrid(M)


@dataclass(frozen=True)
class RealField:
    """Scalar field on the grid in physical representation."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M, self.grid.M):
            raise ValueError("field shape does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def l2(self) -> float:
        return math.sqrt(float(np.sum(self.values ** 2)) * self.grid.cell_area)


@dataclass(frozen=True)
class SpectralField:
    """Scalar field in Fourier representation (FFT coefficient layout)."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.M, self.grid.M):
            raise ValueError("coefficient shape does not match grid")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients contain non-finite values")
        object.__setattr__(self, "coeffs", c)

    def l2(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def hermitian_defect(self) -> float:
        """Max |c(-n) - conj(c(n))| over the grid (0 for a real field)."""
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
        return float(np.max(np.abs(flipped - np.conj(c))))


def forward_dft(f: RealField) -> SpectralField:
    """Fourier coefficients c(n) = h^2 sum_j f(x_j) conj(e_n(x_j))."""
    g = f.grid
    c = (g.cell_area / TWO_PI) * g.phase * fft2(f.values)
    return SpectralField(g, c)


def inverse_dft(f: SpectralField) -> RealField:
    """Physical samples of sum_n c(n) e_n(x); imaginary part discarded."""
    g = f.grid
    v = (g.M ** 2 / TWO_PI) * ifft2(g.phase * f.coeffs)
    return RealField(g, np.ascontiguousarray(v.real))


def coeffs_to_grid(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Array version of inverse_dft for internal batched use."""
    v = (grid.M ** 2 / TWO_PI) * ifft2(grid.phase * coeffs)
    return v.real


def grid_to_coeffs(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Array version of forward_dft for internal batched use."""
    return (grid.cell_area / TWO_PI) * grid.phase * fft2(values)


PROJECTOR_KINDS = ("smooth_pi", "sharp", "lp_block", "mollifier")


@dataclass(frozen=True)
class Projector:
    """Fourier multiplier with a real, even symbol table."""

    kind: str
    N: int
    grid: TorusGrid
    symbol: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in PROJECTOR_KINDS:
            raise ValueError(f"unknown projector kind {self.kind!r}")


def _require_cutoff(grid: TorusGrid, N: int):
    if N > grid.M // 2:
        raise CutoffExceedsGrid(f"cutoff N={N} exceeds grid band M/2={grid.M // 2}")


@lru_cache(maxsize=None)
def smooth_projector(grid: TorusGrid, N: int) -> Projector:
    """Smooth frequency projector with symbol chi(|n|/N).

    chi equals 1 for |n| <= N/2 and vanishes for |n| >= N, so modes on
    |n| = N are annihilated exactly.
    """
    _require_cutoff(grid, N)
    sym = chi_profile(grid.abs_n / N)
    return Projector("smooth_pi", N, grid, sym)


@lru_cache(maxsize=None)
def sharp_projector(grid: TorusGrid, N: int) -> Projector:
    _require_cutoff(grid, N)
    sym = (grid.abs_n <= N).astype(float)
    return Projector("sharp", N, grid, sym)


@lru_cache(maxsize=None)
def lp_block(grid: TorusGrid, N: int) -> Projector:
    """Dyadic Littlewood-Paley block; blocks over N in {1, 2, 4, ...} sum to 1."""
    _require_cutoff(grid, N)
    if N == 1:
        sym = chi_profile(grid.abs_n)
    else:
        sym = chi_profile(grid.abs_n / N) - chi_profile(2.0 * grid.abs_n / N)
    return Projector("lp_block", N, grid, sym)


@lru_cache(maxsize=None)
def mollifier(grid: TorusGrid, N: int) -> Projector:
    """Approximate identity Q_N with a nonnegative convolution kernel.

    The kernel is the radial bump eta(N|x|) sampled on the grid and
    normalized to unit discrete integral, so Q_N preserves constants exactly
    and maps nonnegative fields to nonnegative fields exactly.  The symbol
    is the discrete Fourier transform of that kernel.
    """
    if N < 1:
        raise ValueError("mollifier cutoff must be >= 1")
    r = grid.torus_radius()
    kernel = mollifier_profile(N * r)
    total = float(kernel.sum()) * grid.cell_area
    if total <= 0.0:
        # support below grid resolution: degenerate to a discrete delta
        kernel = np.zeros((grid.M, grid.M))
        kernel[0, 0] = 1.0 / grid.cell_area
        total = 1.0
    kernel = kernel / total
    # symbol(n) = h^2 sum_j kernel(x_j) e^{-i n.x_j}; real by evenness
    sym = (grid.cell_area * grid.phase * np.fft.fft2(kernel)).real
    return Projector("mollifier", N, grid, sym)


def mollifier_kernel(grid: TorusGrid, N: int) -> np.ndarray:
    """Physical-space kernel of mollifier(grid, N), centered at x = 0.

    Returned in grid layout (index j <-> offset x_j + pi, i.e. kernel[0,0]
    is the value at offset 0) so it can be used directly in circular
    convolutions.
    """
    r = grid.torus_radius()
    kernel = mollifier_profile(N * r)
    total = float(kernel.sum()) * grid.cell_area
    if total <= 0.0:
        kernel = np.zeros((grid.M, grid.M))
        kernel[grid.M // 2, grid.M // 2] = 1.0 / grid.cell_area
        total = 1.0
    return np.fft.ifftshift(kernel / total)


def make_projector(grid: TorusGrid, kind: str, N: int) -> Projector:
    factory = {
        "smooth_pi": smooth_projector,
        "sharp": sharp_projector,
        "lp_block": lp_block,
        "mollifier": mollifier,
    }
    if kind not in factory:
        raise ValueError(f"unknown projector kind {kind!r}")
    return factory[kind](grid, N)


def apply_projector(p: Projector, f):
    """Apply the multiplier coefficient-wise; kind of the field is preserved."""
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, p.symbol * f.coeffs)
    if isinstance(f, RealField):
        spec = forward_dft(f)
        return inverse_dft(SpectralField(f.grid, p.symbol * spec.coeffs))
    raise TypeError("apply_projector expects a RealField or SpectralField")


def lp_grid_norm(grid: TorusGrid, values: np.ndarray, p: float) -> float:
    """Cell-area weighted L^p norm of grid samples (p = inf gives the max)."""
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * grid.cell_area) ** (1.0 / p))


def sobolev_norm(f: RealField, s: float, p: float) -> float:
    """W^{s,p} norm: grid L^p norm of <nabla>^s f.

    For p = 2 this agrees with the direct Parseval sum of <n>^s c(n).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    g = f.grid
    spec = forward_dft(f)
    weighted = g.bracket_t ** s * spec.coeffs
    smoothed = coeffs_to_grid(g, weighted)
    return lp_grid_norm(g, smoothed, p)


# binary snapshot format: magic "HSF1", u32 little-endian M, u8 kind
# (0 = real, 1 = spectral), then row-major float64 / complex128 payload
_MAGIC = b"HSF1"


def write_field(path, f) -> None:
    if isinstance(f, RealField):
        kind = 0
        payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    elif isinstance(f, SpectralField):
        kind = 1
        payload = np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()
    else:
        raise TypeError("write_field expects a RealField or SpectralField")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IB", f.grid.M, kind))
        fh.write(payload)


def read_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad field snapshot magic {magic!r}")
        M, kind = struct.unpack("<IB", fh.read(5))
        grid = get_grid(int(M))
        raw = fh.read()
    if kind == 0:
        values = np.frombuffer(raw, dtype="<f8").reshape(M, M)
        return RealField(grid, values.copy())
    if kind == 1:
        coeffs = np.frombuffer(raw, dtype="<c16").reshape(M, M)
        return SpectralField(grid, coeffs.copy())
    raise ValueError(f"unknown snapshot kind byte {kind}")
