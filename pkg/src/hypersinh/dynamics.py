"""Time integration of the truncated renormalized sinh-Gordon / Liouville flow.

The integrator is an interaction-picture exponential Euler step: the linear
damped Klein-Gordon part (including its noise) is propagated exactly in law
through the per-mode matrices, and the bounded nonlinear drift is applied as
a kick of size dt to the velocity component.  All discretization error
therefore sits in the kick.  The stochastic convolution is co-evolved from
the same mode increments, so the remainder v = u - Psi is a deterministic
functional of the recorded path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MismatchedNoise, NonFinite
from .grid import (
    RealField,
    TorusGrid,
    coeffs_to_grid,
    get_grid,
    grid_to_coeffs,
    make_projector,
    mollifier_kernel,
)
from .anisotropic import SpaceTimeField
from .propagators import StatePair, diff_table, kg_table, step_tables, wave_table
from .randfields import RngStream, hermitian_unit_noise, sigma_for

TWO_PI = 2.0 * math.pi

VARIANTS = ("sinh", "liouville")
PROJECTORS = ("smooth_pi", "mollifier")


@dataclass(frozen=True)
class ModelParams:
    """All scalars of the truncated model plus grid and stepping settings."""

    beta: float
    iota: float
    N: int
    M: int
    variant: str = "sinh"
    projector: str | None = None
    dt: float = 1e-3
    T: float = 1.0
    oversample: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        projector = self.projector
        if projector is None:
            projector = "mollifier" if self.variant == "liouville" else "smooth_pi"
            object.__setattr__(self, "projector", projector)
        if projector not in PROJECTORS:
            raise ValueError(f"projector must be one of {PROJECTORS}")
        if self.M < 4 or self.M % 2:
            raise ValueError("M must be an even integer >= 4")
        if self.N > self.M // 2:
            raise ValueError("need N <= M/2")
        if self.oversample < 2:
            raise ValueError("oversample must be >= 2")
        guard = 1e-2 * min(1.0, 1.0 / math.sqrt(1.0 + self.N ** 2))
        if self.dt > guard * (1 + 1e-9):
            raise ValueError(f"dt={self.dt} exceeds the stability guard {guard:.3e}")
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")

    @property
    def grid(self) -> TorusGrid:
        return get_grid(self.M)

    @property
    def sigma(self) -> float:
        return sigma_for(self.M, self.N).sigma_N

    @property
    def gamma(self) -> float:
        return sigma_for(self.M, self.N).gamma_at(self.beta)

    def projector_symbol(self) -> np.ndarray:
        return make_projector(self.grid, self.projector, self.N).symbol

    def with_(self, **kw) -> "ModelParams":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return ModelParams(**d)


def _band_split(M: int):
    """Per-axis frequency map splitting the ambiguous -M/2 row into +-M/2.

    Returns (ext_freqs, src_idx, weight): M+1 extended frequencies, the
    M-layout source index each one reads from, and the 1/2 weights on the
    split Nyquist pair.
    """
    half = M // 2
    ext = np.concatenate([np.arange(half), [half, -half], np.arange(-half + 1, 0)])
    src = np.concatenate([np.arange(half), [half, half], np.arange(half + 1, M)])
    wt = np.ones(M + 1)
    wt[half] = wt[half + 1] = 0.5
    return ext, src, wt


def _collapse_axis(a: np.ndarray, M: int, axis: int) -> np.ndarray:
    """Inverse of the Nyquist split along one axis (sums the +-M/2 pair)."""
    half = M // 2
    a = np.moveaxis(a, axis, 0)
    merged = np.concatenate([a[:half], (a[half] + a[half + 1])[None], a[half + 2:]], axis=0)
    return np.moveaxis(merged, 0, axis)


def oversampled_eval(grid: TorusGrid, coeffs: np.ndarray, fn, oversample: int) -> np.ndarray:
    """Evaluate fn pointwise on an oversampled grid, then truncate the band.

    coeffs may carry leading batch axes.  Nyquist content is halved onto
    +-M/2 on the way up and summed back on the way down, so pad followed by
    unpad is the identity on the band.
    """
    M, Mf = grid.M, grid.M * oversample
    fine = get_grid(Mf)
    ext, src, wt = _band_split(M)
    padded = np.zeros(coeffs.shape[:-2] + (Mf, Mf), dtype=complex)
    block = coeffs[..., src, :][..., :, src] * (wt[:, None] * wt[None, :])
    padded[(Ellipsis,) + np.ix_(ext % Mf, ext % Mf)] = block
    values = coeffs_to_grid(fine, padded)
    out_fine = grid_to_coeffs(fine, fn(values))
    gathered = out_fine[(Ellipsis,) + np.ix_(ext % Mf, ext % Mf)]
    gathered = _collapse_axis(gathered, M, axis=-2)
    gathered = _collapse_axis(gathered, M, axis=-1)
    return gathered


class Flow:
    """Batched exponential-Euler integrator for the truncated dynamics.

    Holds spectral state arrays of shape (B, M, M) for u and (optionally) the
    co-driven stochastic convolution.  One rng draw sequence per step keeps
    runs bit-reproducible for a fixed (seed, batch size).  The nonlinear
    drift runs through a half-spectrum (rfft) pipeline with preallocated
    buffers; oversampled_eval is the simple reference implementation it is
    tested against.
    """

    def __init__(
        self,
        params: ModelParams,
        n_paths: int,
        rng: RngStream,
        couple_psi: bool = True,
        noise: bool = True,
        kick: bool = True,
        kick_stride: int = 1,
    ):
        self.params = params
        self.grid = params.grid
        self.rng = rng
        self.B = n_paths
        self.noise = noise
        self.kick = kick
        self.kick_stride = kick_stride
        self.tables = step_tables(self.grid, params.dt)
        self.proj = params.projector_symbol()
        shape = (n_paths, params.M, params.M)
        self.u = np.zeros(shape, dtype=complex)
        self.ut = np.zeros(shape, dtype=complex)
        self.couple_psi = couple_psi
        self.psi = np.zeros(shape, dtype=complex) if couple_psi else None
        self.psit = np.zeros(shape, dtype=complex) if couple_psi else None
        self.step_index = 0
        self.time = 0.0
        self.last_aliasing_fraction = 0.0
        self._init_fast_path()

    def _init_fast_path(self):
        import scipy.fft as sfft

        self._sfft = sfft
        p = self.params
        M, Mf = p.M, p.M * p.oversample
        self.Mf = Mf
        ext, src, wt = _band_split(M)
        self._rows_ext = ext % Mf
        self._rows_src = src
        self._row_wt = wt[:, None]
        # half-slab column range 0..M/2 of the coarse spectrum
        self._n_cols = M // 2 + 1
        ph_rows = np.where(ext % 2 == 0, 1.0, -1.0)
        ph_cols = np.where(np.arange(self._n_cols) % 2 == 0, 1.0, -1.0)
        self._phase_block = ph_rows[:, None] * ph_cols[None, :]
        col_wt = np.ones(self._n_cols)
        col_wt[-1] = 0.5  # the implied fine -M/2 column carries the other half
        self._col_wt = col_wt[None, :]
        self._half = np.zeros((self.B, Mf, Mf // 2 + 1), dtype=complex)
        self._noise_buf = np.empty((self.B, M, M))
        self._mirror_rows = (-np.fft.fftfreq(M, d=1.0 / M).astype(int)) % M

    def set_initial(self, u_hat: np.ndarray, ut_hat: np.ndarray) -> None:
        self.u[:] = u_hat
        self.ut[:] = ut_hat
        if self.couple_psi:
            self.psi[:] = u_hat
            self.psit[:] = ut_hat

    def _pointwise(self, v: np.ndarray) -> np.ndarray:
        """gamma f(beta v), evaluated in place on the fine-grid buffer.

        Moderate arguments use gamma * sinh directly (exact at zero); large
        ones switch to the fused log-safe exponents so gamma keeps taming
        the overflow.
        """
        p = self.params
        shift = 0.5 * p.beta ** 2 * p.sigma
        v *= p.beta
        if p.variant == "sinh":
            big = np.abs(v) > 30.0
            if big.any():
                x = v[big]
                safe = 0.5 * (np.exp(x - shift) - np.exp(-x - shift))
            np.sinh(v, out=v)
            v *= math.exp(-shift)
            if big.any():
                v[big] = safe
        else:
            v -= shift
            np.exp(v, out=v)
        return v

    def nonlinearity(self, u_hat: np.ndarray) -> np.ndarray:
        """Spectral drift G(u) = -iota beta gamma P{ f(beta P u) }.

        f is sinh for the sinh-Gordon variant and exp for Liouville; the
        counterterm gamma is folded into the exponents (overflow-safe).
        The pointwise function is evaluated on an oversampled grid before
        re-projection to tame aliasing.
        """
        p = self.params
        M, Mf = p.M, self.Mf
        pu = self.proj * u_hat
        # scatter the half-spectrum band into the fine half-slab
        block = pu[..., self._rows_src, : self._n_cols]
        self._half[..., self._rows_ext, : self._n_cols] = (
            block * (self._row_wt * self._col_wt * self._phase_block)
        )
        scale = Mf ** 2 / TWO_PI
        values = self._sfft.irfft2(self._half, s=(Mf, Mf), axes=(-2, -1), workers=-1)
        values *= scale
        g_vals = self._pointwise(values)
        g_half = self._sfft.rfft2(g_vals, axes=(-2, -1), workers=-1)
        fine_cell = (TWO_PI / Mf) ** 2
        gathered = g_half[..., self._rows_ext, : self._n_cols] * (
            self._phase_block * (fine_cell / TWO_PI)
        )
        gathered = _collapse_axis(gathered, M, axis=-2)
        # the implied fine -M/2 column folds onto the coarse Nyquist column
        ny = gathered[..., :, -1]
        gathered[..., :, -1] = ny + np.conj(ny[..., self._mirror_rows])
        out = np.zeros(u_hat.shape, dtype=complex)
        out[..., :, : self._n_cols] = gathered
        # negative columns by Hermitian symmetry of the (real) drift
        out[..., :, self._n_cols:] = np.conj(
            gathered[..., self._mirror_rows, :][..., 1 : M // 2][..., ::-1]
        )
        out *= -p.iota * p.beta * self.proj
        band = self.grid.abs_n <= p.N
        total = float(np.sum(np.abs(gathered) ** 2))
        if total > 0:
            off_band = np.abs(np.where(band[:, : self._n_cols], 0.0, gathered)) ** 2
            self.last_aliasing_fraction = float(np.sum(off_band) / total)
        return out

    def _draw_noise(self) -> np.ndarray:
        self.rng.generator.standard_normal(out=self._noise_buf)
        return self._sfft.fft2(self._noise_buf, axes=(-2, -1), workers=-1) / self.params.M

    def step(self) -> None:
        tab = self.tables
        u_new = tab["a11"] * self.u
        u_new += tab["a12"] * self.ut
        ut_new = tab["a21"] * self.u
        ut_new += tab["a22"] * self.ut
        if self.couple_psi:
            psi_new = tab["a11"] * self.psi
            psi_new += tab["a12"] * self.psit
            psit_new = tab["a21"] * self.psi
            psit_new += tab["a22"] * self.psit
        if self.noise:
            z1 = self._draw_noise()
            z2 = self._draw_noise()
            z2 *= tab["l22"]
            z2 += tab["l21"] * z1
            z1 *= tab["l11"]
            u_new += z1
            ut_new += z2
            if self.couple_psi:
                psi_new += z1
                psit_new += z2
        self.step_index += 1
        self.time += self.params.dt
        if self.kick and self.step_index % self.kick_stride == 0:
            ut_new += (self.params.dt * self.kick_stride) * self.nonlinearity(u_new)
        self.u, self.ut = u_new, ut_new
        if self.couple_psi:
            self.psi, self.psit = psi_new, psit_new
        if self.step_index % 50 == 0 or not self.kick:
            peak = float(np.max(np.abs(self.ut)))
            if not np.isfinite(peak) or peak > 1e14:
                raise NonFinite("field overflow during time stepping", time=self.time)


def step(state: StatePair, params: ModelParams, rng: RngStream | None) -> StatePair:
    """Single-state step; thin wrapper over the batched integrator."""
    flow = Flow(params, 1, rng if rng is not None else RngStream(0), couple_psi=False,
                noise=rng is not None)
    u_hat, ut_hat = state.spectra()
    flow.set_initial(u_hat[None], ut_hat[None])
    flow.step()
    return StatePair.from_spectra(params.grid, flow.u[0], flow.ut[0])


@dataclass(eq=False)
class PathSample:
    """Recorded trajectory of the coupled (u, Psi) flow."""

    params: ModelParams
    times: np.ndarray
    u_hats: np.ndarray          # (K, B, M, M)
    psi_hats: np.ndarray | None
    seed: int
    stream_id: int
    n_paths: int = field(init=False)

    def __post_init__(self):
        self.n_paths = self.u_hats.shape[1]

    def v_hats(self) -> np.ndarray:
        if self.psi_hats is None:
            raise MismatchedNoise("path does not carry a coupled stochastic convolution")
        return self.u_hats - self.psi_hats


def simulate_path(
    params: ModelParams,
    rng: RngStream,
    n_paths: int = 1,
    record_stride: int = 1,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
    noise: bool = True,
    couple_psi: bool = True,
) -> PathSample:
    """Run the truncated flow over [0, T], recording every record_stride steps."""
    n_steps = int(round(params.T / params.dt))
    flow = Flow(params, n_paths, rng, couple_psi=couple_psi, noise=noise)
    if initial is not None:
        flow.set_initial(*initial)
    rec_idx = list(range(0, n_steps + 1, record_stride))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    K = len(rec_idx)
    M = params.M
    u_hats = np.empty((K, n_paths, M, M), dtype=complex)
    psi_hats = np.empty((K, n_paths, M, M), dtype=complex) if couple_psi else None
    times = np.empty(K)
    k = 0
    for step_i in range(n_steps + 1):
        if step_i == rec_idx[k]:
            u_hats[k] = flow.u
            if couple_psi:
                psi_hats[k] = flow.psi
            times[k] = flow.time
            k += 1
        if step_i < n_steps:
            flow.step()
    return PathSample(params, times, u_hats, psi_hats, rng.seed, rng.stream_id)


def remainder_v(path: PathSample, path_index: int = 0) -> SpaceTimeField:
    """v = u - Psi for one recorded path (requires shared noise)."""
    v = path.v_hats()[:, path_index]
    grid = path.params.grid
    return SpaceTimeField(grid, path.times, coeffs_to_grid(grid, v))


def forcing_slices(path: PathSample) -> np.ndarray:
    """Nonlinear drift G(u) on every recorded slice, shape (K, B, M, M)."""
    p = path.params
    flow = Flow(p, path.n_paths, RngStream(0), couple_psi=False, noise=False)
    out = np.empty_like(path.u_hats)
    for k in range(len(path.times)):
        out[k] = flow.nonlinearity(path.u_hats[k])
    return out


def xy_decompose(path: PathSample, params: ModelParams | None = None,
                 method: str = "spectral", out_stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Split v into the wave part X and the smoother difference part Y.

    X applies the Duhamel integral with the damped wave multipliers (or the
    nonnegative physical-space kernel when method="kernel"), Y with the
    smoothing difference D - S; X + Y reproduces v up to quadrature error.
    Returns physical-space arrays evaluated at path.times[::out_stride],
    shaped (K_out, B, M, M).
    """
    p = params or path.params
    grid = p.grid
    F = forcing_slices(path)
    times = path.times
    out_idx = range(0, len(times), out_stride)
    dt_rec = times[1] - times[0]
    if method == "spectral":
        x_out = np.zeros((len(out_idx),) + F.shape[1:])
        y_out = np.zeros_like(x_out)
        for i, k in enumerate(out_idx):
            acc_x = np.zeros_like(F[0])
            acc_y = np.zeros_like(F[0])
            for j in range(k + 1):
                tau = times[k] - times[j]
                w = dt_rec if 0 < j < k else 0.5 * dt_rec
                if tau == 0.0:
                    continue
                acc_x += w * wave_table(grid, tau) * F[j]
                acc_y += w * diff_table(grid, tau) * F[j]
            x_out[i] = coeffs_to_grid(grid, acc_x)
            y_out[i] = coeffs_to_grid(grid, acc_y)
        return x_out, y_out
    if method == "kernel":
        from .kernels import wave_kernel_table

        f_phys = coeffs_to_grid(grid, F)
        f_hat2 = np.fft.fft2(f_phys, axes=(-2, -1))
        x_out = np.zeros((len(out_idx),) + F.shape[1:])
        y_out = np.zeros_like(x_out)
        for i, k in enumerate(out_idx):
            acc = np.zeros_like(f_hat2[0])
            acc_y = np.zeros_like(F[0])
            for j in range(k + 1):
                tau = times[k] - times[j]
                w = dt_rec if 0 < j < k else 0.5 * dt_rec
                if tau == 0.0:
                    continue
                table = wave_kernel_table(grid, tau)
                acc += (w * math.exp(-0.5 * tau)) * np.fft.fft2(table) * f_hat2[j]
                acc_y += w * diff_table(grid, tau) * F[j]
            x_out[i] = np.fft.ifft2(acc, axes=(-2, -1)).real * grid.cell_area / TWO_PI
            y_out[i] = coeffs_to_grid(grid, acc_y)
        return x_out, y_out
    raise ValueError("method must be 'spectral' or 'kernel'")


def liouville_sign_paths(params: ModelParams, rng: RngStream, n_paths: int,
                         record_stride: int = 25) -> np.ndarray:
    """beta * X over recorded slices for defocusing Liouville paths.

    X is assembled entirely from nonnegative physical-space kernels (the
    wave kernel, the mollifier kernel and the positive integrand), so the
    product beta * X is nonpositive up to roundoff.
    """
    if params.variant != "liouville" or params.projector != "mollifier":
        raise ValueError("sign structure requires the mollified Liouville flow")
    from .kernels import wave_kernel_table

    grid = params.grid
    path = simulate_path(params, rng, n_paths, record_stride)
    q_kernel = mollifier_kernel(grid, params.N)
    q_hat = np.fft.fft2(q_kernel) * grid.cell_area
    shift = 0.5 * params.beta ** 2 * params.sigma
    v_hat = path.v_hats()
    # Q_N u, then the positive integrand gamma e^{beta Q_N u}
    qu = coeffs_to_grid(grid, params.projector_symbol() * path.u_hats)
    integrand = np.exp(params.beta * qu - shift)
    g_hat = np.fft.fft2(integrand, axes=(-2, -1))
    times = path.times
    K = len(times)
    dt_rec = times[1] - times[0]
    beta_x = np.zeros_like(integrand)
    for k in range(K):
        acc = np.zeros_like(g_hat[0])
        for j in range(k + 1):
            tau = times[k] - times[j]
            w = dt_rec if 0 < j < k else 0.5 * dt_rec
            if tau == 0.0:
                continue
            table = wave_kernel_table(grid, tau)
            acc += (w * math.exp(-0.5 * tau)) * np.fft.fft2(table) * g_hat[j]
        inner = np.fft.ifft2(acc, axes=(-2, -1)).real * grid.cell_area / TWO_PI
        # outer mollification, also a nonnegative kernel
        outer = np.fft.ifft2(q_hat * np.fft.fft2(inner, axes=(-2, -1)), axes=(-2, -1)).real
        beta_x[k] = -params.iota * params.beta ** 2 * outer
    return beta_x


def energy(state: StatePair, params: ModelParams, psi: RealField | None = None) -> tuple[float, float]:
    """Energy E = (|v|_{H^1}^2 + |v_t|_{L^2}^2) / 2 and its Lyapunov companion Q.

    Q adds iota * int gamma cosh(beta (Psi_N + P_N v)); for the defocosing
    sign iota > 0 it dominates E pointwise in time.
    """
    grid = params.grid
    u_hat, ut_hat = state.spectra()
    e_val = 0.5 * float(np.sum(grid.bracket2 * np.abs(u_hat) ** 2)) \
        + 0.5 * float(np.sum(np.abs(ut_hat) ** 2))
    pv = coeffs_to_grid(grid, params.projector_symbol() * u_hat)
    psi_n = psi.values if psi is not None else 0.0
    shift = 0.5 * params.beta ** 2 * params.sigma
    arg = params.beta * (psi_n + pv)
    cosh_term = 0.5 * (np.exp(arg - shift) + np.exp(-arg - shift))
    q_val = e_val + params.iota * float(np.sum(cosh_term)) * grid.cell_area
    return e_val, q_val


@dataclass(eq=False)
class EnhancedData:
    """The tuple of stochastic objects driving the solution theory."""

    psi_path: np.ndarray
    theta_plus: "object"
    theta_minus: "object"
    modified_gmc_table: dict

    def consistency_defect(self, params: ModelParams) -> float:
        grid = params.grid
        sym = params.projector_symbol()
        shift = 0.5 * params.beta ** 2 * params.sigma
        psi_n = coeffs_to_grid(grid, sym * self.psi_path)
        d_plus = np.abs(self.theta_plus.values - np.exp(params.beta * psi_n - shift)).max()
        d_minus = np.abs(self.theta_minus.values - np.exp(-params.beta * psi_n - shift)).max()
        return float(max(d_plus, d_minus))


def build_enhanced_data(params: ModelParams, rng: RngStream, n_slices: int = 33,
                        lambdas=(0.0, 1.0, 2.0, 4.0)) -> EnhancedData:
    """Sample Psi on [0, 1] and assemble (Psi, Theta^+-, modified chaos table)."""
    from .gmc import sample_psi_path, theta_from_psi_slices
    from .modified_gmc import ModKernelParams, modified_gmc_field

    grid = params.grid
    times = (np.arange(n_slices) + 0.5) / n_slices
    psi_hats = sample_psi_path(rng, grid, times)
    sym = params.projector_symbol()
    th_p = theta_from_psi_slices(grid, times, psi_hats, params.beta, params.N,
                                 +1, projector_symbol=sym)
    th_m = theta_from_psi_slices(grid, times, psi_hats, params.beta, params.N,
                                 -1, projector_symbol=sym)
    table = {}
    for lam in lambdas:
        mk = ModKernelParams(kappa=0.5, alpha=1.45, lam=lam)
        table[lam] = {
            "+": modified_gmc_field(th_p, mk, 0.5),
            "-": modified_gmc_field(th_m, mk, 0.5),
        }
    data = EnhancedData(psi_hats, th_p, th_m, table)
    defect = data.consistency_defect(params)
    if defect > 1e-12:
        raise MismatchedNoise(f"theta slices inconsistent with psi (defect {defect:.2e})")
    return data
