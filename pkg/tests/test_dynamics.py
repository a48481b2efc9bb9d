import math

import numpy as np
import pytest

from hypersinh.errors import MismatchedNoise
from hypersinh.grid import RealField, coeffs_to_grid, get_grid
from hypersinh.dynamics import (
    Flow,
    ModelParams,
    PathSample,
    energy,
    liouville_sign_paths,
    oversampled_eval,
    remainder_v,
    simulate_path,
    step,
    xy_decompose,
)
from hypersinh.propagators import StatePair
from hypersinh.randfields import RngStream, hermitian_unit_noise, sample_mu1_spectral

BETA_PI4 = math.sqrt(math.pi / 4)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, iota=1.0, N=8, M=32, dt=5e-3, T=1.0)  # dt guard
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, iota=1.0, N=20, M=32, dt=1e-4, T=1.0)  # N > M/2
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, iota=1.0, N=8, M=32, dt=1e-4, T=1.0, oversample=1)
    p = ModelParams(beta=1.0, iota=1.0, N=8, M=32, variant="liouville", dt=1e-4, T=1.0)
    assert p.projector == "mollifier"  # Liouville pairs with the mollifier


def test_oversampled_eval_is_identity_on_band():
    g = get_grid(16)
    z = hermitian_unit_noise(RngStream(0), g)
    out = oversampled_eval(g, z, lambda v: v, 2)
    assert np.abs(out - z).max() < 1e-13


def test_fast_nonlinearity_matches_reference():
    for variant, proj in (("sinh", "smooth_pi"), ("liouville", "mollifier")):
        p = ModelParams(beta=0.7, iota=0.8, N=8, M=32, variant=variant,
                        projector=proj, dt=1e-3, T=1.0)
        fl = Flow(p, 2, RngStream(5))
        u0, _ = sample_mu1_spectral(RngStream(9), p.grid, (2,))
        fast = fl.nonlinearity(u0)
        shift = 0.5 * p.beta ** 2 * p.sigma
        gsq = math.exp(-2 * shift)
        if variant == "sinh":
            fn = lambda v: 0.5 * (np.exp(p.beta * v - shift) - gsq / np.exp(p.beta * v - shift))
        else:
            fn = lambda v: np.exp(p.beta * v - shift)
        ref = -p.iota * p.beta * p.projector_symbol() * oversampled_eval(
            p.grid, p.projector_symbol() * u0, fn, 2)
        assert np.abs(fast - ref).max() < 1e-12 * max(np.abs(ref).max(), 1.0)


def test_zero_state_is_a_fixed_point_of_sinh():
    p = ModelParams(beta=0.5, iota=1.0, N=8, M=32, dt=1e-3, T=1.0)
    out = step(StatePair.zero(p.grid), p, rng=None)
    assert np.abs(out.u.values).max() == 0.0
    assert np.abs(out.ut.values).max() == 0.0


def test_linear_limit_preserves_mode_variances():
    p = ModelParams(beta=0.0, iota=1.0, N=8, M=16, dt=1e-3, T=1.0)
    flow = Flow(p, 1000, RngStream(11), couple_psi=False)
    u0, u1 = sample_mu1_spectral(RngStream(7), p.grid, (1000,))
    flow.set_initial(u0, u1)
    for _ in range(60):
        flow.step()
    for mode, want in (((1, 2), 1 / 6), ((3, 0), 1 / 10)):
        v = np.abs(flow.u[:, mode[0], mode[1]]) ** 2
        se = v.std() / math.sqrt(len(v))
        assert abs(v.mean() - want) < 3 * se
    vt = np.abs(flow.ut[:, 2, 1]) ** 2
    assert abs(vt.mean() - 1.0) < 3 * vt.std() / math.sqrt(len(vt))


def test_weak_order_one_richardson():
    # same exact linear/noise path, kicks applied at strides 4/2/1 of the
    # fine step: first-order error must halve between consecutive strides
    p = ModelParams(beta=BETA_PI4, iota=1.0, N=8, M=32, dt=2.5e-4, T=0.2)
    n_steps = int(round(p.T / p.dt))
    vals = {}
    for stride in (4, 2, 1):
        flow = Flow(p, 120, RngStream(3), couple_psi=False, kick_stride=stride)
        u0, u1 = sample_mu1_spectral(RngStream(8), p.grid, (120,))
        flow.set_initial(u0, u1)
        for _ in range(n_steps):
            flow.step()
        w = p.grid.bracket_t ** (-0.4)
        vals[stride] = float(np.mean(np.sum(w * np.abs(flow.u) ** 2, axis=(1, 2))))
    reference = 2 * vals[1] - vals[2]  # first-order Richardson limit
    ratio = (vals[4] - reference) / (vals[2] - reference)
    assert 1.6 <= ratio <= 2.4


def test_remainder_trivial_cases():
    # beta = 0: u and Psi coincide, v == 0
    p = ModelParams(beta=0.0, iota=1.0, N=8, M=16, dt=1e-3, T=0.05)
    path = simulate_path(p, RngStream(2), n_paths=2, record_stride=10)
    assert np.abs(path.v_hats()).max() < 1e-12
    # noise off with zero data: Psi == 0 so v == u
    p2 = ModelParams(beta=0.8, iota=1.0, N=8, M=16, dt=1e-3, T=0.05)
    rng = RngStream(3)
    u0, u1 = sample_mu1_spectral(rng, p2.grid, (1,))
    path2 = simulate_path(p2, rng, n_paths=1, record_stride=5,
                          initial=(0 * u0, 0 * u1), noise=False)
    assert np.abs(path2.v_hats() - path2.u_hats).max() < 1e-14
    v = remainder_v(path2)
    assert v.values.shape[0] == len(path2.times)
    # decoupled path refuses to produce a remainder
    path3 = simulate_path(p2, RngStream(4), n_paths=1, record_stride=10, couple_psi=False)
    with pytest.raises(MismatchedNoise):
        path3.v_hats()


def test_xy_decomposition_consistency_and_refinement():
    # quadrature refines with the step, so the defect is O(dt)
    p = ModelParams(beta=BETA_PI4, iota=1.0, N=8, M=32, dt=1e-3, T=0.3)
    errs = {}
    for label, dt in (("dt", 1e-3), ("dt2", 5e-4)):
        pp = p.with_(dt=dt)
        u0, u1 = sample_mu1_spectral(RngStream(12), pp.grid, (2,))
        path = simulate_path(pp, RngStream(13), n_paths=2, record_stride=1,
                             initial=(u0, u1))
        stride = max(1, len(path.times) // 30)
        x_phys, y_phys = xy_decompose(path, out_stride=stride)
        v_phys = coeffs_to_grid(pp.grid, path.v_hats()[::stride])
        num = np.sqrt(np.mean((x_phys + y_phys - v_phys) ** 2))
        den = np.sqrt(np.mean(v_phys ** 2))
        errs[label] = num / den
    assert errs["dt"] < 0.02
    assert errs["dt2"] < 0.7 * errs["dt"]


def test_xy_trivial_at_beta_zero():
    p = ModelParams(beta=0.0, iota=1.0, N=8, M=16, dt=1e-3, T=0.05)
    path = simulate_path(p, RngStream(5), n_paths=1, record_stride=10)
    x_phys, y_phys = xy_decompose(path)
    assert np.abs(x_phys).max() < 1e-12
    assert np.abs(y_phys).max() < 1e-12


def test_liouville_sign_structure_quick():
    p = ModelParams(beta=math.sqrt(math.pi / 2), iota=0.5, N=8, M=32,
                    variant="liouville", dt=1e-3, T=0.3)
    beta_x = liouville_sign_paths(p, RngStream(6), n_paths=3, record_stride=50)
    assert beta_x.max() <= 1e-8


def test_energy_functional():
    p = ModelParams(beta=BETA_PI4, iota=0.7, N=8, M=16, dt=1e-3, T=1.0)
    zero = StatePair.zero(p.grid)
    e0, q0 = energy(zero, p)
    assert e0 == 0.0
    assert q0 == pytest.approx(p.iota * p.gamma * 4 * math.pi ** 2, rel=1e-12)
    # quadratic scaling of E under state scaling (beta = 0 bypasses the tilt)
    rng = RngStream(1)
    u0, u1 = sample_mu1_spectral(rng, p.grid)
    st = StatePair.from_spectra(p.grid, u0, u1)
    st2 = StatePair.from_spectra(p.grid, 2.0 * u0, 2.0 * u1)
    e1, _ = energy(st, p)
    e2, _ = energy(st2, p)
    assert e2 == pytest.approx(4.0 * e1, rel=1e-12)
    # Q >= E for the defocusing sign
    assert energy(st, p)[1] >= e1


def test_lyapunov_descent_noise_off():
    # zero data => Psi == 0 and Q decreases along the deterministic flow
    p = ModelParams(beta=BETA_PI4, iota=1.0, N=8, M=32, dt=5e-4, T=0.2)
    rng = RngStream(9)
    u0, u1 = sample_mu1_spectral(rng, p.grid)
    flow = Flow(p, 1, RngStream(0), couple_psi=False, noise=False)
    flow.set_initial(u0[None], u1[None])
    q_prev = None
    for k in range(int(round(p.T / p.dt))):
        st = StatePair.from_spectra(p.grid, flow.u[0], flow.ut[0])
        _, q = energy(st, p)
        if q_prev is not None:
            assert q <= q_prev + 10 * p.dt * abs(q_prev)
        q_prev = q
        flow.step()


def test_aliasing_diagnostic_recorded():
    p = ModelParams(beta=0.9, iota=1.0, N=8, M=32, dt=1e-3, T=1.0)
    flow = Flow(p, 1, RngStream(2))
    u0, u1 = sample_mu1_spectral(RngStream(3), p.grid, (1,))
    flow.set_initial(u0, u1)
    flow.step()
    assert 0.0 <= flow.last_aliasing_fraction < 1.0


def test_no_blow_up_certificate_short():
    p = ModelParams(beta=BETA_PI4, iota=1.0, N=16, M=32, dt=6e-4, T=1.0)
    flow = Flow(p, 20, RngStream(7), couple_psi=False)
    u0, u1 = sample_mu1_spectral(RngStream(8), p.grid, (20,))
    flow.set_initial(u0, u1)
    for _ in range(int(round(p.T / p.dt))):
        flow.step()
    assert np.all(np.isfinite(flow.u.view(float)))


def test_enhanced_data_consistency():
    from hypersinh.dynamics import build_enhanced_data

    p = ModelParams(beta=math.sqrt(math.pi / 4), iota=1.0, N=8, M=32, dt=1e-3, T=1.0)
    data = build_enhanced_data(p, RngStream(4), n_slices=33, lambdas=(0.0, 2.0))
    assert data.consistency_defect(p) < 1e-12
    assert set(data.modified_gmc_table) == {0.0, 2.0}
    for lam, sides in data.modified_gmc_table.items():
        assert sides["+"].shape == (32, 32)
        assert np.all(sides["+"] >= 0.0)
        assert np.all(sides["-"] >= 0.0)
    # the damped table is dominated by the undamped one
    assert np.all(data.modified_gmc_table[2.0]["+"] <= data.modified_gmc_table[0.0]["+"] + 1e-12)
