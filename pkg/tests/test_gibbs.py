import math

import numpy as np
import pytest

from hypersinh.errors import FocusingNotNormalizable
from hypersinh.grid import RealField, coeffs_to_grid, get_grid
from hypersinh.dynamics import ModelParams
from hypersinh.gibbs import (
    C_TEST,
    _interaction_integral,
    density_RN,
    invariance_test,
    sample_gibbs,
    sample_gibbs_ensemble,
)
from hypersinh.randfields import RngStream, sample_mu1_spectral

BETA_PI4 = math.sqrt(math.pi / 4)


def _params(**kw):
    base = dict(beta=BETA_PI4, iota=C_TEST, N=8, M=32, dt=1e-3, T=1.0)
    base.update(kw)
    return ModelParams(**base)


def test_density_trivial_values():
    p = _params()
    zero = RealField(p.grid, np.zeros((32, 32)))
    assert density_RN(zero, p) == pytest.approx(
        math.exp(-p.iota * p.gamma * 4 * math.pi ** 2), rel=1e-12)
    p0 = _params(beta=0.0)
    rng = np.random.default_rng(0)
    anything = RealField(p0.grid, rng.standard_normal((32, 32)))
    assert density_RN(anything, p0) == pytest.approx(
        math.exp(-p0.iota * 4 * math.pi ** 2), rel=1e-12)


def test_density_bounded_by_one_exactly():
    p = _params()
    u_hat, _ = sample_mu1_spectral(RngStream(1), p.grid, (200,))
    weights = np.exp(-p.iota * _interaction_integral(p, u_hat))
    assert np.all(weights <= 1.0)
    assert np.all(weights > 0.0)


def test_focusing_sampler_rejected():
    p = _params(iota=-0.1)
    with pytest.raises(FocusingNotNormalizable):
        sample_gibbs(RngStream(0), p)
    with pytest.raises(FocusingNotNormalizable):
        invariance_test(p, 1.0, 10)


def test_acceptance_rate_at_beta_zero():
    # constant density: every proposal accepted with the same probability
    p = _params(beta=0.0)
    want = math.exp(-p.iota * 4 * math.pi ** 2)
    rng = RngStream(5)
    n, hits = 4000, 0
    from hypersinh.gibbs import _propose_batch

    _, _, weights, accept = _propose_batch(p, rng, n)
    assert np.abs(weights - want).max() < 1e-12
    rate = accept.mean()
    assert abs(rate - want) < 3 * math.sqrt(want * (1 - want) / n)


def test_accepted_interaction_matches_importance_oracle():
    p = _params()
    rng = RngStream(7)
    # importance-weighted oracle on plain free-field samples
    u_hat, _ = sample_mu1_spectral(rng.substream(0), p.grid, (10_000,))
    g_vals = _interaction_integral(p, u_hat)
    w = np.exp(-p.iota * g_vals)
    oracle = float((g_vals * w).sum() / w.sum())
    mu_mean = float(g_vals.mean())
    # rejection samples
    u_acc, _ = sample_gibbs_ensemble(rng.substream(1), p, 1500)
    acc_vals = _interaction_integral(p, u_acc)
    se = acc_vals.std(ddof=1) / math.sqrt(len(acc_vals))
    assert abs(acc_vals.mean() - oracle) < 3 * se
    # reweighting favors small interaction
    assert acc_vals.mean() < mu_mean


def test_single_sample_api():
    p = _params()
    s = sample_gibbs(RngStream(3), p, max_attempts=2000)
    assert 0.0 < s.accept_weight <= 1.0
    assert s.attempts >= 1
    assert s.pair[0].values.shape == (32, 32)


def test_two_seeds_statistically_indistinguishable():
    p = _params()
    a, _ = sample_gibbs_ensemble(RngStream(11), p, 1200)
    b, _ = sample_gibbs_ensemble(RngStream(12), p, 1200)
    va = _interaction_integral(p, a)
    vb = _interaction_integral(p, b)
    se = math.sqrt(va.var(ddof=1) / len(va) + vb.var(ddof=1) / len(vb))
    assert abs(va.mean() - vb.mean()) < 3 * se


def test_invariance_control_at_time_zero():
    p = _params()
    rep = invariance_test(p, 0.0, 700, seed=4)
    assert rep["pass"]
    assert set(rep["observables"]) >= {"proj_mass", "interaction"}


def test_invariance_linear_flow_preserves_free_field():
    # beta = 0: the Gibbs tilt is constant and the linear flow is exactly
    # stationary, so the evolved ensemble matches fresh samples
    p = _params(beta=0.0, dt=1e-3)
    rep = invariance_test(p, 0.2, 600, seed=8)
    assert rep["pass"]
