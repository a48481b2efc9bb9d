"""Acceptance suite: one test per quantitative gate, tolerances pinned here.

Every test prints one `ACCEPTANCE <id>: PASS/FAIL` line (visible with -s or
in the captured output summary) and asserts the same verdict.
"""

import math

import numpy as np
import pytest

from hypersinh.grid import coeffs_to_grid, get_grid, smooth_projector
from hypersinh.randfields import RngStream, sample_mu1_spectral, sigma_for

TWO_PI = 2 * math.pi
BETA_PI4 = math.sqrt(math.pi / 4)


def _verdict(ident: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {ident}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_01_sigma_log_slope():
    ns = [64, 128, 256, 512]
    sigmas = [sigma_for(4 * N, N).sigma_N for N in ns]
    slope = float(np.polyfit(np.log(ns), sigmas, 1)[0])
    target = 1.0 / TWO_PI
    rel = abs(slope / target - 1.0)
    assert _verdict("01 sigma-slope", rel <= 0.05,
                    f"slope={slope:.5f} target={target:.5f} rel={rel:.3%}")


def test_02_gff_covariance_log_slope(tmp_path):
    from hypersinh.cli import EXPERIMENTS
    import json

    cfg = dict(EXPERIMENTS["covariance"][0])
    ok = EXPERIMENTS["covariance"][1](cfg, RngStream(0), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert _verdict("02 covariance-slope", ok,
                    f"slope={summary['slope']:.5f} target={summary['target']:.5f} "
                    f"rel={summary['rel_dev']:+.3%} (N=128, M=512, n=10000)")


def test_03_gmc_unit_mean():
    g = get_grid(256)
    N = 128
    sym = smooth_projector(g, N).symbol
    sigma = sigma_for(256, N).sigma_N
    rng = RngStream(1)
    n_samples = 4096
    details = []
    ok = True
    for beta2 in (math.pi / 2, math.pi, 2 * math.pi):
        beta = math.sqrt(beta2)
        means = []
        done = 0
        while done < n_samples:
            b = min(64, n_samples - done)
            z0, _ = sample_mu1_spectral(rng, g, (b,))
            psi = coeffs_to_grid(g, sym * z0)
            theta = np.exp(beta * psi - 0.5 * beta2 * sigma)
            means.extend(theta.mean(axis=(1, 2)).tolist())
            done += b
        means = np.asarray(means)
        se = means.std(ddof=1) / math.sqrt(len(means))
        dev = abs(means.mean() - 1.0)
        ok &= dev <= 3 * se
        details.append(f"beta2={beta2:.3f}: mean={means.mean():.4f} ({dev / se:.2f} se)")
    assert _verdict("03 gmc-unit-mean", ok, "; ".join(details))


def test_04_wick_orthogonality():
    from tests_support import hermite_pair_expectation
    from hypersinh.gmc import hermite

    g = get_grid(128)
    N = 32
    sym = smooth_projector(g, N).symbol
    ren = sigma_for(128, N)
    gamma_table = (g.M ** 2 / TWO_PI ** 2) * np.fft.ifft2(sym * sym / g.bracket2).real
    rng = RngStream(2)
    n_samples = 4000
    lags = ((3, 0), (0, 5))
    combos = [(lag, j, k) for lag in lags for j in (1, 2, 3) for k in (1, 2, 3)]
    per_sample = {c: [] for c in combos}
    done = 0
    while done < n_samples:
        b = min(400, n_samples - done)
        z0, _ = sample_mu1_spectral(rng, g, (b,))
        psi = coeffs_to_grid(g, sym * z0)
        ws = {k: hermite(k, psi, ren.sigma_N) for k in (1, 2, 3)}
        for lag in lags:
            rolled = {k: np.roll(np.roll(ws[k], -lag[0], axis=1), -lag[1], axis=2)
                      for k in (1, 2, 3)}
            for j in (1, 2, 3):
                for k in (1, 2, 3):
                    per_sample[(lag, j, k)].extend(
                        (ws[j] * rolled[k]).mean(axis=(1, 2)).tolist())
        done += b
    ok = True
    worst = 0.0
    for (lag, j, k), vals in per_sample.items():
        vals = np.asarray(vals)
        cov = float(gamma_table[lag])
        want = math.factorial(k) * cov ** k if j == k else 0.0
        oracle = hermite_pair_expectation(j, k, ren.sigma_N, cov)
        assert abs(oracle - want) < 1e-8  # Gaussian-moment oracle check
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        z = abs(vals.mean() - want) / se
        worst = max(worst, z)
        ok &= z <= 3.0
    assert _verdict("04 wick-orthogonality", ok,
                    f"max |dev|/se = {worst:.2f} over j,k <= 3 at two lags")


def test_05_ball_moment_exponents():
    from hypersinh.gmc import ball
    from hypersinh.montecarlo import fit_power_law

    g = get_grid(512)
    N = 256
    sym = smooth_projector(g, N).symbol
    sigma = sigma_for(512, N).sigma_N
    radii = [TWO_PI * 2.0 ** (-k) for k in (6, 5.2, 4.4, 3.6, 2.8, 2)]
    masks = [ball(g, (0.0, 0.0), r).mask for r in radii]
    rng = RngStream(3)
    n_samples = 10_000
    betas = {"pi": math.sqrt(math.pi), "2pi": math.sqrt(2 * math.pi)}
    acc = {k: np.zeros(len(radii)) for k in betas}
    acc2 = {k: np.zeros(len(radii)) for k in betas}
    done = 0
    while done < n_samples:
        b = min(25, n_samples - done)
        z0, _ = sample_mu1_spectral(rng, g, (b,))
        psi = coeffs_to_grid(g, sym * z0)
        for key, beta in betas.items():
            theta = np.exp(beta * psi - 0.5 * beta ** 2 * sigma)
            for i, mask in enumerate(masks):
                vals = (theta[:, mask].sum(axis=1) * g.cell_area) ** 2
                acc[key][i] += vals.sum()
                acc2[key][i] += (vals ** 2).sum()
        done += b
    ok = True
    details = []
    for key, target in (("pi", 3.5), ("2pi", 3.0)):
        means = acc[key] / done
        ses = np.sqrt(np.maximum(acc2[key] / done - means ** 2, 0.0) / done)
        fit = fit_power_law(list(zip(radii, means, ses)))
        ok &= abs(fit.exponent - target) <= 0.3
        details.append(f"beta2={key}: slope={fit.exponent:.3f} target={target}")
    assert _verdict("05 ball-exponents", ok, "; ".join(details))


def test_06_annulus_exponent(tmp_path):
    from hypersinh.cli import EXPERIMENTS
    import json

    cfg = dict(EXPERIMENTS["gmc-annuli"][0])
    ok = EXPERIMENTS["gmc-annuli"][1](cfg, RngStream(4), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert _verdict("06 annulus-exponent", ok,
                    f"slope={summary['exponent']:.3f} target={summary['target']} +-0.3")


def test_07_theta_cauchy_trend(tmp_path):
    from hypersinh.cli import EXPERIMENTS
    import json

    cfg = dict(EXPERIMENTS["gmc-cauchy"][0])
    ok = EXPERIMENTS["gmc-cauchy"][1](cfg, RngStream(5), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert _verdict("07 theta-cauchy", ok, f"means={summary['means']} strictly decreasing")


def test_08_modified_gmc_uniformity(tmp_path):
    from hypersinh.cli import EXPERIMENTS
    import json

    cfg = dict(EXPERIMENTS["modified-gmc"][0])
    ok = EXPERIMENTS["modified-gmc"][1](cfg, RngStream(6), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert _verdict("08 modified-gmc", ok,
                    f"bands overlap={summary['band_overlap']} "
                    f"lambda decay={summary['lambda_decay']} "
                    "(N in 32,64,128; beta2=pi, p=2, kappa=0.9, alpha=1.4)")


def test_09_kernel_bound_trends():
    from hypersinh.kernels import check_kernel_bounds

    rep = check_kernel_bounds(0.25, sample_count=48)
    slopes = {k: rep[k]["slope"]
              for k in ("time_smoothing", "space_smoothing", "frac_derivative")}
    assert _verdict("09 kernel-bounds", rep["pass"],
                    f"slopes={ {k: round(v, 4) for k, v in slopes.items()} } "
                    "(<= 0.1); sigma=0 comparison max ratio="
                    f"{rep['duhamel_comparison']['max_ratio']:.2e} <= 1")


def test_10_lambda_embedding():
    from hypersinh.anisotropic import embedding_check

    rep = embedding_check(get_grid(64), 0.34, 0.17, 6.0, band_limits=(4, 8, 16),
                          n_fields=100, n_slices=33, seed=0)
    growth = max(rep["growth_per_doubling"])
    assert _verdict("10 lambda-embedding", rep["pass"],
                    f"max growth per band doubling = {growth:.2f} (<= 2)")


def test_11_gibbs_invariance():
    from hypersinh.dynamics import ModelParams
    from hypersinh.gibbs import C_TEST, invariance_test

    p = ModelParams(beta=BETA_PI4, iota=C_TEST, N=8, M=32, dt=1e-3, T=1.0)
    verdicts = {}
    stats = {}
    for dt in (1e-3, 5e-4):
        rep = invariance_test(p.with_(dt=dt), 1.0, 2000, seed=0)
        verdicts[dt] = rep["pass"]
        stats[dt] = (
            min(v["ks_p"] for v in rep["observables"].values()),
            max(abs(v["delta_over_stderr"]) for v in rep["observables"].values()),
        )
    ok = verdicts[1e-3] and verdicts[5e-4]
    assert _verdict("11 gibbs-invariance", ok,
                    f"dt=1e-3: min_ks={stats[1e-3][0]:.3f} max|d|/se={stats[1e-3][1]:.2f}; "
                    f"dt=5e-4: min_ks={stats[5e-4][0]:.3f} max|d|/se={stats[5e-4][1]:.2f} "
                    "(beta2=pi/4, iota=c_test, N=8, M=32, n=2000)")


def test_12_liouville_sign_structure():
    from hypersinh.dynamics import ModelParams, liouville_sign_paths

    p = ModelParams(beta=math.sqrt(math.pi / 2), iota=0.5, N=8, M=32,
                    variant="liouville", dt=1e-3, T=1.0)
    beta_x = liouville_sign_paths(p, RngStream(7), n_paths=20, record_stride=25)
    worst = float(beta_x.max())
    assert _verdict("12 liouville-sign", worst <= 1e-8,
                    f"max beta*X over 20 paths = {worst:.2e} (<= 1e-8)")


def test_13_xy_consistency():
    from hypersinh.dynamics import ModelParams, simulate_path, xy_decompose

    p = ModelParams(beta=BETA_PI4, iota=1.0, N=8, M=32, dt=1e-3, T=1.0)
    errs = {}
    for dt in (1e-3, 5e-4):
        pp = p.with_(dt=dt)
        u0, u1 = sample_mu1_spectral(RngStream(8), pp.grid, (2,))
        path = simulate_path(pp, RngStream(9), n_paths=2, record_stride=1,
                             initial=(u0, u1))
        stride = max(1, len(path.times) // 40)
        x_phys, y_phys = xy_decompose(path, out_stride=stride)
        v_phys = coeffs_to_grid(pp.grid, path.v_hats()[::stride])
        errs[dt] = float(np.sqrt(np.mean((x_phys + y_phys - v_phys) ** 2))
                         / np.sqrt(np.mean(v_phys ** 2)))
    ok = errs[1e-3] <= 0.02 and errs[5e-4] < errs[1e-3]
    assert _verdict("13 xy-consistency", ok,
                    f"rel err dt=1e-3: {errs[1e-3]:.2e}; dt=5e-4: {errs[5e-4]:.2e} (<= 2%, tightening)")


def test_14_uniform_bounds_trend():
    from hypersinh.dynamics import ModelParams
    from hypersinh.gibbs import C_TEST, uniform_bounds_experiment

    base = ModelParams(beta=BETA_PI4, iota=C_TEST, N=8, M=32, dt=1e-3, T=1.0)
    rep = uniform_bounds_experiment(base, T=2.0, n_samples=48, n_list=(8, 16, 32), seed=1)
    assert _verdict("14 uniform-bounds", rep["pass"],
                    f"p95 slopes={ {k: round(v, 3) for k, v in rep['slopes'].items()} } (<= 0.1)")
