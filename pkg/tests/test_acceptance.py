"""Acceptance suite: one test (and one printed line) per criterion.

Each criterion runs at its stated tolerance with a frozen master seed; the
Monte Carlo experiments run through the same harness the CLI exposes.

Criterion 3 has two parts.  The gapped interval's coverage band passes.  The
second part, demonstrating that the *plain* interval fails to cover at
alpha = 0.35, is kept faithful to its stated form and is EXPECTED TO FAIL:
the classical argument for that failure assumes the frequency-ratio bias
decays only like delta^(1 - 2 alpha), but for the gamma kernel the bias is
O(delta^2) (the autocovariance is Matern, so the variogram's analytic t^2
term is annihilated by the second-order filter; verified against 35-digit
arbitrary-precision quadrature).  The plain interval therefore keeps nominal
coverage even in the critical region; what the implementation does deliver
is that 100% of those plain reports carry the out-of-regime warning.
"""

import math

import numpy as np
import pytest

from bsslab.config import RunConfig
from bsslab.estimate import alpha_hat, cof, h_p
from bsslab.gaussian import lambda_matrix
from bsslab.kernel import KernelSpec
from bsslab.montecarlo import (
    run_consistency,
    run_coverage,
    run_lambda,
    run_lln,
    run_montecarlo,
)
from bsslab.simulate import SeriesGrid
from bsslab.spectral import PsdEstimate, fit_spectrum, welch_psd
from bsslab.variation import PowerVariationStream, power_variation
from tests.conftest import core_sampler

WORKERS = 2
N16, D16 = 2**16, 1 / 4096.0


def _line(tag: str, ok: bool, detail: str):
    print(f"\nACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} - {detail}")


# -- 1. law of large numbers -----------------------------------------------------


def test_acceptance_1_lln():
    cfg = RunConfig(command="montecarlo", alpha=-1 / 6, lam=1.0, n=N16, delta=D16,
                    p=2.0, k=2, reps=100, seed=101, workers=WORKERS,
                    oversample=16, sigma_kind="constant", t_eval=1.0)
    res_const, _ = run_lln(cfg)
    ok_const = abs(res_const["mean_vbar"] - 1.0) < 0.05

    cfg = RunConfig(command="montecarlo", alpha=-1 / 6, lam=1.0, n=N16, delta=D16,
                    p=2.0, k=2, reps=100, seed=102, workers=WORKERS,
                    oversample=16, sigma_kind="smooth-exp-ou", sigma_volvol=0.5,
                    sigma_mean_reversion=1.0, t_eval=1.0)
    res_smooth, _ = run_lln(cfg)
    ok_smooth = abs(res_smooth["mean_ratio"] - 1.0) < 0.07

    _line("1 LLN", ok_const and ok_smooth,
          f"sigma=1: mean V-bar_1 = {res_const['mean_vbar']:.4f} (tol 5%); "
          f"smooth-exp-ou: mean V-bar_1 / (m_2 int sigma^2) = "
          f"{res_smooth['mean_ratio']:.4f} (tol 7%)")
    assert ok_const and ok_smooth
    assert res_const["n_failures"] == res_smooth["n_failures"] == 0


# -- 2. feasible CLT: coverage and normality -------------------------------------


@pytest.mark.parametrize("alpha", [-0.3, 0.1])
def test_acceptance_2_clt_feasibility(alpha):
    cfg = RunConfig(command="montecarlo", alpha=alpha, lam=1.0, n=N16, delta=D16,
                    p=2.0, level=0.95, reps=300, seed=20250811, workers=WORKERS)
    res, _ = run_coverage(cfg, "plain")
    s = res["plain"]
    ok = s["ks_studentized"] < 0.08 and 0.91 <= s["coverage"] <= 0.98
    _line(f"2 CLT (alpha={alpha})", ok,
          f"coverage = {s['coverage']:.4f} in [0.91, 0.98], "
          f"KS = {s['ks_studentized']:.4f} < 0.08 over {s['n']} replications")
    assert s["ks_studentized"] < 0.08
    assert 0.91 <= s["coverage"] <= 0.98


# -- 3. critical region ----------------------------------------------------------


def _critical_region_run():
    cfg = RunConfig(command="montecarlo", alpha=0.35, lam=1.0, n=2**18,
                    delta=1 / 16384.0, p=2.0, level=0.95, kappa=0.6,
                    reps=300, seed=20250811, workers=WORKERS)
    res, _ = run_coverage(cfg, "both")
    return res


@pytest.fixture(scope="module")
def critical_region():
    return _critical_region_run()


def test_acceptance_3_gapped_coverage_in_critical_region(critical_region):
    res = critical_region
    g = res["gapped"]
    ok = 0.90 <= g["coverage"] <= 0.98
    _line("3 critical region (gapped)", ok,
          f"alpha = 0.35, kappa = 0.6, u = {res['gap']}: coverage = "
          f"{g['coverage']:.4f} in [0.90, 0.98] over {g['n']} replications")
    assert ok
    # the plain interval at the same alpha is flagged as out-of-regime on
    # every replication (the documented part of the expected failure)
    assert res["plain"]["flagged_fraction"] == 1.0


def test_acceptance_3_plain_interval_noncoverage_expected_failure(critical_region):
    """EXPECTED RED: asserts the plain interval loses nominal coverage at
    alpha = 0.35, which presumes a frequency-ratio bias of order
    delta^(1 - 2 alpha).  For the gamma kernel the bias is O(delta^2)
    (Matern variogram: the t^2 term is annihilated by the k=2 filter;
    verified to 35 digits), so the plain interval covers at ~95% and this
    assertion cannot hold at any high-frequency configuration.  See the
    module docstring for the argument."""
    res = critical_region
    p = res["plain"]
    ok = p["coverage"] < 0.90
    _line("3b plain non-coverage (documented expected failure)", ok,
          f"plain coverage = {p['coverage']:.4f}; non-coverage (< 0.90) was "
          f"expected under the slow-bias assumption, but the gamma kernel's "
          f"COF bias is O(delta^2), so nominal coverage persists "
          f"(all {p['n']} reports carry the out-of-regime flag)")
    assert ok, (
        "plain interval kept nominal coverage in the critical region; "
        "the O(delta^2) bias analysis is in the module docstring"
    )


# -- 4. Lambda validation --------------------------------------------------------


@pytest.mark.parametrize("p,H,k,seed", [
    (2.0, 1 / 3, 2, 3),
    (3.0, 0.6, 2, 7),
    (2.0, 0.3, 1, 3),
])
def test_acceptance_4_lambda_series_vs_monte_carlo(p, H, k, seed):
    cfg = RunConfig(command="montecarlo", p=p, hurst=H, k=k, n=4096,
                    paths=2000, seed=seed, workers=WORKERS)
    res, _ = run_lambda(cfg)
    ok = res["rel_error"] < 0.05
    _line(f"4 lambda (p={p}, H={H:.3f}, k={k})", ok,
          f"series l11 = {res['series_l11']:.4f}, MC = {res['mc_l11']:.4f}, "
          f"rel error = {res['rel_error']:.4f} < 0.05 ({res['paths']} paths)")
    assert ok


def test_acceptance_4_lambda_psd_grid():
    grid = [(p, H, k) for p in (1.0, 2.0, 3.0, 4.0) for H, k in
            ((0.15, 2), (0.35, 2), (0.55, 2), (0.7, 1), (0.9, 2))]
    assert len(grid) == 20
    bad = [(p, H, k) for (p, H, k) in grid if not lambda_matrix(p, H, k).is_psd()]
    _line("4 lambda PSD grid", not bad,
          f"2x2 matrix positive semidefinite on all {len(grid)} grid points")
    assert not bad


# -- 5. estimator consistency ----------------------------------------------------


def test_acceptance_5_consistency():
    details = []
    ok = True
    for alpha in (-0.3, -1 / 6, 0.1, 0.2):
        cfg = RunConfig(command="montecarlo", alpha=alpha, lam=1.0, n=N16,
                        delta=D16, powers="2,4", reps=50, seed=11, workers=WORKERS)
        res, _ = run_consistency(cfg)
        for p in ("2.0", "4.0"):
            bias = abs(res["per_p"][p]["bias"])
            ok = ok and bias < 0.02
            details.append(f"a={alpha:+.3f},p={p}: |bias|={bias:.4f}")
    _line("5 consistency (means)", ok, "; ".join(details))
    assert ok

    trend_ok = True
    trends = []
    for alpha in (-0.3, -1 / 6, 0.1):
        rmses = []
        for n in (2**12, 2**14, 2**16):
            cfg = RunConfig(command="montecarlo", alpha=alpha, lam=1.0, n=n,
                            delta=D16, powers="2", reps=40, seed=13,
                            workers=WORKERS)
            res, _ = run_consistency(cfg)
            rmses.append(res["per_p"]["2.0"]["rmse"])
        trend_ok = trend_ok and all(b < a for a, b in zip(rmses, rmses[1:]))
        trends.append(f"a={alpha:+.3f}: " + ">".join(f"{r:.4f}" for r in rmses))
    _line("5 consistency (RMSE trend)", trend_ok, "; ".join(trends))
    assert trend_ok


# -- 6. drift robustness ---------------------------------------------------------


def test_acceptance_6_drift_robustness():
    alpha, p = -1 / 6, 2.0
    fine = core_sampler(alpha, 1.0, 2**18, 1 / 16384.0).sample(21)
    coarse = SeriesGrid(fine.values[::4], 4 * fine.delta)

    # exact invariance under affine drift (exactly representable coefficients)
    t_c = coarse.delta * np.arange(len(coarse))
    bent = SeriesGrid(coarse.values + 2.0 + 0.5 * t_c, coarse.delta)
    exact_ok = (alpha_hat(bent, p).alpha_hat
                == pytest.approx(alpha_hat(coarse, p).alpha_hat, abs=1e-10))

    def perturb(series, c):
        t = series.delta * np.arange(len(series))
        drifted = SeriesGrid(series.values + c * t**2, series.delta)
        return abs(alpha_hat(drifted, p).alpha_hat - alpha_hat(series, p).alpha_hat)

    c = 1.0
    pert_c = perturb(coarse, c)
    for _ in range(12):
        if 0.015 <= pert_c <= 0.03:
            break
        c *= (0.02 / pert_c) ** 0.7
        pert_c = perturb(coarse, c)
    pert_f = perturb(fine, c)
    shrink = pert_c / pert_f
    ok = exact_ok and shrink >= 1.5
    _line("6 drift robustness", ok,
          f"affine drift: exact invariance; quadratic drift perturbation "
          f"{pert_c:.4f} -> {pert_f:.4f} (factor {shrink:.2f} >= 1.5)")
    assert ok


# -- 7. spectral fit -------------------------------------------------------------


def test_acceptance_7_spectral_fit():
    # noiseless model recovery at the turbulence-fit parameters
    al, lam = -0.165, 0.0884
    f = np.arange(1, 40000) * 0.005
    dens = 1.7 * (1 + (2 * math.pi * f / lam) ** 2) ** (-(1 + al))
    psd = PsdEstimate(freqs=f, density=dens, segment_len=0, overlap_fraction=0.0,
                      taper="none", n_segments=1, delta=1.0)
    fit0 = fit_spectrum(psd, f_min=f[0], f_max=200.0)
    exact_ok = abs(fit0.alpha - al) < 1e-4 and abs(fit0.lam - lam) < 1e-4

    # simulated core paths at n = 2^20
    samp = core_sampler(-1 / 6, 1.0, 2**20, 1 / 1024.0)
    sim_ok = True
    details = [f"exact model: d_alpha={abs(fit0.alpha - al):.2e}, "
               f"d_lambda={abs(fit0.lam - lam):.2e}"]
    for seed in (7, 8, 9):
        s = samp.sample(seed)
        w = welch_psd(s, 2**17)
        fit = fit_spectrum(w, f_max=50.0)
        m = (w.freqs >= 2.0) & (w.freqs <= 50.0)
        slope = float(np.polyfit(np.log(w.freqs[m]), np.log(w.density[m]), 1)[0])
        this = (abs(fit.alpha - (-1 / 6)) < 0.03
                and abs(fit.lam / 1.0 - 1.0) < 0.20
                and abs(slope - (-2 * (1 - 1 / 6))) < 0.1)
        sim_ok = sim_ok and this
        details.append(f"seed {seed}: alpha={fit.alpha:+.4f}, lam={fit.lam:.3f}, "
                       f"slope={slope:.3f}")
    ok = exact_ok and sim_ok
    _line("7 spectral fit", ok, "; ".join(details))
    assert ok


# -- 8. exact property suites ----------------------------------------------------


def test_acceptance_8_exact_properties():
    rng = np.random.default_rng(88)
    # streaming vs one-shot, bit for bit, 100 random series
    stream_ok = True
    for _ in range(100):
        n = int(rng.integers(12, 400))
        k = int(rng.integers(1, 4))
        v = int(rng.integers(1, 3))
        if n <= v * k:
            continue
        p = float(rng.uniform(0.5, 4.0))
        x = rng.standard_normal(n)
        sg = SeriesGrid(x, 1.0)
        stream = PowerVariationStream(p, k, v)
        for lo in range(0, n, 29):
            stream.update(x[lo : lo + 29])
        stream_ok = stream_ok and (
            stream.result(1.0).raw == power_variation(sg, p, k, v).raw)

    # constant/affine annihilation by the k=2 filter (exact values)
    const = SeriesGrid(np.full(64, 7.0), 1.0)
    aff = SeriesGrid(1.0 + 0.5 * np.arange(64.0), 1.0)
    annihilate_ok = (power_variation(const, 2.0, 2, 1).raw == 0.0
                     and power_variation(aff, 2.0, 2, 1).raw == 0.0)

    # scale invariance of COF and alpha_hat
    x = np.cumsum(rng.standard_normal(3000))
    sg = SeriesGrid(x, 0.01)
    base = cof(sg, 2.0)
    scale_ok = (cof(SeriesGrid(-x, 0.01), 2.0) == base
                and abs(cof(SeriesGrid(math.e * x, 0.01), 2.0) / base - 1) < 1e-12
                and abs(alpha_hat(SeriesGrid(7.0 * x, 0.01), 2.0).alpha_hat
                        - alpha_hat(sg, 2.0).alpha_hat) < 1e-12)

    # h_p inversion identity
    hp_ok = all(
        abs(h_p(2 ** ((2 * a + 1) * pp / 2), pp) - a) < 1e-12
        for pp in (1.0, 2.0, 4.0, 8.0) for a in (-0.3, -1 / 6, 0.1, 0.35)
    )

    # seed determinism of the simulators
    from bsslab.simulate import SigmaModel, simulate_bss, simulate_fbm

    det_ok = (np.array_equal(simulate_fbm(0.4, 128, 0.1, 5).values,
                             simulate_fbm(0.4, 128, 0.1, 5).values)
              and np.array_equal(
                  simulate_bss(KernelSpec(-1 / 6, 1.0), SigmaModel(kind="exp-ou"),
                               128, 0.01, seed=5).values,
                  simulate_bss(KernelSpec(-1 / 6, 1.0), SigmaModel(kind="exp-ou"),
                               128, 0.01, seed=5).values))

    # parallel harness determinism: identical payload for 1 vs 2 workers
    payloads = []
    for workers in (1, 2):
        cfg = RunConfig(command="montecarlo", experiment="lambda", p=2.0,
                        hurst=1 / 3, k=2, n=512, paths=16, seed=5,
                        workers=workers)
        rep = run_montecarlo(cfg)
        payload = rep.payload()
        payload["config"].pop("workers")
        payloads.append(payload)
    harness_ok = payloads[0] == payloads[1]

    ok = all([stream_ok, annihilate_ok, scale_ok, hp_ok, det_ok, harness_ok])
    _line("8 exact properties", ok,
          f"streaming bit-exact: {stream_ok}; k=2 annihilation: {annihilate_ok}; "
          f"scale invariance: {scale_ok}; h_p identity: {hp_ok}; "
          f"seed determinism: {det_ok}; parallel-harness determinism: {harness_ok}")
    assert ok
