"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline.
Criteria with stated runtime limits assert them; the Monte Carlo criterion
dominates the wall clock (a few minutes on one core).
"""

import time

import numpy as np
import pytest

import fluidbm as fb
from fluidbm import mcsim, morph, numerics
from fluidbm.fluid import fluid_cdf_marginal
from fluidbm.mmbm import mmbm_cdf_marginal, mmbm_quadratic

from conftest import random_recurrent_model
from oracles import integrate_density

BATTERY_SEED = 20260808
EIG_TOL = 1e-8


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(BATTERY_SEED)
    return [random_recurrent_model(rng, m=(i % 6) + 1) for i in range(100)]


def _finish(name, t0, limit, conditions):
    elapsed = time.perf_counter() - t0
    failed = [label for label, ok in conditions if not ok]
    in_time = limit is None or elapsed < limit
    status = "PASS" if not failed and in_time else "FAIL"
    limit_txt = "no limit" if limit is None else f"limit {limit:g}s"
    print(f"[acceptance] {name}: {status} ({elapsed:.2f}s, {limit_txt})")
    for label in failed:
        print(f"    failed: {label}")
    if not in_time:
        print(f"    failed: runtime {elapsed:.2f}s exceeded {limit:g}s")
    assert not failed, f"{name}: {failed}"
    assert in_time, f"{name}: runtime {elapsed:.2f}s over limit {limit:g}s"


def _counts(matrix):
    eig = numerics.eigenvalues(matrix)
    tol = EIG_TOL * (1.0 + numerics.max_abs(matrix))
    zero = int(np.sum(np.abs(eig) <= tol))
    rest = eig[np.abs(eig) > tol]
    return int(np.sum(rest.real < 0)), zero, int(np.sum(rest.real > 0))


def test_criterion_1_scalar_exactness(m1):
    t0 = time.perf_counter()
    st = fb.mmbm_stationary(m1)
    xs = np.linspace(1e-6, 10.0, 400)
    sup = max(abs(fb.mmbm_density(st, x)[0] - np.exp(-x)) for x in xs)
    conditions = [
        ("sup |density - exp(-x)| <= 1e-10", sup <= 1e-10),
        ("zeta1 == 1/sqrt(2) to 1e-12",
         abs(st.zeta1[0] - 1 / np.sqrt(2)) <= 1e-12),
        ("K0 == -1 to 1e-12", abs(st.K0[0, 0] + 1.0) <= 1e-12),
        ("K0* == 0 to 1e-12", abs(st.K0Star[0, 0]) <= 1e-12),
    ]
    _finish("1 scalar exactness (M1)", t0, 1.0, conditions)


def test_criterion_2_residual_certificates(battery):
    t0 = time.perf_counter()
    bad_resid = 0
    bad_counts = 0
    for model in battery:
        m = model.m
        st = fb.mmbm_stationary(model)
        eq = mmbm_quadratic(model)
        theta = model.sigma
        x_ws = st.Psi1 / theta[:, None]
        x_sa = -st.Psi1Star / theta[:, None]
        vinv_d = np.diag(model.mu / model.sigma2)
        tqt = model.Q / np.outer(theta, theta)
        k_scale = 1.0 + max(numerics.max_abs(2 * vinv_d),
                            numerics.max_abs(2 * tqt), 1.0)

        def k_resid(x):
            return numerics.max_abs(x @ x + 2 * x @ vinv_d + 2 * tqt) / k_scale

        if (eq.rel_residual(x_ws) > 1e-10 or eq.rel_residual(x_sa) > 1e-10
                or k_resid(-st.K0) > 1e-10 or k_resid(st.K0Star) > 1e-10):
            bad_resid += 1
        ok = (_counts(x_ws) == (m - 1, 1, 0)
              and _counts(x_sa) == (0, 0, m)
              and _counts(st.K0) == (m, 0, 0)
              and _counts(st.K0Star) == (m - 1, 1, 0))
        if not ok:
            bad_counts += 1
    conditions = [
        ("all 400 residuals <= 1e-10 relative", bad_resid == 0),
        ("eigenvalue counts match on all 100 models", bad_counts == 0),
    ]
    _finish("2 residual certificates (100 random models)", t0, 30.0, conditions)


def test_criterion_3_dual_route_agreement(battery):
    t0 = time.perf_counter()
    worst_density = 0.0
    worst_k = 0.0
    for model in battery:
        cc = fb.crosscheck(model, x_max=20.0, points=81)
        worst_density = max(worst_density, cc.density_sup_gap)
        worst_k = max(worst_k, cc.k_gap)
    conditions = [
        (f"sup density gap {worst_density:.2e} <= 1e-8", worst_density <= 1e-8),
        (f"sup K0 vs reversal gap {worst_k:.2e} <= 1e-8", worst_k <= 1e-8),
    ]
    _finish("3 dual-route agreement (100 random models)", t0, 60.0, conditions)


def test_criterion_4_expansion_orders(m2):
    t0 = time.perf_counter()
    rep = morph.expansion_report(m2, [0.1, 0.05, 0.025, 0.0125])
    psi_slope = rep.slopes["psi_gap"].slope
    k_slope = rep.slopes["k_gap"].slope
    zeta = rep.metrics["zeta_gap"]
    conditions = [
        (f"psi slope {psi_slope:.3f} in [1.7, 2.3]", 1.7 <= psi_slope <= 2.3),
        (f"k slope {k_slope:.3f} in [0.7, 1.3]", 0.7 <= k_slope <= 1.3),
        ("zeta gap decreasing with eps", bool(np.all(np.diff(zeta) > 0))),
    ]
    _finish("4 expansion orders (M2)", t0, 30.0, conditions)


def test_criterion_5_density_morphing(m1, m2):
    t0 = time.perf_counter()
    conditions = []
    for name, model in (("M1", m1), ("M2", m2)):
        rep = morph.density_convergence(model, [1e2, 1e3, 1e4])
        sup = rep.metrics["density_sup_gap"]
        slope = rep.slopes["mass_zero_gap"].slope
        conditions.append(
            (f"{name} density gap strictly decreasing", bool(np.all(np.diff(sup) < 0))))
        conditions.append(
            (f"{name} mass slope {slope:.3f} in [0.7, 1.3]", 0.7 <= slope <= 1.3))
    _finish("5 density morphing (M1, M2)", t0, 30.0, conditions)


def test_criterion_6_mgf_convergence(m1, m2):
    t0 = time.perf_counter()
    lams = (1e2, 1e3, 1e4)
    conditions = []
    for name, model in (("M1", m1), ("M2", m2)):
        zero_worst = max(morph.mgf_gap(model, lam, 0.0, 1.0) for lam in lams)
        conditions.append(
            (f"{name} s=0 gap {zero_worst:.2e} <= 1e-12 for all lam",
             zero_worst <= 1e-12))
        for s in (0.25, 0.5):
            gaps = [morph.mgf_gap(model, lam, s, 1.0) for lam in lams]
            conditions.append(
                (f"{name} s={s} finite and decreasing",
                 all(np.isfinite(gaps)) and gaps[2] < gaps[1] < gaps[0]))
    _finish("6 MGF convergence (M1, M2)", t0, 10.0, conditions)


def test_criterion_7_spectral_splitting(battery):
    t0 = time.perf_counter()
    failures = 0
    for model in battery:
        split = fb.det_poly_roots(mmbm_quadratic(model))
        if split.counts() != (model.m - 1, 1, model.m) or split.n_inf:
            failures += 1
    _finish("7 spectral splitting (100 random models)", t0, 10.0,
            [("zero failures in 100 splits", failures == 0)])


def test_criterion_8_monte_carlo_concordance(m1, m2, f1):
    t0 = time.perf_counter()
    conditions = []
    for name, model in (("M1", m1), ("M2", m2)):
        st = fb.mmbm_stationary(model)
        emp = mcsim.simulate_mmbm(model, horizon=2.5e4, dt=1e-4,
                                  sample_interval=0.0225)
        ks = mcsim.ks_distance(emp, mmbm_cdf_marginal(st))
        conditions.append(
            (f"{name} samples {emp.n_samples} >= 1e6", emp.n_samples >= 10**6))
        conditions.append((f"{name} KS {ks:.4f} <= 0.02", ks <= 0.02))
    fst = fb.fluid_stationary(f1)
    femp = mcsim.simulate_fluid(f1, horizon=1.12e6, sample_interval=1.0)
    fks = mcsim.ks_distance(femp, fluid_cdf_marginal(fst))
    conditions.append(
        (f"F1 samples {femp.n_samples} >= 1e6", femp.n_samples >= 10**6))
    conditions.append((f"F1 KS {fks:.4f} <= 0.02", fks <= 0.02))
    masses = np.array([
        mcsim.simulate_fluid(f1, horizon=5e4, seed=mcsim.DEFAULT_SEED + 1 + k)
        .mass_at_zero()
        for k in range(16)
    ])
    se = masses.std(ddof=1) / np.sqrt(masses.size)
    gap = abs(masses.mean() - 1.0 / 3.0)
    conditions.append(
        (f"F1 mass at zero gap {gap:.2e} within 3 SE ({3 * se:.2e})",
         gap <= 3.0 * se))
    _finish("8 Monte Carlo concordance (M1, M2, F1)", t0, 300.0, conditions)


def test_criterion_9_fluid_closed_forms(f1, m1, m2, battery):
    t0 = time.perf_counter()
    st = fb.fluid_stationary(f1)
    conditions = [
        ("F1 Psi == 1 to 1e-12", abs(st.Psi[0, 0] - 1.0) <= 1e-12),
        ("F1 K == -1 to 1e-12", abs(st.K[0, 0] + 1.0) <= 1e-12),
        ("F1 zeta == 1/3 to 1e-12", abs(st.zeta[0] - 1 / 3) <= 1e-12),
    ]
    tested = [st,
              fb.fluid_stationary(fb.fluidize(m1, 8.0)),
              fb.fluid_stationary(fb.fluidize(m1, 100.0)),
              fb.fluid_stationary(fb.fluidize(m2, 400.0))]
    for model in battery[:3]:
        lam = 5.0 * max(float(np.max(model.mu**2 / model.sigma2)), 1.0)
        tested.append(fb.fluid_stationary(fb.fluidize(model, lam)))
    worst = 0.0
    for fst in tested:
        x_max = 60.0 / abs(np.max(numerics.eigenvalues(fst.K).real))
        integral = integrate_density(
            lambda x: fb.fluid_density(fst, x), x_max).sum()
        worst = max(worst, abs(fst.mass_zero_total + integral - 1.0))
    conditions.append(
        (f"total probability gap {worst:.2e} <= 1e-8 on {len(tested)} models",
         worst <= 1e-8))
    _finish("9 fluid closed forms + normalisation", t0, None, conditions)


def test_criterion_10_corner_block_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(20):
        s = rng.uniform(-1.0, 1.0, (4, 4))
        worst = max(worst, morph.corner_block_residual(s, 2, 1.0))
    _finish("10 corner-block identity (20 random 4x4)", t0, None,
            [(f"worst residual {worst:.2e} <= 1e-6", worst <= 1e-6)])
