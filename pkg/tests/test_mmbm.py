import numpy as np
import pytest

import fluidbm as fb
from fluidbm import numerics
from fluidbm.errors import NotPositiveRecurrentError
from fluidbm.mmbm import mmbm_cdf_marginal, mmbm_quadratic

from conftest import random_recurrent_model
from oracles import companion_solvent, integrate_density

SQRT2 = np.sqrt(2.0)

# frozen from the companion eigen-oracle (see oracles.companion_solvent)
M2_PSI1 = np.array(
    [[-2.5044120220349226, 2.5044120220349253],
     [0.29417861816450513, -0.29417861816450497]]
)
M2_ZETA1 = np.array([0.05255835096760692, 0.4474416490323819])


def test_m1_bundle_exact(m1):
    st = fb.mmbm_stationary(m1)
    assert abs(st.Psi1[0, 0]) <= 1e-14
    assert abs(st.Psi1Star[0, 0] + SQRT2) <= 1e-13
    assert abs(st.K0[0, 0] + 1.0) <= 1e-13
    assert abs(st.K0Star[0, 0]) <= 1e-13
    assert abs(st.zeta1[0] - 1.0 / SQRT2) <= 1e-13


def test_m2_bundle_vs_oracle(m2):
    st = fb.mmbm_stationary(m2)
    # sigma = 1 so Psi1 equals the weakly stable solvent itself
    assert np.allclose(st.Psi1, M2_PSI1, atol=1e-9)
    live = companion_solvent(mmbm_quadratic(m2).A1, mmbm_quadratic(m2).A0,
                             "weakly-stable")
    assert np.allclose(st.Psi1, live, atol=1e-9)
    assert np.allclose(st.zeta1, M2_ZETA1, atol=1e-10)


def test_non_recurrent_rejected(m2):
    flipped = fb.MmbmModel(Q=m2.Q, mu=[2.0, -1.0], sigma2=m2.sigma2)
    with pytest.raises(NotPositiveRecurrentError):
        fb.mmbm_stationary(flipped)
    with pytest.raises(NotPositiveRecurrentError):
        fb.asmussen_z(flipped)


def test_residual_invariants(m2):
    st = fb.mmbm_stationary(m2)
    eq = mmbm_quadratic(m2)
    theta = m2.sigma
    assert eq.rel_residual(st.Psi1 / theta[:, None]) <= 1e-10
    assert eq.rel_residual(-st.Psi1Star / theta[:, None]) <= 1e-10
    # -K0 and K0* solve X^2 + 2 X V^{-1}D + 2 Th^{-1} Q Th^{-1} = 0
    vinv_d = np.diag(m2.mu / m2.sigma2)
    tqt = m2.Q / np.outer(theta, theta)
    for x in (-st.K0, st.K0Star):
        res = x @ x + 2.0 * x @ vinv_d + 2.0 * tqt
        assert numerics.max_abs(res) <= 1e-10 * (1.0 + numerics.max_abs(2 * tqt))


def test_spectral_signatures(m2):
    st = fb.mmbm_stationary(m2)
    theta = m2.sigma
    tol = 1e-8
    ws = numerics.eigenvalues(st.Psi1 / theta[:, None])
    assert int(np.sum(np.abs(ws) <= tol)) == 1
    assert int(np.sum(ws.real < -tol)) == m2.m - 1
    sa = numerics.eigenvalues(-st.Psi1Star / theta[:, None])
    assert np.all(sa.real > tol)
    k0 = numerics.eigenvalues(st.K0)
    assert np.all(k0.real < -tol)
    k0s = numerics.eigenvalues(st.K0Star)
    assert int(np.sum(np.abs(k0s) <= tol)) == 1
    assert int(np.sum(k0s.real < -tol)) == m2.m - 1


def test_psi1_generator_structure(m2):
    st = fb.mmbm_stationary(m2)
    g = st.Psi1 / m2.sigma[:, None]
    off = g - np.diag(np.diag(g))
    assert off.min() >= -1e-12
    assert numerics.max_abs(g.sum(axis=1)) <= 1e-10
    gs = st.Psi1Star / m2.sigma[:, None]
    rows = gs.sum(axis=1)
    assert np.all(rows <= 1e-10)
    assert rows.min() < -1e-6


def test_zeta1_relations(m2):
    st = fb.mmbm_stationary(m2)
    assert numerics.max_abs(st.zeta1 @ st.Psi1) <= 1e-10
    norm = 2.0 * float(np.linalg.solve(-st.K0.T, st.zeta1) @ (1.0 / m2.sigma))
    assert abs(norm - 1.0) <= 1e-10
    assert st.zeta1.min() >= -1e-13


def test_mmbm_density_m1(m1):
    st = fb.mmbm_stationary(m1)
    assert abs(fb.mmbm_density(st, 1.0)[0] - np.exp(-1.0)) <= 1e-13
    assert abs(fb.mmbm_density(st, 1e-12)[0] - 1.0) <= 1e-10
    with pytest.raises(ValueError):
        fb.mmbm_density(st, 0.0)


def test_mass_zero_is_zero_vector(m1, m2):
    for model in (m1, m2):
        st = fb.mmbm_stationary(model)
        assert np.all(fb.mmbm_mass_zero(st) == 0.0)


def test_zeta1_closed_form_examples(m1, m2):
    st1 = fb.mmbm_stationary(m1)
    assert abs(fb.zeta1_closed_form(m1, st1.Psi1)[0] - 1.0 / SQRT2) <= 1e-13
    scaled = fb.MmbmModel(Q=[[0.0]], mu=[-2.0], sigma2=[2.0])
    st_s = fb.mmbm_stationary(scaled)
    assert abs(fb.zeta1_closed_form(scaled, st_s.Psi1)[0] - SQRT2) <= 1e-13
    st2 = fb.mmbm_stationary(m2)
    gap = numerics.max_abs(st2.zeta1 - fb.zeta1_closed_form(m2, st2.Psi1))
    assert gap <= 1e-9


def test_asmussen_z_m1(m1):
    z = fb.asmussen_z(m1)
    assert abs(z[0, 0] + 1.0) <= 1e-13
    assert abs(fb.asmussen_density(m1, z, 1.0)[0] - np.exp(-1.0)) <= 1e-13


def test_asmussen_z_matches_k0(m2):
    st = fb.mmbm_stationary(m2)
    z = fb.asmussen_z(m2)
    theta = m2.sigma
    k_via_z = z * (theta[None, :] / theta[:, None])
    assert numerics.max_abs(st.K0 - k_via_z) <= 1e-8
    assert np.all(numerics.eigenvalues(z).real < 0)


def test_asmussen_density_matches_limit_density(m2):
    st = fb.mmbm_stationary(m2)
    z = fb.asmussen_z(m2)
    for x in np.linspace(0.05, 20.0, 40):
        gap = numerics.max_abs(fb.mmbm_density(st, x) - fb.asmussen_density(m2, z, x))
        assert gap <= 1e-8


def test_asmussen_density_integrates_to_one(m2):
    z = fb.asmussen_z(m2)
    total = numerics.quadrature(lambda x: fb.asmussen_density(m2, z, x),
                                1e-12, 80.0, 60).sum()
    assert abs(total - 1.0) <= 1e-9


def test_crosscheck_report(m2):
    cc = fb.crosscheck(m2)
    assert cc.k_gap <= 1e-8
    assert cc.density_sup_gap <= 1e-8
    assert cc.zeta_route_gap <= 1e-9


def test_single_phase_exactness_property():
    rng = np.random.default_rng(31)
    for _ in range(5):
        mu = float(-rng.uniform(0.2, 3.0))
        s2 = float(rng.uniform(0.3, 5.0))
        model = fb.MmbmModel(Q=[[0.0]], mu=[mu], sigma2=[s2])
        st = fb.mmbm_stationary(model)
        rate = 2.0 * abs(mu) / s2
        for x in np.linspace(0.05, 10.0, 20):
            expected = rate * np.exp(-rate * x)
            assert abs(fb.mmbm_density(st, x)[0] - expected) <= 1e-10


def test_density_tail_mass_vanishes(m2):
    st = fb.mmbm_stationary(m2)
    fn = mmbm_cdf_marginal(st)
    vals = fn(np.array([5.0, 10.0, 20.0, 80.0]))
    assert np.all(np.diff(vals) >= -1e-12)
    # tail bound from the spectral abscissa of K0 (about -0.319 here)
    abscissa = float(np.max(numerics.eigenvalues(st.K0).real))
    assert abs(vals[-1] - 1.0) <= 10.0 * np.exp(abscissa * 80.0)


def test_density_quadrature_approaches_one(m2):
    st = fb.mmbm_stationary(m2)
    abscissa = float(np.max(numerics.eigenvalues(st.K0).real))
    for x_max in (20.0, 40.0, 80.0):
        total = integrate_density(lambda x: fb.mmbm_density(st, x), x_max).sum()
        tail_bound = 20.0 * np.exp(abscissa * x_max)
        assert abs(total - 1.0) <= tail_bound + 1e-9


def test_density_grid_helper(m2):
    st = fb.mmbm_stationary(m2)
    xs = np.array([0.5, 1.0, 2.0])
    grid = fb.mmbm.mmbm_density_grid(st, xs)
    assert grid.shape == (3, 2)
    assert np.allclose(grid[1], fb.mmbm_density(st, 1.0))


def test_mmbm_cdf_pointwise(m1):
    st = fb.mmbm_stationary(m1)
    assert abs(fb.mmbm_cdf(st, 1.0)[0] - (1.0 - np.exp(-1.0))) <= 1e-12
    assert np.allclose(fb.mmbm_cdf(st, 0.0), [0.0], atol=1e-14)
    with pytest.raises(ValueError):
        fb.mmbm_cdf(st, -1.0)


def test_random_models_dual_route_property():
    rng = np.random.default_rng(32)
    for _ in range(5):
        model = random_recurrent_model(rng)
        cc = fb.crosscheck(model, x_max=20.0, points=41)
        assert cc.k_gap <= 1e-8
        assert cc.density_sup_gap <= 1e-8
        assert cc.zeta_route_gap <= 1e-9
