"""Model-level invariant suite backing the ``check`` CLI command.

Each check re-verifies one contract of the solver stack on a concrete model:
generator structure, spectral splitting, equation residuals, eigenvalue
signatures, dual-route agreement, fluid normalisation, MGF marginalisation,
the corner-block identity, and simulator determinism.  Everything here calls
the same library functions the tests exercise; the CLI only formats the
table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mcsim, numerics
from .fluid import fluid_stationary, k_star, psi_star, total_probability
from .mmbm import (
    asmussen_z, crosscheck, mmbm_quadratic, mmbm_stationary, zeta1_closed_form,
)
from .model import MmbmModel, fluidize, mean_drift
from .morph import corner_block_residual, mgf_gap
from .quadsolve import det_poly_roots

RESID_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


def _right_quadratic_residual(x, vinv_d, theta_q_theta) -> float:
    """Relative residual of X^2 + 2 X V^{-1}D + 2 Th^{-1} Q Th^{-1} = 0."""
    res = x @ x + 2.0 * x @ vinv_d + 2.0 * theta_q_theta
    scale = 1.0 + max(numerics.max_abs(2.0 * vinv_d),
                      numerics.max_abs(2.0 * theta_q_theta), 1.0)
    return numerics.max_abs(res) / scale


def _check_lam(model: MmbmModel) -> float:
    """An admissible switching rate comfortably above the threshold."""
    return 4.0 * max(float(np.max(model.mu**2 / model.sigma2)), 25.0)


def run_model_checks(model: MmbmModel, mc_budget: float = 2000.0) -> list:
    """Run every module invariant against ``model``; returns CheckResults.

    ``mc_budget`` is the simulated-time horizon of the smoke-level Monte
    Carlo checks (KS bound 0.1); pass 0 to skip them.
    """
    m = model.m
    results: list[CheckResult] = []

    def add(name, passed, value, detail):
        results.append(CheckResult(name, bool(passed), float(value), detail))

    row_sum = numerics.max_abs(model.Q.sum(axis=1))
    add("model.generator_rows", row_sum <= 1e-12, row_sum, "|row sums| <= 1e-12")
    add("model.variances", np.all(model.sigma2 > 0), float(np.min(model.sigma2)),
        "sigma2 > 0")
    drift = mean_drift(model)
    add("model.drift_negative", drift < 0, drift, "alpha @ mu < 0")
    if drift >= 0:
        # the stationary checks below are undefined without recurrence
        return results

    lam = _check_lam(model)
    fm = fluidize(model, lam)
    pi = fm.stationary_dist()
    kron = np.concatenate([0.5 * model.alpha, 0.5 * model.alpha])
    gap = numerics.max_abs(pi - kron)
    add("model.fluid_phase_dist", gap <= 1e-9, gap,
        "stationary(T_lam) == (1/2,1/2) (x) alpha")
    dgap = abs(fm.mean_drift() - drift)
    add("model.fluid_drift", dgap <= 1e-9, dgap, "fluid mean drift == alpha @ mu")

    gen = numerics.expm(model.Q)
    sgap = numerics.max_abs(gen.sum(axis=1) - 1.0)
    add("numerics.expm_stochastic", sgap <= 1e-12 and gen.min() >= -1e-12,
        sgap, "expm(Q) rows sum to 1")

    eq = mmbm_quadratic(model)
    split = det_poly_roots(eq)
    ok = split.counts() == (m - 1, 1, m) and split.n_inf == 0
    add("quadsolve.splitting", ok, float(split.n_zero),
        f"root counts {split.counts()} == ({m - 1}, 1, {m})")

    st = mmbm_stationary(model)
    theta = model.sigma
    x_ws = st.Psi1 / theta[:, None]
    x_sa = -st.Psi1Star / theta[:, None]
    add("quadsolve.residual_psi1", eq.rel_residual(x_ws) <= RESID_TOL,
        eq.rel_residual(x_ws), "Th^{-1} Psi1 solves the quadratic")
    add("quadsolve.residual_psi1_star", eq.rel_residual(x_sa) <= RESID_TOL,
        eq.rel_residual(x_sa), "-Th^{-1} Psi1* solves the quadratic")

    # factorization: Gamma(z) = (V z + V X + 2D)(z I - X) with X = Th^{-1} Psi1
    v_mat, d_mat = model.V, model.D
    const_gap = numerics.max_abs((v_mat @ x_ws + 2.0 * d_mat) @ (-x_ws) - 2.0 * model.Q)
    fac_tol = 1e-9 * (1.0 + max(numerics.max_abs(2.0 * model.Q),
                                numerics.max_abs(2.0 * d_mat)))
    add("quadsolve.factorization", const_gap <= fac_tol, const_gap,
        "Gamma(z) factors through Th^{-1} Psi1")

    vinv_d = np.diag(model.mu / model.sigma2)
    tqt = model.Q / np.outer(theta, theta)
    r_k0 = _right_quadratic_residual(-st.K0, vinv_d, tqt)
    r_k0s = _right_quadratic_residual(st.K0Star, vinv_d, tqt)
    add("mmbm.residual_k0", r_k0 <= RESID_TOL, r_k0, "-K0 solves the K-quadratic")
    add("mmbm.residual_k0_star", r_k0s <= RESID_TOL, r_k0s,
        "K0* solves the K-quadratic")

    gen_gap = numerics.max_abs(x_ws.sum(axis=1))
    off = x_ws - np.diag(np.diag(x_ws))
    add("mmbm.psi1_generator", gen_gap <= 1e-9 and off.min() >= -1e-9, gen_gap,
        "Th^{-1} Psi1 is a generator")
    row_sums_star = x_sa.sum(axis=1)
    eig_sa = numerics.eigenvalues(x_sa)
    add("mmbm.psi1_star_signs",
        np.all(row_sums_star >= -1e-9) and np.max(row_sums_star) > 1e-12
        and np.all(eig_sa.real > 0), float(np.min(row_sums_star)),
        "-Th^{-1} Psi1* antistable with (Th^{-1} Psi1*) 1 <= 0, some strict")

    zp = numerics.max_abs(st.zeta1 @ st.Psi1)
    add("mmbm.zeta1_null", zp <= 1e-10 * (1 + numerics.max_abs(st.Psi1)), zp,
        "zeta1 Psi1 == 0")
    norm_gap = abs(2.0 * float(np.linalg.solve(-st.K0.T, st.zeta1) @ (1.0 / theta)) - 1.0)
    add("mmbm.zeta1_norm", norm_gap <= 1e-10, norm_gap,
        "2 zeta1 (-K0)^{-1} Th^{-1} 1 == 1")
    zgap = numerics.max_abs(st.zeta1 - zeta1_closed_form(model, st.Psi1))
    add("mmbm.zeta1_closed_form", zgap <= 1e-9, zgap, "null-vector == closed form")

    cc = crosscheck(model)
    add("mmbm.k0_vs_reversal", cc.k_gap <= 1e-8, cc.k_gap, "K0 == Th^{-1} Z Th")
    add("mmbm.density_vs_reversal", cc.density_sup_gap <= 1e-8,
        cc.density_sup_gap, "limit density == time-reversal density")
    z = asmussen_z(model)
    add("mmbm.z_stable", np.all(numerics.eigenvalues(z).real < 0),
        float(np.max(numerics.eigenvalues(z).real)), "expm(Z x) decays")

    fst = fluid_stationary(fm)
    psi_rows = numerics.max_abs(fst.Psi.sum(axis=1) - 1.0)
    add("fluid.psi_stochastic", psi_rows <= 1e-10, psi_rows,
        "Psi rows sum to 1 (drift < 0)")
    add("fluid.k_stable", np.all(numerics.eigenvalues(fst.K).real < 0),
        float(np.max(numerics.eigenvalues(fst.K).real)), "K spectrum in left half-plane")
    tp = abs(total_probability(fst) - 1.0)
    add("fluid.total_probability", tp <= 1e-8, tp, "atom + integral == 1")
    ks_eigs = numerics.eigenvalues(k_star(fm, psi_star(fm)))
    add("fluid.k_star_closed_left", np.all(ks_eigs.real <= 1e-8),
        float(np.max(ks_eigs.real)), "K* spectrum in closed left half-plane")

    mg = mgf_gap(model, lam, 0.0, 1.0)
    add("morph.mgf_marginal", mg <= 1e-12, mg, "copy marginal is exact at s=0")
    rng = np.random.default_rng(0)
    s_rand = rng.uniform(-1.0, 1.0, size=(4, 4))
    cb = corner_block_residual(s_rand, 2, 1.0)
    add("morph.corner_block", cb <= 1e-6, cb, "integral identity within 1e-6")

    if mc_budget > 0:
        emp_a = mcsim.simulate_mmbm(model, horizon=mc_budget, dt=1e-3,
                                    sample_interval=0.1)
        emp_b = mcsim.simulate_mmbm(model, horizon=mc_budget, dt=1e-3,
                                    sample_interval=0.1)
        same = all(np.array_equal(a, b) for a, b in
                   zip(emp_a.levels_by_phase, emp_b.levels_by_phase))
        add("mcsim.deterministic", same, float(emp_a.n_samples),
            "same seed reproduces samples")
        from .mmbm import mmbm_cdf_marginal

        ks = mcsim.ks_distance(emp_a, mmbm_cdf_marginal(st))
        add("mcsim.ks_smoke", ks <= 0.1, ks,
            f"KS vs analytic CDF <= 0.1 at horizon {mc_budget:g}")
    return results
