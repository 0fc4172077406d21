"""Stationary distribution of reflected Markov-modulated Brownian motion.

Two independent routes are implemented, and agreeing is the whole point:

* the *fluid-limit route*: with Theta = sqrt(V), the slope matrices Psi1 and
  Psi1* are read off the solutions of

      X^2 + 2 V^{-1} D X + 2 V^{-1} Q = 0

  (Theta^{-1} Psi1 weakly stable, -Theta^{-1} Psi1* strictly antistable),
  K0 = Psi1 Theta^{-1} + 2 V^{-1} D drives the density

      pi(x) = 2 zeta1 expm(K0 x) Theta^{-1},  x > 0,

  with zeta1 the left null vector of Psi1 scaled so the density integrates
  to one, and there is no atom at zero;

* the *time-reversal route*: the matrix Z with stable spectrum solving
  (1/2) Z^2 V - Z D + Q = 0 gives the classical density -alpha Z expm(Z x).

The two densities coincide, and K0 = Theta^{-1} Z Theta; :func:`crosscheck`
quantifies the agreement numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import NotPositiveRecurrentError
from .model import MmbmModel, mean_drift
from .quadsolve import QuadraticEq, SpectralMode, solve_stable


def mmbm_quadratic(model: MmbmModel) -> QuadraticEq:
    """The monic equation X^2 + 2 V^{-1} D X + 2 V^{-1} Q = 0."""
    vinv = 1.0 / model.sigma2
    return QuadraticEq.monic(
        2.0 * np.diag(vinv * model.mu),
        2.0 * vinv[:, None] * model.Q,
    )


@dataclass(frozen=True)
class MmbmStationary:
    """Limit stationary bundle (Psi1, Psi1*, K0, K0*, zeta1) of an MMBM."""

    model: MmbmModel
    Psi1: np.ndarray
    Psi1Star: np.ndarray
    K0: np.ndarray
    K0Star: np.ndarray
    zeta1: np.ndarray
    drift: float = field(repr=False, default=0.0)


def mmbm_stationary(model: MmbmModel) -> MmbmStationary:
    """Stationary distribution of the MMBM reflected at zero.

    Requires a negative mean drift; raises
    :class:`NotPositiveRecurrentError` otherwise and :class:`SolverError` if
    either quadratic solve fails its spectral verification.
    """
    drift = mean_drift(model)
    if drift >= 0.0:
        raise NotPositiveRecurrentError(
            f"mean drift alpha @ mu = {drift:g} must be negative for a "
            f"stationary distribution to exist"
        )
    theta = model.sigma
    eq = mmbm_quadratic(model)
    x_ws = solve_stable(eq, SpectralMode.WEAKLY_STABLE)
    x_sa = solve_stable(eq, SpectralMode.STRICTLY_ANTISTABLE)
    psi1 = theta[:, None] * x_ws
    psi1_star = -theta[:, None] * x_sa
    two_vinv_d = 2.0 * np.diag(model.mu / model.sigma2)
    k0 = psi1 / theta[None, :] + two_vinv_d
    k0_star = psi1_star / theta[None, :] - two_vinv_d
    # Psi1 can be numerically zero (m = 1), so the null-space threshold is
    # anchored to the ambient scale of the solve, not to |Psi1| itself
    ambient = float(np.max(theta)) * (1.0 + eq.max_coef)
    v = numerics.left_null_vector(psi1, scale=ambient)
    scale = 2.0 * float(np.linalg.solve(-k0.T, v) @ (1.0 / theta))
    zeta1 = v / scale
    return MmbmStationary(
        model=model, Psi1=psi1, Psi1Star=psi1_star, K0=k0, K0Star=k0_star,
        zeta1=zeta1, drift=drift,
    )


def mmbm_density(st: MmbmStationary, x: float) -> np.ndarray:
    """Stationary density 2 zeta1 expm(K0 x) Theta^{-1} per phase, x > 0."""
    if x <= 0.0:
        raise ValueError(f"density is defined for x > 0, got {x}")
    return _density_raw(st, x)


def _density_raw(st: MmbmStationary, x: float) -> np.ndarray:
    return 2.0 * (st.zeta1 @ numerics.expm(st.K0 * x)) / st.model.sigma


def mmbm_cdf(st: MmbmStationary, x: float) -> np.ndarray:
    """Per-phase stationary CDF for x >= 0 (no atom at zero)."""
    if x < 0.0:
        raise ValueError(f"cdf is defined for x >= 0, got {x}")
    m = st.model.m
    resolvent = np.linalg.solve(-st.K0, np.eye(m) - numerics.expm(st.K0 * x))
    return 2.0 * (st.zeta1 @ resolvent) / st.model.sigma


def mmbm_density_grid(st: MmbmStationary, xs) -> np.ndarray:
    """Density rows for many levels at once; shape (len(xs), m)."""
    return np.array([mmbm_density(st, float(x)) for x in np.asarray(xs)])


def mmbm_cdf_marginal(st: MmbmStationary):
    """Vectorised level-marginal CDF x -> P(level <= x); no atom at zero."""
    left = 2.0 * np.linalg.solve(-st.K0.T, st.zeta1).astype(float)
    right = 1.0 / st.model.sigma
    base = float(left @ right)
    tail = numerics.matrix_exp_functional(st.K0, left, right)

    def cdf(xs):
        return base - tail(np.maximum(np.asarray(xs, dtype=float), 0.0))

    return cdf


def mmbm_mass_zero(st: MmbmStationary) -> np.ndarray:
    """Atom at level zero: exactly the zero vector (all variances positive)."""
    return np.zeros(st.model.m)


def zeta1_closed_form(model: MmbmModel, psi1: np.ndarray) -> np.ndarray:
    """Closed form zeta1 = -alpha (Theta^{-1} D + (1/2) Theta Psi1 Theta^{-1}).

    An algebra-only alternative to the null-vector route; the two must agree
    to solver precision.
    """
    theta = model.sigma
    inner = np.diag(model.mu / theta) + 0.5 * theta[:, None] * psi1 / theta[None, :]
    return -(model.alpha @ inner)


def asmussen_z(model: MmbmModel) -> np.ndarray:
    """Stable solution Z of (1/2) Z^2 V - Z D + Q = 0 (time-reversal route).

    Computed independently of K0: transpose to the monic left-coefficient
    form Y^2 - 2 V^{-1} D Y + 2 V^{-1} Q^T = 0, take the strictly stable
    solution, transpose back.  All eigenvalues of Z lie in the open left
    half-plane, so expm(Z x) decays.
    """
    drift = mean_drift(model)
    if drift >= 0.0:
        raise NotPositiveRecurrentError(
            f"mean drift alpha @ mu = {drift:g} must be negative"
        )
    vinv = 1.0 / model.sigma2
    eq = QuadraticEq.monic(
        -2.0 * np.diag(vinv * model.mu),
        2.0 * vinv[:, None] * model.Q.T,
    )
    y = solve_stable(eq, SpectralMode.STRICTLY_STABLE)
    return y.T


def asmussen_density(model: MmbmModel, z: np.ndarray, x: float) -> np.ndarray:
    """Time-reversal density -alpha Z expm(Z x) per phase, x > 0."""
    if x <= 0.0:
        raise ValueError(f"density is defined for x > 0, got {x}")
    return -(model.alpha @ z) @ numerics.expm(z * x)


@dataclass(frozen=True)
class CrossCheck:
    """Agreement metrics between the fluid-limit and time-reversal routes."""

    k_gap: float
    density_sup_gap: float
    zeta_route_gap: float
    x_grid: np.ndarray = field(repr=False, default=None)


def crosscheck(
    model: MmbmModel, x_max: float = 20.0, points: int = 81
) -> CrossCheck:
    """Compare the two stationary-density routes on a level grid.

    Reports the max-abs gaps between K0 and Theta^{-1} Z Theta, between the
    densities on ``points`` equispaced levels in [0, x_max], and between the
    null-vector and closed-form zeta1.
    """
    st = mmbm_stationary(model)
    z = asmussen_z(model)
    theta = model.sigma
    k_via_z = z * (theta[None, :] / theta[:, None])
    k_gap = numerics.max_abs(st.K0 - k_via_z)
    xs = np.linspace(0.0, x_max, points)
    sup = 0.0
    for x in xs:
        limit_route = _density_raw(st, x)
        reversal_route = -(model.alpha @ z) @ numerics.expm(z * x)
        sup = max(sup, numerics.max_abs(limit_route - reversal_route))
    zeta_gap = numerics.max_abs(st.zeta1 - zeta1_closed_form(model, st.Psi1))
    return CrossCheck(
        k_gap=k_gap, density_sup_gap=sup, zeta_route_gap=zeta_gap, x_grid=xs
    )
