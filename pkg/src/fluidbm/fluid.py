"""Stationary distribution of a fluid queue reflected at zero.

For a positive-recurrent :class:`~fluidbm.model.FluidModel` the stationary
law splits into an atom at level zero, carried by the descending phases,

    F(0) = [0, zeta],

and a matrix-exponential density above it,

    pi(x) = zeta @ Tmp @ expm(K x) @ [Cp^{-1}, Psi @ |Cm|^{-1}],   x > 0,

where Psi is the first-passage matrix from above (minimal nonnegative
solution of the Riccati equation), K = Cp^{-1} Tpp + Psi |Cm|^{-1} Tmp, and
zeta is the left null vector of the censored generator Tmm + Tmp @ Psi,
normalised so the total probability is one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import NotPositiveRecurrentError
from .model import FluidModel
from .quadsolve import riccati_min_nonneg


def _blocks(fm: FluidModel):
    """The four rate-scaled generator blocks of the Riccati equation."""
    cp_inv = 1.0 / fm.c_plus
    cm_inv = 1.0 / fm.c_minus_abs
    aplus = cp_inv[:, None] * fm.Tpp
    bplusminus = cp_inv[:, None] * fm.Tpm
    cminusplus = cm_inv[:, None] * fm.Tmp
    dminus = cm_inv[:, None] * fm.Tmm
    return aplus, bplusminus, cminusplus, dminus


@dataclass(frozen=True)
class FluidStationary:
    """Stationary bundle (Psi, K, zeta) of a reflected fluid queue."""

    model: FluidModel
    Psi: np.ndarray
    K: np.ndarray
    zeta: np.ndarray
    drift: float = field(repr=False, default=0.0)

    @property
    def mass_zero_total(self) -> float:
        return float(self.zeta.sum())

    def density_weights(self) -> np.ndarray:
        """The row vector zeta @ Tmp multiplying expm(K x)."""
        return self.zeta @ self.model.Tmp


def fluid_stationary(fm: FluidModel, tol: float = 1e-10) -> FluidStationary:
    """Solve for the stationary distribution of a positive-recurrent queue.

    Raises
    ------
    NotPositiveRecurrentError
        If the stationary mean rate of the phase process is nonnegative.
    SolverError
        If the Riccati iteration fails.
    """
    drift = fm.mean_drift()
    if drift >= 0.0:
        raise NotPositiveRecurrentError(
            f"fluid model has mean drift {drift:g} >= 0; the reflected process "
            f"has no proper stationary distribution"
        )
    aplus, bplusminus, cminusplus, dminus = _blocks(fm)
    psi = riccati_min_nonneg(aplus, bplusminus, cminusplus, dminus, tol=tol)
    k = aplus + psi @ cminusplus
    # zeta spans the left null space of Tmm + Tmp Psi, a generator when Psi
    # is stochastic; warn when the null direction is poorly separated.
    censored = fm.Tmm + fm.Tmp @ psi
    t_scale = numerics.max_abs(fm.T)
    svals = np.linalg.svd(censored, compute_uv=False)
    if censored.shape[0] > 1 and svals[-2] < 1e-6 * max(svals[0], 1.0):
        warnings.warn(
            "censored-generator null space is nearly degenerate; zeta may be "
            "ill-conditioned (drift close to zero?)",
            RuntimeWarning,
        )
    v = numerics.left_null_vector(censored, scale=t_scale)
    cp_inv = 1.0 / fm.c_plus
    cm_inv = 1.0 / fm.c_minus_abs
    weights = np.linalg.solve(-k.T, (v @ fm.Tmp).T)
    norm = v.sum() + float(weights @ (cp_inv + psi @ cm_inv))
    zeta = v / norm
    return FluidStationary(model=fm, Psi=psi, K=k, zeta=zeta, drift=drift)


def fluid_density(st: FluidStationary, x: float) -> np.ndarray:
    """Stationary density vector over all phases at level x > 0.

    Ascending-phase entries first, then descending; nonnegative.
    """
    if x <= 0.0:
        raise ValueError(f"fluid density is defined for x > 0, got {x}")
    return _density_raw(st, x)


def _density_raw(st: FluidStationary, x: float) -> np.ndarray:
    fm = st.model
    front = st.density_weights() @ numerics.expm(st.K * x)
    plus = front / fm.c_plus
    minus = (front @ st.Psi) / fm.c_minus_abs
    return np.concatenate([plus, minus])


def fluid_cdf(st: FluidStationary, x: float) -> np.ndarray:
    """Per-phase stationary CDF F(x), including the atom at zero, for x >= 0.

    Uses the resolvent form F(x) = F(0) + zeta Tmp (-K)^{-1} (I - e^{Kx}) [...]
    rather than quadrature.
    """
    if x < 0.0:
        raise ValueError(f"fluid cdf is defined for x >= 0, got {x}")
    fm = st.model
    resolvent = np.linalg.solve(-st.K, np.eye(st.K.shape[0]) - numerics.expm(st.K * x))
    front = st.density_weights() @ resolvent
    plus = front / fm.c_plus
    minus = (front @ st.Psi) / fm.c_minus_abs
    return fluid_mass_zero(st) + np.concatenate([plus, minus])


def fluid_mass_zero(st: FluidStationary) -> np.ndarray:
    """Stationary atom at level zero: zeros on ascending phases, then zeta."""
    return np.concatenate([np.zeros(st.model.n_plus), st.zeta])


def fluid_density_grid(st: FluidStationary, xs) -> np.ndarray:
    """Density rows for many levels at once; shape (len(xs), n phases)."""
    return np.array([fluid_density(st, float(x)) for x in np.asarray(xs)])


def fluid_cdf_marginal(st: FluidStationary):
    """Vectorised level-marginal CDF x -> P(level <= x), atom included."""
    fm = st.model
    left = np.linalg.solve(-st.K.T, st.density_weights()).astype(float)
    right = 1.0 / fm.c_plus + st.Psi @ (1.0 / fm.c_minus_abs)
    base = st.mass_zero_total + float(left @ right)
    tail = numerics.matrix_exp_functional(st.K, left, right)

    def cdf(xs):
        return base - tail(np.maximum(np.asarray(xs, dtype=float), 0.0))

    return cdf


def total_probability(st: FluidStationary) -> float:
    """Atom mass plus the full integral of the density (resolvent form)."""
    fm = st.model
    weights = st.density_weights() @ np.linalg.inv(-st.K)
    integral = float(weights @ (1.0 / fm.c_plus + st.Psi @ (1.0 / fm.c_minus_abs)))
    return st.mass_zero_total + integral


def psi_star(fm: FluidModel, tol: float = 1e-10) -> np.ndarray:
    """First-passage matrix from below, via the level-negated model.

    Equals the first-passage-from-above matrix of :meth:`FluidModel.reversed`;
    strictly substochastic when the original model drifts downward.
    """
    aplus, bplusminus, cminusplus, dminus = _blocks(fm.reversed())
    return riccati_min_nonneg(aplus, bplusminus, cminusplus, dminus, tol=tol)


def k_star(fm: FluidModel, psi_star_matrix: np.ndarray) -> np.ndarray:
    """Companion matrix K* = Psi* Cp^{-1} Tpm + |Cm|^{-1} Tmm.

    Its spectrum lies in the closed left half-plane for recurrent models.
    """
    cp_inv = 1.0 / fm.c_plus
    cm_inv = 1.0 / fm.c_minus_abs
    return psi_star_matrix @ (cp_inv[:, None] * fm.Tpm) + cm_inv[:, None] * fm.Tmm
