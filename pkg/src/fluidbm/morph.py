"""Numerical certification that fluid queues morph into MMBM.

This module measures, on parameter grids, the convergence statements the
rest of the package relies on:

* MGF convergence: the copy-averaged fluid semigroup approaches the MMBM
  semigroup, ``(gamma (x) I) expm((s C + T) t) (1 (x) I) -> expm((s D +
  (s^2/2) V + Q) t)`` as the switching rate grows;
* first-order expansions: with eps = 1/sqrt(lam),
  ``Psi_eps = I + eps Psi1 + O(eps^2)`` (same for the starred matrix) and
  ``K_eps = K0 + O(eps)`` (same for K*), ``zeta_eps / eps -> zeta1``;
* density convergence: the copy-marginal fluid density approaches
  ``2 zeta1 expm(K0 x) Theta^{-1}`` and the atom at zero vanishes.

Gaps are reported per grid point together with fitted log-log slopes
against eps (least squares; a slope needs at least three usable points).
All norms are max-abs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ModelError
from .fluid import fluid_stationary, k_star, psi_star, _density_raw as _fluid_density_raw
from .mmbm import MmbmStationary, mmbm_stationary, _density_raw as _mmbm_density_raw
from .model import MmbmModel, fluidize


def laplace_exponent_mmbm(model: MmbmModel, s: float) -> np.ndarray:
    """MMBM Laplace matrix exponent s D + (s^2/2) V + Q."""
    s = float(s)
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    return s * model.D + 0.5 * s * s * model.V + model.Q


def laplace_exponent_fluid(model: MmbmModel, lam: float, s: float) -> np.ndarray:
    """Fluid Laplace matrix exponent s C + T of the two-copy approximation."""
    s = float(s)
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    fm = fluidize(model, lam)
    return s * np.diag(fm.rates) + fm.T


def mgf_gap(model: MmbmModel, lam: float, s: float, t: float) -> float:
    """Max-abs gap between the copy-averaged fluid MGF and the MMBM MGF at t.

    The contraction averages the two copies with gamma = (1/2, 1/2) on the
    left and sums them on the right; at s = 0 the copies marginalise exactly
    and the gap is at roundoff level.
    """
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    m = model.m
    big = numerics.expm(laplace_exponent_fluid(model, lam, s) * t)
    folded = 0.5 * (
        big[:m, :m] + big[:m, m:] + big[m:, :m] + big[m:, m:]
    )
    small = numerics.expm(laplace_exponent_mmbm(model, s) * t)
    return numerics.max_abs(folded - small)


def corner_block(s_matrix, m1: int, t: float) -> np.ndarray:
    """North-west m1 x m1 block of expm(S t).

    Satisfies the renewal-type integral identity

        H(t) = expm(S11 t)
             + int_0^t int_v^t expm(S11 (t-u)) S12 expm(S22 (u-v)) S21 H(v) du dv,

    which tests verify by two-dimensional quadrature.
    """
    s = numerics.as_matrix(s_matrix, square=True, name="S")
    n = s.shape[0]
    if not 0 < m1 < n:
        raise ValueError(f"m1 must satisfy 0 < m1 < {n}, got {m1}")
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return numerics.expm(s * t)[:m1, :m1]


def corner_block_residual(
    s_matrix, m1: int, t: float, panels: int = 4, order: int = 10
) -> float:
    """Max-abs residual of the corner-block integral identity at time t.

    Both nested integrals are evaluated by composite Gauss-Legendre
    quadrature, independently of the single full-matrix exponential that
    :func:`corner_block` takes, so this doubles as an oracle for it.
    """
    s = numerics.as_matrix(s_matrix, square=True, name="S")
    n = s.shape[0]
    if not 0 < m1 < n:
        raise ValueError(f"m1 must satisfy 0 < m1 < {n}, got {m1}")
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    s11, s12 = s[:m1, :m1], s[:m1, m1:]
    s21, s22 = s[m1:, :m1], s[m1:, m1:]

    def outer(v):
        inner = numerics.quadrature(
            lambda u: (numerics.expm(s11 * (t - u)) @ s12
                       @ numerics.expm(s22 * (u - v))).ravel(),
            v, t, panels, order=order,
        ).reshape(m1, n - m1)
        return (inner @ s21 @ corner_block(s, m1, v)).ravel()

    integral = numerics.quadrature(outer, 0.0, t, panels, order=order)
    lhs = corner_block(s, m1, t)
    rhs = numerics.expm(s11 * t) + integral.reshape(m1, m1)
    return numerics.max_abs(lhs - rhs)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares slope of log(gap) against log(eps)."""

    slope: float
    residual: float
    n_points: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-point gap metrics over a parameter grid, with fitted slopes.

    ``param_name`` is "lam" or "eps"; ``grid`` is strictly increasing;
    ``eps`` holds the equivalent eps = 1/sqrt(lam) values used for slope
    fits.  ``metrics`` maps metric names to nonnegative gap arrays, and
    ``slopes`` maps the same names to a :class:`SlopeFit` or None when fewer
    than three usable points exist.
    """

    param_name: str
    grid: np.ndarray
    eps: np.ndarray
    metrics: dict
    slopes: dict

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        eps = np.asarray(self.eps, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a nonempty 1-d array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        for name, vals in self.metrics.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != grid.shape:
                raise ValueError(f"metric {name} length differs from grid")
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError(f"metric {name} must be finite and nonnegative")
            self.metrics[name] = vals
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "eps", eps)

    def write_csv(self, path) -> None:
        """One row per grid point per metric: metric, param, value columns."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", self.param_name, "eps", "value"])
            for name in sorted(self.metrics):
                for p, e, v in zip(self.grid, self.eps, self.metrics[name]):
                    writer.writerow([name, f"{p:.17g}", f"{e:.17g}", f"{v:.17g}"])

    def summary_dict(self) -> dict:
        return {
            "param_name": self.param_name,
            "grid": self.grid.tolist(),
            "eps": self.eps.tolist(),
            "metrics": {k: v.tolist() for k, v in sorted(self.metrics.items())},
            "slopes": {
                k: None if fit is None else {
                    "slope": fit.slope,
                    "residual": fit.residual,
                    "n_points": fit.n_points,
                }
                for k, fit in sorted(self.slopes.items())
            },
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


def fit_slope(eps: np.ndarray, gaps: np.ndarray, floor: float = 1e-14) -> SlopeFit | None:
    """Fit log(gap) ~ slope * log(eps) + c, ignoring plateaued points.

    Points with gap <= ``floor`` (machine-precision plateaus, including exact
    zeros) are dropped; None is returned when fewer than three remain.
    """
    eps = np.asarray(eps, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    keep = gaps > floor
    if int(keep.sum()) < 3:
        return None
    lx = np.log(eps[keep])
    ly = np.log(gaps[keep])
    coeffs, ss = np.polyfit(lx, ly, 1, full=True)[:2]
    resid = float(np.sqrt(ss[0] / lx.size)) if ss.size else 0.0
    return SlopeFit(slope=float(coeffs[0]), residual=resid, n_points=int(keep.sum()))


def marginal_over_copies(vec: np.ndarray) -> np.ndarray:
    """Contract a two-copy phase vector: the (1 (x) I) summation."""
    vec = np.asarray(vec, dtype=float)
    if vec.size % 2:
        raise ValueError("two-copy vector must have even length")
    m = vec.size // 2
    return vec[:m] + vec[m:]


def default_x_grid(st: MmbmStationary, points: int = 64) -> np.ndarray:
    """Log-spaced levels from 1e-3 to 20 / |spectral abscissa of K0|."""
    abscissa = float(np.max(numerics.eigenvalues(st.K0).real))
    x_max = 20.0 / abs(abscissa)
    return np.geomspace(1e-3, x_max, points)


def expansion_report(model: MmbmModel, eps_list) -> ConvergenceReport:
    """Measure the first-order expansions along a grid of eps values.

    For each eps (with lam = 1/eps^2) the fluid quantities are solved on the
    two-copy model and compared against the limit bundle:
    ``psi_gap = |Psi_eps - I - eps Psi1|`` (order eps^2), ``psi_star_gap``
    likewise, ``k_gap = |K_eps - K0|`` and ``k_star_gap`` (order eps), and
    ``zeta_gap = |zeta_eps / eps - zeta1|`` (vanishing).
    """
    eps = np.sort(np.asarray(list(eps_list), dtype=float))
    if eps.size == 0:
        raise ModelError("eps grid must be nonempty")
    if np.any(eps <= 0):
        raise ModelError("eps values must be positive")
    limit = mmbm_stationary(model)
    eye = np.eye(model.m)
    gaps = {name: np.empty(eps.size) for name in
            ("psi_gap", "psi_star_gap", "k_gap", "k_star_gap", "zeta_gap")}
    for i, e in enumerate(eps):
        fm = fluidize(model, 1.0 / (e * e))
        st = fluid_stationary(fm)
        psi_st = psi_star(fm)
        gaps["psi_gap"][i] = numerics.max_abs(st.Psi - eye - e * limit.Psi1)
        gaps["psi_star_gap"][i] = numerics.max_abs(psi_st - eye - e * limit.Psi1Star)
        gaps["k_gap"][i] = numerics.max_abs(st.K - limit.K0)
        gaps["k_star_gap"][i] = numerics.max_abs(k_star(fm, psi_st) - limit.K0Star)
        gaps["zeta_gap"][i] = numerics.max_abs(st.zeta / e - limit.zeta1)
    slopes = {name: fit_slope(eps, vals) for name, vals in gaps.items()}
    return ConvergenceReport(
        param_name="eps", grid=eps, eps=eps, metrics=gaps, slopes=slopes
    )


def density_convergence(
    model: MmbmModel, lam_list, x_grid=None
) -> ConvergenceReport:
    """Measure density and atom convergence along a grid of switching rates.

    Per lam: ``density_sup_gap`` is the sup over the level grid of the
    max-abs difference between the copy-marginal fluid density and the limit
    density, and ``mass_zero_gap`` is the max-abs of the copy-marginal atom
    at zero.  Slopes are fitted against eps = 1/sqrt(lam).
    """
    lams = np.sort(np.asarray(list(lam_list), dtype=float))
    if lams.size == 0:
        raise ModelError("lam grid must be nonempty")
    limit = mmbm_stationary(model)
    if x_grid is None:
        x_grid = default_x_grid(limit)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0):
        raise ModelError("x grid must be strictly positive")
    eps = 1.0 / np.sqrt(lams)
    sup_gaps = np.empty(lams.size)
    mass_gaps = np.empty(lams.size)
    for i, lam in enumerate(lams):
        st = fluid_stationary(fluidize(model, lam))
        sup = 0.0
        for x in x_grid:
            fluid_marginal = marginal_over_copies(_fluid_density_raw(st, x))
            sup = max(sup, numerics.max_abs(fluid_marginal - _mmbm_density_raw(limit, x)))
        sup_gaps[i] = sup
        mass_gaps[i] = numerics.max_abs(st.zeta)
    metrics = {"density_sup_gap": sup_gaps, "mass_zero_gap": mass_gaps}
    slopes = {name: fit_slope(eps, vals) for name, vals in metrics.items()}
    return ConvergenceReport(
        param_name="lam", grid=lams, eps=eps, metrics=metrics, slopes=slopes
    )


def mgf_report(
    model: MmbmModel, lam_list, s: float = 0.5, t: float = 1.0
) -> ConvergenceReport:
    """MGF gaps over a grid of switching rates at fixed transform point (s, t)."""
    lams = np.sort(np.asarray(list(lam_list), dtype=float))
    if lams.size == 0:
        raise ModelError("lam grid must be nonempty")
    eps = 1.0 / np.sqrt(lams)
    gaps = np.array([mgf_gap(model, lam, s, t) for lam in lams])
    metrics = {"mgf_gap": gaps}
    slopes = {"mgf_gap": fit_slope(eps, gaps)}
    return ConvergenceReport(
        param_name="lam", grid=lams, eps=eps, metrics=metrics, slopes=slopes
    )
