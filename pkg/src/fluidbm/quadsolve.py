"""Quadratic matrix equations with half-plane / unit-circle spectral selection.

The central object is the unilateral quadratic

    A2 @ X @ X + A1 @ X + A0 = 0,

with coefficients acting from the left.  Its determinant polynomial
``det(A2 z^2 + A1 z + A0)`` has up to 2m finite roots; which solution of the
matrix equation one wants is prescribed by how many of those roots its
spectrum absorbs from each side of the imaginary axis (:class:`SpectralMode`).

Half-plane problems are converted to unit-disk problems with a Moebius
(Cayley) transform and solved by cyclic reduction, which converges
quadratically whenever the roots split across the unit circle with at most
one root of modulus one.  Mode bookkeeping:

* weakly stable      -- m-1 eigenvalues in the open left half-plane + one zero,
* strictly stable    -- m eigenvalues in the open left half-plane,
* strictly antistable-- m eigenvalues in the open right half-plane,
* weakly antistable  -- m-1 in the open right half-plane + one zero.

The algebraic Riccati equation of fluid queues is solved separately by a
Newton iteration (:func:`riccati_min_nonneg`), each step being a Sylvester
solve; started from zero it converges monotonically to the minimal
nonnegative solution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import numerics
from .errors import SolverError, SplittingError

#: Relative residual target for all equation solves.
RESIDUAL_RTOL = 1e-10

#: Relative tolerance classifying a det-polynomial root as zero.
ROOT_ZERO_RTOL = 1e-9

#: Relative tolerance classifying a solution eigenvalue as zero.
EIG_ZERO_RTOL = 1e-8

_CR_MAX_ITER = 200


@dataclass(frozen=True)
class QuadraticEq:
    """Coefficients of A2 @ X^2 + A1 @ X + A0 = 0 (left-acting)."""

    A2: np.ndarray
    A1: np.ndarray
    A0: np.ndarray

    def __post_init__(self):
        a2 = numerics.as_matrix(self.A2, square=True, name="A2")
        a1 = numerics.as_matrix(self.A1, square=True, name="A1")
        a0 = numerics.as_matrix(self.A0, square=True, name="A0")
        if not (a2.shape == a1.shape == a0.shape):
            raise ValueError(
                f"coefficient shapes differ: {a2.shape}, {a1.shape}, {a0.shape}"
            )
        object.__setattr__(self, "A2", a2)
        object.__setattr__(self, "A1", a1)
        object.__setattr__(self, "A0", a0)

    @classmethod
    def monic(cls, b, c) -> "QuadraticEq":
        """Equation X^2 + B X + C = 0."""
        b = numerics.as_matrix(b, square=True, name="B")
        return cls(A2=np.eye(b.shape[0]), A1=b, A0=c)

    @property
    def dim(self) -> int:
        return self.A2.shape[0]

    @property
    def max_coef(self) -> float:
        """Largest coefficient magnitude; scales every residual tolerance."""
        return max(
            numerics.max_abs(self.A2),
            numerics.max_abs(self.A1),
            numerics.max_abs(self.A0),
        )

    def is_monic(self, tol: float = 1e-12) -> bool:
        return numerics.max_abs(self.A2 - np.eye(self.dim)) <= tol

    def residual(self, x: np.ndarray) -> float:
        """Max-abs residual of the equation at ``x``."""
        return numerics.max_abs(self.A2 @ x @ x + self.A1 @ x + self.A0)

    def rel_residual(self, x: np.ndarray) -> float:
        return self.residual(x) / (1.0 + self.max_coef)

    def negate_variable(self) -> "QuadraticEq":
        """Equation satisfied by -X; roots are negated."""
        return QuadraticEq(A2=self.A2, A1=-self.A1, A0=self.A0)


class SpectralMode(enum.Enum):
    """Eigenvalue signature requested from :func:`solve_stable`."""

    WEAKLY_STABLE = "weakly-stable"
    STRICTLY_STABLE = "strictly-stable"
    STRICTLY_ANTISTABLE = "strictly-antistable"
    WEAKLY_ANTISTABLE = "weakly-antistable"

    def expected_counts(self, m: int) -> tuple[int, int, int]:
        """Required (negative, zero, positive) eigenvalue counts for dim m."""
        return {
            SpectralMode.WEAKLY_STABLE: (m - 1, 1, 0),
            SpectralMode.STRICTLY_STABLE: (m, 0, 0),
            SpectralMode.STRICTLY_ANTISTABLE: (0, 0, m),
            SpectralMode.WEAKLY_ANTISTABLE: (0, 1, m - 1),
        }[self]


@dataclass(frozen=True)
class SpectralSplit:
    """Roots of det(A2 z^2 + A1 z + A0) split across the imaginary axis.

    ``roots`` holds the finite roots sorted by increasing real part; a
    singular leading coefficient loses degree and the deficiency is recorded
    as ``n_inf`` roots at infinity.  ``n_neg + n_zero + n_pos + n_inf = 2m``.
    """

    roots: np.ndarray
    n_neg: int
    n_zero: int
    n_pos: int
    n_inf: int
    zero_tol: float = field(repr=False, default=0.0)

    def counts(self) -> tuple[int, int, int]:
        return (self.n_neg, self.n_zero, self.n_pos)


def _classify(values: np.ndarray, zero_tol: float) -> tuple[int, int, int]:
    n_zero = int(np.sum(np.abs(values) <= zero_tol))
    rest = values[np.abs(values) > zero_tol]
    n_neg = int(np.sum(rest.real < 0.0))
    n_pos = rest.size - n_neg
    return n_neg, n_zero, n_pos


def det_poly_roots(eq: QuadraticEq) -> SpectralSplit:
    """Roots of the determinant polynomial via the 2m x 2m companion pencil.

    The pencil is ``z * diag(I, A2) - [[0, I], [-A0, -A1]]``; its generalized
    eigenvalues are exactly the roots, with infinite eigenvalues marking the
    degree deficiency of a singular ``A2``.  A root counts as zero when its
    modulus is at most ``ROOT_ZERO_RTOL * (1 + max_coef)``.
    """
    m = eq.dim
    zero = np.zeros((m, m))
    eye = np.eye(m)
    lhs = np.block([[zero, eye], [-eq.A0, -eq.A1]])
    rhs = np.block([[eye, zero], [zero, eq.A2]])
    alpha, beta = scipy.linalg.eig(lhs, rhs, right=False, homogeneous_eigvals=True)
    scale = max(numerics.max_abs(lhs), 1.0)
    degenerate = (np.abs(alpha) <= 1e-12 * scale) & (np.abs(beta) <= 1e-12)
    if np.any(degenerate):
        raise SolverError(
            "companion pencil is singular; det(A2 z^2 + A1 z + A0) vanishes "
            "identically or is numerically degenerate"
        )
    finite_mask = np.abs(beta) > 1e-12
    finite = alpha[finite_mask] / beta[finite_mask]
    n_inf = int(np.sum(~finite_mask))
    order = np.lexsort((finite.imag, finite.real))
    finite = finite[order]
    zero_tol = ROOT_ZERO_RTOL * (1.0 + eq.max_coef)
    n_neg, n_zero, n_pos = _classify(finite, zero_tol)
    return SpectralSplit(
        roots=finite, n_neg=n_neg, n_zero=n_zero, n_pos=n_pos, n_inf=n_inf,
        zero_tol=zero_tol,
    )


def cayley_forward(eq: QuadraticEq) -> QuadraticEq:
    """Map X^2 + B X + C = 0 to the unit-disk equation H(Z) = 0.

    With W(Z) = (Z - I)(Z + I)^{-1} the substitution H(Z) = P(W(Z))(I + Z)^2
    yields coefficients ((I + B + C), -2(I - C), (I - B + C)).  A root theta
    of the original determinant polynomial maps to (1 + theta)/(1 - theta),
    so the closed left half-plane lands inside/on the unit circle; theta = 1
    maps to a root at infinity (singular leading coefficient), which is legal
    for cyclic reduction and counts as outside the disk.
    """
    if not eq.is_monic():
        raise ValueError("cayley_forward requires a monic equation (A2 = I)")
    eye = np.eye(eq.dim)
    b, c = eq.A1, eq.A0
    return QuadraticEq(A2=eye + b + c, A1=-2.0 * (eye - c), A0=eye - b + c)


def cayley_backward(eq: QuadraticEq) -> QuadraticEq:
    """Map X^2 + B X + C = 0 to the unit-disk equation Q(W) = 0.

    With Z(W) = (I + W)(I - W)^{-1} the substitution Q(W) = P(Z(W))(I - W)^2
    yields coefficients ((I - B + C), 2(I - C), (I + B + C)); a root theta
    maps to (theta - 1)/(theta + 1), so the open right half-plane lands
    strictly inside the unit circle.
    """
    if not eq.is_monic():
        raise ValueError("cayley_backward requires a monic equation (A2 = I)")
    eye = np.eye(eq.dim)
    b, c = eq.A1, eq.A0
    return QuadraticEq(A2=eye - b + c, A1=2.0 * (eye - c), A0=eye + b + c)


def _unit_circle_counts(eq: QuadraticEq) -> tuple[int, int, int]:
    """(inside, on, outside) root counts w.r.t. the unit circle.

    Infinite roots count as outside.  The on-circle band is
    ``ROOT_ZERO_RTOL * (1 + max_coef)`` wide.
    """
    split = det_poly_roots(eq)
    band = split.zero_tol
    mods = np.abs(split.roots)
    n_on = int(np.sum(np.abs(mods - 1.0) <= band))
    n_in = int(np.sum(mods < 1.0 - band))
    n_out = int(np.sum(mods > 1.0 + band)) + split.n_inf
    return n_in, n_on, n_out


def cyclic_reduction(
    eq: QuadraticEq, tol: float = RESIDUAL_RTOL, max_iter: int = _CR_MAX_ITER
) -> np.ndarray:
    """Minimal solution (spectral radius <= 1) of A2 X^2 + A1 X + A0 = 0.

    Requires the determinant-polynomial roots to split across the unit
    circle with at most one root of modulus exactly one; the iterate then
    converges quadratically to the solution whose spectrum consists of the
    m smallest-modulus roots.

    One step maps the coefficient triple (a0, a1, a2) to

        a0' = -a0 a1^{-1} a0,
        a2' = -a2 a1^{-1} a2,
        a1' = a1 - a0 a1^{-1} a2 - a2 a1^{-1} a0,

    squaring all roots, while the shifted middle coefficient
    ahat' = ahat - a2 a1^{-1} a0 accumulates the solution:
    X = -ahat^{-1} A0.  The iteration always runs to stagnation (quadratic
    convergence makes the extra steps cheap) and returns the best iterate,
    so results typically carry residuals near machine precision; an error is
    raised only when the best residual misses ``tol``, relative to
    1 + the largest coefficient magnitude, within ``max_iter`` steps.
    """
    m = eq.dim
    n_in, n_on, n_out = _unit_circle_counts(eq)
    if n_on > 1 or n_in > m or n_in + n_on < m:
        raise SplittingError(
            f"unit-circle splitting violated: {n_in} roots inside, {n_on} on, "
            f"{n_out} outside the circle for dimension {m}"
        )
    scale = 1.0 + eq.max_coef
    a0, a1, a2 = eq.A0.copy(), eq.A1.copy(), eq.A2.copy()
    ahat = eq.A1.copy()
    best_x = None
    best_res = np.inf
    prev_x = None
    for _ in range(max_iter):
        try:
            x = -np.linalg.solve(ahat, eq.A0)
        except np.linalg.LinAlgError:
            x = None
        if x is not None and np.all(np.isfinite(x)):
            res = eq.residual(x)
            if res < best_res:
                best_res, best_x = res, x
            if res <= 2e-16 * scale:
                break
            if prev_x is not None and numerics.max_abs(x - prev_x) <= 1e-15 * (
                1.0 + numerics.max_abs(x)
            ):
                break
            prev_x = x
        try:
            u = np.linalg.solve(a1, np.hstack([a0, a2]))
        except np.linalg.LinAlgError:
            break  # pivot collapsed after convergence; best iterate decides
        u0, u2 = u[:, :m], u[:, m:]
        a0_next = -a0 @ u0
        a2_next = -a2 @ u2
        a1_next = a1 - a0 @ u2 - a2 @ u0
        ahat = ahat - a2 @ u0
        a0, a1, a2 = a0_next, a1_next, a2_next
        if not (
            np.all(np.isfinite(a0))
            and np.all(np.isfinite(a1))
            and np.all(np.isfinite(a2))
            and np.all(np.isfinite(ahat))
        ):
            break
    if best_x is not None and best_res <= tol * scale:
        return best_x
    raise SolverError(
        f"cyclic reduction did not reach the residual target "
        f"{tol * scale:g} (best {best_res:g})"
    )


def eigenvalue_counts(x) -> tuple[int, int, int]:
    """(negative, zero, positive) real-part eigenvalue counts of a matrix.

    A value counts as zero when its modulus is at most
    ``EIG_ZERO_RTOL * (1 + max_abs(x))``; used to verify solution branches.
    """
    x = numerics.as_matrix(x, square=True, name="matrix")
    eig = numerics.eigenvalues(x)
    zero_tol = EIG_ZERO_RTOL * (1.0 + numerics.max_abs(x))
    return _classify(eig, zero_tol)


def _mode_compatible(mode: SpectralMode, split: SpectralSplit, m: int) -> bool:
    n_neg, n_zero, n_pos = split.counts()
    if mode is SpectralMode.WEAKLY_STABLE:
        return n_neg == m - 1 and n_zero >= 1
    if mode is SpectralMode.STRICTLY_STABLE:
        return n_neg == m
    if mode is SpectralMode.STRICTLY_ANTISTABLE:
        return n_pos == m
    return n_pos == m - 1 and n_zero >= 1


def solve_stable(eq: QuadraticEq, mode: SpectralMode) -> np.ndarray:
    """Solution of a monic quadratic whose spectrum matches ``mode`` exactly.

    Route: a Cayley transform moves the wanted half-plane roots inside the
    unit circle, cyclic reduction computes the minimal solution there, and
    the inverse transform recovers X:

    * weakly stable:       X = (Z0 - I)(Z0 + I)^{-1},  Z0 from cayley_forward,
    * strictly antistable: X = (I + W1)(I - W1)^{-1},  W1 from cayley_backward,
    * the two remaining modes negate the variable and reuse the above.

    The result is verified a posteriori: residual at most
    ``RESIDUAL_RTOL * (1 + max_coef)`` and eigenvalue counts exactly
    ``mode.expected_counts(m)``; any mismatch raises loudly rather than
    returning a wrong-branch solution.
    """
    if not eq.is_monic():
        raise ValueError("solve_stable requires a monic equation (A2 = I)")
    m = eq.dim
    split = det_poly_roots(eq)
    if not _mode_compatible(mode, split, m):
        raise SplittingError(
            f"root split (neg, zero, pos, inf) = "
            f"{split.counts() + (split.n_inf,)} is incompatible with mode "
            f"{mode.value} for dimension {m}"
        )
    eye = np.eye(m)
    if mode is SpectralMode.WEAKLY_STABLE:
        z0 = cyclic_reduction(cayley_forward(eq))
        x = np.linalg.solve((z0 + eye).T, (z0 - eye).T).T
    elif mode is SpectralMode.STRICTLY_ANTISTABLE:
        w1 = cyclic_reduction(cayley_backward(eq))
        x = np.linalg.solve((eye - w1).T, (eye + w1).T).T
    elif mode is SpectralMode.STRICTLY_STABLE:
        x = -solve_stable(eq.negate_variable(), SpectralMode.STRICTLY_ANTISTABLE)
    else:
        x = -solve_stable(eq.negate_variable(), SpectralMode.WEAKLY_STABLE)
        # counts were verified on the negated problem; re-verify below anyway
    res = eq.rel_residual(x)
    if res > RESIDUAL_RTOL:
        raise SolverError(
            f"solve_stable residual {res:g} exceeds {RESIDUAL_RTOL:g}"
        )
    counts = eigenvalue_counts(x)
    expected = mode.expected_counts(m)
    if counts != expected:
        raise SolverError(
            f"solution eigenvalue counts (neg, zero, pos) = {counts} do not "
            f"match mode {mode.value} expectation {expected}; borderline "
            f"tolerance or wrong branch"
        )
    return x


def riccati_min_nonneg(
    aplus, bplusminus, cminusplus, dminus, tol: float = RESIDUAL_RTOL,
    max_iter: int = 100,
) -> np.ndarray:
    """Minimal nonnegative solution Psi of the fluid-queue Riccati equation

        bplusminus + aplus @ Psi + Psi @ dminus + Psi @ cminusplus @ Psi = 0,

    where the blocks are (C+)^{-1} T++, (C+)^{-1} T+-, |C-|^{-1} T-+ and
    |C-|^{-1} T-- of a fluid model.  Newton's method from the zero matrix:
    each step solves the Sylvester equation

        (aplus + Psi cminusplus) Delta + Delta (dminus + cminusplus Psi) = -F(Psi)

    and is monotonically convergent for this equation class.  The result is
    substochastic, and stochastic within tolerance exactly when the model
    drifts weakly downward.
    """
    a = numerics.as_matrix(aplus, square=True, name="aplus")
    d = numerics.as_matrix(dminus, square=True, name="dminus")
    b = numerics.as_matrix(bplusminus, name="bplusminus")
    c = numerics.as_matrix(cminusplus, name="cminusplus")
    n_plus, n_minus = a.shape[0], d.shape[0]
    if b.shape != (n_plus, n_minus) or c.shape != (n_minus, n_plus):
        raise ValueError(
            f"block dimensions are inconsistent: aplus {a.shape}, "
            f"bplusminus {b.shape}, cminusplus {c.shape}, dminus {d.shape}"
        )
    scale = 1.0 + max(
        numerics.max_abs(a), numerics.max_abs(b),
        numerics.max_abs(c), numerics.max_abs(d),
    )
    # run past the nominal tolerance to stagnation: Newton doubles digits per
    # step, so the extra iterations are few and downstream quantities (null
    # vectors of censored generators) need Psi at machine precision
    x = np.zeros_like(b)
    fx = b.copy()
    best_x, best_res = x, numerics.max_abs(fx)
    for _ in range(max_iter):
        if best_res <= 1e-15 * scale:
            break
        try:
            delta = scipy.linalg.solve_sylvester(a + x @ c, d + c @ x, -fx)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"Riccati Newton step failed: {exc}") from exc
        x = x + delta
        if not np.all(np.isfinite(x)):
            raise SolverError("Riccati iteration diverged to non-finite values")
        fx = b + a @ x + x @ d + x @ c @ x
        res = numerics.max_abs(fx)
        if res < best_res:
            best_x, best_res = x, res
        elif best_res <= tol * scale:
            break
    if best_res > tol * scale:
        raise SolverError(
            f"Riccati Newton iteration did not converge in {max_iter} steps "
            f"(residual {best_res:g}, target {tol * scale:g})"
        )
    return best_x
