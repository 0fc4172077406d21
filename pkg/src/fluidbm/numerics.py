"""Dense small-matrix kernels shared by all solvers.

Matrices are carried as ``numpy.ndarray`` (row-major, float64).  Every public
entry point validates its input through :func:`as_matrix`, which rejects
non-finite entries.  The norm used throughout the package is the maximum
absolute entry, so all tolerances are dimension-free.

The heavy lifting is delegated to LAPACK via numpy/scipy: the matrix
exponential uses scaling-and-squaring with a Pade approximant
(``scipy.linalg.expm``), eigenvalues use Hessenberg reduction plus shifted QR
(``numpy.linalg.eigvals``), and null vectors use a rank-revealing SVD.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import SolverError

#: Relative threshold below which a singular value counts as zero.
NULL_SPACE_RTOL = 1e-10


def as_matrix(a, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-d float array, rejecting NaN/Inf entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce ``v`` to a 1-d float array, rejecting NaN/Inf entries."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def max_abs(a) -> float:
    """Maximum-absolute-entry norm (the norm used for every tolerance here)."""
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def expm(a) -> np.ndarray:
    """Matrix exponential e^A of a square matrix.

    Scaling-and-squaring with a fixed-order Pade approximant; near machine
    precision for well-scaled inputs.  For a generator the result is a
    stochastic matrix.
    """
    arr = as_matrix(a, square=True, name="expm argument")
    return scipy.linalg.expm(arr)


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues of a square matrix, as a complex array.

    No ordering is guaranteed; callers sort as needed.  Raises
    :class:`SolverError` if the QR iteration fails to converge.
    """
    arr = as_matrix(a, square=True, name="eigenvalue argument")
    try:
        return np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigenvalue iteration did not converge: {exc}") from exc


def left_null_vector(
    a, rtol: float = NULL_SPACE_RTOL, scale: float | None = None
) -> np.ndarray:
    """Row vector v with v @ A = 0, for A with a one-dimensional left null space.

    The null space is detected with a singular value decomposition: singular
    values at or below ``rtol * scale`` count as zero (``scale`` defaults to
    ``max_abs(A)``; callers whose matrix is itself a small residual pass the
    scale of the data it was built from), and exactly one must qualify.  With
    A = U S V^T the last column of U spans the left null space.  The result
    is scaled so that ``v.sum() == 1``; for an irreducible generator this is
    the stationary distribution.

    Raises
    ------
    ValueError
        If the detected null-space dimension is not one, or the vector cannot
        be normalised to unit sum.
    """
    arr = as_matrix(a, square=True, name="null-vector argument")
    u, s, _ = np.linalg.svd(arr)
    thr = rtol * (max_abs(arr) if scale is None else max(scale, max_abs(arr)))
    null_dim = int(np.sum(s <= thr))
    if null_dim != 1:
        raise ValueError(
            f"left null space has dimension {null_dim}, expected 1 "
            f"(singular values {s}, threshold {thr:g})"
        )
    v = u[:, -1]
    total = v.sum()
    if abs(total) <= 1e-12 * np.abs(v).max():
        raise ValueError("left null vector has (near-)zero sum; cannot normalise")
    return v / total


def matrix_exp_functional(k, left, right, validate: bool = True):
    """Vectorised x -> left @ expm(K x) @ right for many x at once.

    Diagonalises K once, so evaluating at n points costs O(n m) instead of n
    matrix exponentials.  When ``validate`` is set the eigenform is compared
    against ``expm`` at a few probe points and the slow exact path is used as
    a fallback for defective or ill-conditioned K.
    """
    k = as_matrix(k, square=True, name="K")
    left = as_vector(left, name="left")
    right = as_vector(right, name="right")

    def exact(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return np.array([left @ scipy.linalg.expm(k * x) @ right for x in xs])

    try:
        lam, u = np.linalg.eig(k)
        coeffs = (left @ u) * np.linalg.solve(u, right)
    except np.linalg.LinAlgError:
        return exact

    def fast(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return np.real(np.exp(np.outer(xs, lam)) @ coeffs)

    if validate:
        probes = np.array([0.0, 0.37, 1.0, 5.3])
        ref = exact(probes)
        scale = 1.0 + float(np.max(np.abs(ref)))
        if np.max(np.abs(fast(probes) - ref)) > 1e-11 * scale:
            return exact
    return fast


def quadrature(f, a: float, b: float, n: int, order: int = 10) -> np.ndarray:
    """Composite Gauss-Legendre integral of a vector-valued function on [a, b].

    ``n`` panels of a fixed ``order``-point Gauss-Legendre rule; exact for
    polynomials of degree < 2*order on each panel, spectrally accurate for
    analytic integrands.

    Parameters
    ----------
    f:
        Callable mapping a float to an array (any fixed shape).
    a, b:
        Integration limits, requires a < b.
    n:
        Number of equal panels, requires n >= 1.
    """
    if not a < b:
        raise ValueError(f"quadrature requires a < b, got [{a}, {b}]")
    if n <= 0:
        raise ValueError(f"quadrature requires a positive panel count, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    total = None
    for left, right in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (left + right)
        half = 0.5 * (right - left)
        for x, w in zip(nodes, weights):
            val = half * w * np.asarray(f(mid + half * x), dtype=float)
            total = val if total is None else total + val
    return total
