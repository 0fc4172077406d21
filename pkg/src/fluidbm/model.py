"""Model definitions: Markov-modulated Brownian motion and fluid queues.

An :class:`MmbmModel` is a phase process with generator ``Q`` plus a
per-phase drift ``mu`` and variance ``sigma2``.  A :class:`FluidModel` is a
partitioned generator ``T`` with strictly signed fluid rates, ascending
phases first.  :func:`fluidize` builds the two-copy fluid approximation of an
MMBM: each phase is duplicated, the copies swap at rate ``lam``, and the
copies move at rates ``mu + sqrt(lam)*sigma`` and ``mu - sqrt(lam)*sigma``.

All model objects are immutable after construction (arrays are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.csgraph

from . import numerics
from .errors import AdmissibilityError, ModelError

#: Absolute tolerance on generator row sums; rows within it are re-normalised
#: by adjusting the diagonal (model files carry rounded entries).
ROW_SUM_TOL = 1e-10

_MODEL_KEYS = {"m", "Q", "mu", "sigma2"}
_FLUID_KEYS = {"T", "c"}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _check_generator(q: np.ndarray, name: str = "Q") -> np.ndarray:
    """Validate and re-normalise a CTMC generator (row sums forced to 0)."""
    q = numerics.as_matrix(q, square=True, name=name)
    n = q.shape[0]
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0):
        raise ModelError(f"{name} has negative off-diagonal entries")
    row_sums = q.sum(axis=1)
    if numerics.max_abs(row_sums) > ROW_SUM_TOL:
        raise ModelError(
            f"{name} row sums exceed tolerance {ROW_SUM_TOL:g}: {row_sums}"
        )
    fixed = q.copy()
    fixed[np.arange(n), np.arange(n)] -= row_sums
    return fixed


def _is_irreducible(q: np.ndarray) -> bool:
    """Strong connectivity of the nonzero pattern (exact-zero threshold)."""
    n = q.shape[0]
    if n == 1:
        return True
    pattern = (q != 0.0).astype(np.int8)
    np.fill_diagonal(pattern, 0)
    n_comp, _ = scipy.sparse.csgraph.connected_components(
        pattern, directed=True, connection="strong"
    )
    return n_comp == 1


def stationary_phase_dist(q) -> np.ndarray:
    """Stationary row vector alpha of an irreducible generator.

    Satisfies alpha >= 0, alpha @ Q = 0 and alpha.sum() = 1; unique by
    irreducibility.
    """
    q = _check_generator(q)
    if not _is_irreducible(q):
        raise ModelError("generator is reducible; stationary vector is not unique")
    alpha = numerics.left_null_vector(q)
    # roundoff can leave harmless -1e-17 entries
    return np.clip(alpha, 0.0, None) / np.clip(alpha, 0.0, None).sum()


@dataclass(frozen=True)
class MmbmModel:
    """Markov-modulated Brownian motion {Y(t), kappa(t)}.

    Parameters
    ----------
    Q:
        Irreducible m x m generator of the phase process.
    mu:
        Per-phase drifts (level/time).
    sigma2:
        Per-phase variances (level^2/time), all strictly positive.
    """

    Q: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = _check_generator(np.asarray(self.Q, dtype=float))
        mu = numerics.as_vector(self.mu, name="mu")
        sigma2 = numerics.as_vector(self.sigma2, name="sigma2")
        m = q.shape[0]
        if mu.shape != (m,) or sigma2.shape != (m,):
            raise ModelError(
                f"dimension mismatch: Q is {m}x{m}, mu has shape {mu.shape}, "
                f"sigma2 has shape {sigma2.shape}"
            )
        if np.any(sigma2 <= 0.0):
            raise ModelError("all variances sigma2 must be strictly positive")
        if not _is_irreducible(q):
            raise ModelError("Q must be irreducible")
        object.__setattr__(self, "Q", _freeze(q))
        object.__setattr__(self, "mu", _freeze(mu))
        object.__setattr__(self, "sigma2", _freeze(sigma2))
        object.__setattr__(self, "alpha", _freeze(stationary_phase_dist(q)))

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def D(self) -> np.ndarray:
        """diag(mu)."""
        return np.diag(self.mu)

    @property
    def V(self) -> np.ndarray:
        """diag(sigma2)."""
        return np.diag(self.sigma2)

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.sigma2)

    @property
    def Theta(self) -> np.ndarray:
        """diag(sigma), the square root of V."""
        return np.diag(self.sigma)


def mean_drift(model: MmbmModel) -> float:
    """Mean stationary drift alpha @ mu; negative iff positive recurrent."""
    return float(model.alpha @ model.mu)


@dataclass(frozen=True)
class FluidModel:
    """Fluid queue with ascending phases first and strictly signed rates.

    ``T`` is an irreducible generator over n_plus + n_minus phases;
    ``c_plus > 0`` are the rates of the first n_plus phases and
    ``c_minus < 0`` the rates of the remaining ones.
    """

    T: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray

    def __post_init__(self):
        t = _check_generator(np.asarray(self.T, dtype=float), name="T")
        c_plus = numerics.as_vector(self.c_plus, name="c_plus")
        c_minus = numerics.as_vector(self.c_minus, name="c_minus")
        if c_plus.size == 0 or c_minus.size == 0:
            raise ModelError("both ascending and descending phases are required")
        if t.shape[0] != c_plus.size + c_minus.size:
            raise ModelError(
                f"T is {t.shape[0]}x{t.shape[0]} but rates cover "
                f"{c_plus.size}+{c_minus.size} phases"
            )
        if np.any(c_plus <= 0.0):
            raise ModelError("ascending rates c_plus must be strictly positive")
        if np.any(c_minus >= 0.0):
            raise ModelError("descending rates c_minus must be strictly negative")
        if not _is_irreducible(t):
            raise ModelError("T must be irreducible")
        object.__setattr__(self, "T", _freeze(t))
        object.__setattr__(self, "c_plus", _freeze(c_plus))
        object.__setattr__(self, "c_minus", _freeze(c_minus))

    @property
    def n_plus(self) -> int:
        return self.c_plus.size

    @property
    def n_minus(self) -> int:
        return self.c_minus.size

    @property
    def n(self) -> int:
        return self.T.shape[0]

    @property
    def rates(self) -> np.ndarray:
        """All fluid rates, ascending block then descending block."""
        return np.concatenate([self.c_plus, self.c_minus])

    @property
    def Tpp(self) -> np.ndarray:
        return self.T[: self.n_plus, : self.n_plus]

    @property
    def Tpm(self) -> np.ndarray:
        return self.T[: self.n_plus, self.n_plus :]

    @property
    def Tmp(self) -> np.ndarray:
        return self.T[self.n_plus :, : self.n_plus]

    @property
    def Tmm(self) -> np.ndarray:
        return self.T[self.n_plus :, self.n_plus :]

    @property
    def c_minus_abs(self) -> np.ndarray:
        return -self.c_minus

    def stationary_dist(self) -> np.ndarray:
        """Stationary distribution of the phase generator T."""
        return stationary_phase_dist(self.T)

    def mean_drift(self) -> float:
        """Stationary mean rate sum_i pi_i c_i."""
        return float(self.stationary_dist() @ self.rates)

    def reversed(self) -> "FluidModel":
        """Level-negated model: descending phases become ascending ones.

        First passage from below in the original model is first passage from
        above in the reversed one.
        """
        t = np.block([[self.Tmm, self.Tmp], [self.Tpm, self.Tpp]])
        return FluidModel(T=t, c_plus=self.c_minus_abs, c_minus=-self.c_plus)


def fluidize(model: MmbmModel, lam: float) -> FluidModel:
    """Two-copy fluid approximation of an MMBM at switching rate ``lam``.

    The 2m phases are (copy 1, phase i) for i = 1..m followed by
    (copy 2, phase i); copy 1 ascends at mu + sqrt(lam)*sigma and copy 2
    descends at mu - sqrt(lam)*sigma.

    Raises
    ------
    AdmissibilityError
        Unless sqrt(lam)*sigma_i > |mu_i| for every phase, which is what
        makes the sign partition strict.
    """
    lam = float(lam)
    if lam <= 0.0:
        raise AdmissibilityError(f"lam must be positive, got {lam}")
    # compare in squares: exact for representable inputs, so the boundary
    # lam * sigma_i^2 == mu_i^2 is excluded reliably
    if not np.all(lam * model.sigma2 > model.mu**2):
        raise AdmissibilityError(
            f"lam={lam:g} is below the admissibility threshold: "
            f"lam*sigma^2={lam * model.sigma2} must strictly exceed "
            f"mu^2={model.mu**2}"
        )
    deviation = np.sqrt(lam * model.sigma2)
    m = model.m
    eye = np.eye(m)
    t = np.block(
        [[model.Q - lam * eye, lam * eye], [lam * eye, model.Q - lam * eye]]
    )
    return FluidModel(
        T=t,
        c_plus=model.mu + deviation,
        c_minus=model.mu - deviation,
    )


def load_model(text: str) -> MmbmModel:
    """Parse and validate an MMBM model file.

    The file is a JSON document ``{"m": int, "Q": [[...]], "mu": [...],
    "sigma2": [...]}`` with ``Q`` row-major.  Unknown keys are rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError("model file must contain a JSON object")
    unknown = set(doc) - _MODEL_KEYS
    if unknown:
        raise ModelError(f"unknown keys in model file: {sorted(unknown)}")
    missing = _MODEL_KEYS - set(doc)
    if missing:
        raise ModelError(f"missing keys in model file: {sorted(missing)}")
    try:
        m = int(doc["m"])
        q = np.asarray(doc["Q"], dtype=float)
        mu = np.asarray(doc["mu"], dtype=float)
        sigma2 = np.asarray(doc["sigma2"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"malformed model file entries: {exc}") from exc
    if q.shape != (m, m):
        raise ModelError(f"Q must be {m}x{m}, got shape {q.shape}")
    if mu.shape != (m,) or sigma2.shape != (m,):
        raise ModelError("mu and sigma2 must be length-m vectors")
    return MmbmModel(Q=q, mu=mu, sigma2=sigma2)


def load_fluid_model(text: str) -> FluidModel:
    """Parse and validate a fluid model file.

    The file is a JSON document ``{"T": [[...]], "c": [...]}``: a generator
    plus one nonzero rate per phase.  Phases are reordered internally so the
    ascending block comes first, preserving relative order within each block.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"fluid model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError("fluid model file must contain a JSON object")
    unknown = set(doc) - _FLUID_KEYS
    if unknown:
        raise ModelError(f"unknown keys in fluid model file: {sorted(unknown)}")
    missing = _FLUID_KEYS - set(doc)
    if missing:
        raise ModelError(f"missing keys in fluid model file: {sorted(missing)}")
    try:
        t = numerics.as_matrix(doc["T"], square=True, name="T")
        c = numerics.as_vector(doc["c"], name="c")
    except ValueError as exc:
        raise ModelError(str(exc)) from exc
    if t.shape[0] != c.size:
        raise ModelError(f"T is {t.shape[0]}x{t.shape[0]} but c has {c.size} rates")
    if np.any(c == 0.0):
        raise ModelError("zero fluid rates are not supported")
    order = np.concatenate([np.flatnonzero(c > 0), np.flatnonzero(c < 0)])
    t = t[np.ix_(order, order)]
    c = c[order]
    return FluidModel(T=t, c_plus=c[c > 0], c_minus=c[c < 0])


def is_fluid_model_file(text: str) -> bool:
    """True when the JSON document carries fluid-model keys ("T"/"c")."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return False
    return isinstance(doc, dict) and "T" in doc
