"""Monte Carlo oracle: reflected MMBM and fluid paths, stationary estimates.

Deliberately independent of the matrix-analytic solvers so it can arbitrate
them.  Two simulators are provided:

* :func:`simulate_mmbm`: Euler-Skorokhod scheme.  Phase sojourns are drawn
  exactly (exponential); within a sojourn in phase i the level evolves on a
  global time grid of step ``dt`` as ``y <- max(0, y + mu_i h + sigma_i
  sqrt(h) xi)``, where sub-steps ``h <= dt`` shrink only where a sojourn
  boundary cuts a grid cell.  Runs of equal steps are advanced in vectorised
  blocks through the running-minimum form of the reflection recursion,
  ``y_n = W_n + max(y_0, -min_{k<=n} W_k)`` with ``W`` the increment prefix
  sum, which reproduces the scalar recursion exactly.

* :func:`simulate_fluid`: exact event-driven simulation; levels are
  piecewise linear between exponential jump epochs and the reflection at
  zero is applied analytically, so there is no discretisation error.

Randomness comes from numpy's counter-based Philox generator with default
seed 0x5EED; replication r uses ``Philox(seed + r)``, so output is
reproducible regardless of scheduling, and replications merge by sorting.
Samples are collected at fixed intervals after a burn-in fraction.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import FluidModel, MmbmModel

DEFAULT_SEED = 0x5EED

# 64k-element blocks keep the scan pipeline inside the cache hierarchy
_CHUNK = 1 << 16
_BLOCK = 1 << 16


@dataclass(frozen=True)
class EmpiricalCdf:
    """Stationary samples of a reflected process, sorted per phase."""

    levels_by_phase: tuple
    n_samples: int
    burn_in: float
    seed: int

    def __post_init__(self):
        frozen = []
        total = 0
        for levels in self.levels_by_phase:
            arr = np.sort(np.asarray(levels, dtype=float))
            if arr.size and arr[0] < 0.0:
                raise ValueError("reflected-process samples must be nonnegative")
            arr.flags.writeable = False
            frozen.append(arr)
            total += arr.size
        if total != self.n_samples:
            raise ValueError(
                f"per-phase counts sum to {total}, expected {self.n_samples}"
            )
        object.__setattr__(self, "levels_by_phase", tuple(frozen))

    @property
    def n_phases(self) -> int:
        return len(self.levels_by_phase)

    def pooled(self) -> np.ndarray:
        """All sample levels merged and sorted."""
        return np.sort(np.concatenate(self.levels_by_phase))

    def level_cdf(self, x: float) -> float:
        """Empirical P(level <= x) over all phases."""
        pooled = self.pooled()
        return float(np.searchsorted(pooled, x, side="right")) / self.n_samples

    def phase_frequencies(self) -> np.ndarray:
        """Fraction of samples observed in each phase."""
        counts = np.array([arr.size for arr in self.levels_by_phase], dtype=float)
        return counts / self.n_samples

    def mass_at_zero(self) -> float:
        """Fraction of samples exactly at the boundary."""
        at_zero = sum(int(np.searchsorted(arr, 0.0, side="right"))
                      for arr in self.levels_by_phase)
        return at_zero / self.n_samples

    def write_csv(self, path) -> None:
        """Dump rows (phase, level), phases in order, levels ascending."""
        with open(path, "w", newline="") as fh:
            fh.write("phase,level\n")
            for phase, arr in enumerate(self.levels_by_phase):
                for level in arr:
                    fh.write(f"{phase},{level:.17g}\n")


def ks_distance(emp: EmpiricalCdf, analytic_cdf) -> float:
    """Kolmogorov-Smirnov distance on the level marginal.

    ``analytic_cdf`` maps an array of levels to either marginal CDF values
    or per-phase CDF values (summed here).  The sup runs over the sample
    points, comparing the right-continuous empirical CDF with the analytic
    one, which stays meaningful when the law carries an atom at zero.
    """
    if emp.n_samples == 0:
        raise ValueError("empirical distribution has no samples")
    pooled = emp.pooled()
    vals = np.asarray(analytic_cdf(pooled), dtype=float)
    if vals.ndim == 2:
        vals = vals.sum(axis=1)
    n = pooled.size
    emp_at = np.searchsorted(pooled, pooled, side="right") / n
    return float(np.max(np.abs(emp_at - vals)))


def _merge(parts, n_phases: int, burn_in: float, seed: int) -> EmpiricalCdf:
    by_phase = []
    total = 0
    for p in range(n_phases):
        arrs = [part[p] for part in parts if len(part[p])]
        merged = np.sort(np.concatenate(arrs)) if arrs else np.empty(0)
        total += merged.size
        by_phase.append(merged)
    return EmpiricalCdf(
        levels_by_phase=tuple(by_phase), n_samples=total, burn_in=burn_in,
        seed=seed,
    )


def _run_replications(worker, replications: int, n_phases: int,
                      burn_in: float, seed: int) -> EmpiricalCdf:
    if replications == 1:
        parts = [worker(0)]
    else:
        workers = min(replications, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(worker, range(replications)))
    return _merge(parts, n_phases, burn_in, seed)


def simulate_mmbm(
    model: MmbmModel,
    horizon: float,
    dt: float,
    seed: int = DEFAULT_SEED,
    burn_in: float = 0.1,
    sample_interval: float | None = None,
    replications: int = 1,
) -> EmpiricalCdf:
    """Euler-Skorokhod samples of the stationary reflected MMBM level.

    ``horizon`` is total simulated time, split evenly across replications;
    samples are taken every ``sample_interval`` time units (rounded to a
    multiple of ``dt``, default 100 dt) after discarding the leading
    ``burn_in`` fraction of each replication.  Identical inputs give
    identical output.
    """
    if dt <= 0.0 or not np.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    if horizon <= 0.0 or horizon < 10 * dt:
        raise ValueError(f"horizon {horizon} is too short for dt {dt}")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError(f"burn_in must be in [0, 1), got {burn_in}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if sample_interval is None:
        sample_interval = 100.0 * dt
    k_int = max(1, int(round(sample_interval / dt)))

    mu = model.mu
    sigma = model.sigma
    q_out = -np.diag(model.Q)
    jump_cum = np.zeros((model.m, model.m))
    for i in range(model.m):
        if q_out[i] > 0:
            probs = model.Q[i].copy()
            probs[i] = 0.0
            jump_cum[i] = np.cumsum(probs / q_out[i])

    horizon_r = horizon / replications
    n_steps = int(round(horizon_r / dt))
    burn_steps = int(np.ceil(burn_in * n_steps))
    first_sample = (burn_steps // k_int + 1) * k_int

    def one(rep: int):
        rng = np.random.Generator(np.random.Philox(seed + rep))
        samples = [[] for _ in range(model.m)]
        phase = int(np.searchsorted(np.cumsum(model.alpha), rng.random()))
        phase = min(phase, model.m - 1)
        y = 0.0
        t = 0.0
        g = 0  # index of the last completed grid point
        while g < n_steps:
            if q_out[phase] > 0.0:
                sojourn_end = t + rng.exponential(1.0 / q_out[phase])
            else:
                sojourn_end = np.inf
            seg_end = min(sojourn_end, horizon_r)
            mu_i = mu[phase]
            sig_i = sigma[phase]
            i1 = min(int(np.floor(seg_end / dt)), n_steps)
            if i1 <= g:
                # segment lives inside one grid cell
                h = seg_end - t
                if h > 0.0:
                    y = max(0.0, y + mu_i * h + sig_i * np.sqrt(h) * rng.standard_normal())
            else:
                h0 = (g + 1) * dt - t
                y = max(0.0, y + mu_i * h0 + sig_i * np.sqrt(h0) * rng.standard_normal())
                g += 1
                if g >= first_sample and g % k_int == 0:
                    samples[phase].append(y)
                pos = g
                while pos < i1:
                    block = min(_CHUNK, i1 - pos)
                    incr = mu_i * dt + sig_i * np.sqrt(dt) * rng.standard_normal(block)
                    w = np.cumsum(incr)
                    running_min = np.minimum.accumulate(w)
                    yvals = w + np.maximum(y, -running_min)
                    # sample grid indices in (pos, pos + block] that are
                    # multiples of k_int at or past the burn-in boundary
                    first_idx = max(((pos // k_int) + 1) * k_int, first_sample)
                    idxs = np.arange(first_idx, pos + block + 1, k_int)
                    if idxs.size:
                        samples[phase].extend(yvals[idxs - pos - 1])
                    y = float(yvals[-1])
                    pos += block
                g = i1
                hb = seg_end - i1 * dt
                if hb > 0.0:
                    y = max(0.0, y + mu_i * hb + sig_i * np.sqrt(hb) * rng.standard_normal())
            t = seg_end
            if sojourn_end >= horizon_r:
                break
            u = rng.random()
            phase = int(np.searchsorted(jump_cum[phase], u))
            phase = min(phase, model.m - 1)
        return [np.asarray(s) for s in samples]

    return _run_replications(one, replications, model.m, burn_in, seed)


def simulate_fluid(
    fm: FluidModel,
    horizon: float,
    seed: int = DEFAULT_SEED,
    burn_in: float = 0.1,
    sample_interval: float = 1.0,
    replications: int = 1,
) -> EmpiricalCdf:
    """Exact event-driven samples of the stationary reflected fluid level.

    The level is piecewise linear between exponential phase jumps; in a
    descending phase the reflected level is ``max(0, y + c (s - t))``
    analytically.  No discretisation error; identical inputs give identical
    output.
    """
    if horizon <= 0.0 or not np.isfinite(horizon):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError(f"burn_in must be in [0, 1), got {burn_in}")
    if sample_interval <= 0.0:
        raise ValueError("sample_interval must be positive")
    if replications < 1:
        raise ValueError("replications must be >= 1")

    rates = fm.rates
    n = fm.n
    q_out = -np.diag(fm.T)
    jump_cum = np.zeros((n, n))
    for i in range(n):
        probs = fm.T[i].copy()
        probs[i] = 0.0
        jump_cum[i] = np.cumsum(probs / q_out[i])
    pi0 = np.cumsum(fm.stationary_dist())

    horizon_r = horizon / replications
    t_first = burn_in * horizon_r

    def one(rep: int):
        rng = np.random.Generator(np.random.Philox(seed + rep))
        samples = [[] for _ in range(n)]
        phase = min(int(np.searchsorted(pi0, rng.random())), n - 1)
        y = 0.0
        t = 0.0
        next_s = t_first
        # blocked draws: one stream of unit exponentials, one of uniforms
        exp_block = rng.standard_exponential(_BLOCK)
        uni_block = rng.random(_BLOCK)
        be = bu = 0
        while t < horizon_r:
            if be == _BLOCK:
                exp_block = rng.standard_exponential(_BLOCK)
                be = 0
            sojourn = exp_block[be] / q_out[phase]
            be += 1
            seg_end = min(t + sojourn, horizon_r)
            c = rates[phase]
            count = 0
            if next_s <= seg_end:
                count = int(np.floor((seg_end - next_s) / sample_interval)) + 1
                if count > 4:
                    ts = next_s + sample_interval * np.arange(count)
                    vals = y + c * (ts - t)
                    if c < 0.0:
                        np.maximum(vals, 0.0, out=vals)
                    samples[phase].extend(vals)
                else:
                    s = next_s
                    for _ in range(count):
                        val = y + c * (s - t)
                        samples[phase].append(val if val > 0.0 else 0.0)
                        s += sample_interval
                next_s += count * sample_interval
            y = y + c * (seg_end - t)
            if c < 0.0 and y < 0.0:
                y = 0.0
            t = seg_end
            if t >= horizon_r:
                break
            if bu == _BLOCK:
                uni_block = rng.random(_BLOCK)
                bu = 0
            phase = min(int(np.searchsorted(jump_cum[phase], uni_block[bu])), n - 1)
            bu += 1
        return [np.asarray(s) for s in samples]

    return _run_replications(one, replications, n, burn_in, seed)
