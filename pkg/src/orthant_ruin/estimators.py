"""Monte Carlo estimators for ruin, storage and ladder quantities, plus closed forms.

Each estimator cuts its paths into fixed-size blocks drawn from
``derive_stream(seed, block, purpose)`` and merges block results in order,
so output does not depend on ``n_jobs``. Different estimators use different
purpose tags and therefore independent randomness under one seed.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from .exceptions import InvalidConfig, RejectionStall
from .lcp import lcp_arrays, lcp_inverse_arrays
from .skorokhod import STRICT_TOL
from .streams import DEFAULT_BLOCK, run_blocks

STALL_WINDOW = 1_000_000
STALL_RATE = 1e-6


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error."""

    value: float
    std_error: float
    n_samples: int
    method: str

    @classmethod
    def proportion(cls, count, n, method):
        n = int(n)
        v = count / n if n else 0.0
        return cls(float(v), math.sqrt(v * (1.0 - v) / n) if n else 0.0, n, method)

    def interval(self, width=1.96):
        return (self.value - width * self.std_error, self.value + width * self.std_error)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples, "method": self.method}


def z_score(x, y_value, y_se=0.0):
    """Standardized difference ``(x - y) / sqrt(se_x^2 + se_y^2)`` of independent estimates."""
    xv, xs = (x.value, x.std_error) if isinstance(x, Estimate) else (float(x), 0.0)
    if isinstance(y_value, Estimate):
        y_value, y_se = y_value.value, y_value.std_error
    diff = xv - y_value
    se = math.hypot(xs, y_se)
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


def _capital(a, model):
    a = np.zeros(model.d) if a is None else np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape != (model.d,) or np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InvalidConfig(f"initial capital must be {model.d} nonnegative numbers")
    return a


# ---------------------------------------------------------------- direct ruin

def _direct_block(rng, size, model, a, horizon, strict_tol):
    refl = model.refl
    z = np.broadcast_to(a, (size, model.d)).copy()
    times = np.zeros((3, size), dtype=np.int64)          # ruin, s-ruin, ss-ruin
    alive = np.ones(size, dtype=bool)
    for k in range(1, horizon + 1):
        # draw for every path so that streams line up across capitals
        U = model.sample_increments(rng, size)
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        xi, zeta, _ = lcp_arrays(z[idx] + U[idx], refl.Pt, refl.R)
        z[idx] = zeta
        at_zero = np.abs(zeta).max(axis=1) <= strict_tol
        pushed = xi > strict_tol
        for row, flag in enumerate((at_zero, at_zero & pushed.any(axis=1), pushed.all(axis=1))):
            new = idx[flag & (times[row, idx] == 0)]
            times[row, new] = k
        alive[idx[pushed.all(axis=1)]] = False
    return times


def ruin_times(model, a=None, horizon=1000, n_paths=10_000, seed=0, n_jobs=1,
               strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """First ruin, s-ruin and ss-ruin steps of simulated paths (0 when none by ``horizon``).

    Increments are drawn for every path at every step, so runs with the same
    seed share their randomness across initial capitals.

    Returns
    -------
    ndarray (3, n_paths) of int
    """
    a = _capital(a, model)
    parts = run_blocks(_direct_block, n_paths, seed, "primal", n_jobs, block_size,
                       model=model, a=a, horizon=int(horizon), strict_tol=strict_tol)
    return np.concatenate(parts, axis=1)


def estimate_ruin_direct(model, a=None, horizon=1000, n_paths=10_000, seed=0, n_jobs=1,
                         strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Fraction of paths with ruin, s-ruin and ss-ruin by step ``horizon``.

    Paths that survive the horizon count as survivors, so each value is a
    lower bound for the probability of ruin in finite time.

    Returns
    -------
    dict with keys ``ruin``, ``s_ruin``, ``ss_ruin`` mapping to :class:`Estimate`
    """
    times = ruin_times(model, a, horizon, n_paths, seed, n_jobs, strict_tol, block_size)
    names = ("ruin", "s_ruin", "ss_ruin")
    return {name: Estimate.proportion(int(np.count_nonzero(times[i])), n_paths, f"direct_{name}_by_{horizon}")
            for i, name in enumerate(names)}


def free_walk_ruin(model, a=0.0, horizon=1000, n_paths=10_000, seed=0, n_jobs=1,
                   block_size=DEFAULT_BLOCK):
    """Classical ruin frequency of the unregulated scalar walk ``a + U_1 + ... + U_k < 0``.

    Independent of every LCP routine; used to check one-dimensional oracles.
    """
    if model.d != 1:
        raise InvalidConfig("free_walk_ruin is one-dimensional")
    a = float(np.asarray(a).reshape(-1)[0])

    def block(rng, size):
        level = np.full(size, a)
        ruined = np.zeros(size, dtype=bool)
        for _ in range(int(horizon)):
            level += model.sample_increments(rng, size)[:, 0]
            ruined |= level < 0
        return int(ruined.sum())

    hits = sum(run_blocks(block, n_paths, seed, "oracle", n_jobs, block_size))
    return Estimate.proportion(hits, n_paths, f"free_walk_first_passage_by_{horizon}")


# ------------------------------------------------------------- storage walk

def _storage_step(model, rng, w):
    refl = model.refl
    uhat = -(model.sample_increments(rng, w.shape[0]) @ refl.Rinv.T)
    _, level, _ = lcp_inverse_arrays(w + uhat, refl.Pt, refl.R)
    return level


def _storage_block(rng, size, model, b, step_cap, strict_tol):
    w = np.zeros((size, model.d))
    exit_step = np.zeros(size, dtype=np.int64)
    entered = np.zeros(size, dtype=bool)
    idx = np.arange(size)
    for k in range(1, step_cap + 1):
        if idx.size == 0:
            break
        level = _storage_step(model, rng, w[idx])
        w[idx] = level
        up = ((level - b) > strict_tol).all(axis=1)
        down = (level <= strict_tol).any(axis=1)
        done = up | down
        exit_step[idx[done]] = k
        entered[idx[up]] = True
        idx = idx[~done]
    return exit_step, entered


def storage_exits(model, a=None, n_paths=10_000, seed=0, step_cap=100_000, n_jobs=1,
                  strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Run forward storage walks until they enter ``{w >> Rinv a}`` or hit the boundary.

    Returns
    -------
    exit_step : ndarray of int
        Step of the first of the two events; 0 when censored at ``step_cap``.
    entered : ndarray of bool
        True when the walk entered ``{w >> Rinv a}`` first.
    """
    a = _capital(a, model)
    b = model.refl.Rinv @ a
    parts = run_blocks(_storage_block, n_paths, seed, "storage", n_jobs, block_size,
                       model=model, b=b, step_cap=int(step_cap), strict_tol=strict_tol)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class StorageEstimate:
    estimate: Estimate
    censored: Estimate

    def to_dict(self):
        return {"estimate": self.estimate.to_dict(), "censored": self.censored.to_dict()}


def estimate_storage_side(model, a=None, n_paths=10_000, seed=0, step_cap=100_000, n_jobs=1,
                          strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Fraction of storage walks entering ``{w >> Rinv a}`` before the boundary.

    Walks that reach ``step_cap`` without either event are reported in
    ``censored`` and count as not entering.
    """
    exit_step, entered = storage_exits(model, a, n_paths, seed, step_cap, n_jobs, strict_tol, block_size)
    return StorageEstimate(
        Estimate.proportion(int(entered.sum()), n_paths, "storage_entry_before_boundary"),
        Estimate.proportion(int(np.count_nonzero(exit_step == 0)), n_paths, f"censored_at_{step_cap}"),
    )


def censoring_monitor(model, a=None, caps=(1_000, 10_000, 100_000), n_paths=10_000, seed=0, n_jobs=1,
                      strict_tol=STRICT_TOL):
    """Censored fraction of the storage estimator at each cap (one run at the largest cap)."""
    caps = sorted(int(c) for c in caps)
    exit_step, _ = storage_exits(model, a, n_paths, seed, caps[-1], n_jobs, strict_tol)
    late = np.where(exit_step == 0, np.iinfo(np.int64).max, exit_step)
    return [{"cap": c, "censored": Estimate.proportion(int(np.count_nonzero(late > c)), n_paths, f"censored_at_{c}")}
            for c in caps]


def estimate_p(model, n_samples=100_000, seed=0, n_jobs=1, strict_tol=STRICT_TOL,
               block_size=DEFAULT_BLOCK, purpose="p_hat"):
    """Frequency of ``-Rinv U >> 0``."""
    Rinv = model.refl.Rinv

    def block(rng, size):
        uhat = -(model.sample_increments(rng, size) @ Rinv.T)
        return int(np.count_nonzero((uhat > strict_tol).all(axis=1)))

    hits = sum(run_blocks(block, n_samples, seed, purpose, n_jobs, block_size))
    return Estimate.proportion(hits, n_samples, "p_hat")


def nontrivial_frequency(model, n_draws=1_000_000, seed=0, n_jobs=1, strict_tol=STRICT_TOL,
                         block_size=DEFAULT_BLOCK):
    """Counts of ``-Rinv U >> 0`` in the first and second half of one run of ``n_draws``.

    A positive count in the second half is the finite stand-in for the event
    recurring infinitely often.
    """
    Rinv = model.refl.Rinv

    def block(rng, size):
        uhat = -(model.sample_increments(rng, size) @ Rinv.T)
        return (uhat > strict_tol).all(axis=1)

    flags = np.concatenate(run_blocks(block, n_draws, seed, "recurrence", n_jobs, block_size))
    half = n_draws // 2
    return {"first_half": int(flags[:half].sum()), "second_half": int(flags[half:].sum()),
            "frequency": Estimate.proportion(int(flags.sum()), n_draws, "delta_0")}


# -------------------------------------------------------- sigma_bd survival

def _sigma_bd_block(rng, size, model, kmax, strict_tol):
    w = np.zeros((size, model.d))
    sigma = np.full(size, kmax + 1, dtype=np.int64)
    idx = np.arange(size)
    for k in range(1, kmax + 1):
        if idx.size == 0:
            break
        level = _storage_step(model, rng, w[idx])
        w[idx] = level
        hit = (level <= strict_tol).any(axis=1)
        sigma[idx[hit]] = k
        idx = idx[~hit]
    return sigma


def sigma_bd_distribution(model, n_paths=100_000, seed=0, kmax=10, n_jobs=1, p_hat=None,
                          strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Empirical ``P(sigma_bd > k)`` next to the geometric reference ``p_hat^k``.

    ``p_hat`` comes from :func:`estimate_p` on an independent stream when not
    supplied. The z-score uses a delta-method error ``k p^(k-1) se(p)`` for the
    reference.

    Returns
    -------
    list of dict, one row per ``k = 1..kmax``
    """
    if p_hat is None:
        p_hat = estimate_p(model, n_paths, seed, n_jobs, strict_tol)
    parts = run_blocks(_sigma_bd_block, n_paths, seed, "sigma_bd", n_jobs, block_size,
                       model=model, kmax=int(kmax), strict_tol=strict_tol)
    sigma = np.concatenate(parts)
    rows = []
    for k in range(1, kmax + 1):
        surv = Estimate.proportion(int(np.count_nonzero(sigma > k)), n_paths, f"sigma_bd_gt_{k}")
        ref = p_hat.value ** k
        ref_se = k * p_hat.value ** (k - 1) * p_hat.std_error
        rows.append({"k": k, "survival": surv, "geometric": ref, "geometric_se": ref_se,
                     "z": z_score(surv, ref, ref_se)})
    return rows


# ---------------------------------------------------- per-horizon identity

def _primal_flags_block(rng, size, model, a, horizon, strict_tol):
    refl = model.refl
    z = np.broadcast_to(a, (size, model.d)).copy()
    counts = np.zeros(horizon, dtype=np.int64)
    for k in range(horizon):
        xi, z, _ = lcp_arrays(z + model.sample_increments(rng, size), refl.Pt, refl.R)
        counts[k] = np.count_nonzero((xi > strict_tol).all(axis=1))
    return counts


def _storage_flags_block(rng, size, model, b, horizon, strict_tol):
    w = np.zeros((size, model.d))
    interior = np.ones(size, dtype=bool)
    joint = np.zeros(horizon, dtype=np.int64)
    alive = np.zeros(horizon, dtype=np.int64)
    for k in range(horizon):
        w = _storage_step(model, rng, w)
        interior &= ~(w <= strict_tol).any(axis=1)
        alive[k] = np.count_nonzero(interior)
        joint[k] = np.count_nonzero(interior & ((w - b) > strict_tol).all(axis=1))
    return joint, alive


def per_horizon_identity(model, a=None, horizon=10, n_paths=100_000, seed=0, n_jobs=1,
                         strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Compare ``P(dY_n >> 0)`` with ``P(W_n >> Rinv a, sigma_bd > n)`` for ``n = 1..horizon``.

    The two sides come from independent primal and forward storage paths.
    Each row also carries the conditional variant
    ``P(W_n >> Rinv a | sigma_bd > n)``, which is labelled and not compared.
    """
    a = _capital(a, model)
    b = model.refl.Rinv @ a
    horizon = int(horizon)
    lhs = sum(run_blocks(_primal_flags_block, n_paths, seed, "identity_primal", n_jobs, block_size,
                         model=model, a=a, horizon=horizon, strict_tol=strict_tol))
    parts = run_blocks(_storage_flags_block, n_paths, seed, "identity_storage", n_jobs, block_size,
                       model=model, b=b, horizon=horizon, strict_tol=strict_tol)
    joint = sum(p[0] for p in parts)
    alive = sum(p[1] for p in parts)
    rows = []
    for k in range(horizon):
        left = Estimate.proportion(int(lhs[k]), n_paths, "primal_ss_push_at_n")
        right = Estimate.proportion(int(joint[k]), n_paths, "storage_above_and_interior")
        cond = Estimate.proportion(int(joint[k]), int(alive[k]), "storage_above_given_interior")
        rows.append({"n": k + 1, "lhs": left, "rhs": right, "z": z_score(left, right), "conditional": cond})
    return rows


# ------------------------------------------------------------ ladder / PK

def _rejection_heights(model, rng, count, strict_tol):
    """``count`` draws of ``-Rinv U`` conditioned on ``>> 0``."""
    Rinv = model.refl.Rinv
    out = np.empty((count, model.d))
    filled = drawn_since = 0
    batch = max(1024, 4 * count)
    while filled < count:
        uhat = -(model.sample_increments(rng, batch) @ Rinv.T)
        ok = uhat[(uhat > strict_tol).all(axis=1)]
        take = min(ok.shape[0], count - filled)
        out[filled:filled + take] = ok[:take]
        filled += take
        drawn_since = 0 if take else drawn_since + batch
        if drawn_since >= STALL_WINDOW and drawn_since * STALL_RATE >= 1:
            raise RejectionStall("no accepted ladder height in the last window of draws",
                                 window=int(drawn_since), accepted=int(filled), wanted=int(count))
        batch = min(max(batch, 2 * (count - filled)), 1 << 20)
    return out


def _ladder_block(rng, size, model, p_hat, b, strict_tol):
    K = rng.geometric(1.0 - p_hat, size) - 1 if p_hat > 0 else np.zeros(size, dtype=np.int64)
    total = int(K.sum())
    heights = _rejection_heights(model, rng, total, strict_tol) if total else np.empty((0, model.d))
    owner = np.repeat(np.arange(size), K)
    M = np.zeros((size, model.d))
    np.add.at(M, owner, heights)
    return K, M, heights


@dataclass(frozen=True, eq=False)
class LadderPK:
    """Compound geometric sample ``M = L_1 + ... + L_K``.

    ``above`` estimates ``P(M >> Rinv a)``; ``mass_at_zero`` is the fraction
    of paths with ``K = 0``; ``heights`` are the rejection-sampled ladder
    heights (one row per height).
    """

    above: Estimate
    mass_at_zero: Estimate
    p_hat: Estimate
    M: np.ndarray
    K: np.ndarray
    heights: np.ndarray

    def to_dict(self):
        return {"above": self.above.to_dict(), "mass_at_zero": self.mass_at_zero.to_dict(),
                "p_hat": self.p_hat.to_dict()}


def sample_ladder_pk(model, a=None, n_paths=100_000, seed=0, n_jobs=1, p_hat=None,
                     strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Sample the compound geometric law with ``P(K = k) = (1 - p) p^k``.

    ``p`` is estimated on its own stream when ``p_hat`` is not supplied.
    Ladder heights are draws of ``-Rinv U`` conditioned on ``>> 0``.

    Raises
    ------
    InvalidConfig
        ``p_hat >= 1``.
    RejectionStall
        Heights are needed but the acceptance rate collapsed.
    """
    a = _capital(a, model)
    if p_hat is None:
        p_hat = estimate_p(model, n_paths, seed, n_jobs, strict_tol)
    if not 0.0 <= p_hat.value < 1.0:
        raise InvalidConfig("compound geometric sampling needs p_hat < 1", p_hat=p_hat.value)
    b = model.refl.Rinv @ a
    parts = run_blocks(_ladder_block, n_paths, seed, "ladder", n_jobs, block_size,
                       model=model, p_hat=p_hat.value, b=b, strict_tol=strict_tol)
    K = np.concatenate([p[0] for p in parts])
    M = np.concatenate([p[1] for p in parts])
    heights = np.concatenate([p[2] for p in parts])
    above = int(np.count_nonzero(((M - b) > strict_tol).all(axis=1)))
    return LadderPK(
        above=Estimate.proportion(above, n_paths, "compound_geometric_above"),
        mass_at_zero=Estimate.proportion(int(np.count_nonzero(K == 0)), n_paths, "compound_geometric_mass_at_zero"),
        p_hat=p_hat, M=M, K=K, heights=heights,
    )


def _harvest_block(rng, size, model, horizon, strict_tol):
    refl = model.refl
    z = np.zeros((size, model.d))
    y = np.zeros((size, model.d))
    tau = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    for k in range(1, horizon + 1):
        if idx.size == 0:
            break
        xi, zeta, _ = lcp_arrays(z[idx] + model.sample_increments(rng, idx.size), refl.Pt, refl.R)
        z[idx] = zeta
        y[idx] += xi
        hit = (xi > strict_tol).all(axis=1)
        tau[idx[hit]] = k
        idx = idx[~hit]
    return tau, y


@dataclass(frozen=True, eq=False)
class LadderHarvest:
    """First ladder epochs ``tau`` (0 when none by the horizon) and heights ``y(tau)``."""

    tau: np.ndarray
    heights: np.ndarray
    found: Estimate
    horizon: int

    @property
    def censored(self):
        """Paths without a ladder epoch by the horizon; survival and late epochs are indistinguishable."""
        return Estimate(1.0 - self.found.value, self.found.std_error, self.found.n_samples, "no_epoch_by_horizon")

    def to_dict(self):
        return {"found": self.found.to_dict(), "censored": self.censored.to_dict(), "horizon": self.horizon}


def harvest_ladder_law(model, n_paths=100_000, horizon=1000, seed=0, n_jobs=1,
                       strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Run zero-capital paths to their first all-coordinate push and record its height."""
    parts = run_blocks(_harvest_block, n_paths, seed, "harvest", n_jobs, block_size,
                       model=model, horizon=int(horizon), strict_tol=strict_tol)
    tau = np.concatenate([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    found = tau > 0
    return LadderHarvest(tau=tau, heights=y[found],
                         found=Estimate.proportion(int(found.sum()), n_paths, f"ladder_epoch_by_{horizon}"),
                         horizon=int(horizon))


def ladder_ks(sample_a, sample_b):
    """Per-coordinate two-sample KS statistics and p-values."""
    out = []
    for i in range(sample_a.shape[1]):
        res = stats.ks_2samp(sample_a[:, i], sample_b[:, i])
        out.append({"coordinate": i + 1, "statistic": float(res.statistic), "pvalue": float(res.pvalue),
                    "n_a": int(sample_a.shape[0]), "n_b": int(sample_b.shape[0])})
    return out


# ------------------------------------------------------- diagnostics

def pushing_trend(model, horizons=(5_000, 10_000, 20_000), n_paths=2_000, seed=0, n_jobs=1,
                  strict_tol=STRICT_TOL, block_size=DEFAULT_BLOCK):
    """Fraction of zero-capital paths pushed somewhere in the last 10% of each horizon.

    Under the net profit condition pushing eventually stops, so the fractions
    should not increase with the horizon; ``nonincreasing`` reports that. All
    horizons share one set of paths.
    """
    horizons = sorted(int(h) for h in horizons)
    windows = [(h - h // 10 + 1, h) for h in horizons]
    refl = model.refl

    def block(rng, size):
        z = np.zeros((size, model.d))
        hit = np.zeros((len(windows), size), dtype=bool)
        for k in range(1, horizons[-1] + 1):
            xi, z, _ = lcp_arrays(z + model.sample_increments(rng, size), refl.Pt, refl.R)
            pushed = (xi > strict_tol).any(axis=1)
            for j, (lo, hi) in enumerate(windows):
                if lo <= k <= hi:
                    hit[j] |= pushed
        return hit.sum(axis=1)

    counts = sum(run_blocks(block, n_paths, seed, "trend", n_jobs, block_size))
    rows = [{"horizon": hi, "window": [lo, hi],
             "fraction": Estimate.proportion(int(c), n_paths, "pushed_in_window")}
            for c, (lo, hi) in zip(counts, windows)]
    fr = [r["fraction"].value for r in rows]
    return {"rows": rows, "nonincreasing": all(x >= y for x, y in zip(fr, fr[1:]))}


def limdist_table(model, horizons=(100, 1_000, 10_000), n_paths=10_000, seed=0,
                  levels=(0.5, 0.75, 0.9, 0.95, 0.99), n_jobs=1, strict_tol=STRICT_TOL,
                  block_size=DEFAULT_BLOCK):
    """Quantiles of the scalar storage level ``W_n`` next to those of ``W(sigma_0 - 1)``.

    Descriptive only: one row per quantile level, one column per horizon plus
    the pre-return level. ``d = 1`` only.
    """
    if model.d != 1:
        raise InvalidConfig("limdist_table is one-dimensional")
    horizons = sorted(int(h) for h in horizons)

    def forward(rng, size):
        w = np.zeros((size, 1))
        snaps = []
        for k in range(1, horizons[-1] + 1):
            w = _storage_step(model, rng, w)
            if k in horizons:
                snaps.append(w[:, 0].copy())
        return np.array(snaps)

    def before_return(rng, size):
        w = np.zeros((size, 1))
        prev = np.zeros(size)
        idx = np.arange(size)
        # the excursion ends at the first return to 0; cap at the largest horizon
        for _ in range(horizons[-1]):
            if idx.size == 0:
                break
            level = _storage_step(model, rng, w[idx])
            back = level[:, 0] <= strict_tol
            w[idx] = level
            keep = ~back
            prev[idx[keep]] = level[keep, 0]
            idx = idx[keep]
        return prev, idx.size

    W = np.concatenate(run_blocks(forward, n_paths, seed, "limdist", n_jobs, block_size), axis=1)
    parts = run_blocks(before_return, n_paths, seed, "limdist_return", n_jobs, block_size)
    pre = np.concatenate([p[0] for p in parts])
    unfinished = sum(p[1] for p in parts)
    rows = []
    for q in levels:
        row = {"level": q}
        for h, sample in zip(horizons, W):
            row[f"W_{h}"] = float(np.quantile(sample, q))
        row["W_before_return"] = float(np.quantile(pre, q))
        rows.append(row)
    return {"rows": rows, "unfinished_excursions": int(unfinished), "n_paths": int(n_paths)}


def tail_slope(sample, top=0.01):
    """Least-squares slope of log survival against log level over the top ``top`` fraction.

    For a Pareto tail with index ``alpha`` the slope is near ``-alpha``.
    Qualitative only.
    """
    x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    x = x[x > 0]
    m = max(int(len(x) * top), 10)
    if len(x) < m + 1:
        return float("nan")
    tail = x[-m:]
    surv = (m - np.arange(m)) / len(x)
    slope, _ = np.polyfit(np.log(tail), np.log(surv), 1)
    return float(slope)


# ------------------------------------------------------------ closed forms

def _need(params, *names):
    try:
        vals = [float(params[n]) for n in names]
    except KeyError as exc:
        raise InvalidConfig(f"missing oracle parameter {exc.args[0]!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InvalidConfig("oracle parameters must be finite")
    return vals


def closed_form_oracles(kind, **params):
    """Closed-form values for one-dimensional anchor models.

    ``cl_ruin_prob(lam, mu, c, a)``
        Ruin probability of the Cramér–Lundberg model with exponential
        claims of mean ``mu``: ``(lam mu / c) exp(-(c - lam mu) a / (c mu))``.
    ``gamblers_ruin(q)``
        Probability that the ``+-1`` walk with down-probability ``q`` ever
        reaches ``-1``: ``q / (1 - q)`` for ``q < 1/2``, else 1.
    ``storage_p_cl(lam, mu, c)``
        ``P(X > c A) = lam mu / (lam mu + c)``.
    ``cl_sigma_bd_gt2(lam, mu, c)``
        ``P(X_1 > c A_1, X_1 + X_2 > c (A_1 + A_2)) = p (1 - (1 - p)^2)``
        with ``p`` as above.
    """
    if kind == "cl_ruin_prob":
        lam, mu, c, a = _need(params, "lam", "mu", "c", "a")
        if min(lam, mu, c) <= 0 or a < 0:
            raise InvalidConfig("cl_ruin_prob needs positive lam, mu, c and a >= 0")
        if c <= lam * mu:
            return 1.0
        return lam * mu / c * math.exp(-(c - lam * mu) * a / (c * mu))
    if kind == "gamblers_ruin":
        (q,) = _need(params, "q")
        if not 0 <= q <= 1:
            raise InvalidConfig("q must lie in [0, 1]")
        return q / (1 - q) if q < 0.5 else 1.0
    if kind in ("storage_p_cl", "cl_sigma_bd_gt2"):
        lam, mu, c = _need(params, "lam", "mu", "c")
        if min(lam, mu, c) <= 0:
            raise InvalidConfig(f"{kind} needs positive lam, mu, c")
        p = lam * mu / (lam * mu + c)
        return p if kind == "storage_p_cl" else p * (1.0 - (1.0 - p) ** 2)
    raise InvalidConfig(f"unknown oracle kind {kind!r}")


class RuinEstimator(BaseEstimator):
    """Parameter container for ruin estimation with the usual ``get_params``/``set_params``.

    ``fit`` runs the direct estimator and the storage-side estimator with the
    stored settings; results land in ``direct_`` and ``storage_``. No data is
    consumed: ``X`` is ignored.

    Parameters
    ----------
    P : array_like (d, d)
    model : dict
        Model configuration (see :class:`~orthant_ruin.models.ModelConfig`).
    initial_capital : array_like (d,), optional
    horizon, n_paths, step_cap, seed, n_jobs : int
    """

    def __init__(self, P=None, model=None, initial_capital=None, horizon=1000, n_paths=10_000,
                 step_cap=100_000, seed=0, n_jobs=1):
        self.P = P
        self.model = model
        self.initial_capital = initial_capital
        self.horizon = horizon
        self.n_paths = n_paths
        self.step_cap = step_cap
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        from .models import build_model
        from .orthant import build_reflection

        if self.P is None or self.model is None:
            raise InvalidConfig("P and model are required")
        refl = build_reflection(self.P)
        self.model_, self.hypotheses_ = build_model(self.model, refl)
        self.direct_ = estimate_ruin_direct(self.model_, self.initial_capital, self.horizon, self.n_paths,
                                            self.seed, self.n_jobs)
        self.storage_ = estimate_storage_side(self.model_, self.initial_capital, self.n_paths, self.seed,
                                              self.step_cap, self.n_jobs)
        return self
