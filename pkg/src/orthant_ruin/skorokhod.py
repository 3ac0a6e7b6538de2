"""Discrete Skorokhod problem SP({a + sum u}, R) and the three ruin notions.

The pushing/regulated pair is built one step at a time: ``(dy_k, z_k)``
solves LCP(z_{k-1} + u_k, R).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConsistencyViolation, DimensionMismatch, NonFiniteInput, OrthantRuinError
from .lcp import lcp_arrays
from .orthant import as_vector, build_reflection

STRICT_TOL = 1e-9
IDENTITY_TOL = 1e-8


def _increments(u, d):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1 and d == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != d:
        raise DimensionMismatch(f"increments must have shape (n, {d}), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("increments have non-finite entries")
    return u


def sp_arrays(a, u, Pt, R):
    """Solve a stack of Skorokhod problems.

    Parameters
    ----------
    a : ndarray (B, d)
        Initial points, each in the closed orthant.
    u : ndarray (B, n, d)
        Increments.
    Pt, R : ndarray (d, d) or (B, d, d)

    Returns
    -------
    y, z : ndarray (B, n + 1, d)
        Cumulative pushing and regulated paths, ``y[:, 0] = 0``, ``z[:, 0] = a``.
    dy : ndarray (B, n, d)
    """
    B, n, d = u.shape
    y = np.zeros((B, n + 1, d))
    z = np.empty((B, n + 1, d))
    dy = np.empty((B, n, d))
    z[:, 0] = a
    for k in range(n):
        try:
            xi, zeta, _ = lcp_arrays(z[:, k] + u[:, k], Pt, R)
        except OrthantRuinError as exc:
            exc.details["step"] = k + 1
            raise
        dy[:, k] = xi
        z[:, k + 1] = zeta
        y[:, k + 1] = y[:, k] + xi
    return y, z, dy


def running_deficit(a, u):
    """``h_k = max_{j <= k} max(0, -(a + u_1 + ... + u_j))`` coordinatewise, ``k = 1..n``."""
    partial = a + np.cumsum(u, axis=-2)
    return np.maximum.accumulate(np.maximum(0.0, -partial), axis=-2)


@dataclass(frozen=True, eq=False)
class SpPath:
    """Solution of SP({a + sum u}, R) over ``n`` steps.

    ``y`` and ``z`` have ``n + 1`` rows (index 0 is the start); ``dy`` and ``h``
    have ``n`` rows, row ``k - 1`` belonging to step ``k``.
    """

    refl: object
    a: np.ndarray
    u: np.ndarray
    y: np.ndarray
    z: np.ndarray
    dy: np.ndarray
    h: np.ndarray

    @property
    def n(self):
        return self.u.shape[0]

    def invariant_violations(self):
        """Largest violation of each defining property (all should be ~0)."""
        R, Rinv = self.refl.R, self.refl.Rinv
        S = self.a + np.vstack([np.zeros((1, self.refl.d)), np.cumsum(self.u, axis=0)])
        return {
            "skorokhod_equation": float(np.abs(self.z - S - self.y @ R.T).max()),
            "orthant": float(max(0.0, -self.z.min())),
            "monotone": float(max(0.0, -self.dy.min(initial=0.0))),
            "complementarity": float(np.abs(np.einsum("kd,kd->k", self.z[1:], self.dy)).max(initial=0.0)),
            "a_priori_bound": float(max(0.0, (self.y[1:] - self.h @ Rinv.T).max(initial=0.0))),
        }

    def to_csv(self):
        """One row per step: ``k, u_*, z_*, dy_*, y_*`` (LF line endings, 17 significant digits)."""
        d = self.refl.d
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["k"]
        for name in ("u", "z", "dy", "y"):
            header += [f"{name}_{i + 1}" for i in range(d)]
        writer.writerow(header)
        zero = np.zeros(d)
        for k in range(self.n + 1):
            u_k = self.u[k - 1] if k else zero
            dy_k = self.dy[k - 1] if k else zero
            row = [k] + [format(float(v), ".17g") for v in np.concatenate([u_k, self.z[k], dy_k, self.y[k]])]
            writer.writerow(row)
        return buf.getvalue()


def solve_sp(a, u, refl):
    """Solve SP({a + sum u}, R) step by step.

    Parameters
    ----------
    a : array_like (d,)
        Initial capital, entrywise nonnegative.
    u : array_like (n, d)
        Increments (premium income minus claim per step).
    refl : ReflectionMatrix

    Returns
    -------
    SpPath
    """
    d = refl.d
    a = as_vector(a, d=d, name="a")
    if np.any(a < 0):
        raise ValueError("initial capital must lie in the nonnegative orthant")
    u = _increments(u, d)
    y, z, dy = sp_arrays(a[None, :], u[None], refl.Pt, refl.R)
    h = running_deficit(a, u)
    return SpPath(refl=refl, a=a, u=u, y=y[0], z=z[0], dy=dy[0], h=h)


def ruin_flags(z, dy, strict_tol=STRICT_TOL):
    """Per-step ruin predicates from regulated levels ``z`` (after the step) and pushes ``dy``.

    Returns boolean arrays ``(ruin, s_ruin, ss_ruin)`` with the trailing
    coordinate axis reduced away.
    """
    at_zero = np.abs(z).max(axis=-1) <= strict_tol
    pushed = dy > strict_tol
    ss = pushed.all(axis=-1)
    s = at_zero & pushed.any(axis=-1)
    return at_zero, s, ss


def first_index(flags):
    """1-based position of the first True along the last axis, or 0 when none."""
    flags = np.asarray(flags)
    hit = flags.any(axis=-1)
    return np.where(hit, flags.argmax(axis=-1) + 1, 0)


@dataclass(frozen=True)
class RuinRecord:
    """First steps (1-based) of ruin, s-ruin and ss-ruin; ``None`` when absent."""

    t_ruin: int | None
    t_sruin: int | None
    t_ssruin: int | None


def detect_ruin(path, strict_tol=STRICT_TOL):
    """Scan ``path`` for the three ruin notions.

    At every step where one of them occurs the value identity
    ``y_k = -Rinv a + sum_{l <= k} (-Rinv u_l)`` is verified.

    Raises
    ------
    ConsistencyViolation
        The identity failed, which points to a solver defect.
    """
    ruin, s, ss = ruin_flags(path.z[1:], path.dy, strict_tol)
    Rinv = path.refl.Rinv
    target = -(path.a + np.cumsum(path.u, axis=0)) @ Rinv.T
    for k in np.flatnonzero(ruin):
        gap = float(np.abs(path.y[k + 1] - target[k]).max())
        if gap > IDENTITY_TOL * (1.0 + float(np.abs(target[k]).max())):
            raise ConsistencyViolation(f"value identity fails at step {k + 1}", step=int(k + 1), gap=gap)

    def first(flags):
        idx = np.flatnonzero(flags)
        return int(idx[0]) + 1 if idx.size else None

    return RuinRecord(first(ruin), first(s), first(ss))


def comparison_check(a, b, u, refl, tol=IDENTITY_TOL):
    """Check the comparison inequalities between the paths started at ``a <= b``.

    Verifies ``dy^a_k >= dy^b_k``, ``z^a_k <= z^b_k`` and
    ``0 <= y^a_k - y^b_k <= Rinv (b - a)`` at every step.

    Returns
    -------
    ok : bool
    witness : dict
        ``first_violation`` is ``None`` or ``{"step", "inequality", "gap"}``.
    """
    a = as_vector(a, d=refl.d, name="a")
    b = as_vector(b, d=refl.d, name="b")
    if np.any(a > b):
        raise ValueError("comparison requires a <= b")
    pa, pb = solve_sp(a, u, refl), solve_sp(b, u, refl)
    bound = refl.Rinv @ (b - a)
    diff = pa.y[1:] - pb.y[1:]
    checks = {
        "dy_order": pb.dy - pa.dy,
        "z_order": pa.z[1:] - pb.z[1:],
        "y_gap_nonneg": -diff,
        "y_gap_bound": diff - bound,
    }
    first = None
    worst = {}
    for name, excess in checks.items():
        worst[name] = float(excess.max(initial=-np.inf))
        bad = np.flatnonzero((excess > tol).any(axis=1))
        if bad.size and (first is None or bad[0] + 1 < first["step"]):
            first = {"step": int(bad[0]) + 1, "inequality": name, "gap": float(excess[bad[0]].max())}
    return first is None, {"first_violation": first, "max_excess": worst, "bound": bound.tolist()}


class SkorokhodReflector(TransformerMixin, BaseEstimator):
    """Transformer mapping increment paths to regulated paths in the orthant.

    Parameters
    ----------
    P : array_like (d, d), optional
        Interaction matrix; ``R = I - P^t``. ``None`` means normal reflection.
    initial_capital : array_like (d,), optional
        Starting point; zero when omitted.

    Attributes
    ----------
    reflection_ : ReflectionMatrix
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> refl = SkorokhodReflector(P=[[0, .5], [.5, 0]]).fit()
    >>> refl.transform(np.array([[-1.0, -1.0]]))
    array([[0., 0.]])
    """

    def __init__(self, P=None, initial_capital=None):
        self.P = P
        self.initial_capital = initial_capital

    def fit(self, X=None, y=None):
        if self.P is None:
            if X is None:
                raise ValueError("P is required when no data is given")
            d = np.asarray(X).shape[-1]
            P = np.zeros((d, d))
        else:
            P = self.P
        self.reflection_ = build_reflection(P)
        self.n_features_in_ = self.reflection_.d
        return self

    def _solve(self, X):
        check_is_fitted(self, "reflection_")
        X = check_array(X, allow_nd=True, ensure_min_samples=1)
        squeeze = X.ndim == 2
        U = X[None] if squeeze else X
        if U.ndim != 3 or U.shape[-1] != self.n_features_in_:
            raise DimensionMismatch(f"expected (..., n_steps, {self.n_features_in_}) increments, got {X.shape}")
        d = self.n_features_in_
        a = np.zeros(d) if self.initial_capital is None else as_vector(self.initial_capital, d=d)
        refl = self.reflection_
        y, z, dy = sp_arrays(np.broadcast_to(a, (U.shape[0], d)), U, refl.Pt, refl.R)
        return (y, z, dy), squeeze

    def transform(self, X):
        """Regulated levels ``z_1..z_n`` for increments ``X`` of shape (n, d) or (paths, n, d)."""
        (_, z, _), squeeze = self._solve(X)
        return z[0, 1:] if squeeze else z[:, 1:]

    def pushing(self, X):
        """Cumulative pushing ``y_1..y_n`` for the same inputs as :meth:`transform`."""
        (y, _, _), squeeze = self._solve(X)
        return y[0, 1:] if squeeze else y[:, 1:]
