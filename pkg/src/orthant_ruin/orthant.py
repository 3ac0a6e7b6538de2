"""Vectors in the nonnegative orthant, partial orders, reflection matrices."""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    DiagonalNonzero,
    DimensionMismatch,
    InverseInconsistent,
    InvalidMatrix,
    NonFiniteInput,
    OffDiagonalNegative,
    PowerIterationFailed,
    SpectralRadiusNotLessThanOne,
)

MAX_DIM = 64
H2_THRESHOLD = 1e-12
RHO_MARGIN = 1e-8
INVERSE_TOL = 1e-10
NEUMANN_TOL = 1e-8


class SubstochasticWarning(UserWarning):
    """Row sums of P exceed one; allowed, but unusual for a treaty matrix."""


def as_vector(x, d=None, name="vector"):
    """Return ``x`` as a finite 1-D float64 array, optionally of length ``d``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not 1 <= arr.shape[0] <= MAX_DIM:
        raise DimensionMismatch(f"{name} dimension must be in 1..{MAX_DIM}, got {arr.shape[0]}")
    if d is not None and arr.shape[0] != d:
        raise DimensionMismatch(f"{name} has dimension {arr.shape[0]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    return arr


class Order(enum.Enum):
    """Strongest of the three orthant orders that holds between two vectors."""

    GG = "gg"      # strictly greater in every coordinate
    GT = "gt"      # >= everywhere, strictly greater somewhere
    GEQ = "geq"    # >= everywhere
    NONE = "none"


def order(x, y, tol=0.0):
    """Compare ``x`` against ``y`` in the orthant orders.

    Parameters
    ----------
    x, y : array_like of shape (d,)
    tol : float, default 0
        Coordinates within ``tol`` of each other count as equal.

    Returns
    -------
    Order
        ``GG`` if ``x_i > y_i + tol`` for all i, else ``GT`` if additionally
        to ``x >= y - tol`` some coordinate is strictly larger, else ``GEQ``
        if ``x >= y - tol``, else ``NONE``.
    """
    x = as_vector(x, name="x")
    y = as_vector(y, d=x.shape[0], name="y")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    diff = x - y
    if np.all(diff > tol):
        return Order.GG
    if np.all(diff >= -tol):
        return Order.GT if np.any(diff > tol) else Order.GEQ
    return Order.NONE


def _perron_root_irreducible(B, tol, max_iter):
    # Power iteration on I + B; I + B is primitive when B is irreducible, so the
    # Perron root dominates strictly. Collatz-Wielandt quotients bracket it.
    n = B.shape[0]
    A = B + np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, np.inf
    for _ in range(max_iter):
        y = A @ x
        ratios = y / x
        lo, hi = max(lo, ratios.min()), min(hi, ratios.max())
        if hi - lo <= tol * max(1.0, hi):
            return 0.5 * (lo + hi) - 1.0
        x = y / np.linalg.norm(y, np.inf)
    raise PowerIterationFailed(
        "power iteration did not converge",
        estimate=0.5 * (lo + hi) - 1.0,
        bracket=[lo - 1.0, hi - 1.0],
    )


def spectral_radius(P, tol=1e-12, max_iter=10_000):
    """Spectral radius of a nonnegative square matrix.

    ``P`` is split into strongly connected components; the radius is the
    largest Perron root among the irreducible diagonal blocks. Singleton
    components without a self-loop contribute zero, which handles nilpotent
    (feedforward) structure exactly.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"P must be square, got shape {P.shape}")
    if np.any(P < 0):
        raise InvalidMatrix("spectral_radius expects a nonnegative matrix")
    n_comp, labels = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    rho = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        block = P[np.ix_(idx, idx)]
        if idx.size == 1:
            rho = max(rho, float(block[0, 0]))
        else:
            rho = max(rho, _perron_root_irreducible(block, tol, max_iter))
    return rho


def _neumann_inverse(Pt, rho):
    """Sum of (P^t)^k for k < 2^j with 2^j past the point where rho^k < 1e-12."""
    d = Pt.shape[0]
    if rho <= 0.0:
        terms = d
    else:
        terms = max(d, math.ceil(math.log(1e-12) / math.log(rho)) + d)
    S = np.eye(d)
    power = Pt.copy()
    covered = 1
    while covered < terms:
        S = S + power @ S
        power = power @ power
        covered *= 2
    return S


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ReflectionMatrix:
    """Validated reflection matrix ``R = I - P^t`` with its inverse.

    Attributes
    ----------
    d : int
    P : ndarray (d, d)
        Interaction proportions; zero diagonal, nonnegative, rho(P) < 1.
    R, Rinv : ndarray (d, d)
    rho : float
        Spectral radius of ``P``.
    h2_column : int or None
        0-based index of a column of ``Rinv`` with all entries positive, if
        any (the first such column).
    """

    d: int
    P: np.ndarray
    R: np.ndarray
    Rinv: np.ndarray
    rho: float
    h2_column: int | None

    @property
    def Pt(self):
        return self.P.T

    @property
    def h2(self):
        return self.h2_column is not None

    def summary(self):
        return {
            "d": self.d,
            "rho": self.rho,
            "R": self.R.tolist(),
            "Rinv": self.Rinv.tolist(),
            # 1-based, like every index written to reports
            "h2_column": None if self.h2_column is None else self.h2_column + 1,
        }


def build_reflection(P):
    """Validate ``P`` and build the reflection matrix ``R = I - P^t``.

    ``Rinv`` is computed by a direct solve and cross-checked against the
    truncated Neumann series ``sum_k (P^t)^k``.

    Raises
    ------
    OffDiagonalNegative, DiagonalNonzero, SpectralRadiusNotLessThanOne,
    InverseInconsistent
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"P must be square, got shape {P.shape}")
    d = P.shape[0]
    if not 1 <= d <= MAX_DIM:
        raise DimensionMismatch(f"dimension must be in 1..{MAX_DIM}, got {d}")
    if not np.all(np.isfinite(P)):
        raise NonFiniteInput("P has non-finite entries")
    if np.any(np.diag(P) != 0.0):
        raise DiagonalNonzero("P must have zero diagonal", diagonal=np.diag(P).tolist())
    if np.any(P < 0):
        i, j = np.argwhere(P < 0)[0]
        raise OffDiagonalNegative(f"P[{i},{j}] = {P[i, j]} is negative", index=[int(i), int(j)])
    rho = spectral_radius(P)
    if rho >= 1.0 - RHO_MARGIN:
        raise SpectralRadiusNotLessThanOne(f"spectral radius of P is {rho:.12g}", rho=rho)
    if np.any(P.sum(axis=1) > 1.0 + 1e-12):
        warnings.warn("P is not substochastic (some row sum exceeds 1)", SubstochasticWarning, stacklevel=2)

    R = np.eye(d) - P.T
    Rinv = np.linalg.solve(R, np.eye(d))
    neumann = _neumann_inverse(P.T, rho)
    scale = max(1.0, float(np.abs(Rinv).max()))
    gap = float(np.abs(Rinv - neumann).max())
    if gap > NEUMANN_TOL * scale:
        raise InverseInconsistent("direct inverse and Neumann series disagree", gap=gap)
    resid = float(np.abs(R @ Rinv - np.eye(d)).max())
    if resid > INVERSE_TOL:
        raise InverseInconsistent("R @ Rinv is not the identity", residual=resid)
    # Rinv is a sum of nonnegative terms: rounding noise below zero is clipped
    Rinv = np.where(np.abs(Rinv) < 1e-15, 0.0, Rinv)
    if np.any(Rinv < 0) or np.any(np.diag(Rinv) < 1.0 - 1e-12):
        raise InverseInconsistent("Rinv is not nonnegative with diagonal >= 1")

    positive_cols = np.flatnonzero(np.all(Rinv > H2_THRESHOLD, axis=0))
    h2 = int(positive_cols[0]) if positive_cols.size else None
    return ReflectionMatrix(d=d, P=_readonly(P), R=_readonly(R), Rinv=_readonly(Rinv), rho=float(rho), h2_column=h2)


def identity_reflection(d):
    """Normal reflection (``P = 0``) in dimension ``d``."""
    return build_reflection(np.zeros((d, d)))
