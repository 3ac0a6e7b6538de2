"""Linear complementarity problems LCP(eta, M) for the reflection-matrix class.

A pair ``(xi, zeta)`` solves LCP(eta, M) when ``zeta = eta + M xi``,
``xi >= 0``, ``zeta >= 0`` and ``<xi, zeta> = 0``.

Two independent solvers are provided. :func:`solve_lcp` runs the monotone
projection iteration ``xi <- max(0, P^t xi - eta)`` (a contraction because
``rho(P) < 1``) and then polishes the iterate with one linear solve on its
active set. :func:`solve_lcp_enum` scans all ``2^d`` active sets and serves as
an oracle. LCPs with ``Rinv`` are mapped onto LCPs with ``R``:
``Phi(theta, Rinv) = Psi(-R theta, R)`` and ``Psi(theta, Rinv) = Phi(-R theta, R)``.

The ``*_arrays`` functions work on stacked inputs of shape ``(B, d)`` with
either one shared matrix ``(d, d)`` or one matrix per row ``(B, d, d)``; the
simulators and corpus checks are built on them.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import IterationCapExceeded, MultipleSolutions, NoFeasibleActiveSet, NonFiniteInput
from .orthant import ReflectionMatrix, as_vector

ITER_TOL = 1e-12
MAX_ITER = 1_000_000
ACTIVE_TOL = 1e-12
CLAMP_TOL = 1e-11
ENUM_MAX_DIM = 14
ENUM_FEAS_TOL = 1e-11


def matvec(M, x):
    """``M @ x`` over stacked vectors; ``M`` is ``(d, d)`` or ``(B, d, d)``."""
    if M.ndim == 2:
        return x @ M.T
    return np.einsum("bij,bj->bi", M, x)


def _snap(a):
    a[np.abs(a) <= CLAMP_TOL] = 0.0
    return a


def _fixed_point(eta, Pt, tol=ITER_TOL, max_iter=MAX_ITER):
    xi = np.zeros_like(eta)
    if eta.size == 0:
        return xi, 0
    neg_eta = -eta
    change = np.inf
    for it in range(1, max_iter + 1):
        new = np.maximum(0.0, matvec(Pt, xi) + neg_eta)
        change = float(np.max(np.abs(new - xi)))
        xi = new
        # scale-aware so large inputs do not stall on rounding
        if change <= tol * (1.0 + float(np.max(xi))):
            return xi, it
    raise IterationCapExceeded(
        f"fixed-point iteration did not settle in {max_iter} steps",
        last_change=change,
        last_iterate=xi.tolist() if xi.size <= 64 else None,
    )


def _polish(eta, xi, R):
    """Re-solve ``(R xi)_S = -eta_S`` on the active set ``S`` of the iterate."""
    active = xi > ACTIVE_TOL
    rows = np.flatnonzero(active.any(axis=1))
    zeta = eta + matvec(R, xi)
    if rows.size == 0:
        return xi, zeta, active
    d = eta.shape[1]
    act = active[rows]
    Rb = R if R.ndim == 2 else R[rows]
    A = np.where(act[:, :, None], np.broadcast_to(Rb, (rows.size, d, d)), np.eye(d))
    rhs = np.where(act, -eta[rows], 0.0)
    sol = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
    z_sol = eta[rows] + matvec(Rb, sol)
    ok = np.all(sol >= -CLAMP_TOL, axis=1) & np.all(z_sol >= -CLAMP_TOL, axis=1)
    good = rows[ok]
    xi[good] = sol[ok]
    z_ok = z_sol[ok]
    z_ok[act[ok]] = 0.0
    zeta[good] = z_ok
    return xi, zeta, active


def lcp_arrays(eta, Pt, R):
    """Solve LCP(eta, R) row by row.

    Parameters
    ----------
    eta : ndarray (B, d)
    Pt : ndarray (d, d) or (B, d, d)
        ``P^t`` for each row, so that ``R = I - Pt``.
    R : ndarray, same leading shape as ``Pt``

    Returns
    -------
    xi, zeta : ndarray (B, d)
    iterations : int
    """
    eta = np.asarray(eta, dtype=np.float64)
    if not np.all(np.isfinite(eta)):
        raise NonFiniteInput("LCP input has non-finite entries")
    if Pt.ndim == 2 and not Pt.any():
        # normal reflection: coordinates decouple
        return _snap(np.maximum(-eta, 0.0)), _snap(np.maximum(eta, 0.0)), 1
    xi, iterations = _fixed_point(eta, Pt)
    xi, zeta, _ = _polish(eta, xi, R)
    _snap(xi)
    _snap(zeta)
    np.maximum(xi, 0.0, out=xi)
    np.maximum(zeta, 0.0, out=zeta)
    return xi, zeta, iterations


def lcp_inverse_arrays(theta, Pt, R):
    """Solve LCP(theta, Rinv) through the R-problem with input ``-R theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    xi_r, zeta_r, iterations = lcp_arrays(-matvec(R, theta), Pt, R)
    return zeta_r, xi_r, iterations


@dataclass(frozen=True)
class InverseView:
    """Marks that an LCP is posed with ``Rinv`` of ``refl`` instead of ``R``."""

    refl: ReflectionMatrix

    @property
    def matrix(self):
        return self.refl.Rinv


def inverse_view(refl):
    return InverseView(refl)


def _unpack(M):
    if isinstance(M, InverseView):
        return M.refl, True
    if isinstance(M, ReflectionMatrix):
        return M, False
    raise TypeError("M must be a ReflectionMatrix or an InverseView")


@dataclass(frozen=True, eq=False)
class LcpSolution:
    """Solution of one LCP: pushing part ``xi``, regulated part ``zeta``."""

    xi: np.ndarray
    zeta: np.ndarray
    active_set: frozenset
    iterations: int
    residual: float


def _residual(eta, M, xi, zeta):
    eq = np.abs(zeta - eta - M @ xi).max()
    infeas = max(0.0, -xi.min(), -zeta.min())
    comp = abs(float(xi @ zeta))
    return float(max(eq, infeas, comp))


def _make_solution(eta, M, xi, zeta, iterations):
    active = frozenset(int(i) for i in np.flatnonzero(xi > ACTIVE_TOL))
    return LcpSolution(xi=xi, zeta=zeta, active_set=active, iterations=iterations,
                       residual=_residual(eta, M, xi, zeta))


def solve_lcp(eta, M):
    """Solve LCP(eta, M) by projection iteration.

    Parameters
    ----------
    eta : array_like (d,)
    M : ReflectionMatrix or InverseView
        ``ReflectionMatrix`` poses the problem with ``R``; ``InverseView``
        poses it with ``Rinv`` and is solved through the dual transform.

    Returns
    -------
    LcpSolution
    """
    refl, inverse = _unpack(M)
    eta = as_vector(eta, d=refl.d, name="eta")
    solver = lcp_inverse_arrays if inverse else lcp_arrays
    xi, zeta, it = solver(eta[None, :], refl.Pt, refl.R)
    mat = refl.Rinv if inverse else refl.R
    return _make_solution(eta, mat, xi[0], zeta[0], it)


def solve_lcp_enum(eta, M):
    """Solve LCP(eta, M) by scanning every active set (``d <= 14``).

    For each subset ``S`` the system ``(M xi)_S = -eta_S`` is solved with
    ``xi`` zero off ``S``; the subset is accepted when ``xi`` and
    ``zeta = eta + M xi`` are nonnegative up to ``1e-11``. Accepted subsets
    that yield the same vector (degenerate ties) count once.

    Raises
    ------
    NoFeasibleActiveSet, MultipleSolutions
    """
    if isinstance(M, (ReflectionMatrix, InverseView)):
        refl, inverse = _unpack(M)
        mat = np.asarray(refl.Rinv if inverse else refl.R)
    else:
        mat = np.asarray(M, dtype=np.float64)
    d = mat.shape[0]
    eta = as_vector(eta, d=d, name="eta")
    if d > ENUM_MAX_DIM:
        raise ValueError(f"enumeration oracle is limited to d <= {ENUM_MAX_DIM}")
    found = []
    for mask in range(1 << d):
        S = [i for i in range(d) if mask >> i & 1]
        xi = np.zeros(d)
        if S:
            sub = mat[np.ix_(S, S)]
            try:
                xi[S] = np.linalg.solve(sub, -eta[S])
            except np.linalg.LinAlgError:
                continue
        zeta = eta + mat @ xi
        if xi.min() >= -ENUM_FEAS_TOL and zeta.min() >= -ENUM_FEAS_TOL:
            xi = np.maximum(_snap(xi), 0.0)
            zeta = eta + mat @ xi
            zeta[S] = 0.0
            zeta = np.maximum(_snap(zeta), 0.0)
            if not any(np.abs(xi - f[0]).max() <= 1e-9 for f in found):
                found.append((xi, zeta))
    if not found:
        raise NoFeasibleActiveSet("no active set yields a feasible solution", eta=eta.tolist())
    if len(found) > 1:
        raise MultipleSolutions(f"{len(found)} distinct solutions", eta=eta.tolist(),
                                solutions=[f[0].tolist() for f in found])
    xi, zeta = found[0]
    return _make_solution(eta, mat, xi, zeta, 1 << d)


def dual_transform_check(eta, refl, tol=1e-8):
    """Check ``Phi(eta,R) = Psi(-Rinv eta, Rinv)`` and ``Psi(eta,R) = Phi(-Rinv eta, Rinv)``.

    The R-side is solved by projection iteration; the Rinv-side by active-set
    enumeration on ``Rinv`` itself (for ``d <= 14``), so the two routes share
    no code path.

    Returns
    -------
    ok : bool
    witness : dict
    """
    eta = as_vector(eta, d=refl.d, name="eta")
    primal = solve_lcp(eta, refl)
    theta = -refl.Rinv @ eta
    if refl.d <= ENUM_MAX_DIM:
        dual = solve_lcp_enum(theta, inverse_view(refl))
    else:
        dual = solve_lcp(theta, inverse_view(refl))
    r_push = float(np.abs(primal.xi - dual.zeta).max())
    r_reg = float(np.abs(primal.zeta - dual.xi).max())
    witness = {
        "eta": eta.tolist(),
        "phi_R": primal.xi.tolist(),
        "psi_R": primal.zeta.tolist(),
        "phi_Rinv": dual.xi.tolist(),
        "psi_Rinv": dual.zeta.tolist(),
        "residual_push": r_push,
        "residual_regulated": r_reg,
    }
    return (r_push <= tol and r_reg <= tol), witness
