"""Time-reversed storage network and pathwise duality with the insurance network.

Over a horizon ``n`` the storage inputs are ``uhat_k = -Rinv u_{n+1-k}``; the
stock levels ``w`` and reinforcements ``v`` solve SP({sum uhat}, Rinv). The
reversal depends on ``n``, so every horizon gets a freshly built dual.
Setting ``forward=True`` instead drives the storage walk with unreversed
inputs ``-Rinv U_k``; that walk matches the reversed one in law only.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, LemmaViolation, OrthantRuinError
from .lcp import ENUM_MAX_DIM, inverse_view, lcp_inverse_arrays, matvec, solve_lcp_enum
from .orthant import as_vector
from .skorokhod import STRICT_TOL, _increments, first_index, running_deficit, sp_arrays

IDENTITY_TOL = 1e-8


def reverse_inputs(u, refl):
    """Dual increments ``uhat_k = -Rinv u_{n+1-k}`` for ``k = 1..n``."""
    u = _increments(u, refl.d)
    return -(u[::-1] @ refl.Rinv.T)


def reverse_arrays(u, Rinv):
    """Batched :func:`reverse_inputs`; ``u`` is (B, n, d), ``Rinv`` (d, d) or (B, d, d)."""
    flipped = u[:, ::-1]
    if Rinv.ndim == 2:
        return -(flipped @ Rinv.T)
    return -np.einsum("bij,bkj->bki", Rinv, flipped)


def storage_arrays(uhat, Pt, R):
    """Solve stacked storage problems SP({sum uhat}, Rinv) from ``w_0 = 0``.

    Returns ``v, w`` of shape (B, n + 1, d) and ``dv`` of shape (B, n, d).
    """
    B, n, d = uhat.shape
    v = np.zeros((B, n + 1, d))
    w = np.zeros((B, n + 1, d))
    dv = np.empty((B, n, d))
    for k in range(n):
        try:
            push, level, _ = lcp_inverse_arrays(w[:, k] + uhat[:, k], Pt, R)
        except OrthantRuinError as exc:
            exc.details["step"] = k + 1
            raise
        dv[:, k] = push
        w[:, k + 1] = level
        v[:, k + 1] = v[:, k] + push
    return v, w, dv


@dataclass(frozen=True, eq=False)
class StoragePath:
    """Storage network path; ``v`` and ``w`` include the zero start at row 0."""

    refl: object
    uhat: np.ndarray
    v: np.ndarray
    w: np.ndarray
    dv: np.ndarray
    forward: bool = False

    @property
    def n(self):
        return self.uhat.shape[0]

    def invariant_violations(self):
        Rinv = self.refl.Rinv
        S = np.vstack([np.zeros((1, self.refl.d)), np.cumsum(self.uhat, axis=0)])
        return {
            "skorokhod_equation": float(np.abs(self.w - S - self.v @ Rinv.T).max()),
            "orthant": float(max(0.0, -self.w.min())),
            "monotone": float(max(0.0, -self.dv.min(initial=0.0))),
            "complementarity": float(np.abs(np.einsum("kd,kd->k", self.w[1:], self.dv)).max(initial=0.0)),
        }

    def to_csv(self):
        """One row per step: ``k, uhat_*, w_*, dv_*, v_*`` (LF line endings, 17 significant digits)."""
        d = self.refl.d
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["k"]
        for name in ("uhat", "w", "dv", "v"):
            header += [f"{name}_{i + 1}" for i in range(d)]
        writer.writerow(header)
        zero = np.zeros(d)
        for k in range(self.n + 1):
            step = (self.uhat[k - 1], self.w[k], self.dv[k - 1], self.v[k]) if k else (zero, self.w[0], zero, self.v[0])
            writer.writerow([k] + [format(float(x), ".17g") for x in np.concatenate(step)])
        return buf.getvalue()


def solve_storage(uhat, refl, forward=False):
    """Solve the storage network driven by ``uhat`` (LCPs with ``Rinv``)."""
    uhat = _increments(uhat, refl.d)
    v, w, dv = storage_arrays(uhat[None], refl.Pt, refl.R)
    return StoragePath(refl=refl, uhat=uhat, v=v[0], w=w[0], dv=dv[0], forward=forward)


def hitting_arrays(w, b, strict_tol=STRICT_TOL):
    """First-passage indices for stacked levels ``w`` of shape (..., n, d), rows ``w_1..w_n``.

    Entries are 1-based step indices, 0 meaning "not within the horizon".
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == w.ndim - 1:
        b = b[..., None, :]
    diff = w - b
    geq = (diff >= -strict_tol).all(axis=-1)
    above = (diff > strict_tol)
    return {
        "sigma_bd": first_index((w <= strict_tol).any(axis=-1)),
        "sigma_0": first_index((np.abs(w) <= strict_tol).all(axis=-1)),
        "theta_open": first_index(above.all(axis=-1)),
        "theta_gt": first_index(geq & above.any(axis=-1)),
        "theta_geq": first_index(geq),
    }


@dataclass(frozen=True)
class HittingTimes:
    """First times (1-based) the storage levels meet each set; ``None`` if never.

    ``theta_open``, ``theta_gt`` and ``theta_geq`` are entrance times into
    ``{x >> b}``, ``{x > b}`` and ``{x >= b}``.
    """

    sigma_bd: int | None
    sigma_0: int | None
    theta_open: int | None
    theta_gt: int | None
    theta_geq: int | None
    b: tuple


def hitting_times(path, b, strict_tol=STRICT_TOL):
    """Hitting and entrance times of a storage path (or raw levels ``w_1..w_n``)."""
    w = path.w[1:] if isinstance(path, StoragePath) else np.atleast_2d(np.asarray(path, dtype=np.float64))
    b = as_vector(b, d=w.shape[1], name="b")
    times = hitting_arrays(w, b, strict_tol)
    conv = {k: (int(v) or None) for k, v in times.items()}
    return HittingTimes(b=tuple(b.tolist()), **conv)


def aux_arrays(a, u, Pt, R, Rinv):
    """Auxiliary LCP chain, batched.

    ``theta_1 = -Rinv a - Rinv u_1`` and ``theta_k = -Rinv dxi_{k-1} - Rinv u_k``;
    ``(dxi_k, zeta_k)`` solves LCP(theta_k, Rinv).
    """
    B, n, d = u.shape
    dxi = np.empty((B, n, d))
    zeta = np.empty((B, n, d))
    prev = a
    for k in range(n):
        theta = -matvec(Rinv, prev + u[:, k])
        dxi[:, k], zeta[:, k], _ = lcp_inverse_arrays(theta, Pt, R)
        prev = dxi[:, k]
    return dxi, zeta


@dataclass(frozen=True, eq=False)
class AuxSequence:
    xi: np.ndarray      # dxi_1..dxi_n
    zeta: np.ndarray    # zeta_1..zeta_n


def aux_sequence(a, u, refl, oracle=False, tol=IDENTITY_TOL):
    """Run the auxiliary LCP chain and compare it with the Skorokhod solution.

    The chain must reproduce ``dxi_k = z_k`` and ``zeta_k = dy_k``. With
    ``oracle=True`` (and ``d <= 14``) each LCP with ``Rinv`` is solved by
    active-set enumeration on ``Rinv`` directly.

    Returns
    -------
    AuxSequence, dict
        The chain and the largest deviations from ``z`` and ``dy``.

    Raises
    ------
    LemmaViolation
    """
    d = refl.d
    a = as_vector(a, d=d, name="a")
    u = _increments(u, d)
    if oracle:
        if d > ENUM_MAX_DIM:
            raise ValueError(f"oracle chain requires d <= {ENUM_MAX_DIM}")
        view = inverse_view(refl)
        xs, zs = [], []
        prev = a
        for k in range(u.shape[0]):
            sol = solve_lcp_enum(-refl.Rinv @ (prev + u[k]), view)
            xs.append(sol.xi)
            zs.append(sol.zeta)
            prev = sol.xi
        dxi, zeta = np.array(xs).reshape(u.shape), np.array(zs).reshape(u.shape)
    else:
        dxi, zeta = aux_arrays(a[None], u[None], refl.Pt, refl.R, refl.Rinv)
        dxi, zeta = dxi[0], zeta[0]
    _, z, dy = sp_arrays(a[None], u[None], refl.Pt, refl.R)
    gap_z = np.abs(dxi - z[0, 1:]).max(axis=1)
    gap_y = np.abs(zeta - dy[0]).max(axis=1)
    bad = np.flatnonzero((gap_z > tol) | (gap_y > tol))
    if bad.size:
        k = int(bad[0])
        raise LemmaViolation(f"auxiliary chain departs from the Skorokhod solution at step {k + 1}",
                             step=k + 1, gap_z=float(gap_z[k]), gap_dy=float(gap_y[k]))
    check = {"max_gap_z": float(gap_z.max(initial=0.0)), "max_gap_dy": float(gap_y.max(initial=0.0))}
    return AuxSequence(xi=dxi, zeta=zeta), check


# Names of the per-instance checks produced by ``duality_arrays``; each maps to
# a boolean "passed" array.
CHECKS = (
    "ss_equivalence",
    "s_equivalence",
    "ruin_equivalence",
    "ss_values",
    "s_values",
    "ruin_values",
    "zero_capital_equivalence",
    "zero_capital_values",
    "y0ya_ss",
    "y0ya_ruin",
    "y0ya_values",
    "y0ya_ss_forward",
    "y0ya_ruin_forward",
    "connc1",
    "aux_lcp",
    "reinforcement_identity",
    "step_predicates",
    "a_priori_bound",
)


def _close(x, y, tol=IDENTITY_TOL):
    return (np.abs(x - y) <= tol * (1.0 + np.abs(y))).all(axis=-1)


def duality_arrays(a, u, Pt, R, Rinv, strict_tol=STRICT_TOL):
    """Evaluate every pathwise duality statement for stacked instances at horizon ``n``.

    Parameters
    ----------
    a : ndarray (B, d)
    u : ndarray (B, n, d)
    Pt, R, Rinv : ndarray (d, d) or (B, d, d)

    Returns
    -------
    passed : dict of name -> bool ndarray (B,)
    data : dict of intermediate arrays (predicates, levels, hitting times)
    """
    B, n, d = u.shape
    tol = strict_tol
    y, z, dy = sp_arrays(a, u, Pt, R)
    y0, z0, dy0 = sp_arrays(np.zeros_like(a), u, Pt, R)
    uhat = reverse_arrays(u, Rinv)
    v, w, dv = storage_arrays(uhat, Pt, R)
    b = matvec(Rinv, a)
    S = uhat.sum(axis=1)                         # sum_l (-Rinv u_l)
    hit = hitting_arrays(w[:, 1:], b, tol)

    yn, zn, dyn, wn, vn = y[:, n], z[:, n], dy[:, n - 1], w[:, n], v[:, n]
    ruin, s_ruin, ss_ruin = (f[:, n - 1] for f in _ruin_steps(z, dy, tol))
    ruin0, _, ss0 = (f[:, n - 1] for f in _ruin_steps(z0, dy0, tol))

    never = lambda t: t == 0                     # first time beyond the horizon
    within = lambda t: (t >= 1) & (t <= n)
    v_zero = np.abs(vn).max(axis=1) <= tol
    diff = wn - b
    w_gg = (diff > tol).all(axis=1)
    w_geq = (diff >= -tol).all(axis=1)
    w_gt = w_geq & (diff > tol).any(axis=1)

    rhs_ss = within(hit["theta_open"]) & never(hit["sigma_bd"]) & w_gg
    rhs_s = within(hit["theta_gt"]) & never(hit["sigma_0"]) & v_zero & w_gt
    rhs_r = within(hit["theta_geq"]) & v_zero & w_geq

    target = S - b                               # -Rinv a + sum(-Rinv u)
    z_zero = np.abs(zn).max(axis=1) <= tol
    values_ok = _close(yn, target) & z_zero & v_zero

    passed = {}
    passed["ss_equivalence"] = ss_ruin == rhs_ss
    passed["s_equivalence"] = s_ruin == rhs_s
    passed["ruin_equivalence"] = ruin == rhs_r
    passed["ss_values"] = ~ss_ruin | values_ok
    passed["s_values"] = ~s_ruin | values_ok
    passed["ruin_values"] = ~ruin | values_ok

    # zero capital: [y0_n : dy0_n >> 0] = [w_n : n < sigma_bd] and y0_n = w_n = S
    rhs_zero = never(hit["sigma_bd"])
    passed["zero_capital_equivalence"] = ss0 == rhs_zero
    passed["zero_capital_values"] = ~ss0 | (_close(y0[:, n], S) & _close(wn, S))

    y0n = y0[:, n]
    y0ya_ss = ss0 & (y0n - b > tol).all(axis=1)
    y0ya_ruin = ruin0 & (y0n - b >= -tol).all(axis=1)
    passed["y0ya_ss"] = ss_ruin == y0ya_ss
    passed["y0ya_ruin"] = ruin == y0ya_ruin
    # only ruin at a => zero-capital condition survives oblique reflection
    passed["y0ya_ss_forward"] = ~ss_ruin | y0ya_ss
    passed["y0ya_ruin_forward"] = ~ruin | y0ya_ruin
    passed["y0ya_values"] = ~(ss_ruin | ruin) | (_close(yn, y0n - b) & _close(zn, z0[:, n]))

    passed["connc1"] = ~ss_ruin | (v_zero & (w[:, 1:] > tol).all(axis=(1, 2)))

    dxi, zeta = aux_arrays(a, u, Pt, R, Rinv)
    passed["aux_lcp"] = (np.abs(dxi - z[:, 1:]) <= IDENTITY_TOL).all(axis=(1, 2)) & \
                        (np.abs(zeta - dy) <= IDENTITY_TOL).all(axis=(1, 2))

    passed["reinforcement_identity"] = _reinforcement_ok(uhat, w, dv, Rinv, tol)
    passed["step_predicates"] = _step_predicates_ok(u, z, dy, Rinv, tol)

    h = running_deficit(a[:, None, :], u)
    bound = matvec(Rinv, h.reshape(-1, d)).reshape(h.shape) if Rinv.ndim == 2 else np.einsum("bij,bkj->bki", Rinv, h)
    passed["a_priori_bound"] = (y[:, 1:] <= bound + 1e-9 * (1.0 + np.abs(bound))).all(axis=(1, 2))

    data = {
        "ss_ruin": ss_ruin, "s_ruin": s_ruin, "ruin": ruin,
        "rhs_ss": rhs_ss, "rhs_s": rhs_s, "rhs_ruin": rhs_r,
        "ss_ruin_zero_capital": ss0, "ruin_zero_capital": ruin0,
        "y_n": yn, "z_n": zn, "dy_n": dyn, "y0_n": y0n, "z0_n": z0[:, n],
        "w_n": wn, "v_n": vn, "b": b, "sum_uhat": S, "hitting": hit,
    }
    return passed, data


def _ruin_steps(z, dy, tol):
    at_zero = np.abs(z[:, 1:]).max(axis=2) <= tol
    pushed = dy > tol
    return at_zero, at_zero & pushed.any(axis=2), pushed.all(axis=2)


def _reinforcement_ok(uhat, w, dv, Rinv, tol):
    # where (dv_k)_i > 0:  Rinv_ii dv_i = -[w_{k-1,i} + uhat_{k,i} + sum_{j != i} Rinv_ij dv_j]
    if Rinv.ndim == 2:
        full = dv @ Rinv.T
        diag = np.diag(Rinv)
    else:
        full = np.einsum("bij,bkj->bki", Rinv, dv)
        diag = np.diagonal(Rinv, axis1=1, axis2=2)[:, None, :]
    lhs = diag * dv
    rhs = -(w[:, :-1] + uhat + full - lhs)
    ok = ~(dv > tol) | (np.abs(lhs - rhs) <= IDENTITY_TOL * (1.0 + np.abs(lhs)))
    return ok.all(axis=(1, 2))


def _step_predicates_ok(u, z, dy, Rinv, tol):
    # dy_k >> 0  iff  -Rinv u_k >> Rinv z_{k-1}, and the > / >= analogues
    if Rinv.ndim == 2:
        gap = -(u + z[:, :-1]) @ Rinv.T
    else:
        gap = -np.einsum("bij,bkj->bki", Rinv, u + z[:, :-1])
    at_zero, s, ss = _ruin_steps(z, dy, tol)
    pred_ss = (gap > tol).all(axis=2)
    pred_r = (gap >= -tol).all(axis=2)
    pred_s = pred_r & (gap > tol).any(axis=2)
    return ((pred_ss == ss) & (pred_s == s) & (pred_r == at_zero)).all(axis=1)


@dataclass(frozen=True, eq=False)
class DualityVerdict:
    """Outcome of every pathwise duality check for one instance at horizon ``n``."""

    n: int
    checks: dict
    witness: dict = field(repr=False)

    @property
    def passed(self):
        return all(self.checks.values())

    def failures(self):
        return [name for name, ok in self.checks.items() if not ok]

    def to_dict(self):
        return {"n": self.n, "passed": self.passed, "checks": dict(self.checks), "witness": self.witness}


def _tolist(x):
    if isinstance(x, dict):
        return {k: _tolist(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def duality_verdict(a, u, refl, strict_tol=STRICT_TOL):
    """Solve the primal and the freshly reversed dual for one instance and judge every duality statement.

    Failures are reported in the returned verdict; nothing is raised for them.
    """
    d = refl.d
    a = as_vector(a, d=d, name="a")
    u = _increments(u, d)
    if u.shape[0] < 1:
        raise DimensionMismatch("horizon must be at least 1")
    passed, data = duality_arrays(a[None], u[None], refl.Pt, refl.R, refl.Rinv, strict_tol)
    checks = {name: bool(passed[name][0]) for name in CHECKS}
    witness = {}
    for key, val in data.items():
        if key == "hitting":
            witness[key] = {k: (int(t[0]) or None) for k, t in val.items()}
        else:
            witness[key] = _tolist(val[0])
    witness["a"] = a.tolist()
    witness["uhat"] = reverse_inputs(u, refl).tolist()
    return DualityVerdict(n=u.shape[0], checks=checks, witness=witness)
