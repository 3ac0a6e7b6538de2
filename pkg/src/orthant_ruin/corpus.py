"""Randomized corpus for the exact finite-horizon duality statements."""

import time
from dataclasses import dataclass, field

import numpy as np

from .skorokhod import STRICT_TOL
from .storage import CHECKS, duality_arrays
from .streams import derive_stream

KINDS = ("continuous", "lattice")


def random_interaction(rng, B, d, lattice=False):
    """``B`` random admissible interaction matrices of size ``d``.

    Off-diagonal entries are uniform on ``[0, 0.9 / (d - 1)]`` (row sums at
    most 0.9, so rho < 1); about a third are zeroed to produce reducible and
    feedforward structure. ``lattice=True`` uses the grid ``{0, .45, .9}/(d-1)``.
    """
    if d == 1:
        return np.zeros((B, 1, 1))
    scale = 0.9 / (d - 1)
    if lattice:
        P = rng.integers(0, 3, size=(B, d, d)) * (scale / 2)
    else:
        P = rng.uniform(0.0, scale, size=(B, d, d))
        P *= rng.random((B, d, d)) > 1 / 3
    P[:, np.arange(d), np.arange(d)] = 0.0
    return P


def random_inputs(rng, B, n, d, lattice=False):
    """Initial capitals (B, d) and increments (B, n, d) with mixed signs."""
    if lattice:
        a = rng.integers(0, 3, size=(B, d)).astype(float) * (rng.random((B, 1)) < 0.5)
        u = rng.integers(-2, 3, size=(B, n, d)).astype(float)
        return a, u
    a = rng.exponential(1.0, size=(B, d)) * (rng.random((B, 1)) < 0.5)
    drift = rng.uniform(-1.0, 0.5, size=(B, 1, 1))
    u = drift + rng.standard_normal((B, n, d))
    return a, u


@dataclass
class CorpusSummary:
    kind: str
    instances: int
    failures: dict
    events: dict
    first_counterexample: dict | None = None
    seconds: float = field(default=0.0, compare=False)

    @property
    def total_failures(self):
        return sum(self.failures.values())

    def to_dict(self):
        return {
            "kind": self.kind,
            "instances": self.instances,
            "total_failures": self.total_failures,
            "failures": dict(self.failures),
            "events": dict(self.events),
            "first_counterexample": self.first_counterexample,
        }


def duality_corpus(n_instances=100_000, dmax=5, nmax=40, seed=0, kind="continuous",
                   strict_tol=STRICT_TOL, group_size=2048):
    """Check all pathwise duality statements on random ``(a, u, P)`` instances.

    Dimensions and horizons are drawn uniformly from ``1..dmax`` and
    ``1..nmax``; instances sharing ``(d, n)`` are solved together.
    ``kind="lattice"`` draws integer increments and grid matrices, which
    produces exact ties at the orthant boundary.

    Returns
    -------
    CorpusSummary
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    start = time.perf_counter()
    lattice = kind == "lattice"
    failures = {name: 0 for name in CHECKS}
    events = {"ss_ruin": 0, "s_ruin": 0, "ruin": 0}
    first = None
    if n_instances <= 0:
        return CorpusSummary(kind, 0, failures, events, None, 0.0)

    master = derive_stream(seed, 0, "corpus")
    dims = master.integers(1, dmax + 1, size=n_instances)
    horizons = master.integers(1, nmax + 1, size=n_instances)
    keys = sorted(set(zip(dims.tolist(), horizons.tolist())))
    for g, (d, n) in enumerate(keys):
        count = int(np.sum((dims == d) & (horizons == n)))
        rng = derive_stream(seed, g + 1, "corpus")
        for lo in range(0, count, group_size):
            B = min(group_size, count - lo)
            P = random_interaction(rng, B, d, lattice)
            Pt = np.transpose(P, (0, 2, 1))
            R = np.eye(d) - Pt
            Rinv = np.linalg.inv(R)
            Rinv[np.abs(Rinv) < 1e-15] = 0.0
            a, u = random_inputs(rng, B, n, d, lattice)
            passed, data = duality_arrays(a, u, Pt, R, Rinv, strict_tol)
            for name in CHECKS:
                failures[name] += int(np.sum(~passed[name]))
            events["ss_ruin"] += int(data["ss_ruin"].sum())
            events["s_ruin"] += int(data["s_ruin"].sum())
            events["ruin"] += int(data["ruin"].sum())
            if first is None:
                bad = np.flatnonzero(~np.all([passed[c] for c in CHECKS], axis=0))
                if bad.size:
                    i = int(bad[0])
                    first = {
                        "d": d, "n": n,
                        "P": P[i].tolist(), "a": a[i].tolist(), "u": u[i].tolist(),
                        "failed": [c for c in CHECKS if not passed[c][i]],
                    }
    return CorpusSummary(kind, int(n_instances), failures, events, first, time.perf_counter() - start)
