"""Increment models for the insurance network and hypothesis validation.

An increment is ``U = A c - X``: interarrival time ``A`` times the premium
rates ``c`` minus the claim vector ``X``. Three modes are supported.

``renewal_network``
    A claim of size ``J_i`` is routed to company ``i`` with probability
    ``p_i``; ``X = J_i e_i``.
``cl_network``
    Independent compound Poisson companies with claim rates ``lambda_i``,
    merged at claim arrivals: ``A ~ Exp(sum lambda)``, ``p_i = lambda_i / sum lambda``.
``plus_minus_walk``
    ``U = +1`` or ``-1`` in every coordinate at once, ``P(-1) = q``. Encoded
    as ``A = 1``, ``c = 1`` and the vector claim ``2 * ones`` with probability ``q``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfig, NetProfitViolated

MODES = ("renewal_network", "cl_network", "plus_minus_walk")
CLAIM_FAMILIES = ("exponential", "pareto", "lognormal", "deterministic", "two_point")
INTERARRIVAL_FAMILIES = ("exponential", "deterministic", "gamma")

HOLDS, VIOLATED, UNVERIFIABLE = "holds", "violated", "unverifiable"


class NetProfitWarning(UserWarning):
    pass


def _positive(spec, key, where):
    try:
        val = float(spec[key])
    except (KeyError, TypeError, ValueError):
        raise InvalidConfig(f"{where}: '{key}' is required and must be a number") from None
    if not (math.isfinite(val) and val > 0):
        raise InvalidConfig(f"{where}: '{key}' must be positive and finite", value=val)
    return val


@dataclass(frozen=True)
class ClaimDistribution:
    """Size law of a single claim.

    ``params`` per family: exponential ``mean``; pareto ``shape``, ``scale``
    (support ``[scale, inf)``); lognormal ``mu``, ``sigma``; deterministic
    ``size`` (``0`` gives a no-claims model); two_point ``sizes``, ``probs``.
    """

    family: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, spec, where="claim"):
        if not isinstance(spec, dict) or spec.get("family") not in CLAIM_FAMILIES:
            raise InvalidConfig(f"{where}: family must be one of {CLAIM_FAMILIES}")
        fam = spec["family"]
        if fam == "exponential":
            params = {"mean": _positive(spec, "mean", where)}
        elif fam == "pareto":
            params = {"shape": _positive(spec, "shape", where), "scale": _positive(spec, "scale", where)}
        elif fam == "lognormal":
            mu = spec.get("mu")
            if not isinstance(mu, (int, float)) or not math.isfinite(mu):
                raise InvalidConfig(f"{where}: 'mu' must be a finite number")
            params = {"mu": float(mu), "sigma": _positive(spec, "sigma", where)}
        elif fam == "deterministic":
            size = spec.get("size")
            if not isinstance(size, (int, float)) or not math.isfinite(size) or size < 0:
                raise InvalidConfig(f"{where}: 'size' must be a nonnegative number")
            params = {"size": float(size)}
        else:
            sizes = np.asarray(spec.get("sizes", []), dtype=float)
            probs = np.asarray(spec.get("probs", []), dtype=float)
            if sizes.shape != (2,) or probs.shape != (2,):
                raise InvalidConfig(f"{where}: two_point needs two sizes and two probs")
            if np.any(sizes < 0) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise InvalidConfig(f"{where}: two_point sizes must be >= 0 and probs a probability vector")
            params = {"sizes": sizes.tolist(), "probs": probs.tolist()}
        return cls(fam, params)

    @property
    def mean(self):
        p = self.params
        if self.family == "exponential":
            return p["mean"]
        if self.family == "pareto":
            a = p["shape"]
            return a * p["scale"] / (a - 1) if a > 1 else math.inf
        if self.family == "lognormal":
            return math.exp(p["mu"] + p["sigma"] ** 2 / 2)
        if self.family == "deterministic":
            return p["size"]
        return float(np.dot(p["sizes"], p["probs"]))

    @property
    def unbounded(self):
        return self.family in ("exponential", "pareto", "lognormal")

    @property
    def atomless(self):
        """No atoms on ``(0, inf)``."""
        if self.family == "deterministic":
            return self.params["size"] == 0
        if self.family == "two_point":
            return all(s == 0 or q == 0 for s, q in zip(self.params["sizes"], self.params["probs"]))
        return True

    def sample(self, rng, size):
        p = self.params
        if self.family == "exponential":
            return rng.exponential(p["mean"], size)
        if self.family == "pareto":
            return p["scale"] * (1.0 + rng.pareto(p["shape"], size))
        if self.family == "lognormal":
            return rng.lognormal(p["mu"], p["sigma"], size)
        if self.family == "deterministic":
            return np.full(size, p["size"])
        return np.where(rng.random(size) < p["probs"][0], p["sizes"][0], p["sizes"][1])

    def to_dict(self):
        return {"family": self.family, **self.params}


@dataclass(frozen=True)
class Interarrival:
    family: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, spec, where="interarrival"):
        if not isinstance(spec, dict) or spec.get("family") not in INTERARRIVAL_FAMILIES:
            raise InvalidConfig(f"{where}: family must be one of {INTERARRIVAL_FAMILIES}")
        fam = spec["family"]
        if fam == "exponential":
            params = {"rate": _positive(spec, "rate", where)}
        elif fam == "deterministic":
            params = {"delta": _positive(spec, "delta", where)}
        else:
            params = {"shape": _positive(spec, "shape", where), "rate": _positive(spec, "rate", where)}
        return cls(fam, params)

    @property
    def mean(self):
        p = self.params
        if self.family == "exponential":
            return 1.0 / p["rate"]
        if self.family == "deterministic":
            return p["delta"]
        return p["shape"] / p["rate"]

    def sample(self, rng, size):
        p = self.params
        if self.family == "exponential":
            return rng.exponential(1.0 / p["rate"], size)
        if self.family == "deterministic":
            return np.full(size, p["delta"])
        return rng.gamma(p["shape"], 1.0 / p["rate"], size)

    def to_dict(self):
        return {"family": self.family, **self.params}


@dataclass(frozen=True)
class ModelConfig:
    """Validated model description.

    Use :meth:`from_dict` to build one from the ``model`` object of a run
    configuration; derived quantities of the Cramér–Lundberg mode (routing and
    interarrival law) are filled in there.
    """

    mode: str
    d: int
    premium_rates: tuple
    interarrival: Interarrival
    routing: tuple
    claims: tuple
    arrival_rates: tuple | None = None
    q: float | None = None
    strict: bool = False

    @classmethod
    def from_dict(cls, spec):
        if not isinstance(spec, dict):
            raise InvalidConfig("model must be an object")
        mode = spec.get("mode")
        if mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}", mode=mode)
        d = spec.get("d")
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise InvalidConfig("d must be a positive integer")
        strict = bool(spec.get("strict", False))

        if mode == "plus_minus_walk":
            q = spec.get("q")
            if not isinstance(q, (int, float)) or not 0 <= q <= 1:
                raise InvalidConfig("plus_minus_walk needs q in [0, 1]")
            two = ClaimDistribution("two_point", {"sizes": [0.0, 2.0], "probs": [1.0 - q, float(q)]})
            return cls(mode, d, (1.0,) * d, Interarrival("deterministic", {"delta": 1.0}),
                       (1.0 / d,) * d, (two,) * d, None, float(q), strict)

        c = np.asarray(spec.get("premium_rates", []), dtype=float)
        if c.shape != (d,) or not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise InvalidConfig(f"premium_rates must be {d} positive numbers")
        claims = spec.get("claims")
        if isinstance(claims, dict):
            claims = [claims] * d
        if not isinstance(claims, list) or len(claims) != d:
            raise InvalidConfig(f"claims must be one distribution or a list of {d}")
        claims = tuple(ClaimDistribution.from_dict(cd, f"claims[{i}]") for i, cd in enumerate(claims))

        if mode == "cl_network":
            lam = np.asarray(spec.get("arrival_rates", []), dtype=float)
            if lam.shape != (d,) or not np.all(np.isfinite(lam)) or np.any(lam <= 0):
                raise InvalidConfig(f"arrival_rates must be {d} positive numbers")
            for key in ("routing", "interarrival"):
                if key in spec:
                    raise InvalidConfig(f"'{key}' is derived in cl_network mode and must not be given")
            total = float(lam.sum())
            return cls(mode, d, tuple(c.tolist()), Interarrival("exponential", {"rate": total}),
                       tuple((lam / total).tolist()), claims, tuple(lam.tolist()), None, strict)

        p = np.asarray(spec.get("routing", []), dtype=float)
        if p.shape != (d,) or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise InvalidConfig(f"routing must be {d} positive probabilities summing to 1")
        inter = Interarrival.from_dict(spec.get("interarrival"))
        return cls(mode, d, tuple(c.tolist()), inter, tuple(p.tolist()), claims, None, None, strict)

    def to_dict(self):
        out = {"mode": self.mode, "d": self.d}
        if self.mode == "plus_minus_walk":
            out["q"] = self.q
        else:
            out["premium_rates"] = list(self.premium_rates)
            out["claims"] = [c.to_dict() for c in self.claims]
            if self.mode == "cl_network":
                out["arrival_rates"] = list(self.arrival_rates)
            else:
                out["routing"] = list(self.routing)
                out["interarrival"] = self.interarrival.to_dict()
        out["strict"] = self.strict
        return out


@dataclass(frozen=True)
class HypothesisReport:
    """Status of each modelling hypothesis, with one-line notes."""

    status: dict
    notes: dict
    net_profit_margins: tuple

    def holds(self, *names):
        return all(self.status[n] == HOLDS for n in names)

    def to_dict(self):
        return {
            "hypotheses": {k: {"status": self.status[k], "note": self.notes[k]} for k in self.status},
            "net_profit_margins": list(self.net_profit_margins),
        }


@dataclass(frozen=True, eq=False)
class Model:
    """A sampler for i.i.d. increments bound to a reflection matrix."""

    config: ModelConfig
    refl: object

    @property
    def d(self):
        return self.config.d

    @property
    def c(self):
        return np.asarray(self.config.premium_rates)

    def mean_increment(self):
        cfg = self.config
        if cfg.mode == "plus_minus_walk":
            return np.full(cfg.d, 1.0 - 2.0 * cfg.q)
        means = np.array([cd.mean for cd in cfg.claims])
        return cfg.interarrival.mean * self.c - np.asarray(cfg.routing) * means

    def sample_increments(self, rng, size):
        """``size`` i.i.d. increments, shape (size, d)."""
        cfg = self.config
        if cfg.mode == "plus_minus_walk":
            down = rng.random(size) < cfg.q
            return np.repeat(np.where(down, -1.0, 1.0)[:, None], cfg.d, axis=1)
        A = cfg.interarrival.sample(rng, size)
        U = A[:, None] * self.c[None, :]
        if cfg.d == 1:
            company = np.zeros(size, dtype=np.intp)
        else:
            company = rng.choice(cfg.d, size=size, p=np.asarray(cfg.routing))
        sizes = np.empty(size)
        for i, cd in enumerate(cfg.claims):
            idx = np.flatnonzero(company == i)
            if idx.size:
                sizes[idx] = cd.sample(rng, idx.size)
        U[np.arange(size), company] -= sizes
        return U

    def sample_increment(self, rng):
        return self.sample_increments(rng, 1)[0]


def _report(cfg, refl):
    status, notes = {}, {}
    status["H1"], notes["H1"] = HOLDS, f"reflection matrix validated, rho(P) = {refl.rho:.6g}"
    if refl.h2:
        status["H2"], notes["H2"] = HOLDS, f"column {refl.h2_column + 1} of Rinv is strictly positive"
    else:
        status["H2"], notes["H2"] = VIOLATED, "no column of Rinv is strictly positive"
    status["H3"], notes["H3"] = HOLDS, f"{cfg.interarrival.family} interarrival times are i.i.d. and positive"
    status["H4"], notes["H4"] = HOLDS, "claims are i.i.d. nonnegative vectors"
    status["H5"], notes["H5"] = HOLDS, "interarrival and claim families are sampled independently"

    if cfg.mode == "plus_minus_walk":
        status["H6"], notes["H6"] = VIOLATED, "claim vector takes only the values 0 and 2"
        status["H7"], notes["H7"] = (VIOLATED, "atom at 2") if cfg.q > 0 else (HOLDS, "no claims")
        means = np.full(cfg.d, 2.0 * cfg.q)
        margins = 1.0 - means
    else:
        means = np.asarray(cfg.routing) * np.array([cd.mean for cd in cfg.claims])
        margins = np.asarray(cfg.premium_rates) * cfg.interarrival.mean - means
        bounded = [i + 1 for i, cd in enumerate(cfg.claims) if not cd.unbounded]
        status["H6"], notes["H6"] = (
            (HOLDS, "every claim family has unbounded support") if not bounded
            else (VIOLATED, f"bounded claim support for companies {bounded}"))
        atoms = [i + 1 for i, cd in enumerate(cfg.claims) if not cd.atomless]
        status["H7"], notes["H7"] = (
            (HOLDS, "claim families have no atoms on (0, inf)") if not atoms
            else (VIOLATED, f"claim atoms on (0, inf) for companies {atoms}"))

    margins = np.where(np.isfinite(means), margins, -np.inf)
    if np.all(margins > 0):
        status["H8"], notes["H8"] = HOLDS, "coordinatewise net profit condition holds"
    elif not np.all(np.isfinite(means)):
        status["H8"], notes["H8"] = VIOLATED, "infinite mean claim size"
    else:
        bad = [i + 1 for i in np.flatnonzero(margins <= 0)]
        status["H8"], notes["H8"] = VIOLATED, f"nonpositive net profit margin for companies {bad}"

    status["H9"], notes["H9"] = _h9(cfg, refl)
    return HypothesisReport(status, notes, tuple(float(m) for m in margins))


def _h9(cfg, refl):
    # Rinv X = J * (column i of Rinv) when a claim J goes to company i
    if cfg.mode == "plus_minus_walk":
        return VIOLATED, "Rinv X is bounded"
    positive_cols = np.all(refl.Rinv > 0, axis=0)
    good = [i for i, cd in enumerate(cfg.claims) if cd.unbounded and positive_cols[i]]
    if good:
        return HOLDS, f"unbounded claims routed through positive Rinv column {good[0] + 1}"
    if any(cd.family == "two_point" for cd in cfg.claims):
        return UNVERIFIABLE, "two-point claim marginals do not determine the support of Rinv X"
    return VIOLATED, "no routed claim has unbounded support along a positive Rinv column"


def build_model(cfg, refl):
    """Bind a model configuration to a reflection matrix and check hypotheses.

    Parameters
    ----------
    cfg : ModelConfig or dict
    refl : ReflectionMatrix

    Returns
    -------
    model : Model
    report : HypothesisReport

    Raises
    ------
    InvalidConfig
        Dimension mismatch, or a Pareto shape <= 1 in strict mode.
    NetProfitViolated
        Net profit condition fails and ``cfg.strict`` is set.
    """
    if isinstance(cfg, dict):
        cfg = ModelConfig.from_dict(cfg)
    if cfg.d != refl.d:
        raise InvalidConfig(f"model dimension {cfg.d} does not match matrix dimension {refl.d}")
    report = _report(cfg, refl)
    if cfg.strict:
        heavy = [i + 1 for i, cd in enumerate(cfg.claims) if cd.family == "pareto" and cd.params["shape"] <= 1]
        if heavy:
            raise InvalidConfig("Pareto shape must exceed 1 in strict mode", companies=heavy)
        if report.status["H8"] != HOLDS:
            raise NetProfitViolated(report.notes["H8"], margins=list(report.net_profit_margins))
    elif report.status["H8"] != HOLDS:
        warnings.warn(report.notes["H8"], NetProfitWarning, stacklevel=2)
    return Model(cfg, refl), report
