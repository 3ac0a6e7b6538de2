"""Claims report: every infinite-horizon identity measured from both sides.

Each claim entry holds a left and right estimate, a closed-form value when
one exists, a z-score and a verdict. Serialization is deterministic: fixed
key order, floats with 17 significant digits, no timestamps.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import estimators as est
from .estimators import Estimate, z_score
from .skorokhod import STRICT_TOL

CONSISTENT, INCONSISTENT, INCONCLUSIVE = "consistent", "inconsistent", "inconclusive"
DEFAULT_THRESHOLDS = {"consistent": 4.0, "inconsistent": 6.0}


def verdict(z, thresholds=DEFAULT_THRESHOLDS):
    """``|z| < consistent`` is consistent, ``|z| > inconsistent`` inconsistent, else inconclusive."""
    if z is None or (isinstance(z, float) and math.isnan(z)):
        return INCONCLUSIVE
    if abs(z) < thresholds["consistent"]:
        return CONSISTENT
    if abs(z) > thresholds["inconsistent"]:
        return INCONSISTENT
    return INCONCLUSIVE


def p_to_z(pvalue):
    """Two-sided p-value to the matching absolute normal score."""
    return float(stats.norm.isf(max(pvalue, 1e-300) / 2.0))


@dataclass
class Settings:
    """Sizes and seeds for one report run."""

    horizon: int = 2000
    n_paths: int = 100_000
    seed: int = 0
    step_cap: int = 100_000
    strict_tol: float = STRICT_TOL
    kmax: int = 10
    identity_horizon: int = 10
    n_jobs: int = 1
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def to_dict(self):
        # n_jobs is left out on purpose: it must not change the payload
        return {"horizon": self.horizon, "n_paths": self.n_paths, "seed": self.seed,
                "step_cap": self.step_cap, "strict_tol": self.strict_tol, "kmax": self.kmax,
                "identity_horizon": self.identity_horizon, "thresholds": dict(self.thresholds)}


def _claim(cid, statement, lhs, rhs, thresholds, closed_form=None, z=None, note=None):
    if z is None:
        z = z_score(lhs, rhs) if rhs is not None else None
    entry = {
        "id": cid,
        "statement": statement,
        "lhs": lhs.to_dict() if isinstance(lhs, Estimate) else lhs,
        "rhs": rhs.to_dict() if isinstance(rhs, Estimate) else rhs,
        "closed_form": closed_form,
        "z": z,
        "verdict": verdict(z, thresholds),
    }
    if note:
        entry["note"] = note
    return entry


def _interval_claim(cid, statement, e, thresholds):
    # strictly inside (0, 1) with a three-standard-error margin
    inside = e.value - 3 * e.std_error > 0 and e.value + 3 * e.std_error < 1
    entry = _claim(cid, statement, e, None, thresholds)
    entry["verdict"] = CONSISTENT if inside else INCONSISTENT
    return entry


@dataclass
class ClaimsReport:
    """Everything measured in one run, ready to serialize."""

    header: dict
    hypotheses: dict
    estimates: dict
    sigma_bd_table: list
    identity_table: list
    claims: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def identity_failed(self):
        """True when a per-horizon identity row has ``|z|`` at or above the consistency threshold."""
        lim = self.header["settings"]["thresholds"]["consistent"]
        return any(abs(r["z"]) >= lim for r in self.identity_table)

    def verdicts(self):
        return {c["id"]: c["verdict"] for c in self.claims}

    def to_dict(self):
        return {
            "header": self.header,
            "hypotheses": self.hypotheses,
            "estimates": self.estimates,
            "sigma_bd_table": self.sigma_bd_table,
            "per_horizon_identity": self.identity_table,
            "claims": self.claims,
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        return dumps(self.to_dict())

    def identity_csv(self):
        return table_csv(self.identity_table, ["n", "lhs", "lhs_se", "rhs", "rhs_se", "z",
                                               "conditional", "conditional_se"])

    def sigma_bd_csv(self):
        return table_csv(self.sigma_bd_table, ["k", "survival", "survival_se", "geometric", "geometric_se", "z"])


def _closed_forms(model, a):
    """Closed-form anchors available for this model, keyed by quantity."""
    cfg = model.config
    out = {}
    if cfg.d != 1:
        return out
    if cfg.mode == "plus_minus_walk" and a[0] == 0:
        out["ss_ruin"] = est.closed_form_oracles("gamblers_ruin", q=cfg.q)
        out["storage"] = cfg.q
        out["p"] = cfg.q
    elif cfg.mode == "cl_network" and cfg.claims[0].family == "exponential":
        lam, mu, c = cfg.arrival_rates[0], cfg.claims[0].params["mean"], cfg.premium_rates[0]
        out["ss_ruin"] = est.closed_form_oracles("cl_ruin_prob", lam=lam, mu=mu, c=c, a=float(a[0]))
        out["p"] = est.closed_form_oracles("storage_p_cl", lam=lam, mu=mu, c=c)
        out["sigma_bd_gt2"] = est.closed_form_oracles("cl_sigma_bd_gt2", lam=lam, mu=mu, c=c)
        if a[0] == 0:
            out["storage"] = out["p"]
    return out


def build_claims_report(model, report, a=None, settings=None, methods=("direct", "storage", "ladder")):
    """Run the estimators and assemble a :class:`ClaimsReport`.

    ``methods`` selects the estimator families; the per-horizon identity,
    ``p_hat`` and the ``sigma_bd`` table are always included. Every estimator
    draws from its own stream under ``settings.seed``.
    """
    s = settings or Settings()
    th = s.thresholds
    a = est._capital(a, model)
    kw = {"n_jobs": s.n_jobs, "strict_tol": s.strict_tol}
    closed = _closed_forms(model, a)
    estimates, claims = {}, []

    p_hat = est.estimate_p(model, s.n_paths, s.seed, **kw)
    estimates["p_hat"] = p_hat.to_dict()
    freq = est.nontrivial_frequency(model, s.n_paths, s.seed, **kw)
    estimates["nontrivial_frequency"] = {"first_half": freq["first_half"], "second_half": freq["second_half"],
                                         "delta_0": freq["frequency"].to_dict()}
    delta0 = freq["frequency"]
    entry = _claim("nontrivial_ruin_step_positive",
                   "one step pushes every company at once with positive probability, again and again",
                   delta0, None, th)
    entry["verdict"] = CONSISTENT if delta0.value - 3 * delta0.std_error > 0 and freq["second_half"] > 0 \
        else INCONSISTENT
    claims.append(entry)

    direct = storage = ladder = None
    if "direct" in methods:
        direct = est.estimate_ruin_direct(model, a, s.horizon, s.n_paths, s.seed, **kw)
        estimates["direct"] = {k: v.to_dict() for k, v in direct.items()}
    if "storage" in methods:
        storage = est.estimate_storage_side(model, a, s.n_paths, s.seed, s.step_cap, **kw)
        estimates["storage"] = storage.to_dict()
        claims.append(_interval_claim("storage_entry_strictly_between_0_and_1",
                                      "the storage walk enters above Rinv a before the boundary with probability in (0, 1)",
                                      storage.estimate, th))
    if "ladder" in methods:
        ladder = est.sample_ladder_pk(model, a, s.n_paths, s.seed, p_hat=p_hat, **kw)
        harvest = est.harvest_ladder_law(model, s.n_paths, s.horizon, s.seed, **kw)
        estimates["compound_geometric"] = ladder.to_dict()
        estimates["ladder_harvest"] = harvest.to_dict()
        claims.append(_claim("compound_mass_at_zero",
                             "the compound geometric law puts mass 1 - p at zero",
                             ladder.mass_at_zero, 1.0 - p_hat.value, th,
                             z=z_score(ladder.mass_at_zero, 1.0 - p_hat.value, p_hat.std_error)))
        claims.append(_claim("ladder_epoch_probability_equals_p",
                             "a first all-coordinate push happens with probability p",
                             harvest.found, p_hat, th,
                             note=f"left side truncated at step {s.horizon}"))
        if harvest.heights.shape[0] >= 20 and ladder.heights.shape[0] >= 20:
            ks = est.ladder_ks(harvest.heights, ladder.heights)
            worst = min(r["pvalue"] for r in ks)
            entry = _claim("ladder_height_law",
                           "the first ladder height has the law of -Rinv U given -Rinv U >> 0",
                           {"ks": ks}, None, th, z=p_to_z(worst))
            claims.append(entry)

    if direct is not None and storage is not None:
        claims.append(_claim("ruin_equals_storage_entry",
                             "all-coordinate ruin probability equals storage entry-before-boundary probability",
                             direct["ss_ruin"], storage.estimate, th, closed_form=closed.get("ss_ruin"),
                             note=f"left side truncated at step {s.horizon}"))
    if direct is not None and ladder is not None:
        claims.append(_claim("ruin_equals_compound_geometric",
                             "all-coordinate ruin probability equals P(M >> Rinv a)",
                             direct["ss_ruin"], ladder.above, th, closed_form=closed.get("ss_ruin")))
    if storage is not None and ladder is not None:
        claims.append(_claim("storage_entry_equals_compound_geometric",
                             "storage entry-before-boundary probability equals P(M >> Rinv a)",
                             storage.estimate, ladder.above, th))

    # closed-form anchors
    if "ss_ruin" in closed and direct is not None:
        claims.append(_claim("direct_ruin_vs_closed_form", "direct ruin estimate against the closed form",
                             direct["ss_ruin"], closed["ss_ruin"], th, closed_form=closed["ss_ruin"]))
    if "storage" in closed and storage is not None:
        claims.append(_claim("storage_vs_closed_form", "storage-side estimate against the closed form",
                             storage.estimate, closed["storage"], th, closed_form=closed["storage"]))
    if "p" in closed:
        claims.append(_claim("p_vs_closed_form", "p_hat against the closed form", p_hat, closed["p"], th,
                             closed_form=closed["p"]))

    table = est.sigma_bd_distribution(model, s.n_paths, s.seed, s.kmax, p_hat=p_hat, **kw)
    sigma_rows = [{"k": r["k"], "survival": r["survival"].value, "survival_se": r["survival"].std_error,
                   "geometric": r["geometric"], "geometric_se": r["geometric_se"], "z": r["z"]} for r in table]
    for r in table:
        claims.append(_claim(f"sigma_bd_geometric_k{r['k']}",
                             f"P(sigma_bd > {r['k']}) equals p^{r['k']}",
                             r["survival"], {"value": r["geometric"], "std_error": r["geometric_se"]}, th,
                             z=r["z"], closed_form=closed.get("sigma_bd_gt2") if r["k"] == 2 else None))

    ident = est.per_horizon_identity(model, a, s.identity_horizon, s.n_paths, s.seed, **kw)
    ident_rows = [{"n": r["n"], "lhs": r["lhs"].value, "lhs_se": r["lhs"].std_error,
                   "rhs": r["rhs"].value, "rhs_se": r["rhs"].std_error, "z": r["z"],
                   "conditional": r["conditional"].value, "conditional_se": r["conditional"].std_error}
                  for r in ident]
    for r in ident:
        claims.append(_claim(f"per_horizon_identity_n{r['n']}",
                             f"P(all-coordinate push at step {r['n']}) equals P(W_{r['n']} >> Rinv a, sigma_bd > {r['n']})",
                             r["lhs"], r["rhs"], th))

    header = {
        "model": model.config.to_dict(),
        "matrix": model.refl.summary(),
        "initial_capital": a.tolist(),
        "settings": s.to_dict(),
        "methods": list(methods),
    }
    return ClaimsReport(header=header, hypotheses=report.to_dict(), estimates=estimates,
                        sigma_bd_table=sigma_rows, identity_table=ident_rows, claims=claims)


def capital_sweep(model, capitals, settings=None):
    """Direct and storage-side estimates along capitals ``(t, ..., t)``.

    The direct estimates share their random numbers across capitals, so the
    ruin column is nonincreasing path by path.
    """
    s = settings or Settings()
    kw = {"n_jobs": s.n_jobs, "strict_tol": s.strict_tol}
    rows = []
    for t in capitals:
        a = np.full(model.d, float(t))
        direct = est.estimate_ruin_direct(model, a, s.horizon, s.n_paths, s.seed, **kw)["ss_ruin"]
        storage = est.estimate_storage_side(model, a, s.n_paths, s.seed, s.step_cap, **kw).estimate
        rows.append({"t": float(t), "direct": direct.value, "direct_se": direct.std_error,
                     "storage": storage.value, "storage_se": storage.std_error})
    return rows


# ----------------------------------------------------------------- output

def _fmt_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _render(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _render(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist(), indent, level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, Estimate):
        return _render(obj.to_dict(), indent, level)
    return json.dumps(str(obj))


def dumps(obj, indent=2):
    """JSON text with insertion key order and 17-significant-digit floats."""
    return _render(obj, indent, 0) + "\n"


def table_csv(rows, columns):
    """CSV with a header row, LF line endings, floats at 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt_float(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c]
                         for c in columns])
    return buf.getvalue()
