"""Acceptance suite: one test group per acceptance criterion.

Each criterion prints a single ``CRITERION k: PASS`` or ``CRITERION k: FAIL``
line with its key numbers. Criteria that cannot be met are marked as strict
expected failures and print FAIL; see the project notes for the analysis.

Run standalone with ``python3 tests/test_acceptance.py``.
"""

import json
import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from orthant_ruin import build_model, build_reflection, comparison_check, solve_lcp, solve_lcp_enum
from orthant_ruin.corpus import duality_corpus, random_interaction
from orthant_ruin.estimators import (closed_form_oracles, estimate_p, estimate_ruin_direct, estimate_storage_side,
                                     free_walk_ruin, per_horizon_identity, sample_ladder_pk)
from orthant_ruin.report import Settings, build_claims_report

SEED = 1
SCALAR = [[0.0]]
SYM = [[0.0, 0.5], [0.5, 0.0]]
WALK = {"mode": "plus_minus_walk", "d": 1, "q": 0.25}
CL1 = {"mode": "cl_network", "d": 1, "premium_rates": [1.25], "arrival_rates": [1.0],
       "claims": {"family": "exponential", "mean": 1.0}}
CL2 = {"mode": "cl_network", "d": 2, "premium_rates": [1.5, 1.5], "arrival_rates": [1.0, 1.0],
       "claims": {"family": "exponential", "mean": 1.0}}
PARETO2 = {"mode": "renewal_network", "d": 2, "premium_rates": [2.0, 1.5], "routing": [0.4, 0.6],
           "interarrival": {"family": "gamma", "shape": 2.0, "rate": 2.0},
           "claims": [{"family": "pareto", "shape": 3.0, "scale": 1.0}, {"family": "lognormal", "mu": 0.0,
                                                                         "sigma": 0.5}]}


def model(cfg, P):
    return build_model(cfg, build_reflection(P))


def report_line(capsys, criterion, passed, detail):
    with capsys.disabled():
        print(f"\nCRITERION {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")


def within(est, target, k=3.0):
    return abs(est.value - target) <= k * est.std_error


# ------------------------------------------------------------------ 1

def test_criterion_1_lcp_oracle_equivalence(capsys):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        d = int(rng.integers(1, 7))
        refl = build_reflection(random_interaction(rng, 1, d)[0])
        eta = rng.normal(0.0, 2.0, d) * (rng.random(d) < 0.9)
        fp, en = solve_lcp(eta, refl), solve_lcp_enum(eta, refl)
        worst = max(worst, float(np.abs(fp.xi - en.xi).max()), float(np.abs(fp.zeta - en.zeta).max()))
    seconds = time.perf_counter() - start
    passed = worst <= 1e-8 and seconds < 60
    report_line(capsys, 1, passed, f"10000 instances, max gap {worst:.2e}, {seconds:.1f} s")
    assert passed


# ------------------------------------------------------------------ 2, 3

BICONDITIONALS = ("ss_equivalence", "s_equivalence", "ruin_equivalence", "zero_capital_equivalence",
                  "y0ya_ss", "y0ya_ruin")


@pytest.fixture(scope="module")
def corpus():
    return duality_corpus(100_000, dmax=5, nmax=40, seed=SEED)


def test_criterion_2_identities_and_forward_direction(corpus, capsys):
    others = {k: v for k, v in corpus.failures.items() if k not in BICONDITIONALS}
    passed = sum(others.values()) == 0 and corpus.seconds < 600
    with capsys.disabled():
        print(f"\n  criterion 2 sub-checks (values, auxiliary chain, forward directions, bound): "
              f"{sum(others.values())} failures in {corpus.instances} instances, {corpus.seconds:.0f} s")
    assert passed, others


@pytest.mark.xfail(strict=True, reason="reverse direction fails under oblique reflection (see notes)")
def test_criterion_2_zero_failures(corpus, capsys):
    bad = {k: corpus.failures[k] for k in BICONDITIONALS}
    total = corpus.total_failures
    report_line(capsys, 2, total == 0,
                f"{corpus.instances} instances, {total} failed checks {json.dumps(bad)}, "
                f"first counterexample d={corpus.first_counterexample and corpus.first_counterexample['d']}")
    assert total == 0


def test_criterion_3_comparison(corpus, capsys):
    rng = np.random.default_rng(SEED + 100)
    start = time.perf_counter()
    failures = 0
    for _ in range(10_000):
        d, n = int(rng.integers(1, 6)), int(rng.integers(1, 41))
        refl = build_reflection(random_interaction(rng, 1, d)[0])
        a = rng.exponential(1.0, d) * (rng.random(d) < 0.7)
        b = a + rng.exponential(1.0, d) * (rng.random(d) < 0.7)
        u = rng.uniform(-1.0, 0.5) + rng.standard_normal((n, d))
        ok, _ = comparison_check(a, b, u, refl)
        failures += not ok
    bound_failures = corpus.failures["a_priori_bound"]
    passed = failures == 0 and bound_failures == 0
    report_line(capsys, 3, passed, f"10000 pairs, {failures} comparison failures; a-priori bound failures on "
                                   f"{corpus.instances} corpus paths: {bound_failures}; "
                                   f"{time.perf_counter() - start:.0f} s")
    assert passed


# ------------------------------------------------------------------ 4

def _identity(model_, a):
    start = time.perf_counter()
    rows = per_horizon_identity(model_, a, 10, 1_000_000, seed=SEED)
    return rows, max(abs(r["z"]) for r in rows), time.perf_counter() - start


def test_criterion_4_walk(capsys):
    walk, _ = model(WALK, SCALAR)
    rows, zmax, seconds = _identity(walk, None)
    with capsys.disabled():
        print(f"\n  criterion 4, +-1 walk: max |z| = {zmax:.2f} over n <= 10 ({seconds:.0f} s)")
    assert zmax < 4


@pytest.mark.xfail(strict=True, reason="per-horizon identity inherits the reverse-direction defect in d = 2")
def test_criterion_4_cl_network(capsys):
    cl2, _ = model(CL2, SYM)
    rows, zmax, seconds = _identity(cl2, (1.0, 1.0))
    walk_rows, walk_z, _ = _identity(model(WALK, SCALAR)[0], None)
    zs = ", ".join(f"{r['z']:.1f}" for r in rows)
    report_line(capsys, 4, zmax < 4 and walk_z < 4,
                f"walk max |z| {walk_z:.2f}; CL d=2 a=(1,1) z by n: [{zs}] ({seconds:.0f} s)")
    assert zmax < 4


# ------------------------------------------------------------------ 5

def test_criterion_5_anchors(capsys):
    walk, _ = model(WALK, SCALAR)
    cl1, _ = model(CL1, SCALAR)
    oracle_0 = closed_form_oracles("cl_ruin_prob", lam=1, mu=1, c=1.25, a=0)
    oracle_5 = closed_form_oracles("cl_ruin_prob", lam=1, mu=1, c=1.25, a=5)
    results = {
        "walk_direct": (estimate_ruin_direct(walk, None, 2000, 100_000, seed=SEED)["ss_ruin"], 1 / 3),
        "walk_storage": (estimate_storage_side(walk, None, 100_000, seed=SEED).estimate, 0.25),
        "cl_a0": (estimate_ruin_direct(cl1, None, 5000, 100_000, seed=SEED)["ss_ruin"], oracle_0),
        "cl_a5": (estimate_ruin_direct(cl1, [5.0], 5000, 100_000, seed=SEED)["ss_ruin"], oracle_5),
        "cl_p": (estimate_p(cl1, 1_000_000, seed=SEED), 1 / 2.25),
    }
    # the classical formula re-checked by the unregulated walk, no LCP code involved
    free = free_walk_ruin(cl1, 5.0, 5000, 20_000, seed=SEED)
    ok = {k: within(e, t) for k, (e, t) in results.items()}
    ok["free_walk_a5"] = within(free, oracle_5)
    detail = "; ".join(f"{k} {e.value:.4f} vs {t:.4f}" for k, (e, t) in results.items())
    report_line(capsys, 5, all(ok.values()), f"{detail}; free walk a=5 {free.value:.4f}")
    assert all(ok.values()), ok


# ------------------------------------------------------------------ 6

REPORT_SETTINGS = Settings(horizon=1000, n_paths=20_000, seed=SEED, step_cap=20_000, kmax=5, identity_horizon=5)


def test_criterion_6_report_integrity(capsys):
    checks = {}
    for name, cfg, P, a in (("walk", WALK, SCALAR, [0.0]), ("cl1", CL1, SCALAR, [0.0]),
                            ("cl2", CL2, SYM, [1.0, 1.0]), ("pareto2", PARETO2, SYM, [0.5, 0.5])):
        m, hyp = model(cfg, P)
        rep = build_claims_report(m, hyp, a, REPORT_SETTINGS)
        claims = {c["id"]: c for c in rep.claims}
        p_hat = rep.estimates["p_hat"]
        if hyp.holds("H2", "H6"):
            checks[f"{name}_storage_in_(0,1)"] = claims["storage_entry_strictly_between_0_and_1"]["verdict"] == \
                "consistent"
        mass = rep.estimates["compound_geometric"]["mass_at_zero"]
        checks[f"{name}_mass_at_zero"] = abs(mass["value"] - (1 - p_hat["value"])) <= 3 * math.hypot(
            mass["std_error"], p_hat["std_error"])
        row = rep.sigma_bd_table[0]
        checks[f"{name}_sigma_bd_k1"] = row["k"] == 1 and abs(row["survival"] - p_hat["value"]) <= 3 * \
            math.hypot(row["survival_se"], p_hat["std_error"])

    cl1, _ = model(CL1, SCALAR)
    pk = sample_ladder_pk(cl1, None, 16_000, seed=SEED)
    n = 10_000
    heights = pk.heights[:n, 0]
    direct = np.random.default_rng(SEED).exponential(1.0, n)
    two = stats.ks_2samp(heights, direct).statistic
    one = stats.kstest(heights, "expon").statistic
    checks["ks_two_sample"] = two < 1.63 * math.sqrt(2.0 / n)
    checks["ks_one_sample"] = one < 1.63 / math.sqrt(n)
    failed = [k for k, v in checks.items() if not v]
    report_line(capsys, 6, not failed,
                f"{len(checks)} checks over 4 models; KS two-sample D={two:.4f} (1.63/sqrt(n) = {1.63 / math.sqrt(n):.4f},"
                f" two-sample 1% level {1.63 * math.sqrt(2 / n):.4f}), one-sample D={one:.4f}; failed: {failed}")
    assert not failed


# ------------------------------------------------------------------ 7

def test_criterion_7_margins(capsys):
    _, r1 = model(CL2, SYM)
    with pytest.warns(UserWarning):
        _, r2 = model({**CL2, "premium_rates": [0.9, 0.9]}, SYM)
    _, r3 = model(WALK, SCALAR)
    got = [r1.net_profit_margins, r2.net_profit_margins, r3.net_profit_margins]
    want = [(0.25, 0.25), (-0.05, -0.05), (0.5,)]
    passed = all(np.allclose(g, w, rtol=0, atol=1e-12) for g, w in zip(got, want))
    passed &= r1.status["H8"] == "holds" and r2.status["H8"] == "violated"
    report_line(capsys, 7, passed, f"margins {got}")
    assert passed


# ------------------------------------------------------------------ 8

def test_criterion_8_determinism(capsys):
    m, hyp = model(CL2, SYM)
    outputs = []
    for jobs in (1, 2):
        s = Settings(horizon=300, n_paths=20_000, seed=SEED, step_cap=5000, kmax=4, identity_horizon=4, n_jobs=jobs)
        rep = build_claims_report(m, hyp, [1.0, 1.0], s)
        outputs.append((rep.to_json(), rep.identity_csv(), rep.sigma_bd_csv()))
    passed = outputs[0] == outputs[1]
    report_line(capsys, 8, passed, f"claims report with n_jobs 1 and 2: {len(outputs[0][0])} bytes, "
                                   f"{'identical' if passed else 'different'}")
    assert passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
