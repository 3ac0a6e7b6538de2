from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthant_ruin import (aux_sequence, build_reflection, duality_verdict, hitting_times, identity_reflection,
                          reverse_inputs, solve_sp, solve_storage)
from orthant_ruin.corpus import duality_corpus
from orthant_ruin.exceptions import DimensionMismatch

from conftest import random_P


def test_reverse_inputs(sym_half):
    np.testing.assert_allclose(reverse_inputs([(-1, -1)], sym_half), [(2, 2)])
    u = np.array([(1.0, -2.0), (0.5, 3.0), (-1.0, 0.0)])
    np.testing.assert_array_equal(reverse_inputs(u, identity_reflection(2)), -u[::-1])
    np.testing.assert_allclose(reverse_inputs(u[:2], sym_half), [-sym_half.Rinv @ u[1], -sym_half.Rinv @ u[0]])


def test_storage_examples(sym_half, scalar):
    path = solve_storage([(2, 2)], sym_half)
    np.testing.assert_allclose(path.w[1], (2, 2))
    np.testing.assert_allclose(path.v[1], (0, 0))
    path = solve_storage([(-1, -1)], sym_half)
    np.testing.assert_allclose(path.dv[0], (0.5, 0.5), atol=1e-12)
    np.testing.assert_allclose(path.w[1], (0, 0), atol=1e-12)
    path = solve_storage([-2.0], scalar)
    assert (path.w[1, 0], path.v[1, 0]) == (0.0, 2.0)


@pytest.mark.parametrize("w, b, expected", [
    ([(2, 2)], (0, 0), dict(theta_open=1, sigma_bd=None)),
    ([(2, 0)], (0, 0), dict(sigma_bd=1, theta_gt=1, theta_open=None)),
    ([(2, 2)], (2, 2), dict(theta_geq=1, theta_open=None)),
    ([(1, 1), (0, 0)], (0, 0), dict(sigma_bd=2, sigma_0=2, theta_open=1)),
])
def test_hitting_times(w, b, expected):
    times = hitting_times(np.array(w, dtype=float), b)
    for key, val in expected.items():
        assert getattr(times, key) == val, key


@pytest.mark.parametrize("a, u, xi, zeta", [
    ((0, 0), [(-1, -1)], (0, 0), (2, 2)),
    ((1, 1), [(1, 0)], (2, 1), (0, 0)),
])
def test_aux_sequence_examples(sym_half, a, u, xi, zeta):
    for oracle in (False, True):
        chain, check = aux_sequence(a, u, sym_half, oracle=oracle)
        np.testing.assert_allclose(chain.xi[0], xi, atol=1e-12)
        np.testing.assert_allclose(chain.zeta[0], zeta, atol=1e-12)
        assert check["max_gap_z"] <= 1e-12


def test_aux_sequence_scalar(scalar):
    chain, _ = aux_sequence([0.0], [-3.0], scalar)
    assert (chain.xi[0, 0], chain.zeta[0, 0]) == (0.0, 3.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5), st.integers(1, 30), st.integers(0, 2**31))
def test_aux_chain_reproduces_skorokhod(d, n, seed):
    rng = np.random.default_rng(seed)
    refl = build_reflection(random_P(rng, d))
    aux_sequence(rng.exponential(1.0, d), rng.normal(-0.3, 1, (n, d)), refl, oracle=d <= 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5), st.integers(1, 60), st.integers(0, 2**31))
def test_storage_path_invariants(d, n, seed):
    rng = np.random.default_rng(seed)
    refl = build_reflection(random_P(rng, d))
    path = solve_storage(rng.normal(0, 1, (n, d)), refl)
    for name, gap in path.invariant_violations().items():
        assert gap <= 1e-9 * (1 + np.abs(path.v).max()), name


def test_duality_single_step_full_push(sym_half):
    v = duality_verdict((0, 0), [(-1, -1)], sym_half)
    assert v.passed
    assert v.witness["ss_ruin"] and v.witness["rhs_ss"]
    np.testing.assert_allclose(v.witness["y_n"], (2, 2))
    np.testing.assert_allclose(v.witness["w_n"], (2, 2))


def test_duality_single_step_partial_push(sym_half):
    v = duality_verdict((0, 0), [(-2, 1)], sym_half)
    assert v.passed
    w = v.witness
    assert w["s_ruin"] and w["rhs_s"] and not w["ss_ruin"] and not w["rhs_ss"]
    np.testing.assert_allclose(w["w_n"], (2, 0), atol=1e-12)
    np.testing.assert_allclose(w["v_n"], (0, 0))
    assert w["hitting"]["sigma_0"] is None


def test_duality_no_ruin(sym_half):
    v = duality_verdict((5, 5), [(1, 1)], sym_half)
    assert v.passed
    assert not any(v.witness[k] for k in ("ss_ruin", "s_ruin", "ruin", "rhs_ss", "rhs_s", "rhs_ruin"))


def test_verdict_serializes(sym_half):
    d = duality_verdict((0, 0), [(-1, -1), (0.5, 0.2)], sym_half).to_dict()
    assert d["n"] == 2 and d["passed"] is True and set(d["checks"]) >= {"ss_equivalence", "connc1"}
    with pytest.raises(DimensionMismatch):
        duality_verdict((0, 0), np.zeros((0, 2)), sym_half)


def _exact_push_and_storage():
    # rational arithmetic, independent of the package, for P = [[0,0],[9/10,0]]
    c = Fraction(9, 10)
    u = [(-1, 1), (1, -2)]
    # primal: R = [[1, -c], [0, 1]]
    z1 = (0, 1)              # u1 = (-1, 1): push 1 on coordinate 1 only
    dy1 = (1, 0)
    eta = (z1[0] + u[1][0], z1[1] + u[1][1])   # (1, -1)
    dy2 = (0, 1)             # push 1 on coordinate 2 raises coordinate 1 by c
    z2 = (eta[0] - c * dy2[1], 0)
    # dual: Rinv = [[1, c], [0, 1]], uhat_k = -Rinv u_{n+1-k}
    uhat = [(-(u[1][0] + c * u[1][1]), -u[1][1]), (-(u[0][0] + c * u[0][1]), -u[0][1])]
    w1 = uhat[0]
    w2 = (w1[0] + uhat[1][0], w1[1] + uhat[1][1])
    return dy1, z1, dy2, z2, w1, w2


def test_oblique_reflection_reverse_direction_counterexample():
    """A full-storage dual path without a full push in the primal.

    All storage levels stay strictly positive and end above the threshold
    0, yet the final push is not positive in every coordinate. Exact
    arithmetic confirms the numerical solver.
    """
    dy1, z1, dy2, z2, w1, w2 = _exact_push_and_storage()
    assert min(w1) > 0 and min(w2) > 0
    assert min(dy2) == 0
    refl = build_reflection([[0, 0], [0.9, 0]])
    u = [(-1, 1), (1, -2)]
    path = solve_sp((0, 0), u, refl)
    np.testing.assert_allclose(path.dy[1], [float(x) for x in dy2], atol=1e-12)
    np.testing.assert_allclose(path.z[2], [float(x) for x in z2], atol=1e-12)
    v = duality_verdict((0, 0), u, refl)
    np.testing.assert_allclose(v.witness["w_n"], [float(x) for x in w2], atol=1e-12)
    assert v.witness["rhs_ss"] and not v.witness["ss_ruin"]
    assert "ss_equivalence" in v.failures()
    # the forward direction is untouched
    assert v.checks["connc1"] and v.checks["aux_lcp"] and v.checks["a_priori_bound"]


def test_zero_capital_shift_counterexample():
    """Pushing at capital 0 far beyond R^{-1}a does not force pushing at capital a."""
    refl = build_reflection([[0.0, 0.7], [0.3, 0.0]])     # R = [[1, -0.3], [-0.7, 1]]
    a, u = (3, 0), [(0, -3), (-3, 1)]
    zero = solve_sp((0, 0), u, refl)
    # exact values: dy0_2 = (270/79, 110/79), y0_2 = (360/79, 410/79), R^{-1}a = (300/79, 210/79)
    np.testing.assert_allclose(zero.dy[1], [270 / 79, 110 / 79], atol=1e-12)
    np.testing.assert_allclose(zero.y[2], [360 / 79, 410 / 79], atol=1e-12)
    np.testing.assert_allclose(refl.Rinv @ np.array(a, float), [300 / 79, 210 / 79], atol=1e-12)
    np.testing.assert_allclose(solve_sp(a, u, refl).dy[1], [0.9, 0.0], atol=1e-12)
    v = duality_verdict(a, u, refl)
    assert "y0ya_ss" in v.failures()
    assert v.checks["y0ya_ss_forward"] and v.checks["y0ya_ruin_forward"]


def test_normal_reflection_tie_counterexample():
    """With exact ties the storage side sees the boundary without a positive push."""
    v = duality_verdict((0, 0), [(1, -1), (-1, 0)], identity_reflection(2))
    assert v.witness["rhs_s"] and not v.witness["s_ruin"]
    np.testing.assert_allclose(v.witness["w_n"], (0, 1))
    assert v.failures() == ["s_equivalence"]


def test_corpus_forward_direction_and_identities():
    summary = duality_corpus(3000, seed=11)
    f = summary.failures
    for name in ("connc1", "aux_lcp", "reinforcement_identity", "step_predicates", "a_priori_bound",
                 "ss_values", "s_values", "ruin_values", "y0ya_values", "zero_capital_values",
                 "y0ya_ss_forward", "y0ya_ruin_forward"):
        assert f[name] == 0, name
    assert summary.events["ss_ruin"] > 0


def test_corpus_one_dimensional_is_exact():
    summary = duality_corpus(2000, dmax=1, seed=5)
    assert summary.total_failures == 0, summary.first_counterexample


def test_corpus_lattice_mode_runs():
    summary = duality_corpus(500, nmax=8, seed=2, kind="lattice")
    assert summary.failures["connc1"] == 0 and summary.failures["aux_lcp"] == 0
    assert summary.to_dict()["kind"] == "lattice"


def test_corpus_zero_instances():
    summary = duality_corpus(0)
    assert summary.total_failures == 0 and summary.instances == 0


def test_storage_csv(sym_half):
    text = solve_storage([(-1, -1)], sym_half).to_csv()
    assert text.splitlines()[0] == "k,uhat_1,uhat_2,w_1,w_2,dv_1,dv_2,v_1,v_2"
    assert text.splitlines()[2] == "1,-1,-1,0,0,0.5,0.5,0.5,0.5"


def test_primal_and_dual_agree_on_values_when_pushed(sym_half):
    rng = np.random.default_rng(4)
    for _ in range(200):
        u = rng.normal(-0.5, 1, (int(rng.integers(1, 10)), 2))
        v = duality_verdict((0, 0), u, sym_half)
        if v.witness["ss_ruin"]:
            np.testing.assert_allclose(v.witness["y_n"], v.witness["w_n"], atol=1e-9)
            np.testing.assert_allclose(v.witness["w_n"], v.witness["sum_uhat"], atol=1e-9)
        np.testing.assert_allclose(solve_sp((0, 0), u, sym_half).y[-1], v.witness["y_n"])
