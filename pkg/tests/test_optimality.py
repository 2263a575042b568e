import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import nsd_by_eigenvalues, random_symmetric
from sfcartan.bangbang import Arc, ControlSequence, anchor_state, make_sequence
from sfcartan.lie_cartan import X3, XMM, XP, AlgebraVector, Basis
from sfcartan.optimality import (
    AsymmetricInput, ExcludedExtremal, NonMonotoneTimes, QFormProblem, Verdict,
    ag_test, compute_Z, constraint_space, eight_switch_a_matrix,
    eight_switch_minor, eight_switch_problem, is_negative_semidefinite,
    low_energy_optimal, pivot_check, restrict_Q, sigma_table, switching_bound_report,
    _c4_taus,
)
from sfcartan.vertical import CovectorState, classify_stratum


def _pm(v):
    return v.to(Basis.PM).coords


def test_z_examples():
    prob = eight_switch_problem(2.0, 1.0, 0.3)
    t1, t2, t3 = _c4_taus(2.0, 1.0, 0.3)
    Z = compute_Z(prob.times, prob.controls, 1)
    assert np.allclose(_pm(Z[2]), _pm(XP * -1 + X3 * (2 * t2) + XMM * (-t2 ** 2)), atol=1e-12)
    z8 = XP + X3 * (-8 * t2) + AlgebraVector.pm(0, 0, 0, 8 * t2 * t3 - 4 * t2 * t1, 16 * t2 ** 2)
    assert np.allclose(_pm(Z[8]), _pm(z8), atol=1e-12)


def test_z_trivial_pivot():
    Z = compute_Z([0, 1, 2], [(1, 1), (-1, 1)], 1)
    assert np.allclose(Z[0].std, [1, 1, 0, 0, 0])
    assert np.allclose(Z[1].std, [-1, 1, 0, 0, 0])
    with pytest.raises(NonMonotoneTimes):
        compute_Z([0, 2, 1], [(1, 1), (-1, 1)], 1)
    with pytest.raises(ValueError):
        compute_Z([0, 1, 2], [(1, 1), (-1, 1)], 2)


def test_sigma_examples():
    h4, h5, E = 2.0, 1.0, 0.3
    prob = eight_switch_problem(h4, h5, E)
    t1, t2, t3 = _c4_taus(h4, h5, E)
    h = prob.covector_at(1)
    c, a, b = h.h3, h4 + h5, h4 - h5
    s = sigma_table(h, compute_Z(prob.times, prob.controls, 1))
    assert math.isclose(s[0, 1], 2 * c, rel_tol=1e-12)
    assert math.isclose(s[0, 2], 2 * t2 * a, rel_tol=1e-12)
    assert math.isclose(s[3, 5], -2 * t1 * b, rel_tol=1e-12)
    assert np.allclose(s, -s.T)


def test_w_space():
    prob = eight_switch_problem(2.0, 1.0, 0.3)
    Z = compute_Z(prob.times, prob.controls, 1)
    B = constraint_space(Z)
    assert B.shape == (9, 4)
    zmat = np.array([z.std for z in Z])
    assert np.allclose(B.sum(axis=0), 0, atol=1e-12)
    assert np.allclose(zmat.T @ B, 0, atol=1e-12)
    # the two-arc problem has independent fields, W = {0}
    Z1 = compute_Z([0, 1, 2], [(1, 1), (-1, 1)], 1)
    assert constraint_space(Z1).shape[1] == 0


def test_restriction_of_zero_form():
    B = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 3)))[0]
    assert np.allclose(restrict_Q(np.zeros((6, 6)), B), 0)


def test_a_coefficients():
    h4, h5, E = 2.0, 1.0, 0.3
    t1, t2, t3 = _c4_taus(h4, h5, E)
    a_, b_ = h4 + h5, h4 - h5
    A = eight_switch_a_matrix(h4, h5, E)
    assert math.isclose(A[0, 0], 2 * t2 * t3 * (-a_ * t1 + 4 * b_ * t2), rel_tol=1e-10)
    assert math.isclose(A[0, 1], 4 * b_ * t2 * t3 ** 2, rel_tol=1e-10)
    assert math.isclose(A[1, 1], b_ * t3 ** 2 * (-t1 + 2 * t3), rel_tol=1e-10)


def test_minor_matches_formula():
    h4 = 1.7
    X, Y = 0.4, 0.1
    A = eight_switch_a_matrix(h4, X * h4, Y * h4)
    det = A[0, 0] * A[1, 1] - A[0, 1] ** 2
    assert math.isclose(det, eight_switch_minor(h4, X, Y), rel_tol=1e-9)
    assert det < 0


def test_nsd_examples():
    assert is_negative_semidefinite(-np.eye(2))[0]
    ok, wit, val = is_negative_semidefinite(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not ok and wit == (0, 1) and math.isclose(val, -1.0)
    with pytest.raises(AsymmetricInput):
        is_negative_semidefinite(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert is_negative_semidefinite(np.zeros((3, 3)))[0]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1), st.sampled_from(["generic", "nsd", "perturbed"]))
def test_nsd_agrees_with_eigenvalues(n, seed, kind):
    A = random_symmetric(np.random.default_rng(seed), n, kind)
    assert is_negative_semidefinite(A, 1e-9)[0] == nsd_by_eigenvalues(A, 1e-9)


def test_low_energy_region():
    assert low_energy_optimal(2, 1, -1.5)
    assert low_energy_optimal(1, 0, 0)
    assert not low_energy_optimal(2, 1, 0.5)


def test_eight_switch_not_optimal():
    rep = ag_test(eight_switch_problem(2.0, 1.0, 0.3))
    assert rep.verdict is Verdict.NOT_OPTIMAL
    assert rep.pivot == 1
    assert rep.w_basis.shape[1] == 4


def test_one_switch_undetermined():
    h = CovectorState(0.0, 1.0, -1.0, 1.0, 0.5)
    seq = ControlSequence((Arc((1, 1), 0.3), Arc((-1, 1), 0.4)), h)
    prob = QFormProblem.from_sequence(seq)
    assert ag_test(prob, check_region=False).verdict is Verdict.UNDETERMINED
    # one switch leaves one control component constant; W is trivial anyway
    _, B, _, ok, _, _ = pivot_check(prob, 1)
    assert B.shape[1] == 0 and ok


def test_excluded_and_singular():
    st_ = classify_stratum(2.0, 1.0, -1.5)
    seq = make_sequence(st_, anchor_state(st_, -1), 3)
    with pytest.raises(ExcludedExtremal):
        ag_test(QFormProblem.from_sequence(seq))
    h = CovectorState(0.3, 0.7, 1.0, 2.0, 1.0)
    seq = ControlSequence((Arc((1, 1), 1.0), Arc((-1, 1), 1.0)), h)
    rep = ag_test(QFormProblem.from_sequence(seq), check_region=False)
    assert rep.known_optimal and rep.verdict is Verdict.UNDETERMINED


def test_case1_c8_twelve_switchings():
    st_ = classify_stratum(2.0, 1.0, 3.0)
    seq = make_sequence(st_, anchor_state(st_, -1), 13)
    assert ag_test(QFormProblem.from_sequence(seq)).verdict is Verdict.NOT_OPTIMAL


def test_bound_reports():
    rep = switching_bound_report(classify_stratum(2.0, 1.0, 0.3))
    assert rep.min_not_optimal_arcs is not None and rep.max_candidate_switchings <= 11
    mixed = switching_bound_report(classify_stratum(1.0, 0.0, 1.0), kind="mixed")
    assert mixed.min_not_optimal_arcs is not None and mixed.max_candidate_switchings <= 13
    with pytest.raises(ExcludedExtremal):
        switching_bound_report(classify_stratum(2.0, 1.0, -1.5))
