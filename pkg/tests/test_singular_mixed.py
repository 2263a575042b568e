import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfcartan.bangbang import (
    ArcKind, anchor_state, make_sequence, synthesize,
)
from sfcartan.lie_cartan import IDENTITY
from sfcartan.singular_mixed import (
    Bang, InadmissibleJunction, NotNormal, Overall, Singular,
    StratumWithoutMixedSupport, adjacency_admissible, classify_extremal,
    junction_state, make_mixed_sequence, mixed_support,
)
from sfcartan.vertical import Branch, CovectorState, classify_stratum


def test_junction_examples():
    j = adjacency_admissible(CovectorState.from_theta(1.5 * math.pi, 0.0, 2.0, 1.0))
    assert j.kind is ArcKind.H1_SINGULAR
    assert j.control == (0.5, -1.0)
    j2 = adjacency_admissible(CovectorState.from_theta(0.0, 0.0, 1.0, 1.0))
    assert j2.kind is ArcKind.H2_SINGULAR and j2.control == (1.0, -1.0)
    assert adjacency_admissible(CovectorState.from_theta(math.pi / 2, 0.0, 2.0, 1.0)) is None
    assert adjacency_admissible(CovectorState.from_theta(1.5 * math.pi, 0.1, 2.0, 1.0)) is None


def test_junction_example_level_is_e_equals_h4():
    # (3 pi / 2, 0) with h4 = 2, h5 = 1 sits on E = h4
    h = CovectorState.from_theta(1.5 * math.pi, 0.0, 2.0, 1.0)
    st_ = classify_stratum(h.h4, h.h5, h.E)
    assert (st_.case, st_.level) == (1, 7)
    assert mixed_support(st_) == (ArcKind.H1_SINGULAR,)


def test_mixed_support():
    assert mixed_support(classify_stratum(1, 0, 1)) == (ArcKind.H1_SINGULAR,)
    assert set(mixed_support(classify_stratum(1, 1, 1))) == {ArcKind.H1_SINGULAR, ArcKind.H2_SINGULAR}
    assert mixed_support(classify_stratum(2, 1, 0)) == ()
    with pytest.raises(StratumWithoutMixedSupport):
        make_mixed_sequence(classify_stratum(2, 1, 0), [Singular(1.0)])


def test_case2_c5_plan():
    st_ = classify_stratum(1.0, 0.0, 1.0)
    seq = make_mixed_sequence(st_, [Bang(None, (Branch.UP,)), Singular(5.0), Bang(None, (Branch.UP,))])
    sing = [a for a in seq.arcs if not a.is_bang]
    assert len(sing) == 1 and math.isclose(sing[0].duration, 5.0)
    ext = synthesize(IDENTITY, seq.covector, seq)
    assert np.allclose(ext.covectors[-1][3:], [1.0, 0.0])


def test_inadmissible_junction():
    st_ = classify_stratum(1.0, 0.0, 1.0)
    h = CovectorState.from_theta(math.pi / 4, 0.0, 1.0, 0.0)
    with pytest.raises(InadmissibleJunction):
        make_mixed_sequence(st_, [Singular(1.0)], start=h)
    with pytest.raises(InadmissibleJunction):
        make_mixed_sequence(st_, [Bang(1, (Branch.UP,)), Singular(1.0)])


def test_endpoint_affine_in_singular_duration():
    st_ = classify_stratum(2.0, 0.5, 2.0)
    ends = []
    for d in (1.0, 2.0, 3.0):
        seq = make_mixed_sequence(st_, [Bang(None, (Branch.UP,)), Singular(d), Bang(None, (Branch.UP,))])
        ext = synthesize(IDENTITY, seq.covector, seq)
        ends.append(ext.endpoint.array[:2])
    ends = np.array(ends)
    assert np.allclose(ends[2] - ends[1], ends[1] - ends[0], atol=1e-12)
    assert np.linalg.norm(ends[1] - ends[0]) > 0


def test_classify_pure_bang_counts_crossings():
    st_ = classify_stratum(2.0, 1.0, 3.0)
    seq = make_sequence(st_, anchor_state(st_, -1), 7)
    res = classify_extremal(synthesize(IDENTITY, seq.covector, seq))
    assert res.overall is Overall.BANG_BANG
    assert len(res.kinds) == 7
    assert np.allclose(res.breakpoints, seq.breakpoints(), atol=1e-9)


def test_classify_sampled_singular():
    t = np.linspace(0, 2, 50)
    res = classify_extremal((t, np.zeros_like(t), np.ones_like(t)))
    assert res.overall is Overall.SINGULAR
    assert res.kinds == [ArcKind.H1_SINGULAR]
    with pytest.raises(NotNormal):
        classify_extremal((t, np.zeros_like(t), np.zeros_like(t)))


def test_classify_mixed_finds_plateau():
    st_ = classify_stratum(1.0, 0.0, 1.0)
    seq = make_mixed_sequence(st_, [Bang(None, (Branch.UP,)), Singular(2.5), Bang(None, (Branch.DOWN,))])
    res = classify_extremal(synthesize(IDENTITY, seq.covector, seq))
    assert res.overall is Overall.MIXED
    assert res.kinds == seq.kinds
    i = res.kinds.index(ArcKind.H1_SINGULAR)
    assert math.isclose(res.durations[i], 2.5, rel_tol=1e-12)


def test_h2_junction_on_case3():
    st_ = classify_stratum(1.5, 1.5, 1.5)
    seq = make_mixed_sequence(st_, [Singular(1.0), Bang(None, (Branch.UP,))], junction=ArcKind.H2_SINGULAR)
    assert seq.kinds[0] is ArcKind.H2_SINGULAR
    res = classify_extremal(synthesize(IDENTITY, seq.covector, seq))
    assert res.kinds == seq.kinds


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-2, 2), st.floats(0.2, 2), st.floats(0, 1))
def test_admissible_set_property(theta, h3, h4, r):
    h5 = r * h4
    h = CovectorState.from_theta(theta, h3, h4, h5)
    j = adjacency_admissible(h)
    on_h1 = abs(h3) < 1e-12 and abs(theta - 1.5 * math.pi) < 1e-12
    on_h2 = abs(h3) < 1e-12 and min(theta, 2 * math.pi - theta) < 1e-12 and math.isclose(h4, h5)
    assert (j is not None) == (on_h1 or on_h2)
