import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import rk4_covector, rk4_group
from sfcartan.bangbang import (
    MM, MP, PM, PP, Arc, ArcKind, ControlSequence, InconsistentSequence,
    InvalidStart, MissingBranchChoice, anchor_state, covector_flow,
    detect_switchings, extremal_arcs, make_sequence, sequence_from_covector,
    switching_times, synthesize,
)
from sfcartan.lie_cartan import IDENTITY, GroupPoint
from sfcartan.vertical import (
    D4, Branch, CovectorState, Equilibrium, NoBangDynamics, classify_stratum, vertical_step,
)


def test_first_arc_case1_c2():
    h4, h5, E = 2.0, 1.0, -1.5
    h = CovectorState.from_theta(math.pi / 2, -math.sqrt(2 * (E + h4)), h4, h5)
    step = vertical_step(h)
    assert step.letter == (1, 1)
    assert math.isclose(step.duration, 2 * math.sqrt(2 * (E + h4)) / (h4 + h5), rel_tol=1e-12)


def test_case4_duration():
    h = CovectorState.from_theta(0.3, 1.0, 0.0, 0.0)
    E = h.E
    seq = extremal_arcs(h, 4)
    for _, dur, _ in seq[1:]:
        assert math.isclose(dur, 1 / math.sqrt(2 * E), rel_tol=1e-12)


def test_equilibrium_start():
    with pytest.raises(Equilibrium):
        vertical_step(CovectorState(0.0, 1.0, 0.0, 2.0, 1.0))
    with pytest.raises(NoBangDynamics):
        extremal_arcs(CovectorState(0.0, 1.0, 0.0, 2.0, 1.0), 3)


@pytest.mark.parametrize("h4,h5,E,expected", [
    (1.0, 0.0, -0.5, (2.0,)),
    (0.0, 0.0, 0.5, (1.0,)),
])
def test_switching_time_examples(h4, h5, E, expected):
    sw = switching_times(classify_stratum(h4, h5, E))
    assert np.allclose(sw.taus, expected)


def test_case2_c2_pattern_and_case4_cycle():
    sw = switching_times(classify_stratum(1.0, 0.0, -0.5))
    assert sw.letters() == [PP, MP]
    sw4 = switching_times(classify_stratum(0.0, 0.0, 0.5))
    assert sw4.letters() == [PP, MP, MM, PM]


def test_case1_c4_tau3_degenerates():
    h4, h5 = 2.0, 1.0
    taus = [switching_times(classify_stratum(h4, h5, -h5 + eps)).taus[2] for eps in (1e-2, 1e-4, 1e-8)]
    assert taus[0] > taus[1] > taus[2]
    assert taus[2] < 1e-3


def test_case1_c4_letters_from_anchor():
    st_ = classify_stratum(2.0, 1.0, 0.0)
    seq = make_sequence(st_, anchor_state(st_, -1), 5)
    assert [a.letter for a in seq.arcs] == [PP, MP, MM, MP, PP]
    t1, t2, t3 = switching_times(st_).taus
    assert np.allclose(seq.durations, [t1, t2, t3, t2, t1], rtol=1e-12)


def test_case1_c8_cycle_positive_h3():
    st_ = classify_stratum(2.0, 1.0, 3.0)
    h = anchor_state(st_, +1)
    letters = [a[0] for a in extremal_arcs(h, 6)]
    cyc = [PP, MP, MM, PM]
    # with h3 > 0 the letters cycle in the order PP, MP, MM, PM
    i = cyc.index(letters[1])
    assert letters[1:5] == [cyc[(i + k) % 4] for k in range(4)]
    taus = switching_times(st_).taus
    durs = [a[1] for a in extremal_arcs(h, 6)][1:5]
    assert sorted(np.round(durs, 12)) == sorted(np.round(taus, 12))


def test_single_arc_first_dur():
    st_ = classify_stratum(2.0, 1.0, 0.0)
    seq = make_sequence(st_, anchor_state(st_, -1), 1, first_dur=0.1)
    assert len(seq) == 1 and math.isclose(seq.durations[0], 0.1)


def test_invalid_start_and_missing_branch():
    st_ = classify_stratum(2.0, 1.0, 0.0)
    with pytest.raises(InvalidStart):
        make_sequence(st_, (math.pi / 2, 5.0), 3)
    fig8 = classify_stratum(2.0, 1.0, 2.0)
    with pytest.raises(MissingBranchChoice):
        make_sequence(fig8, (1.5 * math.pi, 0.0), 3)
    seq = make_sequence(fig8, (1.5 * math.pi, 0.0), 3, branches=[Branch.UP])
    assert len(seq) == 3


def test_sequence_validation():
    with pytest.raises(ValueError):
        ControlSequence((Arc((1, 1), 1.0), Arc((-1, -1), 1.0)))
    with pytest.raises(ValueError):
        Arc((1, 1), 0.0)
    with pytest.raises(ValueError):
        Arc((0.5, 1), 1.0)


def test_synthesize_single_arc_and_empty():
    ext = synthesize(IDENTITY, CovectorState(1, 1, 0, 0, 0),
                     ControlSequence((Arc((1, 1), 1.0),)), check=False)
    assert np.allclose(ext.endpoint.array, [1, 1, 0, 1 / 3, -1 / 3])
    q0 = GroupPoint.from_array([0.1, 0.2, 0.3, 0.4, 0.5])
    empty = synthesize(q0, CovectorState(1, 1, 0, 0, 0), ControlSequence(()))
    assert np.allclose(empty.endpoint.array, q0.array)


def test_synthesize_case3_c1_planar():
    # interior of the case 3 C1 arc of fixed points: control (-1, 1)
    h = CovectorState.from_theta(0.75 * math.pi, 0.0, 1.0, 1.0)
    seq = sequence_from_covector(h, 1, first_dur=3.0)
    ext = synthesize(IDENTITY, h, seq, samples_per_arc=12)
    assert np.allclose(ext.points[:, 0], -ext.times)
    assert np.allclose(ext.points[:, 1], ext.times)


def test_synthesize_rejects_wrong_signs():
    h = CovectorState(0.5, 0.5, 0.1, 1.0, 0.5)
    with pytest.raises(InconsistentSequence):
        synthesize(IDENTITY, h, ControlSequence((Arc((-1, 1), 1.0),)))


def test_synthesize_matches_oracles():
    st_ = classify_stratum(1.5, 0.4, 0.9)
    seq = make_sequence(st_, anchor_state(st_, -1), 6)
    ext = synthesize(IDENTITY, seq.covector, seq)
    q = np.zeros(5)
    h = seq.covector.array
    for a in seq.arcs:
        q = rk4_group(q, a.control, a.duration)
        h = rk4_covector(h, a.control, a.duration)
    assert np.allclose(ext.endpoint.array, q, atol=1e-9)
    assert np.allclose(ext.covectors[-1], h, atol=1e-9)
    assert np.allclose(covector_flow(seq.covector, seq.arcs).array, h, atol=1e-9)


def test_detect_switchings_case4():
    h = CovectorState.from_theta(math.pi / 4, 1.0, 0.0, 0.0)
    sw = detect_switchings(h, 4.0)
    assert len(sw) >= 4
    assert np.allclose(np.diff(sw)[:3], 1.0)
    assert detect_switchings(h, 1e-3) == []


def test_detect_switchings_case1_c2():
    st_ = classify_stratum(2.0, 1.0, -1.5)
    sw_t = switching_times(st_)
    h = anchor_state(st_, -1)
    times = detect_switchings(h, sum(sw_t.taus) + 1e-9)
    assert len(times) == 2
    assert np.allclose(np.diff([0.0] + times), sw_t.taus)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2), st.floats(0.05, 0.95), st.floats(0.05, 3))
def test_symmetry_maps_sequences(h4, r, de):
    st_ = classify_stratum(h4, r * h4, -r * h4 + de)
    seq = make_sequence(st_, anchor_state(st_, -1), 5, branches=[Branch.UP] * 6)
    for g in D4:
        img = seq.transform(g)
        ext = synthesize(IDENTITY, img.covector, img)
        ref = synthesize(IDENTITY, seq.covector, seq)
        x, y = g.act_planar(ref.points[:, 0], ref.points[:, 1])
        assert np.allclose(ext.points[:, 0], x, atol=1e-9)
        assert np.allclose(ext.points[:, 1], y, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3), st.floats(0.2, 5))
def test_scaling_invariance(lam, h4):
    # the extremal of lam * h is the same trajectory
    h = CovectorState(0.3, 0.7, -0.4, h4, 0.3 * h4)
    a = [x[:2] for x in extremal_arcs(h, 5)]
    b = [x[:2] for x in extremal_arcs(CovectorState.from_array(lam * h.array), 5)]
    assert [x[0] for x in a] == [x[0] for x in b]
    assert np.allclose([x[1] for x in a], [x[1] for x in b], rtol=1e-10)
