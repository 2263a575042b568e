"""Singular arcs, bang/singular junctions, mixed sequences and classification.

In the fundamental domain h4 >= h5 >= 0 a singular arc can meet a bang arc
only at the fixed points

    theta = 3pi/2, h3 = 0, 0 <= h5 <= h4, h4 > 0  (h1-singular, u = (h5/h4, -1)),
    theta = 0,     h3 = 0, 0 <  h5 = h4           (h2-singular, u = (1, -h4/h5)),

where the singular control is the constant one freezing the covector. Both
points lie on E = h4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .bangbang import (
    Arc,
    ArcKind,
    ControlSequence,
    Extremal,
    MissingBranchChoice,
    NoBangDynamics,
    switching_times,
)
from .vertical import (
    Branch,
    CornerBranch,
    CovectorState,
    Stratum,
    vertical_step,
)

__all__ = [
    "Bang",
    "ExtremalClassification",
    "InadmissibleJunction",
    "Junction",
    "NotNormal",
    "Overall",
    "Singular",
    "StratumWithoutMixedSupport",
    "adjacency_admissible",
    "classify_extremal",
    "junction_state",
    "make_mixed_sequence",
    "mixed_support",
]


class InadmissibleJunction(ValueError):
    pass


class StratumWithoutMixedSupport(ValueError):
    pass


class NotNormal(ValueError):
    pass


@dataclass(frozen=True)
class Junction:
    kind: ArcKind
    control: tuple[float, float]
    theta: float


def adjacency_admissible(h: CovectorState, tol: float = 1e-9) -> Junction | None:
    """Junction type at ``h`` (reduced coordinates) or None."""
    hn = h.normalized()
    h4, h5 = hn.h4, hn.h5
    atol = tol * max(1.0, abs(h4), abs(h5))
    if abs(hn.h3) > atol:
        return None
    if abs(hn.h1) <= tol and hn.h2 < 0 and h4 > atol and -atol <= h5 <= h4 + atol:
        return Junction(ArcKind.H1_SINGULAR, (min(max(h5 / h4, 0.0), 1.0), -1.0), 1.5 * math.pi)
    if abs(hn.h2) <= tol and hn.h1 > 0 and h5 > atol and abs(h4 - h5) <= atol:
        return Junction(ArcKind.H2_SINGULAR, (1.0, -1.0), 0.0)
    return None


def mixed_support(stratum: Stratum) -> tuple[ArcKind, ...]:
    """Junction kinds available on a stratum (empty when none)."""
    if stratum.case == 1 and stratum.level == 7:
        return (ArcKind.H1_SINGULAR,)
    if stratum.case == 2 and stratum.level == 5:
        return (ArcKind.H1_SINGULAR,)
    if stratum.case == 3 and stratum.level == 3:
        return (ArcKind.H1_SINGULAR, ArcKind.H2_SINGULAR)
    return ()


def junction_state(stratum: Stratum, kind: ArcKind = ArcKind.H1_SINGULAR) -> CovectorState:
    if kind not in mixed_support(stratum):
        raise StratumWithoutMixedSupport(
            f"case {stratum.case} {stratum.name} has no {kind.value} junction")
    if kind is ArcKind.H1_SINGULAR:
        return CovectorState(0.0, -1.0, 0.0, stratum.h4, stratum.h5)
    return CovectorState(1.0, 0.0, 0.0, stratum.h4, stratum.h5)


@dataclass(frozen=True)
class Bang:
    """Bang piece of a mixed plan.

    With ``n_arcs=None`` the piece runs until the flow next reaches a junction
    point (one loop of the level line); otherwise exactly ``n_arcs`` maximal
    arcs. ``branches`` resolves corners met on the way, the first entry also
    the departure from a junction corner.
    """

    n_arcs: int | None = None
    branches: tuple[Branch, ...] = ()


@dataclass(frozen=True)
class Singular:
    duration: float


PlanItem = Union[Bang, Singular]


def _bang_piece(h: CovectorState, item: Bang, to_junction: bool):
    """Raw quadrant steps merged into maximal arcs; returns arcs and end state."""
    branches = iter(item.branches)
    arcs: list[list] = []
    steps = 0
    while True:
        try:
            st = vertical_step(h)
        except CornerBranch:
            b = next(branches, None)
            if b is None:
                raise MissingBranchChoice(f"corner at {h}: bang piece needs a branch choice")
            st = vertical_step(h, b if isinstance(b, Branch) else Branch.parse(b))
        if arcs and arcs[-1][0] == st.letter:
            arcs[-1][1] += st.duration
        else:
            if item.n_arcs is not None and len(arcs) == item.n_arcs:
                return arcs, h
            arcs.append([st.letter, st.duration])
        h = st.end
        steps += 1
        if to_junction and adjacency_admissible(h) is not None:
            return arcs, h
        if steps > 10_000:
            raise RuntimeError("bang piece does not terminate")


def make_mixed_sequence(stratum: Stratum, plan: Sequence[PlanItem], start=None,
                        junction: ArcKind = ArcKind.H1_SINGULAR) -> ControlSequence:
    """Concatenate bang pieces and constant singular arcs on a stratum.

    The sequence starts at the junction point of kind ``junction`` unless a
    ``start`` (covector or (theta, h3)) is given. Every singular item must
    begin at an admissible junction, otherwise InadmissibleJunction.
    """
    support = mixed_support(stratum)
    if not support:
        raise StratumWithoutMixedSupport(
            f"case {stratum.case} {stratum.name} carries no mixed extremals")
    if start is None:
        h = junction_state(stratum, junction)
    elif isinstance(start, CovectorState):
        h = start
    else:
        h = CovectorState.from_theta(float(start[0]), float(start[1]), stratum.h4, stratum.h5)
    h0 = h
    arcs: list[Arc] = []
    for idx, item in enumerate(plan):
        if isinstance(item, Singular):
            j = adjacency_admissible(h)
            if j is None:
                raise InadmissibleJunction(
                    f"plan item {idx}: singular arc cannot start at theta={h.theta:.6g}, h3={h.h3:.3g}")
            if item.duration <= 0:
                raise ValueError("singular duration must be positive")
            arcs.append(Arc(j.control, item.duration, j.kind))
        elif isinstance(item, Bang):
            nxt = plan[idx + 1] if idx + 1 < len(plan) else None
            to_j = item.n_arcs is None
            pieces, h = _bang_piece(h, item, to_j)
            for letter, dur in pieces:
                if arcs and arcs[-1].is_bang and arcs[-1].letter == letter:
                    arcs[-1] = Arc(letter, arcs[-1].duration + dur)
                else:
                    arcs.append(Arc(letter, dur))
            if isinstance(nxt, Singular) and adjacency_admissible(h) is None:
                raise InadmissibleJunction(
                    f"plan item {idx}: bang piece ends at theta={h.theta:.6g}, not at a junction")
        else:
            raise TypeError(f"unknown plan item {item!r}")
    return ControlSequence(tuple(arcs), h0, stratum)


# --- classification ----------------------------------------------------------

class Overall(Enum):
    BANG_BANG = "bang-bang"
    SINGULAR = "singular"
    MIXED = "mixed"
    ABNORMAL_CONSTANT = "abnormal-constant"


@dataclass
class ExtremalClassification:
    breakpoints: np.ndarray
    kinds: list[ArcKind]
    letters: list[tuple[float, float]]
    overall: Overall
    short_arcs: list[int] = field(default_factory=list)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)


def _merge(pieces, tol):
    """pieces: list of (t0, t1, kind, letter); merge equal neighbours."""
    out: list[list] = []
    for t0, t1, kind, letter in pieces:
        if t1 - t0 <= 0:
            continue
        if out and out[-1][2] is kind and np.allclose(out[-1][3], letter, atol=1e-9):
            out[-1][1] = t1
        else:
            out.append([t0, t1, kind, letter])
    return out


def _classify_closed(ext: Extremal, tol: float):
    pieces = []
    for rec in ext.arcs:
        c = rec.h12_coefficients()
        H0 = abs(rec.h0[0]) + abs(rec.h0[1])
        if H0 < tol:
            raise NotNormal(f"|h1| + |h2| vanishes at t={rec.t0}")
        scale = max(1.0, H0)
        d = rec.t1 - rec.t0
        # sup of each quadratic on [0, d] bounded by its coefficients
        sup = [abs(ci[0]) + abs(ci[1]) * d + abs(ci[2]) * d * d for ci in c]
        if sup[0] < tol * scale:
            pieces.append((rec.t0, rec.t1, ArcKind.H1_SINGULAR, rec.control))
            continue
        if sup[1] < tol * scale:
            pieces.append((rec.t0, rec.t1, ArcKind.H2_SINGULAR, rec.control))
            continue
        cuts = [0.0, d]
        for c0, c1, c2 in c:
            if abs(c2) > tol * scale:
                disc = c1 * c1 - 4 * c2 * c0
                if disc > 0:
                    sq = math.sqrt(disc)
                    cuts += [(-c1 - sq) / (2 * c2), (-c1 + sq) / (2 * c2)]
            elif abs(c1) > tol * scale:
                cuts.append(-c0 / c1)
        eps = 1e-12 * max(1.0, d)
        cuts = sorted(x for x in set(cuts) | {0.0, d} if 0.0 <= x <= d)
        # near a double root the midpoint value is rounding noise: keep the
        # previous sign there, so touches do not split the arc
        prev = rec.control
        for a, b in zip(cuts, cuts[1:]):
            if b - a <= eps:
                continue
            m = 0.5 * (a + b)
            v = [ci[0] + ci[1] * m + ci[2] * m * m for ci in c]
            letter = tuple(
                (1.0 if v[i] > 0 else -1.0) if abs(v[i]) > tol * scale else float(np.sign(prev[i]) or 1.0)
                for i in range(2))
            pieces.append((rec.t0 + a, rec.t0 + b, ArcKind.BANG, letter))
            prev = letter
    return pieces


def _classify_sampled(t: np.ndarray, h1: np.ndarray, h2: np.ndarray, tol: float):
    t, h1, h2 = (np.asarray(a, dtype=float) for a in (t, h1, h2))
    if np.any(np.abs(h1) + np.abs(h2) < tol):
        raise NotNormal("|h1| + |h2| drops below tolerance")
    z1, z2 = np.abs(h1) < tol, np.abs(h2) < tol
    pieces = []
    for i in range(len(t) - 1):
        a, b = t[i], t[i + 1]
        if z1[i] and z1[i + 1]:
            pieces.append((a, b, ArcKind.H1_SINGULAR, (0.0, float(np.sign(h2[i])))))
            continue
        if z2[i] and z2[i + 1]:
            pieces.append((a, b, ArcKind.H2_SINGULAR, (float(np.sign(h1[i])), 0.0)))
            continue
        # linear interpolation of sign changes inside the sample interval
        cuts = [a, b]
        for h in (h1, h2):
            if h[i] * h[i + 1] < 0:
                cuts.append(a + (b - a) * h[i] / (h[i] - h[i + 1]))
        cuts.sort()
        for c0, c1 in zip(cuts, cuts[1:]):
            w = (0.5 * (c0 + c1) - a) / (b - a)
            v1 = (1 - w) * h1[i] + w * h1[i + 1]
            v2 = (1 - w) * h2[i] + w * h2[i + 1]
            pieces.append((c0, c1, ArcKind.BANG, (1.0 if v1 > 0 else -1.0, 1.0 if v2 > 0 else -1.0)))
    return pieces


def classify_extremal(signal, tol: float = 1e-9, h45: tuple[float, float] | None = None,
                      ) -> ExtremalClassification:
    """Split an extremal into bang and singular intervals.

    ``signal`` is an Extremal (exact, arc polynomials) or a tuple of sampled
    arrays (t, h1, h2). Touches of h1 h2 = 0 without a sign change are not
    breakpoints. Interior bang intervals shorter than the smallest interior
    duration of the stratum are listed in ``short_arcs``; this needs the
    Casimirs, taken from the extremal or from ``h45`` with E recomputed.
    """
    if isinstance(signal, Extremal):
        if not signal.arcs:
            raise ValueError("empty extremal")
        pieces = _classify_closed(signal, tol)
        h0 = signal.arcs[0].h0
    else:
        t, h1, h2 = signal[:3]
        pieces = _classify_sampled(t, h1, h2, tol)
        h0 = None
        if h45 is not None and len(signal) > 3:
            h3 = signal[3]
            h0 = np.array([h1[0], h2[0], h3[0], h45[0], h45[1]])
    merged = _merge(pieces, tol)
    bps = np.array([m[0] for m in merged] + [merged[-1][1]])
    kinds = [m[2] for m in merged]
    letters = [tuple(m[3]) for m in merged]
    n_bang = sum(k is ArcKind.BANG for k in kinds)
    if n_bang == len(kinds):
        overall = Overall.BANG_BANG
        if len(kinds) == 1 and isinstance(signal, Extremal):
            rec = signal.arcs[0]
            if np.allclose(rec.h(rec.t1)[0], rec.h0, atol=tol):
                overall = Overall.ABNORMAL_CONSTANT
    elif n_bang == 0:
        overall = Overall.SINGULAR
    else:
        overall = Overall.MIXED
    short = []
    if h0 is not None and len(kinds) > 2:
        from .vertical import classify_stratum

        hn = CovectorState.from_array(h0).normalized()
        try:
            st = classify_stratum(hn.h4, hn.h5, hn.E)
            tmin = switching_times(st).min_tau
        except (NoBangDynamics, ValueError):
            tmin = None
        if tmin is not None:
            d = np.diff(bps)
            short = [i for i in range(1, len(kinds) - 1)
                     if kinds[i] is ArcKind.BANG and d[i] < tmin * (1 - 1e-9)]
    return ExtremalClassification(bps, kinds, letters, overall, short)
