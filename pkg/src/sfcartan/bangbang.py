"""Bang-bang switching times, control sequences and trajectory synthesis.

Interior arc durations depend on the Casimirs (h4, h5, E) only. Sequences are
generated by chaining exact quadrant steps of the vertical system, so the
closed-form durations below serve as an independent cross-check rather than
as the generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .lie_cartan import GroupPoint, ad_exp_matrix, flow_coords
from .vertical import (
    Branch,
    CornerBranch,
    CovectorState,
    Equilibrium,
    NoBangDynamics,
    Stratum,
    Symmetry,
    continuations,
    is_stationary,
    vertical_step,
)

__all__ = [
    "Arc",
    "ArcKind",
    "ArcRecord",
    "ControlSequence",
    "Extremal",
    "InconsistentSequence",
    "InvalidStart",
    "MissingBranchChoice",
    "NoBangDynamics",
    "SwitchingTimes",
    "anchor_state",
    "covector_flow",
    "detect_switchings",
    "extremal_arcs",
    "iter_arcs",
    "make_sequence",
    "sequence_from_covector",
    "state_on_level",
    "switching_times",
    "synthesize",
]

PP, MP, MM, PM = (1, 1), (-1, 1), (-1, -1), (1, -1)


class InvalidStart(ValueError):
    pass


class MissingBranchChoice(ValueError):
    pass


class InconsistentSequence(ValueError):
    pass


# --- closed-form switching times --------------------------------------------

@dataclass(frozen=True)
class SwitchingTimes:
    """Arc durations of a stratum and its letter pattern.

    ``pattern`` is the cyclic word of (letter, index into ``taus``), taken in
    the h3 > 0 orientation where the two orientations differ. Figure-eight
    levels also carry ``lower``, the cycle on the loop h3 <= 0; the crossover
    at the corner joins the two.
    """

    stratum: Stratum
    taus: tuple[float, ...]
    pattern: tuple[tuple[tuple[int, int], int], ...]
    lower: tuple[tuple[tuple[int, int], int], ...] | None = None

    @property
    def kind(self) -> str:
        if self.lower is not None:
            return "figure-eight"
        if self.stratum.case == 3 and self.stratum.level == 3:
            return "two-corner"
        return "cycle"

    @property
    def period(self) -> int:
        return len(self.pattern)

    def durations(self, lower: bool = False) -> list[float]:
        word = self.lower if lower else self.pattern
        return [self.taus[i] for _, i in word]

    def letters(self, lower: bool = False) -> list[tuple[int, int]]:
        word = self.lower if lower else self.pattern
        return [s for s, _ in word]

    @property
    def min_tau(self) -> float:
        return min(self.taus)


def _patterns(case: int, level: int):
    if case == 1:
        if level in (2, 3):
            return ((PP, 0), (MP, 1)), None
        if level in (4, 5):
            return ((PP, 0), (MP, 1), (MM, 2), (MP, 1)), None
        if level == 6:
            return ((PP, 0), (MP, 1), (MM, 2), (MP, 1), (PP, 0), (PM, 3)), None
        if level == 7:
            return ((PP, 0), (MP, 1), (MM, 2), (PM, 3)), ((MP, 1), (PP, 0), (PM, 3), (MM, 2))
        return ((PP, 0), (MP, 1), (MM, 2), (PM, 3)), None
    if case == 2:
        if level in (2, 3):
            return ((PP, 0), (MP, 0)), None
        if level == 4:
            return ((PP, 0), (MP, 0), (MM, 1), (MP, 0), (PP, 0), (PM, 1)), None
        if level == 5:
            return ((PP, 0), (MP, 0), (MM, 1), (PM, 1)), ((MP, 0), (PP, 0), (PM, 1), (MM, 1))
        return ((PP, 0), (MP, 0), (MM, 1), (PM, 1)), None
    if case == 3:
        if level in (2, 3):
            return ((PP, 0), (MP, 1), (MM, 0), (MP, 1)), None
        return ((PP, 0), (MP, 1), (MM, 0), (PM, 2)), None
    return ((PP, 0), (MP, 0), (MM, 0), (PM, 0)), None


def _taus(case: int, level: int, h4: float, h5: float, E: float) -> tuple[float, ...]:
    def rt(x):
        return math.sqrt(max(2.0 * x, 0.0))

    p, q, r, s = rt(E + h4), rt(E + h5), rt(E - h5), rt(E - h4)
    if case == 1:
        a, b = h4 + h5, h4 - h5
        if level in (2, 3):
            return (2 * p / a, 2 * p / b)
        if level == 4:
            return (2 * p / a, 2 / (p + q), 2 * q / a)
        if level == 5:
            return (2 * math.sqrt(2 / a), (math.sqrt(2 * a) - 2 * math.sqrt(h5)) / b,
                    4 * math.sqrt(h5) / a)
        if level == 6:
            return (2 / (p + r), 2 / (p + q), 2 * q / a, 2 * r / b)
        if level == 7:
            return ((2 * math.sqrt(h4) - math.sqrt(2 * b)) / a,
                    (2 * math.sqrt(h4) - math.sqrt(2 * a)) / b,
                    math.sqrt(2 / a), math.sqrt(2 / b))
        return (2 / (p + r), 2 / (p + q), 2 / (q + s), 2 / (r + s))
    if case == 2:
        e = rt(E)
        if level == 2:
            return (2 * p / h4,)
        if level == 3:
            return (2 * math.sqrt(2 / h4),)
        if level == 4:
            return (2 / (p + e), 2 * e / h4)
        if level == 5:
            return ((2 - math.sqrt(2)) / math.sqrt(h4), math.sqrt(2 / h4))
        return (2 / (p + e), 2 / (e + s))
    if case == 3:
        if level == 2:
            return (p / h4, 1 / p)
        if level == 3:
            return (2 / math.sqrt(h4), 1 / (2 * math.sqrt(h4)))
        return (2 / (p + s), 1 / p, 1 / s)
    return (1 / math.sqrt(2 * E),)


def switching_times(stratum: Stratum) -> SwitchingTimes:
    """Closed-form interior arc durations and the letter pattern of a stratum."""
    if not stratum.has_bang_dynamics:
        raise NoBangDynamics(f"case {stratum.case} {stratum.name} consists of fixed points")
    case, level = stratum.case, stratum.level
    taus = _taus(case, level, stratum.h4, stratum.h5, stratum.E)
    pattern, lower = _patterns(case, level)
    return SwitchingTimes(stratum, taus, pattern, lower)


# --- control sequences -------------------------------------------------------

class ArcKind(Enum):
    BANG = "bang"
    H1_SINGULAR = "h1-singular"
    H2_SINGULAR = "h2-singular"


@dataclass(frozen=True)
class Arc:
    control: tuple[float, float]
    duration: float
    kind: ArcKind = ArcKind.BANG

    def __post_init__(self):
        u = (float(self.control[0]), float(self.control[1]))
        object.__setattr__(self, "control", u)
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"arc duration must be positive and finite, got {self.duration}")
        if max(abs(u[0]), abs(u[1])) > 1.0 + 1e-12:
            raise ValueError(f"control {u} outside the unit square")
        if self.kind is ArcKind.BANG and (abs(u[0]) != 1.0 or abs(u[1]) != 1.0):
            raise ValueError(f"bang arc needs a letter in {{-1, 1}}^2, got {u}")
        if self.kind is ArcKind.H1_SINGULAR and abs(u[1]) != 1.0:
            raise ValueError("h1-singular arc keeps u2 = +-1")
        if self.kind is ArcKind.H2_SINGULAR and abs(u[0]) != 1.0:
            raise ValueError("h2-singular arc keeps u1 = +-1")

    @property
    def letter(self) -> tuple[int, int]:
        return int(self.control[0]), int(self.control[1])

    @property
    def is_bang(self) -> bool:
        return self.kind is ArcKind.BANG

    def label(self) -> str:
        if self.is_bang:
            return "(" + ",".join("+" if s > 0 else "-" for s in self.letter) + ")"
        return f"S{self.kind.value[:2]}({self.control[0]:+.4g},{self.control[1]:+.4g})"


@dataclass(frozen=True)
class ControlSequence:
    """Ordered arcs plus, when known, the covector at the start of the first arc."""

    arcs: tuple[Arc, ...] = ()
    covector: CovectorState | None = None
    stratum: Stratum | None = None

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        for a, b in zip(self.arcs, self.arcs[1:]):
            if a.is_bang and b.is_bang:
                diff = sum(x != y for x, y in zip(a.letter, b.letter))
                if diff != 1:
                    raise ValueError(
                        f"consecutive bang letters {a.letter} -> {b.letter} "
                        "must differ in exactly one component")

    def __len__(self) -> int:
        return len(self.arcs)

    @property
    def controls(self) -> list[tuple[float, float]]:
        return [a.control for a in self.arcs]

    @property
    def durations(self) -> np.ndarray:
        return np.array([a.duration for a in self.arcs], dtype=float)

    @property
    def kinds(self) -> list[ArcKind]:
        return [a.kind for a in self.arcs]

    def breakpoints(self, t0: float = 0.0) -> np.ndarray:
        return t0 + np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def n_switchings(self) -> int:
        return max(len(self.arcs) - 1, 0)

    @property
    def total_time(self) -> float:
        return float(self.durations.sum())

    def transform(self, g: Symmetry) -> "ControlSequence":
        """Image under a D4 symmetry (controls and covector)."""
        kinds = {ArcKind.H1_SINGULAR: ArcKind.H2_SINGULAR,
                 ArcKind.H2_SINGULAR: ArcKind.H1_SINGULAR}
        arcs = tuple(
            Arc(g.act_control(a.control), a.duration,
                kinds.get(a.kind, a.kind) if g.swap else a.kind)
            for a in self.arcs)
        cov = g.act_covector(self.covector) if self.covector is not None else None
        return ControlSequence(arcs, cov, None)

    def window(self, start: int, stop: int) -> "ControlSequence":
        """Sub-sequence of arcs[start:stop] with the covector moved to its start."""
        cov = self.covector
        if cov is not None:
            cov = covector_flow(cov, self.arcs[:start])
        return ControlSequence(self.arcs[start:stop], cov, self.stratum)


def covector_flow(h: CovectorState, arcs: Iterable[Arc]) -> CovectorState:
    """Exact covector after a list of constant-control arcs."""
    v = h.array
    for a in arcs:
        v = ad_exp_matrix(np.array([a.control[0], a.control[1], 0, 0, 0.0]), a.duration).T @ v
    return CovectorState.from_array(v)


def _propagate(h: np.ndarray, u, t) -> np.ndarray:
    return ad_exp_matrix(np.array([u[0], u[1], 0.0, 0.0, 0.0]), t).T @ h


def state_on_level(stratum: Stratum, theta: float, sign: int = 1) -> CovectorState:
    """Reduced covector at angle theta on the stratum's level, h3 of the given sign."""
    h = CovectorState.from_theta(theta, 0.0, stratum.h4, stratum.h5)
    arg = 2.0 * (stratum.E - h.h1 * stratum.h5 + h.h2 * stratum.h4)
    tol = 1e-9 * max(1.0, abs(stratum.E), stratum.h4)
    if arg < -tol:
        raise InvalidStart(f"theta={theta} does not meet level E={stratum.E}")
    h3 = math.copysign(math.sqrt(max(arg, 0.0)), sign) if arg > tol else 0.0
    return CovectorState(h.h1, h.h2, h3, stratum.h4, stratum.h5)


def anchor_state(stratum: Stratum, sign: int = -1) -> CovectorState:
    """Switching point on the edge theta = pi/2 of the stratum's level.

    Every level meets this edge; with ``sign=-1`` the first arc is (+,+),
    matching the order of ``_patterns``.
    """
    return state_on_level(stratum, math.pi / 2, sign)


def iter_arcs(h: CovectorState, branches: Sequence[Branch] = ()):
    """Generate maximal bang arcs (letter, duration, start covector) from ``h``.

    Touches of a quadrant edge without a sign change are merged into the
    current arc. Branch choices are consumed in order at corner points.
    """
    if abs(h.H - 1.0) > 1e-12:
        h = h.normalized()
    branch_iter = iter(branches)
    cur = None
    first = True
    while True:
        try:
            step = vertical_step(h)
        except CornerBranch:
            b = next(branch_iter, None)
            if b is None:
                raise MissingBranchChoice(
                    f"corner at {h} reached; supply a branch choice") from None
            step = vertical_step(h, b if isinstance(b, Branch) else Branch.parse(b))
        except Equilibrium as exc:
            if first:
                raise NoBangDynamics(str(exc)) from exc
            raise
        first = False
        if cur is not None and step.letter == cur[0]:
            cur = (cur[0], cur[1] + step.duration, cur[2])
        else:
            if cur is not None:
                yield cur
            cur = (step.letter, step.duration, h)
        h = step.end


def extremal_arcs(h: CovectorState, n_arcs: int, branches: Sequence[Branch] = (),
                  ) -> list[tuple[tuple[int, int], float, CovectorState]]:
    """First ``n_arcs`` maximal bang arcs from covector ``h`` (see iter_arcs)."""
    out = []
    if n_arcs <= 0:
        return out
    for arc in iter_arcs(h, branches):
        out.append(arc)
        if len(out) == n_arcs:
            break
    return out


def make_sequence(stratum: Stratum, start, n_arcs: int, first_dur: float | None = None,
                  last_dur: float | None = None, branches: Sequence[Branch] = (),
                  tol: float = 1e-9) -> ControlSequence:
    """Bang-bang control sequence on a stratum (reduced coordinates).

    ``start`` is a (theta, h3) pair or a CovectorState on the level. The first
    arc is the maximal arc leaving ``start``; ``first_dur`` shortens it from
    the left (the sequence then starts later on that arc), ``last_dur`` cuts
    the last arc. Both must lie in (0, natural duration].
    """
    if isinstance(start, CovectorState):
        h = start
    else:
        theta, h3 = start
        h = CovectorState.from_theta(float(theta), float(h3), stratum.h4, stratum.h5)
    scale = max(1.0, abs(stratum.E), stratum.h4)
    if abs(h.H - 1.0) > tol or abs(h.h4 - stratum.h4) > tol * scale \
            or abs(h.h5 - stratum.h5) > tol * scale or abs(h.E - stratum.E) > tol * scale:
        raise InvalidStart(f"start {h} is not on the level E={stratum.E} of the stratum")
    return sequence_from_covector(h, n_arcs, first_dur, last_dur, branches, stratum)


def sequence_from_covector(h: CovectorState, n_arcs: int, first_dur: float | None = None,
                           last_dur: float | None = None, branches: Sequence[Branch] = (),
                           stratum: Stratum | None = None) -> ControlSequence:
    """Maximal bang arcs leaving ``h`` (any coordinates, any scale).

    A vertical fixed point with a unique bang letter yields one arc of length
    ``first_dur`` (constant control).
    """
    if n_arcs <= 0:
        return ControlSequence((), h, stratum)
    try:
        arcs = extremal_arcs(h, n_arcs, branches)
    except NoBangDynamics:
        opts = continuations(h.normalized())
        if len(opts) == 1 and is_stationary(h.normalized(), opts[0]) and n_arcs == 1 and first_dur:
            return ControlSequence((Arc(opts[0], first_dur),), h, stratum)
        raise
    letters = [a[0] for a in arcs]
    durs = [a[1] for a in arcs]
    if first_dur is not None:
        if not 0 < first_dur <= durs[0] * (1 + 1e-12):
            raise ValueError(f"first_dur must lie in (0, {durs[0]}]")
        skip = durs[0] - first_dur
        if skip > 0:
            h = CovectorState.from_array(_propagate(h.array, letters[0], skip))
        durs[0] = min(first_dur, durs[0])
    if last_dur is not None:
        if not 0 < last_dur <= durs[-1] * (1 + 1e-12):
            raise ValueError(f"last_dur must lie in (0, {durs[-1]}]")
        durs[-1] = min(last_dur, durs[-1])
    seq = tuple(Arc(s, d) for s, d in zip(letters, durs) if d > 0)
    return ControlSequence(seq, h, stratum)


# --- synthesis ---------------------------------------------------------------

@dataclass(frozen=True)
class ArcRecord:
    """Closed-form handle of one arc of a synthesized extremal."""

    t0: float
    t1: float
    control: tuple[float, float]
    kind: ArcKind
    q0: np.ndarray
    h0: np.ndarray

    def q(self, t) -> np.ndarray:
        return flow_coords(self.q0, self.control, np.asarray(t) - self.t0)

    def h(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)) - self.t0
        y = np.array([self.control[0], self.control[1], 0.0, 0.0, 0.0])
        return np.stack([ad_exp_matrix(y, s).T @ self.h0 for s in t])

    def h12_coefficients(self) -> np.ndarray:
        """Polynomial coefficients (constant, linear, quadratic) of h1, h2 on the arc."""
        u1, u2 = self.control
        h1, h2, h3, h4, h5 = self.h0
        k = u1 * h4 + u2 * h5
        return np.array([
            [h1, -u2 * h3, -0.5 * u2 * k],
            [h2, u1 * h3, 0.5 * u1 * k],
        ])


@dataclass
class Extremal:
    times: np.ndarray
    points: np.ndarray
    covectors: np.ndarray
    controls: np.ndarray
    arcs: list[ArcRecord] = field(default_factory=list)

    @property
    def endpoint(self) -> GroupPoint:
        return GroupPoint.from_array(self.points[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        if not self.arcs:
            return np.array([self.times[0]])
        return np.array([a.t0 for a in self.arcs] + [self.arcs[-1].t1])

    @property
    def kinds(self) -> list[ArcKind]:
        return [a.kind for a in self.arcs]

    def boundary_covectors(self) -> np.ndarray:
        if not self.arcs:
            return self.covectors[:1]
        last = self.arcs[-1]
        return np.vstack([a.h0 for a in self.arcs] + [last.h(last.t1)])

    def h_at(self, t: float) -> np.ndarray:
        for a in self.arcs:
            if t <= a.t1:
                return a.h(t)[0]
        return self.covectors[-1]

    @property
    def theta(self) -> np.ndarray:
        out = np.full(len(self.times), np.nan)
        for i, h in enumerate(self.covectors):
            if abs(h[0]) + abs(h[1]) > 0:
                out[i] = CovectorState.from_array(h).theta
        return out


def _check_arc(h0: np.ndarray, arc: Arc, tol: float, index: int):
    rec = ArcRecord(0.0, arc.duration, arc.control, arc.kind, np.zeros(5), h0)
    coef = rec.h12_coefficients()
    d = arc.duration
    # extreme points of each quadratic on [0, d]
    ts = [0.0, d]
    for c in coef:
        if c[2] != 0.0:
            tv = -c[1] / (2 * c[2])
            if 0 < tv < d:
                ts.append(tv)
    ts = np.array(sorted(ts))
    vals = np.stack([c[0] + c[1] * ts + c[2] * ts * ts for c in coef])
    scale = max(1.0, abs(h0[0]) + abs(h0[1]))
    atol = tol * scale
    u = arc.control
    if arc.kind is ArcKind.BANG:
        for i in range(2):
            if np.any(u[i] * vals[i] < -atol):
                raise InconsistentSequence(
                    f"arc {index} {arc.label()}: sign of h{i + 1} contradicts the control")
        return
    i_zero = 0 if arc.kind is ArcKind.H1_SINGULAR else 1
    other = 1 - i_zero
    if np.any(np.abs(vals[i_zero]) > atol):
        raise InconsistentSequence(f"arc {index}: h{i_zero + 1} does not vanish on the singular arc")
    if np.any(u[other] * vals[other] <= atol):
        raise InconsistentSequence(f"arc {index}: fixed control component disagrees with h{other + 1}")


def synthesize(q0: GroupPoint, lam0: CovectorState | None, seq: ControlSequence,
               samples_per_arc: int = 16, t0: float = 0.0, tol: float = 1e-9,
               check: bool = True) -> Extremal:
    """Trajectory and covector along a control sequence.

    The horizontal part uses the exact constant-control flow on each arc, the
    covector the exact coadjoint action. With ``check`` every arc is verified
    against the maximum condition (bang: s_i h_i >= 0; singular: the matching
    h_i vanishes identically); violations raise InconsistentSequence.
    """
    if samples_per_arc < 1:
        raise ValueError("samples_per_arc must be >= 1")
    if lam0 is None:
        if seq.covector is None:
            raise ValueError("no initial covector given")
        lam0 = seq.covector
    q = np.asarray(q0.array, dtype=float)
    h = lam0.array.astype(float)
    t = float(t0)
    ts, qs, hs, us, recs = [], [], [], [], []
    for idx, arc in enumerate(seq.arcs):
        if check:
            _check_arc(h, arc, tol, idx)
        rec = ArcRecord(t, t + arc.duration, arc.control, arc.kind, q.copy(), h.copy())
        s = np.linspace(0.0, arc.duration, samples_per_arc + 1)[:-1]
        ts.append(t + s)
        qs.append(flow_coords(q, arc.control, s).reshape(-1, 5))
        hs.append(rec.h(t + s))
        us.append(np.tile(arc.control, (len(s), 1)))
        recs.append(rec)
        q = flow_coords(q, arc.control, arc.duration)
        h = _propagate(h, arc.control, arc.duration)
        t += arc.duration
    last_u = seq.arcs[-1].control if seq.arcs else (np.nan, np.nan)
    ts.append(np.array([t]))
    qs.append(q.reshape(1, 5))
    hs.append(h.reshape(1, 5))
    us.append(np.array([last_u], dtype=float))
    return Extremal(np.concatenate(ts), np.vstack(qs), np.vstack(hs), np.vstack(us), recs)


def detect_switchings(lam0: CovectorState, T: float, branches: Sequence[Branch] = ()) -> list[float]:
    """Times in (0, T] at which h1 or h2 changes sign along the exact vertical flow."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    times: list[float] = []
    t = 0.0
    for _, dur, _ in iter_arcs(lam0, branches):
        t += dur
        if t > T:
            break
        times.append(t)
    return times
