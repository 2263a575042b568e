"""Vertical (covector) part of the extremal flow.

On a bang arc with control s = (s1, s2) the covector obeys

    h1' = -s2 h3,  h2' = s1 h3,  h3' = s1 h4 + s2 h5,  h4' = h5' = 0,

so inside a quadrant of the (h1, h2) square h3 is affine in time and h1, h2
are quadratic. Casimirs are h4, h5 and E = h3^2/2 + h1 h5 - h2 h4; on the
normalised cylinder H = |h1| + |h2| = 1 the state is charted by
h1 = sgn(cos th) cos^2 th, h2 = sgn(sin th) sin^2 th.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Branch",
    "CornerBranch",
    "CovectorState",
    "Equilibrium",
    "NoBangDynamics",
    "QuadrantArc",
    "StepTooLarge",
    "Stratum",
    "Symmetry",
    "D4",
    "NumericFlow",
    "classify_stratum",
    "continuations",
    "critical_levels",
    "energy",
    "is_stationary",
    "symmetry_reduce",
    "vertical_flow_numeric",
    "vertical_step",
]

TWO_PI = 2.0 * math.pi


class Equilibrium(Exception):
    """The vertical state does not move: singular or constant-control point."""


class CornerBranch(Exception):
    """Two continuations exist at a self-intersection of the level line."""

    def __init__(self, state, options):
        super().__init__(f"continuation at {state} is not unique: {options}")
        self.state = state
        self.options = options


class NoBangDynamics(ValueError):
    """The stratum carries no bang-bang switching (fixed points only)."""


class StepTooLarge(RuntimeError):
    pass


class Branch(Enum):
    """Continuation choice at a corner: the loop with h3 >= 0 (UP) or <= 0 (DOWN)."""

    UP = "up"
    DOWN = "down"

    @classmethod
    def parse(cls, text: str) -> "Branch":
        return cls(text.strip().lower())


def _sgn(x: float) -> int:
    return 1 if x > 0 else -1


def energy(h) -> float:
    h = h.array if isinstance(h, CovectorState) else np.asarray(h, dtype=float)
    return float(0.5 * h[2] * h[2] + h[0] * h[4] - h[1] * h[3])


@dataclass(frozen=True)
class CovectorState:
    h1: float
    h2: float
    h3: float
    h4: float
    h5: float

    @classmethod
    def from_array(cls, arr) -> "CovectorState":
        return cls(*(float(c) for c in arr))

    @classmethod
    def from_theta(cls, theta: float, h3: float, h4: float, h5: float) -> "CovectorState":
        c, s = math.cos(theta), math.sin(theta)
        return cls(math.copysign(c * c, c), math.copysign(s * s, s), h3, h4, h5)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3, self.h4, self.h5])

    @property
    def H(self) -> float:
        return abs(self.h1) + abs(self.h2)

    @property
    def E(self) -> float:
        return energy(self)

    @property
    def theta(self) -> float:
        """Chart angle in [0, 2pi) of the normalised state."""
        H = self.H
        if H == 0.0:
            raise ValueError("theta undefined for h1 = h2 = 0")
        a = math.copysign(math.sqrt(abs(self.h1) / H), self.h1)
        b = math.copysign(math.sqrt(abs(self.h2) / H), self.h2)
        return math.atan2(b, a) % TWO_PI

    def normalized(self) -> "CovectorState":
        H = self.H
        if H == 0.0:
            raise ValueError("cannot normalise a covector with h1 = h2 = 0")
        return CovectorState.from_array(self.array / H)


@dataclass(frozen=True)
class Symmetry:
    """Dihedral symmetry of the square |h1| + |h2| = 1.

    Realised by the algebra automorphism X1 -> e1 X_a, X2 -> e2 X_b where
    (a, b) = (1, 2), or (2, 1) when ``swap``. Controls and the planar (x, y)
    coordinates transform like (h1, h2).
    """

    swap: bool = False
    e1: int = 1
    e2: int = 1

    def _pair(self, p, q):
        a, b = self.e1 * p, self.e2 * q
        return (b, a) if self.swap else (a, b)

    def act_casimirs(self, h4: float, h5: float) -> tuple[float, float]:
        if self.swap:
            return -self.e1 * h5, -self.e2 * h4
        return self.e2 * h4, self.e1 * h5

    def act_covector(self, h: CovectorState) -> CovectorState:
        h1, h2 = self._pair(h.h1, h.h2)
        d = -1 if self.swap else 1
        h3 = self.e1 * self.e2 * d * h.h3
        h4, h5 = self.act_casimirs(h.h4, h.h5)
        return CovectorState(h1, h2, h3, h4, h5)

    def act_control(self, u: Sequence[float]) -> tuple[float, float]:
        return self._pair(u[0], u[1])

    def act_planar(self, x, y):
        return self._pair(x, y)

    def compose(self, other: "Symmetry") -> "Symmetry":
        """self after other, found by matching the action on a generic covector."""
        probe = CovectorState(0.11, -0.37, 0.53, 0.71, -0.29)
        target = self.act_covector(other.act_covector(probe)).array
        for g in D4:
            if np.allclose(g.act_covector(probe).array, target):
                return g
        raise AssertionError("D4 is closed under composition")

    def inverse(self) -> "Symmetry":
        for g in D4:
            if g.compose(self) == IDENTITY_SYMMETRY:
                return g
        raise AssertionError("every D4 element is invertible")

    def label(self) -> str:
        return f"{'swap,' if self.swap else ''}e1={self.e1:+d},e2={self.e2:+d}"


D4 = tuple(
    Symmetry(swap, e1, e2)
    for swap in (False, True)
    for e1 in (1, -1)
    for e2 in (1, -1)
)
IDENTITY_SYMMETRY = D4[0]


def symmetry_reduce(h4: float, h5: float) -> tuple[float, float, Symmetry]:
    """Map (h4, h5) into the fundamental domain h4 >= h5 >= 0."""
    for g in D4:
        a, b = g.act_casimirs(h4, h5)
        if a >= b >= 0.0:
            return a, b, g
    raise AssertionError("the fundamental domain meets every D4 orbit")


_CASE_LEVELS = {1: 8, 2: 6, 3: 4, 4: 2}


def critical_levels(case: int, h4: float, h5: float) -> list[float]:
    if case == 1:
        return [-h4, -h5, h5, h4]
    if case == 2:
        return [-h4, 0.0, h4]
    if case == 3:
        return [-h4, h4]
    return [0.0]


@dataclass(frozen=True)
class Stratum:
    """Energy stratum in the fundamental domain.

    ``h4``, ``h5``, ``E`` are the reduced Casimirs (snapped to exact
    equalities when the case or level was decided within tolerance);
    ``symmetry`` maps the original covector into the fundamental domain.
    """

    case: int
    level: int
    h4: float
    h5: float
    E: float
    symmetry: Symmetry = field(default=IDENTITY_SYMMETRY)
    boundary: bool = False

    @property
    def name(self) -> str:
        return f"C{self.level}"

    @property
    def is_critical(self) -> bool:
        return self.level % 2 == 1

    @property
    def has_bang_dynamics(self) -> bool:
        return self.level != 1

    @property
    def casimirs(self) -> tuple[float, float, float]:
        return self.h4, self.h5, self.E

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "level": self.name,
            "h4": self.h4,
            "h5": self.h5,
            "E": self.E,
            "symmetry": {"swap": self.symmetry.swap, "e1": self.symmetry.e1,
                         "e2": self.symmetry.e2},
            "boundary": self.boundary,
        }


def classify_stratum(h4: float, h5: float, E: float, tol: float = 1e-9) -> Stratum:
    """Case 1)-4) and level set C_i of normalised Casimirs (h4, h5, E).

    Equalities are decided with tolerance ``tol * max(1, |h4|, |h5|, |E|)``;
    a level within tolerance of a critical value is reported as that critical
    level with ``boundary=True``.
    """
    if not all(math.isfinite(v) for v in (h4, h5, E)):
        raise ValueError("Casimir values must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b, g = symmetry_reduce(h4, h5)
    atol = tol * max(1.0, abs(a), abs(b), abs(E))
    if a <= atol:
        case, a, b = 4, 0.0, 0.0
    elif a - b <= atol:
        case, b = 3, a
    elif b <= atol:
        case, b = 2, 0.0
    else:
        case = 1
    levels = critical_levels(case, a, b)
    if E < levels[0] - atol:
        raise ValueError(f"E={E} is below the minimum {levels[0]} of the energy on H = 1")
    for i, c in enumerate(levels):
        if abs(E - c) <= atol:
            return Stratum(case, 2 * i + 1, float(a), float(b), float(c), g, True)
        if E < c:
            return Stratum(case, 2 * i, float(a), float(b), float(E), g, False)
    return Stratum(case, 2 * len(levels), float(a), float(b), float(E), g, False)


# --- exact quadrant dynamics -------------------------------------------------

def _scale(h: CovectorState) -> float:
    return max(1.0, abs(h.h3), abs(h.h4), abs(h.h5))


def continuations(h: CovectorState, tol: float = 1e-12) -> list[tuple[int, int]]:
    """Control letters consistent with the motion leaving state ``h``.

    Off the quadrant boundaries this is the sign pattern of (h1, h2). On a
    boundary the vanishing component must move off zero with the sign of its
    control; when h3 = 0 there the second derivative decides, giving zero
    (equilibrium), one, or two (corner) admissible letters.
    """
    atol = tol * max(1.0, h.H)
    h1, h2, h3, h4, h5 = h.h1, h.h2, h.h3, h.h4, h.h5
    if abs(h1) > atol and abs(h2) > atol:
        return [(_sgn(h1), _sgn(h2))]
    stol = tol * _scale(h)
    if abs(h1) <= atol:
        s2 = _sgn(h2)
        if abs(h3) > stol:
            return [(-s2 * _sgn(h3), s2)]
        return [(s1, s2) for s1 in (1, -1) if -s2 * h4 - s1 * h5 > stol]
    s1 = _sgn(h1)
    if abs(h3) > stol:
        return [(s1, s1 * _sgn(h3))]
    return [(s1, s2) for s2 in (1, -1) if s2 * h4 + s1 * h5 > stol]


def is_stationary(h: CovectorState, letter: tuple[int, int], tol: float = 1e-12) -> bool:
    """True when the bang control ``letter`` leaves the vertical state fixed."""
    s1, s2 = letter
    stol = tol * _scale(h)
    return abs(h.h3) <= stol and abs(s1 * h.h4 + s2 * h.h5) <= stol


@dataclass(frozen=True)
class QuadrantArc:
    start: CovectorState
    end: CovectorState
    letter: tuple[int, int]
    duration: float


def _choose(h: CovectorState, options, branch: Branch | None):
    if not options:
        raise Equilibrium(f"no bang continuation from {h}")
    if len(options) == 1:
        return options[0]
    if branch is None:
        raise CornerBranch(h, options)
    for s1, s2 in options:
        k = s1 * h.h4 + s2 * h.h5
        if (k > 0) == (branch is Branch.UP):
            return (s1, s2)
    raise AssertionError("corner options leave in opposite h3 directions")


def vertical_step(h: CovectorState, branch: Branch | None = None,
                  tol: float = 1e-12, snap: float = 1e-9) -> QuadrantArc:
    """Advance to the next point where h1*h2 vanishes.

    The arrival point is written exactly from E-conservation: on h1 = 0 the
    value h3^2 = 2(E + s2 h4), on h2 = 0 the value h3^2 = 2(E - s1 h5). Roots
    with |h3^2| below ``snap`` are tangencies (h3 = 0). The arrival may be a
    tangency rather than a switching; callers merge equal letters.

    Raises Equilibrium for fixed points and CornerBranch when the state is a
    self-intersection of its level line and ``branch`` is not given.
    """
    h = CovectorState.from_array(h.array / h.H) if abs(h.H - 1.0) > 1e-12 else h
    s1, s2 = _choose(h, continuations(h, tol), branch)
    if is_stationary(h, (s1, s2), tol):
        raise Equilibrium(f"state {h} is fixed under control {(s1, s2)}")
    h3, h4, h5 = h.h3, h.h4, h.h5
    E = h.E
    k = s1 * h4 + s2 * h5
    stol = tol * _scale(h)
    if abs(k) <= stol:
        # h3 frozen: (h1, h2) slides linearly along the edge of the square
        if s1 * s2 * h3 > 0:
            dt = abs(h.h1) / abs(h3)
            end = CovectorState(0.0, float(s2), h3, h4, h5)
        else:
            dt = abs(h.h2) / abs(h3)
            end = CovectorState(float(s1), 0.0, h3, h4, h5)
        return QuadrantArc(h, end, (s1, s2), dt)
    esnap = snap * max(1.0, abs(E), abs(h4), abs(h5))
    best = None
    for arg, on_h1 in ((2.0 * (E + s2 * h4), True), (2.0 * (E - s1 * h5), False)):
        if arg < -esnap:
            continue
        r = math.sqrt(arg) if arg > esnap else 0.0
        for target in {r, -r}:
            dt = (target - h3) / k
            if dt > tol * max(1.0, abs(h3 / k)) and (best is None or dt < best[0]):
                best = (dt, target, on_h1)
    if best is None:
        raise AssertionError(f"no boundary ahead of {h} under {(s1, s2)}")
    dt, target, on_h1 = best
    if on_h1:
        end = CovectorState(0.0, float(s2), target, h4, h5)
    else:
        end = CovectorState(float(s1), 0.0, target, h4, h5)
    return QuadrantArc(h, end, (s1, s2), dt)


# --- numerical oracle --------------------------------------------------------

@dataclass
class NumericFlow:
    theta: float
    h3: float
    state: CovectorState
    switch_times: list[float]
    letters: list[tuple[int, int]]
    max_drift: float


def _rhs(y: np.ndarray, s1: int, s2: int, h4: float, h5: float) -> np.ndarray:
    return np.array([-s2 * y[2], s1 * y[2], s1 * h4 + s2 * h5])


def _rk4(y, dt, s1, s2, h4, h5):
    k1 = _rhs(y, s1, s2, h4, h5)
    k2 = _rhs(y + 0.5 * dt * k1, s1, s2, h4, h5)
    k3 = _rhs(y + 0.5 * dt * k2, s1, s2, h4, h5)
    k4 = _rhs(y + dt * k3, s1, s2, h4, h5)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _initial_signs(y: np.ndarray, h4: float, h5: float) -> tuple[int, int]:
    h1, h2, h3 = y
    if h1 != 0.0 and h2 != 0.0:
        return _sgn(h1), _sgn(h2)
    if h3 == 0.0:
        raise Equilibrium("oracle cannot start on a boundary with h3 = 0")
    if h1 == 0.0:
        s2 = _sgn(h2)
        return -s2 * _sgn(h3), s2
    s1 = _sgn(h1)
    return s1, s1 * _sgn(h3)


def vertical_flow_numeric(h: CovectorState, t: float, dt: float = 1e-3,
                          drift_tol: float = 1e-6, corner: Branch = Branch.UP,
                          touch_tol: float = 1e-5) -> NumericFlow:
    """Fixed-step RK4 integration of the vertical system with sign controls.

    Test oracle. The state is integrated in (h1, h2, h3); the theta chart has
    an unbounded right-hand side on the quadrant edges. A step whose end
    point shows a sign change of h1 or h2 is cut at the crossing (root of the
    old-sign RK4 step in the step fraction) and restarted with the new signs.

    Where h3 vanishes within ``touch_tol`` of a quadrant edge the motion is
    tangent to it: the state is snapped onto the edge and the letter chosen
    by the continuation rule, with ``corner`` deciding between two options.
    Raises StepTooLarge when E drifts by more than ``drift_tol``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    h4, h5 = h.h4, h.h5
    y = np.array([h.h1, h.h2, h.h3])
    s1, s2 = _initial_signs(y, h4, h5)
    e0 = energy(h)
    ttol = touch_tol * _scale(h)
    now = 0.0
    switches: list[float] = []
    letters = [(s1, s2)]
    drift = 0.0
    while now < t - 1e-15:
        step = min(dt, t - now)
        trial = _rk4(y, step, s1, s2, h4, h5)

        def comp(frac, i):
            return _rk4(y, frac * step, s1, s2, h4, h5)[i]

        n1 = _sgn(trial[0]) if trial[0] != 0.0 else s1
        n2 = _sgn(trial[1]) if trial[1] != 0.0 else s2
        flips = [i for i, (a, b) in enumerate(((n1, s1), (n2, s2))) if a != b]
        touch = None
        if y[2] != 0.0 and y[2] * trial[2] <= 0.0:
            f3 = brentq(comp, 0.0, 1.0, args=(2,), xtol=1e-15) if trial[2] != 0.0 else 1.0
            ym = _rk4(y, f3 * step, s1, s2, h4, h5)
            near = [i for i in (0, 1) if abs(ym[i]) < ttol]
            if near:
                touch = (f3, near[0], ym)
        if touch is None and flips:
            fracs = [brentq(comp, 0.0, 1.0, args=(i,), xtol=1e-15) for i in flips]
            frac, i = min(zip(fracs, flips))
            ym = _rk4(y, frac * step, s1, s2, h4, h5)
            if abs(ym[2]) < ttol:
                touch = (frac, i, ym)
        if touch is not None:
            f3, i, ym = touch
            ym[i] = 0.0
            ym[2] = 0.0
            now += f3 * step
            state = CovectorState(ym[0], ym[1], 0.0, h4, h5)
            new = _choose(state, continuations(state), corner)
            y = ym
            if new != (s1, s2):
                s1, s2 = new
                switches.append(now)
                letters.append(new)
        elif flips:
            y = ym
            y[i] = 0.0
            now += frac * step
            if i == 0:
                s1 = n1
            else:
                s2 = n2
            switches.append(now)
            letters.append((s1, s2))
        else:
            y = trial
            now += step
        drift = max(drift, abs(energy([y[0], y[1], y[2], h4, h5]) - e0))
        if drift > drift_tol:
            raise StepTooLarge(f"energy drift {drift:.3e} exceeds {drift_tol:.1e}")
    state = CovectorState(y[0], y[1], y[2], h4, h5)
    return NumericFlow(state.theta, y[2], state, switches, letters, drift)
