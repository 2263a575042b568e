"""Second-order necessary condition for piecewise-constant controls.

For breakpoints t_0 < ... < t_{k+1}, controls u^0..u^k and a pivot j the
fields Z_i = P_i(Y_i) are built with P_j = P_{j-1} = Id and

    P_i = P_{i-1} exp((t_i - t_{i-1}) ad Y_{i-1}),   i > j,
    P_i = P_{i+1} exp(-(t_{i+2} - t_{i+1}) ad Y_{i+1}),   i < j - 1.

The form Q(a) = sum_{i<l} a_i a_l <h(t_j), [Z_i, Z_l]> restricted to
W = {sum a_i = 0, sum a_i Z_i = 0} must be negative semidefinite along a
minimizer; a violated principal-minor sign proves non-optimality.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .bangbang import (
    ControlSequence,
    anchor_state,
    make_sequence,
    switching_times,
)
from .lie_cartan import AlgebraVector, ad_exp_matrix, bracket_coords
from .singular_mixed import Bang, Singular, make_mixed_sequence, mixed_support
from .vertical import Branch, CovectorState, Stratum, classify_stratum

__all__ = [
    "AsymmetricInput",
    "BoundReport",
    "ExcludedExtremal",
    "NonMonotoneTimes",
    "OptimalityReport",
    "QFormProblem",
    "Verdict",
    "ag_test",
    "build_Q",
    "canonical_bang_sequence",
    "canonical_mixed_sequence",
    "compute_Z",
    "constraint_space",
    "eight_switch_problem",
    "eight_switch_a_matrix",
    "eight_switch_minor",
    "eight_switch_w_basis",
    "is_negative_semidefinite",
    "low_energy_optimal",
    "principal_minor",
    "restrict_Q",
    "sigma_table",
    "switching_bound_report",
]


class NonMonotoneTimes(ValueError):
    pass


class AsymmetricInput(ValueError):
    pass


class ExcludedExtremal(ValueError):
    """The extremal lies where the uniqueness hypothesis of the test fails."""


class Verdict(Enum):
    NOT_OPTIMAL = "NotOptimal"
    UNDETERMINED = "Undetermined"


def _Y(u) -> np.ndarray:
    return np.array([u[0], u[1], 0.0, 0.0, 0.0], dtype=float)


@dataclass(frozen=True)
class QFormProblem:
    """Piecewise-constant extremal: breakpoints, controls, covector at t_0.

    ``pivot`` fixes j; None means all j in 1..k are tried.
    """

    times: np.ndarray
    controls: tuple[tuple[float, float], ...]
    covector: CovectorState
    pivot: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "controls", tuple((float(u[0]), float(u[1])) for u in self.controls))
        if len(self.times) != len(self.controls) + 1:
            raise ValueError("need one more breakpoint than controls")

    @classmethod
    def from_sequence(cls, seq: ControlSequence, covector: CovectorState | None = None,
                      pivot: int | None = None) -> "QFormProblem":
        cov = covector if covector is not None else seq.covector
        if cov is None:
            raise ValueError("sequence carries no covector")
        return cls(seq.breakpoints(), tuple(seq.controls), cov, pivot)

    @property
    def k(self) -> int:
        return len(self.controls) - 1

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    def covector_at(self, j: int) -> CovectorState:
        h = self.covector.array
        for u, d in zip(self.controls[:j], self.durations[:j]):
            h = ad_exp_matrix(_Y(u), d).T @ h
        return CovectorState.from_array(h)


def compute_Z(times: Sequence[float], controls: Sequence, j: int) -> list[AlgebraVector]:
    """Fields Z_0..Z_k for pivot j (standard basis)."""
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise NonMonotoneTimes("breakpoints must be strictly increasing")
    k = len(controls) - 1
    if len(t) != k + 2:
        raise ValueError("need k + 2 breakpoints for k + 1 controls")
    if k < 1:
        raise ValueError("need at least one switching (k >= 1)")
    if not 1 <= j <= k:
        raise ValueError(f"pivot j must lie in 1..{k}")
    dur = np.diff(t)
    Y = [_Y(u) for u in controls]
    P: list[np.ndarray | None] = [None] * (k + 1)
    P[j] = P[j - 1] = np.eye(5)
    for i in range(j + 1, k + 1):
        P[i] = P[i - 1] @ ad_exp_matrix(Y[i - 1], dur[i - 1])
    for i in range(j - 2, -1, -1):
        P[i] = P[i + 1] @ ad_exp_matrix(Y[i + 1], -dur[i + 1])
    return [AlgebraVector(P[i] @ Y[i]) for i in range(k + 1)]


def _zmat(Z) -> np.ndarray:
    return np.array([z.std if isinstance(z, AlgebraVector) else np.asarray(z, float) for z in Z])


def sigma_table(h, Z) -> np.ndarray:
    """sigma_il = <h, [Z_i, Z_l]> for all i, l (antisymmetric)."""
    hv = h.array if isinstance(h, CovectorState) else np.asarray(h, dtype=float)
    z = _zmat(Z)
    n = len(z)
    s = np.zeros((n, n))
    for i in range(n):
        for l in range(i + 1, n):
            s[i, l] = hv @ bracket_coords(z[i], z[l])
            s[l, i] = -s[i, l]
    return s


def build_Q(h, Z) -> np.ndarray:
    """Symmetric matrix A of Q(a) = sum_{i<l} a_i a_l sigma_il, i.e. A_il = sigma_il / 2."""
    if len(Z) == 0:
        raise ValueError("Z must be nonempty")
    s = np.triu(sigma_table(h, Z), 1)
    return 0.5 * (s + s.T)


def constraint_space(Z, rcond: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of W = {sum a_i = 0, sum a_i Z_i = 0}."""
    z = _zmat(Z)
    C = np.vstack([z.T, np.ones(len(z))])
    return null_space(C, rcond=rcond)


def restrict_Q(Q: np.ndarray, B: np.ndarray) -> np.ndarray:
    R = B.T @ Q @ B
    return 0.5 * (R + R.T)


def principal_minor(A: np.ndarray, idx: Sequence[int]) -> float:
    idx = list(idx)
    return float(np.linalg.det(A[np.ix_(idx, idx)])) if idx else 1.0


def is_negative_semidefinite(A: np.ndarray, tol: float = 1e-10,
                             ) -> tuple[bool, tuple[int, ...] | None, float | None]:
    """Principal-minor test: (-1)^p * minor >= 0 for every index subset.

    After scaling by max |a_ij|, a p x p minor counts as zero when its block
    is within ``tol`` of singular, i.e. |minor| <= tol times the product of
    the block's p - 1 largest singular values. An absolute threshold on the
    minor would hide a small positive eigenvalue multiplied by the others.
    Returns (ok, first violating 0-based index set, its minor).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    n = A.shape[0]
    scale = float(np.max(np.abs(A))) if n else 0.0
    if not np.allclose(A, A.T, rtol=0.0, atol=tol * max(1.0, scale)):
        raise AsymmetricInput("matrix is not symmetric within tolerance")
    if n == 0 or scale == 0.0:
        return True, None, None
    if n > 20:
        raise ValueError("exhaustive minor enumeration is limited to n <= 20")
    A = 0.5 * (A + A.T) / scale
    for p in range(1, n + 1):
        combos = np.array(list(itertools.combinations(range(n), p)), dtype=int)
        blocks = A[combos[:, :, None], combos[:, None, :]]
        dets = np.linalg.det(blocks)
        sv = np.linalg.svd(blocks, compute_uv=False)
        zero = tol * np.prod(sv[:, :p - 1], axis=1)
        bad = np.nonzero((-1) ** p * dets < -zero)[0]
        if bad.size:
            i = int(bad[0])
            return False, tuple(int(c) for c in combos[i]), float(dets[i] * scale ** p)
    return True, None, None


def low_energy_optimal(h4: float, h5: float, E: float) -> bool:
    """Low-energy region min(-|h4|,-|h5|) < E <= max(-|h4|,-|h5|) (normalised H = 1)."""
    a, b = -abs(h4), -abs(h5)
    return min(a, b) < E <= max(a, b)


@dataclass
class OptimalityReport:
    verdict: Verdict
    pivot: int | None = None
    full_q: np.ndarray | None = None
    w_basis: np.ndarray | None = None
    restricted_q: np.ndarray | None = None
    witness: tuple[int, ...] | None = None
    witness_value: float | None = None
    pivots: list[dict] = field(default_factory=list)
    known_optimal: bool = False
    reason: str = ""
    # the uniqueness of the extremal lift is assumed, not checked
    uniqueness_checked: bool = False

    def to_dict(self, matrices: bool = False) -> dict:
        d = {
            "verdict": self.verdict.value,
            "pivot": self.pivot,
            "witness": list(self.witness) if self.witness is not None else None,
            "witness_value": self.witness_value,
            "dim_W": None if self.w_basis is None else int(self.w_basis.shape[1]),
            "pivots": self.pivots,
            "known_optimal": self.known_optimal,
            "reason": self.reason,
            "uniqueness_checked": self.uniqueness_checked,
        }
        if matrices:
            for name in ("full_q", "w_basis", "restricted_q"):
                m = getattr(self, name)
                d[name] = None if m is None else m.tolist()
        return d


def _excluded(h: CovectorState) -> bool:
    hn = h.normalized()
    return low_energy_optimal(hn.h4, hn.h5, hn.E)


def pivot_check(problem: QFormProblem, j: int, tol: float = 1e-10):
    Z = compute_Z(problem.times, problem.controls, j)
    h = problem.covector_at(j)
    Q = build_Q(h, Z)
    B = constraint_space(Z)
    R = restrict_Q(Q, B)
    ok, wit, val = is_negative_semidefinite(R, tol)
    return Q, B, R, ok, wit, val


def ag_test(problem: QFormProblem, tol: float = 1e-10, check_region: bool = True) -> OptimalityReport:
    """Quadratic-form test over all pivots (or the fixed one).

    Raises ExcludedExtremal in the low-energy region, where the trajectory is
    the projection of several independent extremals. Controls with one
    component constantly +-1 are singular, hence optimal: Undetermined with
    ``known_optimal`` set and no matrices computed.
    """
    if check_region and _excluded(problem.covector):
        raise ExcludedExtremal("covector lies in the low-energy optimal region")
    u = np.array(problem.controls)
    for c in range(2):
        if np.all(u[:, c] == u[0, c]) and abs(u[0, c]) == 1.0:
            return OptimalityReport(Verdict.UNDETERMINED, known_optimal=True,
                                    reason=f"u{c + 1} is constant: singular trajectory")
    k = problem.k
    if k < 1:
        return OptimalityReport(Verdict.UNDETERMINED, reason="no switchings")
    pivots = [problem.pivot] if problem.pivot is not None else list(range(1, k + 1))
    first = None
    summary = []
    for j in pivots:
        Q, B, R, ok, wit, val = pivot_check(problem, j, tol)
        summary.append({"pivot": j, "dim_W": int(B.shape[1]), "nsd": ok})
        if first is None:
            first = (j, Q, B, R, None, None)
        if not ok:
            rep = OptimalityReport(Verdict.NOT_OPTIMAL, j, Q, B, R, wit, val, summary,
                                   reason=f"principal minor {list(wit)} has the wrong sign")
            return rep
    j, Q, B, R, _, _ = first
    return OptimalityReport(Verdict.UNDETERMINED, j, Q, B, R, None, None, summary,
                            reason="Q|W negative semidefinite for every pivot")


# --- the eight-switch configuration on case 1 C4 -----------------------------

def eight_switch_problem(h4: float, h5: float, E: float) -> QFormProblem:
    """Nine arcs (+,+)(-,+)(-,-)(-,+)(+,+)(-,+)(-,-)(-,+)(+,+) with pivot j = 1.

    Interior durations tau2 tau3 tau2 tau1 tau2 tau3 tau2; the outer arcs get
    tau1. At t_1 the covector is (0, 1, sqrt(2(E + h4)), h4, h5).
    """
    if not (h4 > h5 > 0 and -h5 < E < h5):
        raise ValueError("eight-switch configuration needs h4 > h5 > 0 and -h5 < E < h5")
    st = classify_stratum(h4, h5, E)
    seq = make_sequence(st, anchor_state(st, -1), 9)
    return QFormProblem.from_sequence(seq, pivot=1)


def _c4_taus(h4, h5, E):
    p, q = math.sqrt(2 * (E + h4)), math.sqrt(2 * (E + h5))
    return 2 * p / (h4 + h5), 2 / (p + q), 2 * q / (h4 + h5)


def eight_switch_w_basis(t1: float, t2: float, t3: float) -> np.ndarray:
    """9 x 4 matrix mapping free coordinates (a0, a1, a2, a4) to a point of W."""
    B = np.zeros((9, 4))
    B[0, 0] = B[1, 1] = B[2, 2] = B[4, 3] = 1.0
    B[3] = [4 * t2 / t1, (2 * t3 - t1) / t1, -2 * t2 / t1, 0.0]
    B[5] = [-4 * t2 / t1, (t1 - 2 * t3) / t1, 2 * t2 / t1, -2 * t2 / t3]
    B[6] = [0.0, 0.0, -1.0, 0.0]
    B[7] = [0.0, -1.0, 0.0, 2 * t2 / t3]
    B[8] = [-1.0, 0.0, 0.0, -1.0]
    return B


def eight_switch_a_matrix(h4: float, h5: float, E: float) -> np.ndarray:
    """Coefficients a_ij (i, j in 0, 1, 2, 4) with Q|W = 4/(t1 t3) sum a_ij a_i a_j."""
    prob = eight_switch_problem(h4, h5, E)
    t1, t2, t3 = _c4_taus(h4, h5, E)
    Z = compute_Z(prob.times, prob.controls, 1)
    Q = build_Q(prob.covector_at(1), Z)
    B = eight_switch_w_basis(t1, t2, t3)
    return (t1 * t3 / 4.0) * restrict_Q(Q, B)


def eight_switch_minor(h4: float, X: float, Y: float) -> float:
    """Closed form of the {0, 1} minor of a_ij, with X = h5/h4 and Y = E/h4."""
    return 512 * (1 + Y) * (X + Y) * (X + Y - math.sqrt((1 + Y) * (X + Y))) / (h4 * (1 + X) ** 4)


# --- switching bounds --------------------------------------------------------

def canonical_bang_sequence(stratum: Stratum, n_arcs: int) -> ControlSequence:
    """Bang-bang arcs from the pi/2 anchor (first arc (+,+)); corners take UP."""
    return make_sequence(stratum, anchor_state(stratum, -1), n_arcs,
                         branches=[Branch.UP] * (n_arcs + 2))


def canonical_mixed_sequence(stratum: Stratum, n_arcs: int, d: float = 1.0) -> ControlSequence:
    """Singular arc of duration d at the h1 junction, then a full loop, repeated."""
    plan = []
    while True:
        plan += [Singular(d), Bang(None, (Branch.UP,))]
        seq = make_mixed_sequence(stratum, plan)
        if len(seq) >= n_arcs:
            return ControlSequence(seq.arcs[:n_arcs], seq.covector, stratum)


@dataclass
class BoundReport:
    stratum: Stratum
    kind: str
    rows: list[dict]
    min_not_optimal_arcs: int | None

    @property
    def max_candidate_switchings(self) -> int | None:
        """Largest switching count not excluded (sub-arcs of minimizers minimize)."""
        if self.min_not_optimal_arcs is None:
            return None
        return self.min_not_optimal_arcs - 2

    def to_dict(self) -> dict:
        return {
            "stratum": self.stratum.as_dict(),
            "kind": self.kind,
            "rows": self.rows,
            "min_not_optimal_arcs": self.min_not_optimal_arcs,
            "max_candidate_switchings": self.max_candidate_switchings,
        }


def window_verdicts(seq: ControlSequence, n_arcs: int, phases: int, tol: float = 1e-10) -> list[Verdict]:
    out = []
    for p in range(phases):
        w = seq.window(p, p + n_arcs)
        out.append(ag_test(QFormProblem.from_sequence(w), tol, check_region=False).verdict)
    return out


def switching_bound_report(stratum: Stratum, max_arcs: int = 14, kind: str = "bang",
                           min_arcs: int = 2, d: float = 1.0, tol: float = 1e-10) -> BoundReport:
    """Smallest arc count at which every canonical window is NotOptimal.

    Windows of the canonical sequence start at every arc of one period, so
    all start phases are covered. ``kind`` is "bang" or "mixed".
    """
    if kind == "bang":
        if low_energy_optimal(stratum.h4, stratum.h5, stratum.E) or not stratum.has_bang_dynamics:
            raise ExcludedExtremal("stratum lies in the low-energy optimal region")
        period = switching_times(stratum).period
        seq = canonical_bang_sequence(stratum, max_arcs + period)
    elif kind == "mixed":
        if not mixed_support(stratum):
            raise ValueError(f"case {stratum.case} {stratum.name} carries no mixed extremals")
        loop = canonical_mixed_sequence(stratum, 64, d)
        period = 1 + next(i for i, a in enumerate(loop.arcs[1:]) if not a.is_bang)
        seq = canonical_mixed_sequence(stratum, max_arcs + period, d)
    else:
        raise ValueError("kind must be 'bang' or 'mixed'")
    rows = []
    found = None
    for n in range(min_arcs, max_arcs + 1):
        v = window_verdicts(seq, n, period, tol)
        all_bad = all(x is Verdict.NOT_OPTIMAL for x in v)
        rows.append({"arcs": n, "switchings": n - 1,
                     "not_optimal_phases": sum(x is Verdict.NOT_OPTIMAL for x in v),
                     "phases": period, "all_not_optimal": all_bad})
        if all_bad:
            found = n
            break
    return BoundReport(stratum, kind, rows, found)
