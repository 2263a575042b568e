"""Cartan algebra arithmetic and closed-form constant-control flows.

The algebra is spanned by X1..X5 with

    [X1, X2] = X3,  [X1, X3] = X4,  [X2, X3] = X5,  X4, X5 central.

Vectors are stored in the standard basis internally; the "plus/minus" basis
(X+, X-, X3, X++, X--) with X+ = X1 + X2, X- = X1 - X2, X++ = X4 + X5,
X-- = X4 - X5 is available for readability of switching computations.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Basis",
    "AlgebraVector",
    "AdjointMap",
    "GroupPoint",
    "IDENTITY",
    "X1", "X2", "X3", "X4", "X5", "XP", "XM", "XPP", "XMM",
    "bracket",
    "bracket_coords",
    "ad_matrix",
    "ad_exp",
    "ad_exp_matrix",
    "control_field",
    "flow_const",
    "flow_coords",
    "pair",
]


class Basis(Enum):
    STANDARD = "standard"
    PM = "pm"


# columns are X+, X-, X3, X++, X-- written in the standard basis
PM_TO_STANDARD = np.array(
    [
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 1.0, -1.0],
    ]
)
STANDARD_TO_PM = np.array(
    [
        [0.5, 0.5, 0.0, 0.0, 0.0],
        [0.5, -0.5, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.0, 0.5, -0.5],
    ]
)


def _frozen(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(5)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    """Element of the Cartan algebra, coordinates relative to ``basis``."""

    coords: np.ndarray
    basis: Basis = Basis.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    @classmethod
    def standard(cls, *coords: float) -> "AlgebraVector":
        return cls(np.array(coords, dtype=float), Basis.STANDARD)

    @classmethod
    def pm(cls, *coords: float) -> "AlgebraVector":
        return cls(np.array(coords, dtype=float), Basis.PM)

    @property
    def std(self) -> np.ndarray:
        """Coordinates in the standard basis."""
        if self.basis is Basis.STANDARD:
            return self.coords
        return PM_TO_STANDARD @ self.coords

    def to(self, basis: Basis) -> "AlgebraVector":
        if basis is self.basis:
            return self
        if basis is Basis.STANDARD:
            return AlgebraVector(self.std, Basis.STANDARD)
        return AlgebraVector(STANDARD_TO_PM @ self.coords, Basis.PM)

    def allclose(self, other: "AlgebraVector", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.std, other.std, rtol=0.0, atol=atol))

    def __add__(self, other: "AlgebraVector") -> "AlgebraVector":
        return AlgebraVector(self.std + other.std)

    def __sub__(self, other: "AlgebraVector") -> "AlgebraVector":
        return AlgebraVector(self.std - other.std)

    def __neg__(self) -> "AlgebraVector":
        return AlgebraVector(-self.coords, self.basis)

    def __mul__(self, scalar: float) -> "AlgebraVector":
        return AlgebraVector(scalar * self.coords, self.basis)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        names = ("X+", "X-", "X3", "X++", "X--") if self.basis is Basis.PM else (
            "X1", "X2", "X3", "X4", "X5")
        terms = [f"{c:+.6g}*{n}" for c, n in zip(self.coords, names) if c != 0.0]
        return "AlgebraVector(" + (" ".join(terms) or "0") + ")"


X1 = AlgebraVector.standard(1, 0, 0, 0, 0)
X2 = AlgebraVector.standard(0, 1, 0, 0, 0)
X3 = AlgebraVector.standard(0, 0, 1, 0, 0)
X4 = AlgebraVector.standard(0, 0, 0, 1, 0)
X5 = AlgebraVector.standard(0, 0, 0, 0, 1)
XP = AlgebraVector.pm(1, 0, 0, 0, 0)
XM = AlgebraVector.pm(0, 1, 0, 0, 0)
XPP = AlgebraVector.pm(0, 0, 0, 1, 0)
XMM = AlgebraVector.pm(0, 0, 0, 0, 1)


def bracket_coords(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lie bracket on raw standard coordinates."""
    return np.array(
        [
            0.0,
            0.0,
            a[0] * b[1] - a[1] * b[0],
            a[0] * b[2] - a[2] * b[0],
            a[1] * b[2] - a[2] * b[1],
        ]
    )


def bracket(a: AlgebraVector, b: AlgebraVector) -> AlgebraVector:
    """Lie bracket, returned in the standard basis."""
    return AlgebraVector(bracket_coords(a.std, b.std))


def ad_matrix(y: AlgebraVector | np.ndarray) -> np.ndarray:
    """Matrix of ``ad y`` acting on standard coordinates."""
    c = y.std if isinstance(y, AlgebraVector) else np.asarray(y, dtype=float)
    m = np.zeros((5, 5))
    # column j holds [y, X_j]
    m[2, 0], m[3, 0] = -c[1], -c[2]
    m[2, 1], m[4, 1] = c[0], -c[2]
    m[3, 2], m[4, 2] = c[0], c[1]
    return m


def ad_exp_matrix(y: AlgebraVector | np.ndarray, t: float) -> np.ndarray:
    """``exp(t ad y)``; the series stops at the quadratic term (step 3)."""
    a = ad_matrix(y)
    return np.eye(5) + t * a + 0.5 * t * t * (a @ a)


@dataclass(frozen=True, eq=False)
class AdjointMap:
    """Linear map on the algebra, usually ``exp(t ad generator)``.

    Composites built with ``@`` drop the generator and parameter.
    """

    matrix: np.ndarray
    generator: AlgebraVector | None = None
    t: float | None = None

    def __call__(self, a: AlgebraVector) -> AlgebraVector:
        return AlgebraVector(self.matrix @ a.std)

    def __matmul__(self, other: "AdjointMap") -> "AdjointMap":
        return AdjointMap(self.matrix @ other.matrix)

    def inverse(self) -> "AdjointMap":
        if self.generator is not None:
            return ad_exp(self.generator, -self.t)
        return AdjointMap(np.linalg.inv(self.matrix))


def ad_exp(y: AlgebraVector, t: float) -> AdjointMap:
    return AdjointMap(ad_exp_matrix(y, t), y, float(t))


def control_field(u: Sequence[float]) -> AlgebraVector:
    """The field u1*X1 + u2*X2."""
    return AlgebraVector.standard(u[0], u[1], 0.0, 0.0, 0.0)


def pair(h, a: AlgebraVector) -> float:
    """Pairing of a covector (h1..h5) with an algebra element."""
    hv = h.array if hasattr(h, "array") else np.asarray(h, dtype=float)
    return float(hv @ a.std)


@dataclass(frozen=True)
class GroupPoint:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    v: float = 0.0
    w: float = 0.0

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.v, self.w])

    @classmethod
    def from_array(cls, arr) -> "GroupPoint":
        return cls(*(float(c) for c in arr))


IDENTITY = GroupPoint()


def flow_coords(q: np.ndarray, u: Sequence[float], t) -> np.ndarray:
    """Closed-form solution of q' = u1 X1 + u2 X2 from q, for scalar or array t.

    x and y move linearly, z linearly (the planar area rate is constant for a
    constant control), v and w are cubic in t. Returns shape (5,) for scalar
    t and (n, 5) otherwise.
    """
    u1, u2 = float(u[0]), float(u[1])
    x0, y0, z0, v0, w0 = (float(c) for c in q)
    t = np.asarray(t, dtype=float)
    x = x0 + u1 * t
    y = y0 + u2 * t
    z = z0 + 0.5 * (x0 * u2 - y0 * u1) * t
    # integral of (x^2 + y^2)/2 over [0, t]
    r = 0.5 * ((x0 * x0 + y0 * y0) * t + (x0 * u1 + y0 * u2) * t * t
               + (u1 * u1 + u2 * u2) * t ** 3 / 3.0)
    v = v0 + u2 * r
    w = w0 - u1 * r
    return np.stack([x, y, z, v, w], axis=-1)


def flow_const(q: GroupPoint, u: Sequence[float], t: float) -> GroupPoint:
    """Endpoint of the constant-control flow from ``q`` after time ``t``."""
    if not np.isfinite(t):
        raise ValueError("flow time must be finite")
    return GroupPoint.from_array(flow_coords(q.array, u, t))
