"""Quaternions, 2x2 quaternionic matrices and the Moebius group.

A quaternion ``w + x i + y j + z k`` is stored as four floats.  Imaginary
quaternions double as points of R^3 via ``x i + y j + z k <-> (x, y, z)``.

2x2 quaternionic matrices act on imaginary quaternions by the fractional
linear map ``x -> (a x + b)(c x + d)^{-1}``.  The subgroup that preserves
Im H is characterised by three algebraic conditions, see :func:`in_mob3`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularMatrixError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, slots=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def imag(cls, v) -> "Quaternion":
        """Imaginary quaternion from a 3-vector."""
        return cls(0.0, float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_complex(cls, z: complex) -> "Quaternion":
        """Embed a + b sqrt(-1) as a + b i."""
        return cls(float(z.real), float(z.imag), 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def vec(self) -> np.ndarray:
        """Imaginary part as a 3-vector."""
        return np.array([self.x, self.y, self.z])

    @property
    def real(self) -> float:
        return self.w

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm2(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def __abs__(self) -> float:
        return math.sqrt(self.norm2())

    def is_imaginary(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.w) <= tol * max(1.0, abs(self))

    def __add__(self, o):
        if isinstance(o, Quaternion):
            return Quaternion(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
        return Quaternion(self.w + o, self.x, self.y, self.z)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Quaternion):
            return Quaternion(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
        return Quaternion(self.w - o, self.x, self.y, self.z)

    def __rsub__(self, o):
        return (-self) + o

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, o):
        if isinstance(o, Quaternion):
            return qmul(self, o)
        return Quaternion(self.w * o, self.x * o, self.y * o, self.z * o)

    def __rmul__(self, o):
        return Quaternion(self.w * o, self.x * o, self.y * o, self.z * o)

    def __truediv__(self, o):
        if isinstance(o, Quaternion):
            return qmul(self, qinv(o))
        return Quaternion(self.w / o, self.x / o, self.y / o, self.z / o)

    def close_to(self, o: "Quaternion", tol: float = DEFAULT_TOL) -> bool:
        return abs(self - o) <= tol * max(1.0, abs(self), abs(o))


ZERO = Quaternion()
ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def qmul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def qinv(q: Quaternion) -> Quaternion:
    n2 = q.norm2()
    if n2 == 0.0:
        raise DomainError("cannot invert the zero quaternion")
    return Quaternion(q.w / n2, -q.x / n2, -q.y / n2, -q.z / n2)


def qmul_array(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product over arrays of shape (..., 4)."""
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def qconj_array(q: np.ndarray) -> np.ndarray:
    out = -np.asarray(q, dtype=float)
    out[..., 0] *= -1.0
    return out


@dataclass(frozen=True, slots=True)
class QuatMat2:
    """The quaternionic matrix [[a, b], [c, d]]."""

    a: Quaternion
    b: Quaternion
    c: Quaternion
    d: Quaternion

    @classmethod
    def identity(cls) -> "QuatMat2":
        return cls(ONE, ZERO, ZERO, ONE)

    @classmethod
    def zeros(cls) -> "QuatMat2":
        return cls(ZERO, ZERO, ZERO, ZERO)

    @classmethod
    def scalar(cls, s: float) -> "QuatMat2":
        return cls(Quaternion(s), ZERO, ZERO, Quaternion(s))

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def __matmul__(self, o: "QuatMat2") -> "QuatMat2":
        return QuatMat2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def __mul__(self, o):
        if isinstance(o, QuatMat2):
            return self @ o
        return QuatMat2(self.a * o, self.b * o, self.c * o, self.d * o)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "QuatMat2":
        return QuatMat2(self.a / s, self.b / s, self.c / s, self.d / s)

    def __add__(self, o: "QuatMat2") -> "QuatMat2":
        return QuatMat2(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    def __sub__(self, o: "QuatMat2") -> "QuatMat2":
        return QuatMat2(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    def __neg__(self) -> "QuatMat2":
        return QuatMat2(-self.a, -self.b, -self.c, -self.d)

    def norm(self) -> float:
        """Frobenius norm over the sixteen real components."""
        return math.sqrt(sum(e.norm2() for e in self.entries()))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a.as_array(), self.b.as_array()],
                         [self.c.as_array(), self.d.as_array()]])

    @classmethod
    def from_array(cls, arr) -> "QuatMat2":
        arr = np.asarray(arr, dtype=float)
        return cls(Quaternion.from_array(arr[0, 0]), Quaternion.from_array(arr[0, 1]),
                   Quaternion.from_array(arr[1, 0]), Quaternion.from_array(arr[1, 1]))

    def close_to(self, o: "QuatMat2", tol: float = DEFAULT_TOL) -> bool:
        return (self - o).norm() <= tol * max(1.0, self.norm(), o.norm())


def study_det(T: QuatMat2) -> float:
    """Study determinant |a|^2|d|^2 + |b|^2|c|^2 - b d^ c a^ - a c^ d b^ (^ = conjugate).

    The two quaternionic terms are mutual conjugates, so the sum is real; the
    real part of the quaternion expression is returned.
    """
    a, b, c, d = T.entries()
    t1 = b * d.conj() * c * a.conj()
    t2 = a * c.conj() * d * b.conj()
    val = Quaternion(a.norm2() * d.norm2() + b.norm2() * c.norm2()) - t1 - t2
    return val.w


def qmat_inv(T: QuatMat2, tol: float = 0.0) -> QuatMat2:
    """Closed-form inverse scaled by the reciprocal Study determinant."""
    det = study_det(T)
    scale = T.norm() ** 4
    if det == 0.0 or abs(det) <= tol * scale:
        raise SingularMatrixError(f"Study determinant {det!r} vanishes")
    a, b, c, d = T.entries()
    ac, bc, cc, dc = a.conj(), b.conj(), c.conj(), d.conj()
    return QuatMat2(
        d.norm2() * ac - cc * d * bc,
        b.norm2() * cc - ac * b * dc,
        c.norm2() * bc - dc * c * ac,
        a.norm2() * dc - bc * a * cc,
    ) / det


def mob3_residuals(T: QuatMat2):
    """Residuals of the three conditions defining the Moebius group G.

    Returns ``(|b^d + d^b|, |a^c + c^a|, |Im(a^d + c^b)|, |a^d + c^b|)``.
    """
    a, b, c, d = T.entries()
    r1 = b.conj() * d + d.conj() * b
    r2 = a.conj() * c + c.conj() * a
    h = a.conj() * d + c.conj() * b
    return abs(r1), abs(r2), float(np.linalg.norm(h.vec)), abs(h)


def in_mob3(T: QuatMat2, tol: float = DEFAULT_TOL) -> bool:
    """Membership in G, with residuals measured relative to max(1, |T|^2)."""
    r1, r2, r3, h = mob3_residuals(T)
    scale = max(1.0, T.norm() ** 2)
    return r1 < tol * scale and r2 < tol * scale and r3 < tol * scale and h > tol * scale


class _Infinity:
    """Tag for the point at infinity produced by a Moebius map."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INFINITY"

    def __bool__(self):
        return False


INFINITY = _Infinity()


def mob_apply(T: QuatMat2, x: Quaternion, tol: float = DEFAULT_TOL):
    """Apply ``x -> (a x + b)(c x + d)^{-1}``; returns :data:`INFINITY` at the pole."""
    den = T.c * x + T.d
    if abs(den) <= tol * max(1.0, abs(T.c) * abs(x) + abs(T.d)):
        return INFINITY
    return (T.a * x + T.b) * qinv(den)


def translation(b: Quaternion) -> QuatMat2:
    return QuatMat2(ONE, b, ZERO, ONE)


def rotation_scaling(a: Quaternion, s: float = 1.0) -> QuatMat2:
    """x -> a x a^ / s, realised as [[a, 0], [0, s conj(a)^{-1}]]."""
    return QuatMat2(a, ZERO, ZERO, s * qinv(a.conj()))


INVERSION = QuatMat2(ZERO, ONE, ONE, ZERO)


def random_mob3(rng: np.random.Generator, scale: float = 1.0, depth: int = 1) -> QuatMat2:
    """A random element of G: ``depth`` words of translation, rotation-dilation and
    (with probability 1/2) inversion followed by a translation.

    Deeper words are worse conditioned: ``|T|^4 / [T]`` grows quickly with
    ``depth`` and the Study determinant, quartic in the entries, loses digits.
    """
    T = QuatMat2.identity()
    for _ in range(depth):
        b = Quaternion.imag(rng.normal(size=3) * scale)
        a = Quaternion.from_array(rng.normal(size=4))
        s = float(np.exp(rng.normal() * 0.3))
        T = T @ translation(b) @ rotation_scaling(a, s)
        if rng.random() < 0.5:
            T = T @ INVERSION @ translation(Quaternion.imag(rng.normal(size=3) * scale))
    return T
