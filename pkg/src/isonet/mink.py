"""Minkowski 5-space R^{4,1} as 2x2 quaternionic matrices.

A vector is the matrix ``[[x, xinf], [x0, -x]]`` with ``x`` imaginary and
``x0, xinf`` real.  The inner product is read off from
``X Y + Y X = -2 <X, Y> I``, which gives

    <X, Y> = x . y - (x0 yinf + xinf y0) / 2.

Points of R^3 lift to the light cone; a space form of curvature kappa is the
slice ``<X, Q> = -1`` with ``Q = [[0, 1], [kappa, 0]]``.  Spacelike vectors
describe spheres ``{Y : <Y, S> = 0}``.

Arrays of vectors use the field order ``(x1, x2, x3, x0, xinf)`` on the last
axis; :func:`to_orthonormal` converts to coordinates in which the metric is
``diag(1, 1, 1, 1, -1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .quat import (DEFAULT_TOL, INFINITY, ONE, ZERO, Quaternion, QuatMat2,
                   qmat_inv)

MANIFOLD_TOL = 1e-8


@dataclass(frozen=True, slots=True)
class MinkVec:
    x: Quaternion
    x0: float
    xinf: float

    @classmethod
    def from_array(cls, a) -> "MinkVec":
        return cls(Quaternion(0.0, float(a[0]), float(a[1]), float(a[2])), float(a[3]), float(a[4]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x.x, self.x.y, self.x.z, self.x0, self.xinf])

    def as_mat(self) -> QuatMat2:
        return QuatMat2(self.x, Quaternion(self.xinf), Quaternion(self.x0), -self.x)

    @classmethod
    def from_mat(cls, M: QuatMat2, tol: float | None = None) -> "MinkVec":
        """Read a matrix back as a vector; with ``tol`` the matrix shape is validated."""
        x = (M.a - M.d) * 0.5
        v = cls(Quaternion(0.0, x.x, x.y, x.z), M.c.w, M.b.w)
        if tol is not None:
            resid = (M - v.as_mat()).norm()
            if resid > tol * max(1.0, M.norm()):
                raise ValidationError(f"matrix is not in R^(4,1) (residual {resid:.3e})")
        return v

    def __add__(self, o: "MinkVec") -> "MinkVec":
        return MinkVec(self.x + o.x, self.x0 + o.x0, self.xinf + o.xinf)

    def __sub__(self, o: "MinkVec") -> "MinkVec":
        return MinkVec(self.x - o.x, self.x0 - o.x0, self.xinf - o.xinf)

    def __neg__(self) -> "MinkVec":
        return MinkVec(-self.x, -self.x0, -self.xinf)

    def __mul__(self, s: float) -> "MinkVec":
        return MinkVec(self.x * s, self.x0 * s, self.xinf * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "MinkVec":
        return MinkVec(self.x / s, self.x0 / s, self.xinf / s)

    def norm2(self) -> float:
        return inner(self, self)


def inner(X: MinkVec, Y: MinkVec) -> float:
    return (X.x.x * Y.x.x + X.x.y * Y.x.y + X.x.z * Y.x.z
            - 0.5 * (X.x0 * Y.xinf + X.xinf * Y.x0))


def inner_via_matrices(X: MinkVec, Y: MinkVec) -> float:
    """The same inner product computed as -1/2 of the scalar XY + YX."""
    A, B = X.as_mat(), Y.as_mat()
    S = A @ B + B @ A
    return -0.5 * S.a.w


def inner_array(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return (np.sum(A[..., :3] * B[..., :3], axis=-1)
            - 0.5 * (A[..., 3] * B[..., 4] + A[..., 4] * B[..., 3]))


METRIC = np.diag([1.0, 1.0, 1.0, 1.0, -1.0])


def to_orthonormal(A: np.ndarray) -> np.ndarray:
    """(x1, x2, x3, x0, xinf) -> (x1, x2, x3, x4, x5) with x4 = (xinf - x0)/2, x5 = (xinf + x0)/2."""
    A = np.asarray(A, dtype=float)
    out = np.empty(A.shape)
    out[..., :3] = A[..., :3]
    out[..., 3] = 0.5 * (A[..., 4] - A[..., 3])
    out[..., 4] = 0.5 * (A[..., 4] + A[..., 3])
    return out


def from_orthonormal(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    out = np.empty(C.shape)
    out[..., :3] = C[..., :3]
    out[..., 3] = C[..., 4] - C[..., 3]
    out[..., 4] = C[..., 4] + C[..., 3]
    return out


def basis() -> list[MinkVec]:
    """diag(i,-i), diag(j,-j), diag(k,-k), [[0,1],[-1,0]], [[0,1],[1,0]]."""
    return [
        MinkVec(Quaternion(0, 1, 0, 0), 0.0, 0.0),
        MinkVec(Quaternion(0, 0, 1, 0), 0.0, 0.0),
        MinkVec(Quaternion(0, 0, 0, 1), 0.0, 0.0),
        MinkVec(ZERO, -1.0, 1.0),
        MinkVec(ZERO, 1.0, 1.0),
    ]


def gram(vectors) -> np.ndarray:
    V = np.asarray([v.as_array() if isinstance(v, MinkVec) else v for v in vectors], dtype=float)
    return inner_array(V[:, None, :], V[None, :, :])


def conjugate_by(T: QuatMat2, X: MinkVec, tol: float | None = None) -> MinkVec:
    """X -> T X T^{-1}."""
    return MinkVec.from_mat(T @ X.as_mat() @ qmat_inv(T), tol=tol)


@dataclass(frozen=True)
class SpaceForm:
    kappa: float = 0.0

    @property
    def Q(self) -> MinkVec:
        return MinkVec(ZERO, self.kappa, 1.0)


def space_form_Q(kappa: float) -> MinkVec:
    return SpaceForm(kappa).Q


def unscaled_lift(x: Quaternion) -> MinkVec:
    """[[x, -x^2], [1, -x]]; note -x^2 = |x|^2 for imaginary x."""
    return MinkVec(Quaternion(0.0, x.x, x.y, x.z), 1.0, x.norm2())


def lift(x: Quaternion, sf: SpaceForm | float = 0.0) -> MinkVec:
    """Light-cone lift of x normalised into the space form: <lift, Q> = -1."""
    kappa = sf.kappa if isinstance(sf, SpaceForm) else float(sf)
    den = 1.0 + kappa * x.norm2()
    if abs(den) <= DEFAULT_TOL:
        raise DomainError("point lies on the excluded set kappa |x|^2 = -1")
    return unscaled_lift(x) * (2.0 / den)


def lift_array(points: np.ndarray, kappa: float = 0.0, scale: np.ndarray | None = None) -> np.ndarray:
    """Vectorised lifts of an array of 3-vectors; ``scale`` overrides the space-form factor."""
    P = np.asarray(points, dtype=float)
    n2 = np.sum(P * P, axis=-1)
    if scale is None:
        den = 1.0 + kappa * n2
        if np.any(np.abs(den) <= DEFAULT_TOL):
            raise DomainError("point lies on the excluded set kappa |x|^2 = -1")
        scale = 2.0 / den
    out = np.empty(P.shape[:-1] + (5,))
    out[..., :3] = P
    out[..., 3] = 1.0
    out[..., 4] = n2
    return out * np.asarray(scale)[..., None]


def project(X: MinkVec, sf: SpaceForm | float = 0.0, tol: float = DEFAULT_TOL):
    """Return ``(x, scale)`` where x is the point and ``scale * X`` lies in M_kappa.

    ``x`` is :data:`INFINITY` when the lower-left entry vanishes; ``scale`` is
    None when X is orthogonal to Q.
    """
    kappa = sf.kappa if isinstance(sf, SpaceForm) else float(sf)
    Q = MinkVec(ZERO, kappa, 1.0)
    ip = inner(X, Q)
    scale = None if abs(ip) <= tol * max(1.0, math.sqrt(abs(X.as_array() @ X.as_array()))) else -1.0 / ip
    size = max(abs(X.x), abs(X.x0), abs(X.xinf))
    if abs(X.x0) <= tol * max(size, 1e-300):
        return INFINITY, scale
    return X.x / X.x0, scale


def project_array(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return A[..., :3] / A[..., 3:4]


def is_lightlike(X: MinkVec, tol: float = MANIFOLD_TOL) -> bool:
    a = X.as_array()
    return abs(inner(X, X)) <= tol * max(1.0, float(a @ a))


# ---------------------------------------------------------------- spheres


@dataclass(frozen=True)
class SphereGeometry:
    """Euclidean data of a sphere vector in Im H coordinates.

    ``kind`` is ``"sphere"`` or ``"plane"``.  For spheres, ``H0`` is the
    mean curvature measured in the flat space form M_0, whose metric is four
    times the Euclidean one.  ``radius`` is measured in that metric, so
    ``H0 = 1 / radius``; ``euclidean_radius`` is half of it and is the
    distance from ``center`` in plain R^3 coordinates.  For planes,
    ``normal`` and ``offset`` describe ``{y : y . normal = offset}``.
    """

    kind: str
    center: np.ndarray | None
    radius: float | None
    H0: float
    normal: np.ndarray | None = None
    offset: float | None = None
    norm: float = 1.0

    @property
    def euclidean_radius(self) -> float | None:
        return None if self.radius is None else 0.5 * self.radius

    def H_kappa(self, kappa: float) -> float:
        """Mean curvature of the same sphere inside M_kappa."""
        if self.kind == "plane":
            raise DomainError("use a sphere for the space-form mean curvature")
        c2 = float(self.center @ self.center)
        return self.H0 - kappa / (4.0 * self.H0) + self.H0 * kappa * c2


def sphere_norm(S: MinkVec) -> float:
    n2 = inner(S, S)
    if n2 <= 0.0:
        raise DomainError("sphere vectors must be spacelike")
    return math.sqrt(n2)


def sphere_geometry(S: MinkVec, tol: float = DEFAULT_TOL) -> SphereGeometry:
    n = sphere_norm(S)
    z = S.x.vec
    if abs(S.x0) <= tol * n:
        zn = float(np.linalg.norm(z))
        return SphereGeometry("plane", None, None, 0.0, normal=z / zn,
                              offset=S.xinf / (2.0 * zn), norm=n)
    return SphereGeometry("sphere", z / S.x0, 2.0 * n / abs(S.x0), abs(S.x0) / (2.0 * n), norm=n)


def sphere_from_center_radius(center, radius: float) -> MinkVec:
    """Sphere of Euclidean ``radius`` about ``center``."""
    c = np.asarray(center, dtype=float)
    return MinkVec(Quaternion.imag(c), 1.0, float(c @ c) - radius * radius)


def plane_vec(normal, offset: float) -> MinkVec:
    nrm = np.asarray(normal, dtype=float)
    nrm = nrm / np.linalg.norm(nrm)
    return MinkVec(Quaternion.imag(nrm), 0.0, 2.0 * offset)


def sphere_mean_curvature(S: MinkVec, Q: MinkVec) -> float:
    """-<S, Q> / ||S||: the mean curvature of S in the space form fixed by Q."""
    return -inner(S, Q) / sphere_norm(S)


def sphere_angle(S1: MinkVec, S2: MinkVec, tol: float = DEFAULT_TOL) -> float:
    """Principal intersection angle in [0, pi]; orientation is left to the caller."""
    c = inner(S1, S2) / (sphere_norm(S1) * sphere_norm(S2))
    if abs(c) > 1.0 + tol:
        raise DomainError(f"spheres do not intersect (|cos| = {abs(c):.6g})")
    return math.acos(max(-1.0, min(1.0, c)))


def invert_through(S: MinkVec, p: MinkVec) -> MinkVec:
    """Reflection p -> p - 2 <p, S> S, with S normalised internally."""
    return p - S * (2.0 * inner(p, S) / inner(S, S))


def antipodal_matrix(kappa: float) -> QuatMat2:
    """The G element [[0, 1], [kappa, 0]] realising x -> kappa^{-1} x^{-1}."""
    if kappa == 0:
        raise DomainError("the antipodal map needs kappa != 0")
    return QuatMat2(ZERO, ONE, Quaternion(kappa), ZERO)


# --------------------------------------------------------- hyperbolic models


def _check_hyperboloid(x, tol):
    x = np.asarray(x, dtype=float)
    if x[3] <= 0:
        raise ValidationError("point is not on the upper sheet (x0 <= 0)")
    resid = x[3] ** 2 - x[0] ** 2 - x[1] ** 2 - x[2] ** 2 - 1.0
    if abs(resid) > tol * max(1.0, x[3] ** 2):
        raise ValidationError(f"point is off the hyperboloid (residual {resid:.3e})")
    return x


def to_poincare(x1, x2, x3, x0, tol: float = MANIFOLD_TOL) -> np.ndarray:
    x = _check_hyperboloid((x1, x2, x3, x0), tol)
    return x[:3] / (1.0 + x[3])


def from_poincare(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    r2 = float(p @ p)
    if r2 >= 1.0:
        raise DomainError("point is not inside the unit ball")
    return np.append(2.0 * p, 1.0 + r2) / (1.0 - r2)


def to_upper_half(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    r2 = float(p @ p)
    if r2 >= 1.0:
        raise DomainError("point is not inside the unit ball")
    den = p[0] ** 2 + p[1] ** 2 + (p[2] - 1.0) ** 2
    return np.array([2.0 * p[0], 2.0 * p[1], 1.0 - r2]) / den


def from_upper_half(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u[2] <= 0.0:
        raise DomainError("point is not in the upper half-space")
    den = u[0] ** 2 + u[1] ** 2 + (u[2] + 1.0) ** 2
    return np.array([2.0 * u[0], 2.0 * u[1], float(u @ u) - 1.0]) / den


def to_hermitian(x1, x2, x3, x0) -> np.ndarray:
    return np.array([[x0 + x3, x1 + 1j * x2], [x1 - 1j * x2, x0 - x3]], dtype=complex)


def from_hermitian(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return np.array([A[0, 1].real, A[0, 1].imag,
                     0.5 * (A[0, 0] - A[1, 1]).real, 0.5 * (A[0, 0] + A[1, 1]).real])


def hermitian_to_poincare(A) -> np.ndarray:
    """Ball point of a determinant-one Hermitian matrix, read off its entries directly."""
    A = np.asarray(A, dtype=complex)
    a12 = A[0, 1]
    den = 2.0 + (A[0, 0] + A[1, 1]).real
    return np.array([(a12 + np.conj(a12)).real,
                     (1j * (np.conj(a12) - a12)).real,
                     (A[0, 0] - A[1, 1]).real]) / den


def minkowski31_norm(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x[0] ** 2 + x[1] ** 2 + x[2] ** 2 - x[3] ** 2)


def in_h3_hermitian(A, tol: float = MANIFOLD_TOL) -> bool:
    """Hermitian, determinant one and positive trace."""
    A = np.asarray(A, dtype=complex)
    herm = np.abs(A - A.conj().T).max() <= tol * max(1.0, np.abs(A).max())
    det = np.linalg.det(A)
    return bool(herm and abs(det - 1.0) <= tol * max(1.0, np.abs(A).max() ** 2)
                and np.trace(A).real > 0)


def lorentz_boost(axis: int, t: float) -> np.ndarray:
    """Boost of R^{3,1} (coordinates x1, x2, x3, x0) mixing x_axis with x0."""
    B = np.eye(4)
    B[axis, axis] = B[3, 3] = math.cosh(t)
    B[axis, 3] = B[3, axis] = math.sinh(t)
    return B
