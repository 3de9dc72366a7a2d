"""Quad nets in Im H: cross ratios, isothermic factorisation and Moutard lifts.

A :class:`QuadNet` stores an ``(M, N, 3)`` array of vertices indexed by local
lattice coordinates ``(m, n)``.  Horizontal edges join ``(m, n)`` to
``(m + 1, n)`` and carry ``a_h[m, n]``; vertical edges join ``(m, n)`` to
``(m, n + 1)`` and carry ``a_v[m, n]``.  For the quad with corners

    p = (m, n), q = (m + 1, n), r = (m + 1, n + 1), s = (m, n + 1)

the cross ratio is ``(f_q - f_p)(f_r - f_q)^{-1}(f_s - f_r)(f_p - f_s)^{-1}``
and an isothermic net has ``q = a_h / a_v`` with ``a_h`` depending on ``m``
only and ``a_v`` on ``n`` only.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateQuadError, DomainError, NotIsothermicError
from .mink import MinkVec, from_orthonormal, lift_array, to_orthonormal
from .quat import DEFAULT_TOL, Quaternion, qconj_array, qinv, qmul_array

CONCIRCULAR_TOL = 1e-8


# ------------------------------------------------------------- cross ratios


def _as_quat(x) -> Quaternion:
    if isinstance(x, Quaternion):
        return x
    x = np.asarray(x, dtype=float)
    return Quaternion.imag(x) if x.shape == (3,) else Quaternion.from_array(x)


def cross_ratio(fp, fq, fr, fs) -> Quaternion:
    """Quaternionic cross ratio of the quad p, q, r, s."""
    p, q, r, s = (_as_quat(v) for v in (fp, fq, fr, fs))
    edges = (q - p, r - q, s - r, p - s)
    if min(abs(e) for e in edges) == 0.0:
        raise DegenerateQuadError("consecutive vertices coincide")
    return edges[0] * qinv(edges[1]) * edges[2] * qinv(edges[3])


def hat_cross_ratio(fp, fq, fr, fs) -> complex:
    """``Re q + i |Im q|``: the Moebius-invariant complex form of the cross ratio."""
    q = cross_ratio(fp, fq, fr, fs)
    return complex(q.w, float(np.linalg.norm(q.vec)))


def _qinv_array(q: np.ndarray) -> np.ndarray:
    n2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(n2 == 0.0):
        raise DegenerateQuadError("consecutive vertices coincide")
    return qconj_array(q) / n2


def _imag4(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[:-1] + (4,))
    out[..., 1:] = v
    return out


def cross_ratio_array(P, Q, R, S) -> np.ndarray:
    """Vectorised :func:`cross_ratio` over arrays of 3-vectors; returns (..., 4)."""
    e1, e2, e3, e4 = (_imag4(np.asarray(b, float) - np.asarray(a, float))
                      for a, b in ((P, Q), (Q, R), (R, S), (S, P)))
    return qmul_array(qmul_array(e1, _qinv_array(e2)), qmul_array(e3, _qinv_array(e4)))


def cross_ratio_from_gram(s, tol: float = DEFAULT_TOL) -> complex:
    """Complex cross ratio of four light-cone vectors from their Gram matrix.

    With ``E`` the expression below (never positive for lightlike data) the
    result is ``(s12 s34 - s13 s24 + s14 s23 + sqrt(E)) / (2 s14 s23)``,
    reported with non-negative imaginary part.

    ``|E| <= tol * scale`` counts as zero: the square root turns rounding
    noise of size ``eps`` into an imaginary part of size ``sqrt(eps)``, so
    concircular data would otherwise never come out real.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (4, 4):
        raise DomainError("expected a 4x4 Gram matrix")
    s12, s13, s14 = s[0, 1], s[0, 2], s[0, 3]
    s23, s24, s34 = s[1, 2], s[1, 3], s[2, 3]
    den = 2.0 * s14 * s23
    if den == 0.0:
        raise DegenerateQuadError("s14 * s23 vanishes")
    E = (s12 ** 2 * s34 ** 2 + s13 ** 2 * s24 ** 2 + s14 ** 2 * s23 ** 2
         - 2 * s13 * s14 * s23 * s24 - 2 * s12 * s14 * s23 * s34 - 2 * s12 * s13 * s24 * s34)
    scale = max(abs(s12 * s34), abs(s13 * s24), abs(s14 * s23)) ** 2
    if E > tol * scale:
        raise DomainError(f"E = {E:.3e} is positive; the vectors are not lightlike")
    if abs(E) <= tol * scale:
        E = 0.0
    num = s12 * s34 - s13 * s24 + s14 * s23
    return complex(num / den, math.sqrt(max(-E, 0.0)) / abs(den))


def lift_gram(points, scales=None) -> np.ndarray:
    """Gram matrix of the lifts ``scale_i (x_i, 1, |x_i|^2)`` as ``-scale_i scale_j |x_i - x_j|^2 / 2``.

    Equal to the Minkowski inner products of the lifts but free of the
    cancellation those suffer when the points are far from the origin
    compared with their spacing.
    """
    P = np.asarray(points, dtype=float)
    sc = np.ones(len(P)) if scales is None else np.asarray(scales, dtype=float)
    D = P[:, None, :] - P[None, :, :]
    return -0.5 * np.outer(sc, sc) * np.sum(D * D, axis=-1)


def gram_E(s) -> float:
    """The discriminant E of :func:`cross_ratio_from_gram`."""
    s = np.asarray(s, dtype=float)
    s12, s13, s14 = s[0, 1], s[0, 2], s[0, 3]
    s23, s24, s34 = s[1, 2], s[1, 3], s[2, 3]
    return float(s12 ** 2 * s34 ** 2 + s13 ** 2 * s24 ** 2 + s14 ** 2 * s23 ** 2
                 - 2 * s13 * s14 * s23 * s24 - 2 * s12 * s14 * s23 * s34
                 - 2 * s12 * s13 * s24 * s34)


# ------------------------------------------------------------------- nets


@dataclass(frozen=True, eq=False)
class QuadNet:
    """Dense rectangular quad net.

    Scalar edge factors are broadcast to every edge of their direction.

    ``m0, n0`` record the lattice coordinates of local index ``(0, 0)``;
    every algorithm here works with local indices.
    """

    vertices: np.ndarray
    a_h: np.ndarray | None = None
    a_v: np.ndarray | None = None
    kappa: float = 0.0
    m0: int = 0
    n0: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 3 or V.shape[2] != 3 or V.shape[0] < 1 or V.shape[1] < 1:
            raise DomainError("vertices must have shape (M, N, 3)")
        object.__setattr__(self, "vertices", V)
        M, N = V.shape[:2]
        if self.a_h is not None:
            a = np.asarray(self.a_h, dtype=float)
            if a.ndim == 0:
                a = np.full((M - 1, N), float(a))
            if a.shape != (M - 1, N):
                raise DomainError(f"a_h must have shape {(M - 1, N)}")
            object.__setattr__(self, "a_h", a)
        if self.a_v is not None:
            a = np.asarray(self.a_v, dtype=float)
            if a.ndim == 0:
                a = np.full((M, N - 1), float(a))
            if a.shape != (M, N - 1):
                raise DomainError(f"a_v must have shape {(M, N - 1)}")
            object.__setattr__(self, "a_v", a)

    @classmethod
    def from_function(cls, f, M: int, N: int, **kw) -> "QuadNet":
        """Sample ``f(m, n)`` (returning a 3-vector or imaginary Quaternion) on an M x N grid."""
        V = np.empty((M, N, 3))
        for m in range(M):
            for n in range(N):
                v = f(m, n)
                V[m, n] = v.vec if isinstance(v, Quaternion) else v
        return cls(V, **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vertices.shape[:2]

    @property
    def factorized(self) -> bool:
        return self.a_h is not None and self.a_v is not None

    def with_factors(self, a_h, a_v) -> "QuadNet":
        return replace(self, a_h=np.asarray(a_h, float), a_v=np.asarray(a_v, float))

    def with_vertices(self, vertices) -> "QuadNet":
        return replace(self, vertices=np.asarray(vertices, float))

    def vertex(self, m: int, n: int) -> Quaternion:
        return Quaternion.imag(self.vertices[m, n])

    def lifts(self, kappa: float | None = None) -> np.ndarray:
        """Light-cone lifts normalised into M_kappa, shape (M, N, 5)."""
        return lift_array(self.vertices, self.kappa if kappa is None else kappa)

    def edge_factor(self, p, q) -> float:
        """Factor of the edge joining lattice neighbours p and q (either direction)."""
        (m1, n1), (m2, n2) = p, q
        if n1 == n2 and abs(m1 - m2) == 1:
            return float(self.a_h[min(m1, m2), n1])
        if m1 == m2 and abs(n1 - n2) == 1:
            return float(self.a_v[m1, min(n1, n2)])
        raise DomainError(f"{p} and {q} are not adjacent")

    def quads(self):
        M, N = self.shape
        for m in range(M - 1):
            for n in range(N - 1):
                yield m, n

    def edges(self):
        """All directed edges (p, q) with q = p + e_m or p + e_n."""
        M, N = self.shape
        for m in range(M):
            for n in range(N):
                if m + 1 < M:
                    yield (m, n), (m + 1, n)
                if n + 1 < N:
                    yield (m, n), (m, n + 1)

    def neighbours(self, m: int, n: int):
        M, N = self.shape
        for dm, dn in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = m + dm, n + dn
            if 0 <= a < M and 0 <= b < N:
                yield a, b

    def check_edges(self) -> None:
        V = self.vertices
        dh = np.linalg.norm(np.diff(V, axis=0), axis=-1)
        dv = np.linalg.norm(np.diff(V, axis=1), axis=-1)
        scale = max(1.0, float(np.abs(V).max()))
        for arr, kind in ((dh, "horizontal"), (dv, "vertical")):
            if arr.size and arr.min() <= 1e-14 * scale:
                idx = np.unravel_index(int(arr.argmin()), arr.shape)
                raise DegenerateQuadError(f"degenerate {kind} edge at {tuple(int(i) for i in idx)}")


def quad_cross_ratios(net: QuadNet) -> np.ndarray:
    """Quaternionic cross ratios of all quads, shape (M-1, N-1, 4)."""
    V = net.vertices
    return cross_ratio_array(V[:-1, :-1], V[1:, :-1], V[1:, 1:], V[:-1, 1:])


def concircularity_residuals(net: QuadNet) -> np.ndarray:
    """``|Im q| / (1 + |q|)`` per quad."""
    q = quad_cross_ratios(net)
    im = np.linalg.norm(q[..., 1:], axis=-1)
    return im / (1.0 + np.linalg.norm(q, axis=-1))


def is_concircular(net: QuadNet, tol: float = CONCIRCULAR_TOL) -> bool:
    r = concircularity_residuals(net)
    return bool(r.size == 0 or r.max() < tol)


# --------------------------------------------------------- factorisation


@dataclass(frozen=True)
class Factorization:
    ok: bool
    a_h: np.ndarray
    a_v: np.ndarray
    residual: float
    worst: tuple[int, int] | None
    concircular_residual: float
    toda_residual: float


def toda_residuals(q: np.ndarray) -> np.ndarray:
    """``|q(m,n) q(m+1,n+1) - q(m+1,n) q(m,n+1)|`` relative, for real cross-ratio arrays."""
    if q.shape[0] < 2 or q.shape[1] < 2:
        return np.zeros((0, 0))
    lhs = q[:-1, :-1] * q[1:, 1:]
    rhs = q[1:, :-1] * q[:-1, 1:]
    return np.abs(lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def factorization_report(net: QuadNet, seed: float | None = None,
                         tol: float = CONCIRCULAR_TOL) -> Factorization:
    """Solve ``q(m, n) = a_h[m] / a_v[n]`` and report how well it holds."""
    net.check_edges()
    M, N = net.shape
    if M < 2 or N < 2:
        raise DomainError("a net needs at least one quad")
    qq = quad_cross_ratios(net)
    circ = concircularity_residuals(net)
    q = qq[..., 0]
    if seed is None:
        seed = float(np.exp(np.mean(np.log(np.abs(q[:, 0])))))
    ah = np.empty(M - 1)
    av = np.empty(N - 1)
    ah[0] = seed
    av[:] = ah[0] / q[0, :]
    ah[:] = q[:, 0] * av[0]
    pred = ah[:, None] / av[None, :]
    rel = np.abs(pred - q) / np.maximum(1.0, np.abs(q))
    rel = np.maximum(rel, circ)
    worst_idx = np.unravel_index(int(rel.argmax()), rel.shape)
    worst = (int(worst_idx[0]), int(worst_idx[1]))
    residual = float(rel.max())
    toda = toda_residuals(q)
    return Factorization(
        ok=residual < tol,
        a_h=np.repeat(ah[:, None], N, axis=1),
        a_v=np.repeat(av[None, :], M, axis=0),
        residual=residual,
        worst=worst,
        concircular_residual=float(circ.max()),
        toda_residual=float(toda.max()) if toda.size else 0.0,
    )


def factorize(net: QuadNet, seed: float | None = None, tol: float = CONCIRCULAR_TOL) -> QuadNet:
    """Return ``net`` with edge factors filled in; raise if it is not isothermic.

    The global scalar freedom is fixed by ``a_h[0, :] = seed``; by default
    the seed is the geometric mean of ``|q|`` along the base row.
    """
    rep = factorization_report(net, seed=seed, tol=tol)
    if not rep.ok:
        raise NotIsothermicError(
            f"cross ratios do not factor (residual {rep.residual:.3e} at quad {rep.worst})",
            worst=rep.worst, residual=rep.residual)
    return net.with_factors(rep.a_h, rep.a_v)


def factor_residual(net: QuadNet) -> np.ndarray:
    """Per-quad ``|q - a_h / a_v|`` relative, using the stored factors of that quad."""
    q = quad_cross_ratios(net)
    pred_re = net.a_h[:, :-1] / net.a_v[:-1, :]
    err = np.sqrt((q[..., 0] - pred_re) ** 2 + np.sum(q[..., 1:] ** 2, axis=-1))
    return err / np.maximum(1.0, np.abs(pred_re))


# ---------------------------------------------------------- spanning trees


def bfs_tree(shape, base=(0, 0)):
    """Edges (parent, child) of a breadth-first spanning tree of the lattice."""
    M, N = shape
    seen = {base}
    order = []
    dq = deque([base])
    while dq:
        m, n = dq.popleft()
        for dm, dn in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            c = (m + dm, n + dn)
            if 0 <= c[0] < M and 0 <= c[1] < N and c not in seen:
                seen.add(c)
                order.append(((m, n), c))
                dq.append(c)
    return order


def comb_tree(shape, base=(0, 0)):
    """Row-major comb: out along the base row in m, then along each column in n."""
    M, N = shape
    m0, n0 = base
    order = []
    for m in range(m0 + 1, M):
        order.append(((m - 1, n0), (m, n0)))
    for m in range(m0 - 1, -1, -1):
        order.append(((m + 1, n0), (m, n0)))
    for m in range(M):
        for n in range(n0 + 1, N):
            order.append(((m, n - 1), (m, n)))
        for n in range(n0 - 1, -1, -1):
            order.append(((m, n + 1), (m, n)))
    return order


# ----------------------------------------------------------- Moutard lifts


def _parallel_residual(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Norm of the wedge of the unit vectors along u and v (orthonormal coordinates)."""
    u = to_orthonormal(u)
    v = to_orthonormal(v)
    u = u / np.maximum(np.linalg.norm(u, axis=-1, keepdims=True), 1e-300)
    v = v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), 1e-300)
    w = u[..., :, None] * v[..., None, :]
    w = w - np.swapaxes(w, -1, -2)
    return np.sqrt(0.5 * np.sum(w * w, axis=(-1, -2)))


@dataclass(frozen=True, eq=False)
class MoutardLift:
    """Light-cone lift ``F = scale * (x, 1, |x|^2)`` with ``F_p F_q + F_q F_p = a_pq I``.

    ``base_scale`` records the free normalisation at local vertex (0, 0).
    """

    F: np.ndarray
    scales: np.ndarray
    base_scale: float
    edge_residual: float
    parallel_residual: float

    def at(self, m: int, n: int) -> MinkVec:
        return MinkVec.from_array(self.F[m, n])

    def edge_residuals(self, net: QuadNet) -> tuple[np.ndarray, np.ndarray]:
        return moutard_edge_residuals(self.F, net)

    def quad_parallel_residuals(self) -> np.ndarray:
        F = self.F
        return _parallel_residual(F[1:, 1:] - F[:-1, :-1], F[1:, :-1] - F[:-1, 1:])

    def rescaled(self, even: float, odd: float) -> "MoutardLift":
        """Checkerboard rescaling; edge factors get multiplied by ``even * odd``."""
        M, N = self.F.shape[:2]
        par = (np.add.outer(np.arange(M), np.arange(N)) % 2).astype(bool)
        fac = np.where(par, odd, even)
        return MoutardLift(self.F * fac[..., None], self.scales * fac, self.base_scale * even,
                           self.edge_residual, self.parallel_residual)


def moutard_edge_residuals(F: np.ndarray, net: QuadNet):
    """Relative residuals of ``-2 <F_p, F_q> = a_pq`` on horizontal and vertical edges."""
    from .mink import inner_array

    gh = -2.0 * inner_array(F[:-1], F[1:])
    gv = -2.0 * inner_array(F[:, :-1], F[:, 1:])
    rh = np.abs(gh - net.a_h) / np.maximum(1.0, np.abs(net.a_h))
    rv = np.abs(gv - net.a_v) / np.maximum(1.0, np.abs(net.a_v))
    return rh, rv


def moutard_lift(net: QuadNet, base_scale: float = 1.0, tol: float = 1e-8) -> MoutardLift:
    """Propagate lift scales so that every edge satisfies the Moutard normalisation."""
    if not net.factorized:
        net = factorize(net)
    V = net.vertices
    M, N = net.shape
    s = np.full((M, N), np.nan)
    s[0, 0] = base_scale
    for p, q in bfs_tree((M, N)):
        d2 = float(np.sum((V[q] - V[p]) ** 2))
        s[q] = net.edge_factor(p, q) / (s[p] * d2)
    F = lift_array(V, scale=s)
    rh, rv = moutard_edge_residuals(F, net)
    edge_res = float(max(rh.max(initial=0.0), rv.max(initial=0.0)))
    if edge_res > tol:
        worst = ("h", np.unravel_index(int(rh.argmax()), rh.shape)) if rh.size and rh.max() >= edge_res \
            else ("v", np.unravel_index(int(rv.argmax()), rv.shape))
        raise NotIsothermicError(f"Moutard propagation does not close (residual {edge_res:.3e})",
                                 worst=worst, residual=edge_res)
    par = _parallel_residual(F[1:, 1:] - F[:-1, :-1], F[1:, :-1] - F[:-1, 1:])
    return MoutardLift(F, s, base_scale, edge_res, float(par.max(initial=0.0)))


# ------------------------------------------------------------ vertex stars


@dataclass(frozen=True)
class StarSphere:
    sphere: MinkVec
    gram_det: float
    singular_ratio: float
    incidence: float


def _star_rank_test(points: np.ndarray):
    """Normalised lifts of five points, their Gram determinant and SVD."""
    L = lift_array(points, scale=np.ones(len(points)))
    L = L / np.linalg.norm(to_orthonormal(L), axis=-1, keepdims=True)
    A = to_orthonormal(L)
    G = A @ np.diag([1.0, 1.0, 1.0, 1.0, -1.0]) @ A.T
    _, sv, vt = np.linalg.svd(A)
    return L, float(np.linalg.det(G)), sv, vt


def _diag_star(net: QuadNet, m: int, n: int) -> np.ndarray:
    M, N = net.shape
    if not (1 <= m < M - 1 and 1 <= n < N - 1):
        raise DomainError(f"vertex {(m, n)} is not interior")
    V = net.vertices
    return np.array([V[m, n], V[m + 1, n - 1], V[m + 1, n + 1], V[m - 1, n + 1], V[m - 1, n - 1]])


def _edge_star(net: QuadNet, m: int, n: int) -> np.ndarray:
    M, N = net.shape
    if not (1 <= m < M - 1 and 1 <= n < N - 1):
        raise DomainError(f"vertex {(m, n)} is not interior")
    V = net.vertices
    return np.array([V[m, n], V[m + 1, n], V[m, n + 1], V[m - 1, n], V[m, n - 1]])


def vertex_star_sphere(net: QuadNet, p, tol: float = 1e-8) -> StarSphere:
    """Central sphere through the diagonal vertex star at interior vertex ``p``.

    The sphere vector spans the Minkowski-orthogonal complement of the five
    lifts.  If the lifts span all of R^{4,1} the star is not cospherical and
    :class:`NotIsothermicError` is raised.
    """
    L, det, sv, vt = _star_rank_test(_diag_star(net, *p))
    ratio = float(sv[-1] / sv[0])
    if ratio > tol:
        raise NotIsothermicError(
            f"diagonal vertex star at {tuple(p)} is not cospherical (singular ratio {ratio:.3e})",
            worst=tuple(p), residual=ratio)
    w = vt[-1]
    S_orth = w * np.array([1.0, 1.0, 1.0, 1.0, -1.0])
    S = from_orthonormal(S_orth)
    from .mink import inner_array

    inc = float(np.abs(inner_array(L, S)).max())
    return StarSphere(MinkVec.from_array(S), det, ratio, inc)


def is_vertex_star_spherical(net: QuadNet, p, tol: float = 1e-8) -> bool:
    """Whether ``p`` and its four edge neighbours lie on a common sphere or plane."""
    _, _, sv, _ = _star_rank_test(_edge_star(net, *p))
    return bool(sv[-1] / sv[0] <= tol)


def star_gram_det(net: QuadNet, p, diagonal: bool = True) -> float:
    pts = _diag_star(net, *p) if diagonal else _edge_star(net, *p)
    return _star_rank_test(pts)[1]
