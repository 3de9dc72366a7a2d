"""Christoffel, Calapso and Darboux transforms of discrete isothermic nets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotIsothermicError, PoleError
from .mink import MinkVec, inner, lift_array
from .net import (QuadNet, bfs_tree, comb_tree, cross_ratio_array, factorize,
                  moutard_lift)
from .quat import (DEFAULT_TOL, QuatMat2, Quaternion, in_mob3, qinv, qmat_inv,
                   study_det)

POLE_TOL = 1e-12


def _require_factors(net: QuadNet) -> QuadNet:
    return net if net.factorized else factorize(net)


def _q(v) -> Quaternion:
    return Quaternion(0.0, float(v[0]), float(v[1]), float(v[2]))


# -------------------------------------------------------------- Christoffel


def christoffel_increments(net: QuadNet):
    """``a (f_q - f_p)^{-1} = -a df / |df|^2`` on horizontal and vertical edges."""
    V = net.vertices
    dh = np.diff(V, axis=0)
    dv = np.diff(V, axis=1)
    sh = -net.a_h / np.sum(dh * dh, axis=-1)
    sv = -net.a_v / np.sum(dv * dv, axis=-1)
    return dh * sh[..., None], dv * sv[..., None]


def quad_closure(dh: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """``|dh(m,n) + dv(m+1,n) - dh(m,n+1) - dv(m,n)|`` per quad."""
    r = dh[:, :-1] + dv[1:, :] - dh[:, 1:] - dv[:-1, :]
    return np.linalg.norm(r, axis=-1)


def integrate_increments(dh: np.ndarray, dv: np.ndarray, base=(0, 0), base_value=None) -> np.ndarray:
    """Sum edge increments along the row-major comb starting at ``base``."""
    M, N = dv.shape[0], dh.shape[1]
    out = np.zeros((M, N, dh.shape[-1]))
    if base_value is not None:
        out[base] = base_value
    for (m1, n1), (m2, n2) in comb_tree((M, N), base):
        if n1 == n2:
            out[m2, n2] = out[m1, n1] + (dh[m1, n1] if m2 > m1 else -dh[m2, n2])
        else:
            out[m2, n2] = out[m1, n1] + (dv[m1, n1] if n2 > n1 else -dv[m2, n2])
    return out


@dataclass(frozen=True, eq=False)
class ChristoffelResult:
    net: QuadNet
    closure_residual: float


def christoffel(net: QuadNet, tol: float = 1e-9) -> QuadNet:
    """Dual net with ``d f* d f = a`` on every edge; the base vertex maps to the origin."""
    return christoffel_report(net, tol=tol).net


def christoffel_report(net: QuadNet, tol: float = 1e-9) -> ChristoffelResult:
    net = _require_factors(net)
    dh, dv = christoffel_increments(net)
    clos = quad_closure(dh, dv)
    scale = max(1.0, float(np.abs(dh).max(initial=0.0)), float(np.abs(dv).max(initial=0.0)))
    res = float(clos.max(initial=0.0)) / scale
    if res > tol:
        idx = np.unravel_index(int(clos.argmax()), clos.shape)
        raise NotIsothermicError(f"Christoffel increments do not close (residual {res:.3e})",
                                 worst=tuple(int(i) for i in idx), residual=res)
    V = integrate_increments(dh, dv)
    meta = dict(net.meta, transform="christoffel")
    out = QuadNet(V, a_h=net.a_h.copy(), a_v=net.a_v.copy(), kappa=0.0, m0=net.m0, n0=net.n0, meta=meta)
    return ChristoffelResult(out, res)


# --------------------------------------------------------------------- tau


def tau_from_points(fp: Quaternion, fq: Quaternion, a: float) -> QuatMat2:
    """``[[f_p d, -f_p d f_q], [d, -d f_q]]`` with ``d = a (f_q - f_p)^{-1}``."""
    d = qinv(fq - fp) * a
    return QuatMat2(fp * d, -(fp * d * fq), d, -(d * fq))


def tau_from_lifts(Fp: MinkVec, Fq: MinkVec, a: float) -> QuatMat2:
    """``-a F_p F_q / (F_p F_q + F_q F_p)``; independent of the scales of the lifts."""
    A, B = Fp.as_mat(), Fq.as_mat()
    return (A @ B) * (a / (2.0 * inner(Fp, Fq)))


@dataclass(frozen=True, eq=False)
class EdgeTau:
    """tau on every directed edge.

    ``fwd_h[m, n]`` is tau from (m, n) to (m+1, n) and ``bwd_h[m, n]`` the
    reverse; likewise for vertical edges.
    """

    fwd_h: np.ndarray
    bwd_h: np.ndarray
    fwd_v: np.ndarray
    bwd_v: np.ndarray
    a_h: np.ndarray
    a_v: np.ndarray

    def tau(self, p, q) -> QuatMat2:
        (m1, n1), (m2, n2) = p, q
        if n1 == n2 and m2 == m1 + 1:
            return self.fwd_h[m1, n1]
        if n1 == n2 and m2 == m1 - 1:
            return self.bwd_h[m2, n2]
        if m1 == m2 and n2 == n1 + 1:
            return self.fwd_v[m1, n1]
        if m1 == m2 and n2 == n1 - 1:
            return self.bwd_v[m2, n2]
        raise DomainError(f"{p} and {q} are not adjacent")

    def factor(self, p, q) -> float:
        (m1, n1), (m2, n2) = p, q
        if n1 == n2:
            return float(self.a_h[min(m1, m2), n1])
        return float(self.a_v[m1, min(n1, n2)])


def edge_tau(net: QuadNet, fstar: QuadNet | None = None) -> EdgeTau:
    """tau from the vertex coordinates and edge factors.

    If a Christoffel transform ``fstar`` is supplied, its edge increments
    are used in place of ``a (f_q - f_p)^{-1}``.
    """
    net = _require_factors(net)
    V = net.vertices
    M, N = net.shape
    fh = np.empty((M - 1, N), dtype=object)
    bh = np.empty((M - 1, N), dtype=object)
    fv = np.empty((M, N - 1), dtype=object)
    bv = np.empty((M, N - 1), dtype=object)
    S = fstar.vertices if fstar is not None else None

    def build(p, q, a):
        fp, fq = _q(V[p]), _q(V[q])
        if S is None:
            return tau_from_points(fp, fq, a), tau_from_points(fq, fp, a)
        d = _q(S[q] - S[p])
        t1 = QuatMat2(fp * d, -(fp * d * fq), d, -(d * fq))
        t2 = QuatMat2(fq * (-d), fq * d * fp, -d, d * fp)
        return t1, t2

    for m in range(M - 1):
        for n in range(N):
            fh[m, n], bh[m, n] = build((m, n), (m + 1, n), net.a_h[m, n])
    for m in range(M):
        for n in range(N - 1):
            fv[m, n], bv[m, n] = build((m, n), (m, n + 1), net.a_v[m, n])
    return EdgeTau(fh, bh, fv, bv, net.a_h, net.a_v)


@dataclass(frozen=True)
class TauReport:
    sum_residual: float
    quad_product_residual: float
    quad_sum_residual: float
    annihilation_residual: float
    lift_formula_residual: float


def tau_report(net: QuadNet, tau: EdgeTau, F: np.ndarray | None = None) -> TauReport:
    """Residuals of the tau identities: sums, quad relations, F_p tau_pq = tau_pq F_q = 0.

    ``F`` (any lifts, shape (M, N, 5)) enables the comparison with the lift formula.
    """
    M, N = net.shape
    if F is None:
        F = lift_array(net.vertices, scale=np.ones((M, N)))
    s_res = q_prod = q_sum = ann = lift_res = 0.0
    I = QuatMat2.identity()
    for p, q in net.edges():
        a = tau.factor(p, q)
        t, u = tau.tau(p, q), tau.tau(q, p)
        sc = max(1.0, t.norm())
        s_res = max(s_res, (t + u + I * a).norm() / sc)
        Fp, Fq = MinkVec.from_array(F[p]), MinkVec.from_array(F[q])
        A, B = Fp.as_mat(), Fq.as_mat()
        ann = max(ann, (A @ t).norm() / (sc * A.norm()), (t @ B).norm() / (sc * B.norm()))
        lift_res = max(lift_res, (t - tau_from_lifts(Fp, Fq, a)).norm() / sc)
    for m, n in net.quads():
        p, q, r, s = (m, n), (m + 1, n), (m + 1, n + 1), (m, n + 1)
        tpq, tqr, tps, tsr = tau.tau(p, q), tau.tau(q, r), tau.tau(p, s), tau.tau(s, r)
        sc = max(1.0, tpq.norm() * tqr.norm(), tps.norm() * tsr.norm())
        q_prod = max(q_prod, (tpq @ tqr - tps @ tsr).norm() / sc)
        q_sum = max(q_sum, (tpq + tqr - tps - tsr).norm() / max(1.0, tpq.norm(), tps.norm()))
    return TauReport(s_res, q_prod, q_sum, ann, lift_res)


# ------------------------------------------------------------------ Calapso


def _check_poles(net: QuadNet, lam: float, tol: float = POLE_TOL):
    for p, q in net.edges():
        a = net.edge_factor(p, q)
        if abs(1.0 - lam * a) <= tol * max(1.0, abs(lam * a)):
            raise PoleError(f"lambda * a = 1 on edge {p}-{q}", edge=(p, q))


@dataclass(frozen=True, eq=False)
class CalapsoFrame:
    """Calapso frame at spectral parameter ``lam``.

    ``dets`` holds the Study determinant of each ``T_p``; together with the
    base matrix it records the projective freedom of the frame.
    """

    lam: float
    T: np.ndarray
    dets: np.ndarray
    plaquette_residual: float
    mob3_ok: bool

    def at(self, m: int, n: int) -> QuatMat2:
        return self.T[m, n]


@dataclass(frozen=True, eq=False)
class CalapsoResult:
    frame: CalapsoFrame
    net: QuadNet
    lifts: np.ndarray


def calapso_frame(net: QuadNet, lam: float, T0: QuatMat2 | None = None,
                  tau: EdgeTau | None = None, tol: float = DEFAULT_TOL) -> CalapsoFrame:
    """Propagate ``T_q = T_p (I + lam tau_pq)`` breadth-first from local vertex (0, 0)."""
    net = _require_factors(net)
    _check_poles(net, lam)
    tau = tau or edge_tau(net)
    M, N = net.shape
    I = QuatMat2.identity()
    T = np.empty((M, N), dtype=object)
    T[0, 0] = T0 if T0 is not None else I
    for p, q in bfs_tree((M, N)):
        T[q] = T[p] @ (I + tau.tau(p, q) * lam)
    worst = 0.0
    for p, q in net.edges():
        lhs = T[p] @ (I + tau.tau(p, q) * lam)
        worst = max(worst, (lhs - T[q]).norm() / max(1.0, T[q].norm()))
    dets = np.array([[study_det(T[m, n]) for n in range(N)] for m in range(M)])
    ok = all(in_mob3(T[m, n], tol=1e-8) for m in range(M) for n in range(N))
    return CalapsoFrame(lam, T, dets, worst, ok)


def calapso(net: QuadNet, lam: float, T0: QuatMat2 | None = None, tol: float = 1e-9) -> CalapsoResult:
    """Calapso transform: frame, transformed Moutard lifts ``T F T^{-1}`` and the projected net.

    The output net carries ``a / (1 - lam a)`` as its edge factors.
    """
    net = _require_factors(net)
    frame = calapso_frame(net, lam, T0)
    if frame.plaquette_residual > tol:
        raise NotIsothermicError(f"Calapso frame is path dependent (residual {frame.plaquette_residual:.3e})",
                                 residual=frame.plaquette_residual)
    M, N = net.shape
    U = moutard_lift(net).F
    F = np.empty((M, N, 5))
    V = np.empty((M, N, 3))
    for m in range(M):
        for n in range(N):
            T = frame.T[m, n]
            X = MinkVec.from_mat(T @ MinkVec.from_array(U[m, n]).as_mat() @ qmat_inv(T))
            F[m, n] = X.as_array()
            if abs(X.x0) <= 1e-14 * max(1.0, abs(X.xinf)):
                raise DomainError(f"vertex {(m, n)} is mapped to infinity")
            V[m, n] = X.x.vec / X.x0
    a_h = net.a_h / (1.0 - lam * net.a_h)
    a_v = net.a_v / (1.0 - lam * net.a_v)
    meta = dict(net.meta, transform="calapso", lam=lam)
    out = QuadNet(V, a_h=a_h, a_v=a_v, kappa=net.kappa, m0=net.m0, n0=net.n0, meta=meta)
    return CalapsoResult(frame, out, F)


def calapso_factor(a: float, lam: float) -> float:
    """``a / (1 - lam a)``."""
    if abs(1.0 - lam * a) <= POLE_TOL:
        raise PoleError("lambda * a = 1")
    return a / (1.0 - lam * a)


# --------------------------------------------------------- flat connection


class FlatConnection:
    """``Y -> (1 - lam a)^{-1} (I + lam tau_pq) Y (I + lam tau_qp)`` on one edge.

    The map carries a vector living at q to the fibre at p: a conserved
    quantity satisfies ``P_p = Gamma_pq P_q``.
    """

    def __init__(self, tau: EdgeTau, lam: float, p, q):
        a = tau.factor(p, q)
        if abs(1.0 - lam * a) <= POLE_TOL * max(1.0, abs(lam * a)):
            raise PoleError(f"lambda * a = 1 on edge {p}-{q}", edge=(p, q))
        I = QuatMat2.identity()
        self.left = I + tau.tau(p, q) * lam
        self.right = I + tau.tau(q, p) * lam
        self.factor = 1.0 / (1.0 - lam * a)
        self.p, self.q, self.lam = p, q, lam

    def __call__(self, Y: MinkVec) -> MinkVec:
        return MinkVec.from_mat((self.left @ Y.as_mat() @ self.right) * self.factor)

    def matrix(self) -> np.ndarray:
        """5x5 matrix acting on (x1, x2, x3, x0, xinf) coordinates."""
        cols = [self(MinkVec.from_array(e)).as_array() for e in np.eye(5)]
        return np.array(cols).T


def flat_connection(net_or_tau, lam: float, p, q) -> FlatConnection:
    tau = net_or_tau if isinstance(net_or_tau, EdgeTau) else edge_tau(net_or_tau)
    return FlatConnection(tau, lam, p, q)


def plaquette_residuals(net: QuadNet, lam: float, tau: EdgeTau | None = None) -> np.ndarray:
    """``|Gamma_pq Gamma_qr Gamma_rs Gamma_sp - id|`` per quad, as 5x5 matrices."""
    tau = tau or edge_tau(net)
    M, N = net.shape
    out = np.zeros((M - 1, N - 1))
    for m, n in net.quads():
        p, q, r, s = (m, n), (m + 1, n), (m + 1, n + 1), (m, n + 1)
        G = np.eye(5)
        for a, b in ((p, q), (q, r), (r, s), (s, p)):
            G = G @ FlatConnection(tau, lam, a, b).matrix()
        out[m, n] = np.abs(G - np.eye(5)).max()
    return out


# ------------------------------------------------------------------ Darboux


@dataclass(frozen=True, eq=False)
class DarbouxResult:
    net: QuadNet
    mu: float
    riccati_residual: float
    mixed_concircular_residual: float
    real_part_residual: float


def _edge_increment(Vs, p, q) -> Quaternion:
    return _q(Vs[q] - Vs[p])


def darboux(net: QuadNet, mu: float, fhat_init, fstar: QuadNet | None = None,
            tol: float = 1e-9, base=(0, 0)) -> DarbouxResult:
    """Darboux transform by integrating the discrete Riccati equation.

    With ``D = fhat - f`` each edge is solved explicitly as
    ``D_q = (1 - mu D_p df*)^{-1} (D_p - df)``, where ``df*`` is the
    Christoffel increment; the equation ``dfhat = mu D_p df* D_q`` is then
    checked on every edge, including those off the propagation tree.
    """
    net = _require_factors(net)
    fstar = fstar or christoffel(net)
    V, S = net.vertices, fstar.vertices
    M, N = net.shape
    D = np.full((M, N, 3), np.nan)
    d0 = np.asarray(fhat_init.vec if isinstance(fhat_init, Quaternion) else fhat_init, float) - V[base]
    if np.linalg.norm(d0) == 0.0:
        raise DomainError("the initial point coincides with the net")
    D[base] = d0
    re_res = 0.0
    for p, q in comb_tree((M, N), base):
        Dp = _q(D[p])
        ds = _edge_increment(S, p, q)
        df = _edge_increment(V, p, q)
        den = Quaternion(1.0) - Dp * ds * mu
        if abs(den) == 0.0:
            raise DomainError(f"Riccati step is singular on edge {p}-{q}")
        Dq = qinv(den) * (Dp - df)
        re_res = max(re_res, abs(Dq.w) / max(1.0, abs(Dq)))
        if abs(Dq) == 0.0:
            raise DomainError(f"the transform meets the net at {q}")
        D[q] = Dq.vec
    W = V + D
    worst = 0.0
    for p, q in net.edges():
        lhs = _edge_increment(W, p, q)
        rhs = _q(D[p]) * _edge_increment(S, p, q) * _q(D[q]) * mu
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    if worst > tol:
        raise NotIsothermicError(f"Riccati propagation is path dependent (residual {worst:.3e})",
                                 residual=worst)
    mixed = _mixed_concircularity(V, W)
    meta = dict(net.meta, transform="darboux", mu=mu)
    out = QuadNet(W, a_h=net.a_h.copy(), a_v=net.a_v.copy(), kappa=net.kappa, m0=net.m0, n0=net.n0, meta=meta)
    return DarbouxResult(out, mu, worst, mixed, re_res)


def _mixed_concircularity(V: np.ndarray, W: np.ndarray) -> float:
    """Largest ``|Im q| / (1 + |q|)`` over the quads f_p, f_q, fhat_q, fhat_p."""
    worst = 0.0
    for A, B, C, D in ((V[:-1], V[1:], W[1:], W[:-1]), (V[:, :-1], V[:, 1:], W[:, 1:], W[:, :-1])):
        q = cross_ratio_array(A, B, C, D)
        r = np.linalg.norm(q[..., 1:], axis=-1) / (1.0 + np.linalg.norm(q, axis=-1))
        worst = max(worst, float(r.max(initial=0.0)))
    return worst


def mixed_cross_ratios(V: np.ndarray, W: np.ndarray):
    """Real parts of the mixed-quad cross ratios on horizontal and vertical edges."""
    qh = cross_ratio_array(V[:-1], V[1:], W[1:], W[:-1])[..., 0]
    qv = cross_ratio_array(V[:, :-1], V[:, 1:], W[:, 1:], W[:, :-1])[..., 0]
    return qh, qv
