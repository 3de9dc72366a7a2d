"""Polynomial conserved quantities of discrete isothermic nets.

A conserved quantity is a polynomial ``P(lam) = P_0 + lam P_1 + ... + lam^n P_n``
of R^{4,1}-valued lattice functions with

    (I + lam tau_pq) P_q = P_p (I + lam tau_pq)     on every edge.

``P_0`` is called ``Q`` and ``P_n`` is called ``Z``.  Linear quantities
(``n = 1``) characterise discrete CMC nets in the space form fixed by ``Q``.
Coefficients are stored as an array of shape ``(n + 1, M, N, 5)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DomainError, SphericalStarError
from .mink import MinkVec, inner_array, lift_array, to_orthonormal
from .net import QuadNet, bfs_tree, factorize, moutard_lift
from .quat import QuatMat2, qmat_inv
from .transforms import CalapsoFrame, EdgeTau, christoffel, edge_tau

NULLSPACE_RTOL = 1e-8
SAMPLE_LAMBDAS = (-1.0, 1.0 / 3.0, 2.0)


def _mat(v) -> QuatMat2:
    return MinkVec.from_array(v).as_mat()


def _vec(M: QuatMat2, tol: float | None = None) -> np.ndarray:
    return MinkVec.from_mat(M, tol=tol).as_array()


@dataclass(frozen=True, eq=False)
class ConservedQuantity:
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 4 or c.shape[-1] != 5:
            raise DomainError("coefficients must have shape (order + 1, M, N, 5)")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def linear(cls, Q, Z, **meta) -> "ConservedQuantity":
        """``Q + lam Z`` with ``Q`` a single vector and ``Z`` of shape (M, N, 5)."""
        Z = np.asarray(Z, float)
        Qa = np.broadcast_to(np.asarray(Q.as_array() if isinstance(Q, MinkVec) else Q, float), Z.shape)
        return cls(np.stack([Qa, Z]), dict(meta))

    @classmethod
    def constant(cls, S, shape, **meta) -> "ConservedQuantity":
        Sa = np.asarray(S.as_array() if isinstance(S, MinkVec) else S, float)
        return cls(np.broadcast_to(Sa, (1,) + tuple(shape) + (5,)).copy(), dict(meta))

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:3]

    @property
    def Q(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def Z(self) -> np.ndarray:
        return self.coeffs[-1]

    def evaluate(self, lam: float) -> np.ndarray:
        out = np.zeros(self.coeffs.shape[1:])
        for k in range(self.order, -1, -1):
            out = out * lam + self.coeffs[k]
        return out

    def scaled(self, c: float) -> "ConservedQuantity":
        return ConservedQuantity(self.coeffs * c, dict(self.meta))

    def shifted(self, mu: float) -> "ConservedQuantity":
        """Coefficients of ``P(lam + mu)`` as a polynomial in ``lam``."""
        n = self.order
        out = np.zeros_like(self.coeffs)
        for j in range(n + 1):
            for k in range(j, n + 1):
                out[j] += comb(k, j) * mu ** (k - j) * self.coeffs[k]
        return ConservedQuantity(out, dict(self.meta, shift=self.meta.get("shift", 0.0) + mu))

    def norm2_poly(self, m: int = 0, n: int = 0) -> np.ndarray:
        """Coefficients (ascending) of ``lam -> ||P(lam)||^2`` at one vertex."""
        c = self.coeffs[:, m, n]
        k = self.order
        out = np.zeros(2 * k + 1)
        for i in range(k + 1):
            for j in range(k + 1):
                out[i + j] += inner_array(c[i], c[j])
        return out


# ------------------------------------------------------------ verification


@dataclass(frozen=True)
class CQReport:
    max_residual: float
    coeff_residuals: list
    sample_residual: float
    edge_residual_h: np.ndarray
    edge_residual_v: np.ndarray
    split: dict
    z_norm2_spread: float
    p_norm2_spread: float
    z_perp_f: float

    def ok(self, tol: float) -> bool:
        return self.max_residual < tol

    def worst_edge(self):
        h = self.edge_residual_h
        v = self.edge_residual_v
        if h.size and (not v.size or h.max() >= v.max()):
            m, n = np.unravel_index(int(h.argmax()), h.shape)
            return (int(m), int(n)), (int(m) + 1, int(n))
        m, n = np.unravel_index(int(v.argmax()), v.shape)
        return (int(m), int(n)), (int(m), int(n) + 1)


def _edge_coeff_residuals(P: ConservedQuantity, tau: EdgeTau, p, q):
    """Residual of each lam^k coefficient of (I + lam tau) P_q - P_p (I + lam tau)."""
    n = P.order
    t = tau.tau(p, q)
    Pp = [_mat(P.coeffs[k][p]) for k in range(n + 1)]
    Pq = [_mat(P.coeffs[k][q]) for k in range(n + 1)]
    scale = max(1.0, max(A.norm() for A in Pp + Pq)) * max(1.0, t.norm())
    out = []
    for k in range(n + 2):
        R = QuatMat2.zeros()
        if k <= n:
            R = R + Pq[k] - Pp[k]
        if k >= 1:
            R = R + t @ Pq[k - 1] - Pp[k - 1] @ t
        out.append(R.norm() / scale)
    return out


def verify_cq(net: QuadNet, P: ConservedQuantity, tau: EdgeTau | None = None,
              lifts: np.ndarray | None = None) -> CQReport:
    """Coefficient-wise check of the conserved-quantity equation on every edge.

    An independent evaluation at fixed spectral values is reported as
    ``sample_residual``.  For linear quantities ``split`` holds the residuals
    of ``dQ = 0``, ``dZ = Q tau - tau Q`` and ``tau Z_q = Z_p tau``.
    """
    if not net.factorized:
        net = factorize(net)
    tau = tau or edge_tau(net)
    M, N = net.shape
    if P.shape != (M, N):
        raise DomainError("conserved quantity and net have different shapes")
    n = P.order
    rh = np.zeros((M - 1, N))
    rv = np.zeros((M, N - 1))
    coeff = [0.0] * (n + 2)
    for p, q in net.edges():
        res = _edge_coeff_residuals(P, tau, p, q)
        coeff = [max(a, b) for a, b in zip(coeff, res)]
        worst = max(res)
        if p[1] == q[1]:
            rh[p] = worst
        else:
            rv[p] = worst
    sample = 0.0
    I = QuatMat2.identity()
    for lam in SAMPLE_LAMBDAS:
        PL = P.evaluate(lam)
        for p, q in net.edges():
            L = I + tau.tau(p, q) * lam
            A, B = _mat(PL[q]), _mat(PL[p])
            R = L @ A - B @ L
            sample = max(sample, R.norm() / (max(1.0, A.norm(), B.norm()) * max(1.0, L.norm())))
    split = {}
    if n == 1:
        dq = dz = tz = 0.0
        for p, q in net.edges():
            t = tau.tau(p, q)
            Qp, Qq = _mat(P.Q[p]), _mat(P.Q[q])
            Zp, Zq = _mat(P.Z[p]), _mat(P.Z[q])
            sc = max(1.0, Qp.norm(), Zp.norm(), Zq.norm()) * max(1.0, t.norm())
            dq = max(dq, (Qq - Qp).norm() / sc)
            dz = max(dz, ((Zq - Zp) - (Qp @ t - t @ Qq)).norm() / sc)
            tz = max(tz, (t @ Zq - Zp @ t).norm() / sc)
        split = {"dQ": dq, "dZ": dz, "tauZ": tz}
    zn = inner_array(P.Z, P.Z)
    pn = [inner_array(P.evaluate(lam), P.evaluate(lam)) for lam in SAMPLE_LAMBDAS]
    pspread = max(float(np.ptp(x)) / max(1.0, float(np.abs(x).max())) for x in pn)
    F = lifts if lifts is not None else lift_array(net.vertices, scale=np.ones((M, N)))
    Fo = to_orthonormal(F)
    Zo = to_orthonormal(P.Z)
    perp = np.abs(inner_array(F, P.Z)) / np.maximum(
        np.linalg.norm(Fo, axis=-1) * np.maximum(np.linalg.norm(Zo, axis=-1), 1.0), 1e-300)
    return CQReport(max(coeff), coeff, sample, rh, rv, split,
                    float(np.ptp(zn)) / max(1.0, float(np.abs(zn).max())), pspread,
                    float(perp.max()))


# ---------------------------------------------------------------- solvers


def propagate_Z(net: QuadNet, F: np.ndarray, Q: np.ndarray, Z0: np.ndarray, base) -> np.ndarray:
    """``Z_q = Z_p + 2 <Q, F_p> F_q - 2 <Q, F_q> F_p`` breadth-first from ``base``.

    Valid for a Moutard lift ``F`` normalised by ``F_p F_q + F_q F_p = a_pq I``.
    """
    M, N = net.shape
    Z = np.zeros((M, N, 5))
    Z[base] = Z0
    for p, q in bfs_tree((M, N), base):
        Z[q] = Z[p] + 2.0 * inner_array(Q, F[p]) * F[q] - 2.0 * inner_array(Q, F[q]) * F[p]
    return Z


def _star(F, c):
    m, n = c
    return [F[m, n], F[m + 1, n], F[m, n + 1], F[m - 1, n], F[m, n - 1]]


def _gram(rows_a, rows_b) -> np.ndarray:
    """``G[i, j] = <b_j, a_i>``."""
    A = np.asarray(rows_a)
    B = np.asarray(rows_b)
    return inner_array(A[:, None, :], B[None, :, :])


def _check_star(star, tol: float, c):
    Fo = to_orthonormal(np.asarray(star))
    Fo = Fo / np.linalg.norm(Fo, axis=-1, keepdims=True)
    sv = np.linalg.svd(Fo, compute_uv=False)
    if sv[-1] / sv[0] <= tol:
        raise SphericalStarError(f"the vertex star at {c} is spherical")


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense solve by LU with partial pivoting."""
    return np.linalg.solve(A, b)


def solve_Z_given_Q_3x3(net: QuadNet, Q, center=None, tol: float = 1e-9) -> ConservedQuantity:
    """Linear conserved quantity with prescribed ``Q``.

    The central vertex star spans R^{4,1}; ``Z`` at the centre is expanded
    in that basis, fixed by ``A c = 2 B A q``, and propagated to the rest of
    the net.  Works on any net whose chosen centre is interior.
    """
    if not net.factorized:
        net = factorize(net)
    M, N = net.shape
    c = center or (M // 2, N // 2)
    ml = moutard_lift(net)
    F = ml.F
    star = _star(F, c)
    A = _gram(star, star)
    _check_star(star, tol, c)
    Qa = np.asarray(Q.as_array() if isinstance(Q, MinkVec) else Q, float)
    rhs = inner_array(np.asarray(star), Qa)
    qv = _solve(A, rhs)
    B = np.diag(A[0])
    cv = _solve(A, 2.0 * B @ A @ qv)
    Z0 = cv @ np.asarray(star)
    Z = propagate_Z(net, F, Qa, Z0, c)
    Qfull = np.broadcast_to(Qa, Z.shape)
    return ConservedQuantity(np.stack([Qfull, Z]), {"solver": "3x3", "center": c})


@dataclass(frozen=True, eq=False)
class LcqSolution:
    ok: bool
    solutions: list
    residuals: list
    singular_values: np.ndarray
    nullity: int
    message: str = ""


def lcq_system_matrix(F: np.ndarray, c) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The 4 x 5 matrix ``E A^{-1} B A + C G - C E - D A~`` and the matrices A, B."""
    m, n = c
    star = _star(F, c)
    outer = [F[m + 2, n], F[m, n + 2], F[m - 2, n], F[m, n - 2]]
    A = _gram(star, star)
    At = A[1:]
    E = _gram(outer, star)
    G = np.repeat(A[0:1], 4, axis=0)
    B = np.diag(A[0])
    C = np.diag([inner_array(star[i + 1], outer[i]) for i in range(4)])
    D = np.diag([inner_array(star[0], outer[i]) for i in range(4)])
    K = E @ np.linalg.solve(A, B @ A) + C @ G - C @ E - D @ At
    return K, A, B


def solve_lcq_5x5(net: QuadNet, center=None, tol: float = 1e-8,
                  star_tol: float = 1e-9) -> LcqSolution:
    """Find every linear conserved quantity supported by the 5 x 5 patch about ``center``.

    ``Q`` comes from the numerical nullspace of the 4 x 5 system; each
    candidate is propagated over the whole net and accepted only if the full
    verification passes.  Stored edge factors are used as given.
    """
    if not net.factorized:
        net = factorize(net)
    M, N = net.shape
    c = center or (M // 2, N // 2)
    if not (2 <= c[0] < M - 2 and 2 <= c[1] < N - 2):
        raise DomainError("the centre needs two layers of neighbours")
    F = moutard_lift(net, tol=math.inf).F
    star = _star(F, c)
    _check_star(star, star_tol, c)
    K, A, B = lcq_system_matrix(F, c)
    _, sv, vt = np.linalg.svd(K)
    rank = int(np.sum(sv > NULLSPACE_RTOL * sv[0])) if sv[0] > 0 else 0
    basis = vt[rank:]
    tau = edge_tau(net)
    sols, res = [], []
    for qv in basis:
        Q = qv @ np.asarray(star)
        cv = _solve(A, 2.0 * B @ A @ qv)
        Z = propagate_Z(net, F, Q, cv @ np.asarray(star), c)
        P = ConservedQuantity(np.stack([np.broadcast_to(Q, Z.shape), Z]), {"solver": "5x5", "center": c})
        rep = verify_cq(net, P, tau=tau, lifts=F)
        r = max(rep.max_residual, rep.z_perp_f)
        res.append(r)
        if r < tol:
            sols.append(P)
    ok = bool(sols)
    msg = "" if ok else f"no linear conserved quantity (best residual {min(res):.3e})"
    return LcqSolution(ok, sols, res, sv, len(basis), msg)


def solve_lcq_nullspace(net: QuadNet, tol: float = 1e-8) -> LcqSolution:
    """Independent solver: nullspace of the full linear system in (Q, Z_base).

    Every linear conserved quantity is linear in ``Q`` and ``Z`` at the base
    vertex once ``Z`` is propagated with the Moutard recursion.  The
    conditions ``<F_p, Z_p> = 0`` at every vertex are collected and their
    common nullspace is returned.
    """
    if not net.factorized:
        net = factorize(net)
    M, N = net.shape
    F = moutard_lift(net, tol=math.inf).F
    rows = []
    for k in range(10):
        e = np.zeros(10)
        e[k] = 1.0
        Z = propagate_Z(net, F, e[:5], e[5:], (0, 0))
        rows.append(inner_array(F, Z).ravel() / np.linalg.norm(to_orthonormal(F), axis=-1).ravel())
    K = np.array(rows).T
    _, sv, vt = np.linalg.svd(K)
    rank = int(np.sum(sv > NULLSPACE_RTOL * sv[0]))
    basis = vt[rank:]
    tau = edge_tau(net)
    sols, res = [], []
    for v in basis:
        if np.linalg.norm(v[:5]) < 1e-12:
            continue
        Z = propagate_Z(net, F, v[:5], v[5:], (0, 0))
        P = ConservedQuantity(np.stack([np.broadcast_to(v[:5], Z.shape), Z]), {"solver": "nullspace"})
        rep = verify_cq(net, P, tau=tau, lifts=F)
        r = max(rep.max_residual, rep.z_perp_f)
        res.append(r)
        if r < tol:
            sols.append(P)
    ok = bool(sols)
    return LcqSolution(ok, sols, res, sv, len(basis), "" if ok else "no linear conserved quantity")


# ------------------------------------------------------- mean curvature


@dataclass(frozen=True)
class MeanCurvature:
    """Mean curvature of a linear conserved quantity.

    ``H`` is ``-<Z, Q> / ||Z||^2``, the value after rescaling so that
    ``||Z|| = 1``; ``kappa`` is the curvature of the space form fixed by the
    rescaled ``Q``.  ``orientation`` is the sign of ``H``.  For flat ``Q``
    of the form ``[[0, c], [0, 0]]`` the Euclidean value (plain R^3 lengths)
    is given as ``H_euclidean``.
    """

    H: float
    abs_H: float
    orientation: int
    kappa: float
    z_norm: float
    H_euclidean: float | None


def mean_curvature(P: ConservedQuantity, normalize: bool = True, vertex=(0, 0)) -> MeanCurvature:
    if P.order != 1:
        raise DomainError("mean curvature needs a linear conserved quantity")
    Q = P.Q[vertex]
    Z = P.Z[vertex]
    z2 = float(inner_array(Z, Z))
    if z2 <= 0.0:
        raise DomainError("||Z|| vanishes: the net is spherical or degenerate")
    zn = math.sqrt(z2)
    ip = float(inner_array(Z, Q))
    H = -ip / z2 if normalize else -ip / zn
    kappa = -float(inner_array(Q, Q)) / (z2 if normalize else 1.0)
    He = None
    if abs(Q[0]) + abs(Q[1]) + abs(Q[2]) + abs(Q[3]) <= 1e-12 * max(1.0, abs(Q[4])) and Q[4] != 0.0:
        He = -2.0 * ip / (abs(Q[4]) * zn)
    return MeanCurvature(H, abs(H), int(np.sign(H)), kappa, zn, He)


# ------------------------------------------------- transforms of quantities


def calapso_shift_cq(P: ConservedQuantity, mu: float, frame: CalapsoFrame) -> ConservedQuantity:
    """``T (P(lam + mu)) T^{-1}``: the quantity carried by the Calapso transform at ``mu``."""
    if abs(frame.lam - mu) > 1e-15 * max(1.0, abs(mu)):
        raise DomainError("the frame was built for a different spectral value")
    S = P.shifted(mu)
    out = np.empty_like(S.coeffs)
    M, N = P.shape
    for m in range(M):
        for n in range(N):
            T = frame.T[m, n]
            Ti = qmat_inv(T)
            for k in range(S.order + 1):
                out[k, m, n] = _vec(T @ _mat(S.coeffs[k, m, n]) @ Ti, tol=1e-8)
    return ConservedQuantity(out, dict(P.meta, calapso=mu))


@dataclass(frozen=True, eq=False)
class DarbouxCQ:
    """``top_norm`` is the relative size of the ``lam^(n+2)`` coefficient, which
    must vanish; ``reduced`` records a division by ``lam - mu``."""

    P: ConservedQuantity
    top_norm: float
    effective_order: int
    reduced: bool = False


def _poly_mul(A: list, B: list) -> list:
    out = [QuatMat2.zeros() for _ in range(len(A) + len(B) - 1)]
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i + j] = out[i + j] + a @ b
    return out


def divide_root(coeffs: np.ndarray, mu: float) -> tuple[np.ndarray, float]:
    """Synthetic division of a vector polynomial by ``lam - mu``; returns (quotient, remainder norm)."""
    d = coeffs.shape[0] - 1
    R = np.zeros((d,) + coeffs.shape[1:])
    R[d - 1] = coeffs[d]
    for k in range(d - 1, 0, -1):
        R[k - 1] = coeffs[k] + mu * R[k]
    rem = coeffs[0] + mu * R[0]
    return R, float(np.abs(rem).max())


def darboux_cq(P: ConservedQuantity, net: QuadNet, fhat: QuadNet, mu: float,
               tol: float = 1e-9, reduce: bool = True) -> DarbouxCQ:
    """Conserved quantity of a Darboux transform: ``mu (mu - lam) A^{-1} P A``.

    With ``B = F Fhat + Fhat F`` (a real scalar) and
    ``A = I - (lam / mu) F Fhat / B`` the product equals
    ``(mu / B) [mu F Fhat + (mu - lam) Fhat F] P [I - (lam / mu) F Fhat / B]``,
    which is independent of the scales of both lifts.  The ``lam^(n+2)``
    coefficient vanishes because ``F P_n F = 0``.  When the result also
    vanishes at ``lam = mu`` (a Baecklund transform) it is divided by
    ``lam - mu`` if ``reduce`` is set.
    """
    if mu == 0.0:
        raise DomainError("mu must be nonzero")
    M, N = net.shape
    U = lift_array(net.vertices, scale=np.ones((M, N)))
    Uh = lift_array(fhat.vertices, scale=np.ones((M, N)))
    n = P.order
    out = np.zeros((n + 2, M, N, 5))
    top = 0.0
    I = QuatMat2.identity()
    for m in range(M):
        for k in range(N):
            Fm, Gm = _mat(U[m, k]), _mat(Uh[m, k])
            Bs = -2.0 * inner_array(U[m, k], Uh[m, k])
            FG, GF = Fm @ Gm, Gm @ Fm
            left = [(FG + GF) * (mu * mu / Bs), GF * (-mu / Bs)]
            right = [I, FG * (-1.0 / (mu * Bs))]
            coeffs = _poly_mul(_poly_mul(left, [_mat(P.coeffs[j, m, k]) for j in range(n + 1)]), right)
            top = max(top, coeffs[-1].norm() / max(1.0, max(c.norm() for c in coeffs)))
            for j in range(n + 2):
                out[j, m, k] = _vec(coeffs[j], tol=1e-6)
    scale = max(1.0, float(np.abs(out).max()))
    reduced = False
    if reduce:
        R, rem = divide_root(out, mu)
        if rem / scale < tol:
            out, reduced = R, True
            scale = max(1.0, float(np.abs(out).max()))
    eff = out.shape[0] - 1
    while eff > 0 and float(np.linalg.norm(out[eff], axis=-1).max()) / scale < tol:
        eff -= 1
    cq = ConservedQuantity(out[: eff + 1], dict(P.meta, darboux=mu))
    return DarbouxCQ(cq, top, eff, reduced)


# ------------------------------------------------ Baecklund and complementary


@dataclass(frozen=True, eq=False)
class BaecklundValues:
    roots: list
    lifts: list
    poly: np.ndarray
    poly_spread: float
    double_root: bool
    note: str = ""


def baecklund_values(P: ConservedQuantity, imag_tol: float = 1e-8) -> BaecklundValues:
    """Real zeros of ``lam -> ||P(lam)||^2`` and the complementary lifts ``P(mu)``."""
    if P.order < 1:
        raise DomainError("needs a conserved quantity of order at least one")
    M, N = P.shape
    polys = np.array([P.norm2_poly(m, n) for m in range(M) for n in range(N)])
    poly = polys[0]
    spread = float(np.abs(polys - poly).max()) / max(1.0, float(np.abs(poly).max()))
    c = poly.copy()
    scale = float(np.abs(c).max())
    while len(c) > 1 and abs(c[-1]) <= 1e-12 * scale:
        c = c[:-1]
    if len(c) <= 1:
        return BaecklundValues([], [], poly, spread, False, "||P||^2 is constant")
    r = np.roots(c[::-1])
    real = sorted(float(z.real) for z in r if abs(z.imag) <= imag_tol * max(1.0, abs(z)))
    double = False
    note = ""
    if len(c) == 3:
        disc = c[1] ** 2 - 4 * c[2] * c[0]
        if abs(disc) <= 1e-10 * max(1.0, c[1] ** 2, abs(c[2] * c[0])):
            double = True
            real = [float(-c[1] / (2 * c[2]))]
            note = "double root: CMC +-sqrt(-kappa)"
    uniq = []
    for x in real:
        if not uniq or abs(x - uniq[-1]) > 1e-9 * max(1.0, abs(x)):
            uniq.append(x)
    lifts = [P.evaluate(mu) for mu in uniq]
    return BaecklundValues(uniq, lifts, poly, spread, double, note)


def is_baecklund(P: ConservedQuantity, mu: float, fhat, tol: float = 1e-9) -> bool:
    """Whether ``P(mu)`` is orthogonal to the lift of ``fhat`` at every vertex."""
    V = fhat.vertices if isinstance(fhat, QuadNet) else np.asarray(fhat, float)
    U = lift_array(V, scale=np.ones(V.shape[:2]))
    Pm = P.evaluate(mu)
    num = np.abs(inner_array(Pm, U))
    den = np.linalg.norm(to_orthonormal(Pm), axis=-1) * np.linalg.norm(to_orthonormal(U), axis=-1)
    return bool((num / np.maximum(den, 1e-300)).max() < tol)


# --------------------------------------------------- edge formulas, envelope


@dataclass(frozen=True)
class DPCheck:
    first_form: float
    second_form: float


def dP_edge_formula_check(net: QuadNet, P: ConservedQuantity, lams=SAMPLE_LAMBDAS,
                          lifts: np.ndarray | None = None) -> DPCheck:
    """Compare ``P_q - P_p`` with both closed forms in terms of the lifts."""
    if not net.factorized:
        net = factorize(net)
    M, N = net.shape
    F = lifts if lifts is not None else lift_array(net.vertices, scale=np.ones((M, N)))
    r1 = r2 = 0.0
    for lam in lams:
        PL = P.evaluate(lam)
        for p, q in net.edges():
            a = net.edge_factor(p, q)
            fpq = inner_array(F[p], F[q])
            d = PL[q] - PL[p]
            f1 = lam * a / fpq * (inner_array(PL[q], F[q]) * F[p] - inner_array(PL[p], F[p]) * F[q])
            sc = max(1.0, float(np.abs(PL[p]).max()), float(np.abs(PL[q]).max()))
            r1 = max(r1, float(np.abs(d - f1).max()) / sc)
            if abs(1.0 - lam * a) > 1e-12:
                f2 = lam * a / ((1.0 - lam * a) * fpq) * (
                    inner_array(PL[p], F[q]) * F[p] - inner_array(PL[q], F[p]) * F[q])
                r2 = max(r2, float(np.abs(d - f2).max()) / sc)
    return DPCheck(r1, r2)


@dataclass(frozen=True)
class EnvelopeReport:
    incidence: float
    touching: float
    incidence_per_vertex: np.ndarray

    def envelops(self, tol: float = 1e-9) -> bool:
        return self.incidence < tol and self.touching < tol


def _unit_rows(X):
    X = to_orthonormal(np.asarray(X, float))
    n = np.linalg.norm(X, axis=-1, keepdims=True)
    return np.where(n > 0, X / np.where(n > 0, n, 1.0), 0.0)


def envelope_check(net: QuadNet, Z: np.ndarray) -> EnvelopeReport:
    """Incidence ``<F_p, Z_p> = 0`` and touching ``rank {Z_p - Z_q, F_p, F_q} <= 2``."""
    M, N = net.shape
    F = lift_array(net.vertices, scale=np.ones((M, N)))
    Fu, Zu = _unit_rows(F), _unit_rows(Z)
    eta = np.array([1.0, 1.0, 1.0, 1.0, -1.0])
    inc = np.abs(np.sum(Fu * Zu * eta, axis=-1))
    touch = 0.0
    for p, q in net.edges():
        D = Z[p] - Z[q]
        if np.linalg.norm(D) <= 1e-14 * max(1.0, float(np.abs(Z[p]).max())):
            continue
        rows = _unit_rows(np.array([D, F[p], F[q]]))
        sv = np.linalg.svd(rows, compute_uv=False)
        touch = max(touch, float(sv[-1] / sv[0]))
    return EnvelopeReport(float(inc.max()), touch, inc)


# -------------------------------------------------------- batch identities


def curvature_spheres(net: QuadNet, P: ConservedQuantity, lifts: np.ndarray | None = None):
    """Curvature sphere ``S_pq`` of every edge computed from both ends; returns (S_from_p, S_from_q)."""
    if P.order < 1:
        raise DomainError("needs order at least one")
    M, N = net.shape
    F = lifts if lifts is not None else lift_array(net.vertices, scale=np.ones((M, N)))
    Z, Pn1 = P.Z, P.coeffs[-2]
    out_p, out_q = [], []
    for p, q in net.edges():
        a = net.edge_factor(p, q)
        fpq = inner_array(F[p], F[q])
        out_p.append(Z[p] + a * inner_array(Pn1[q], F[q]) / fpq * F[p])
        out_q.append(Z[q] + a * inner_array(Pn1[p], F[p]) / fpq * F[q])
    return np.array(out_p), np.array(out_q)


def six_facts(net: QuadNet, P: ConservedQuantity, tol: float = 1e-9) -> dict:
    """Residuals of the standard identities satisfied by a verified conserved quantity."""
    if not net.factorized:
        net = factorize(net)
    M, N = net.shape
    F = lift_array(net.vertices, scale=np.ones((M, N)))
    zn = inner_array(P.Z, P.Z)
    qn = inner_array(P.Q, P.Q)
    out = {}
    sc = max(1.0, float(np.abs(zn).max()), float(np.abs(qn).max()))
    out["norms_constant"] = max(float(np.ptp(zn)), float(np.ptp(qn))) / sc
    dp = dP_edge_formula_check(net, P, lifts=F)
    out["dP_formula"] = max(dp.first_form, dp.second_form)
    Fu, Zu = _unit_rows(F), _unit_rows(P.Z)
    eta = np.array([1.0, 1.0, 1.0, 1.0, -1.0])
    out["Z_perp_F"] = float(np.abs(np.sum(Fu * Zu * eta, axis=-1)).max())
    z2 = float(zn.max())
    out["Z_norm2"] = z2
    if abs(z2) <= tol:
        w = Fu[..., :, None] * Zu[..., None, :]
        w = w - np.swapaxes(w, -1, -2)
        out["Z_parallel_F"] = float(np.sqrt(0.5 * np.sum(w * w, axis=(-1, -2))).max())
    else:
        out["Z_norm2_nonneg"] = 0.0 if z2 > 0 else -z2
    Sp, Sq = curvature_spheres(net, P, F)
    out["curvature_sphere_sides"] = float(np.abs(Sp - Sq).max()) / max(1.0, float(np.abs(Sp).max()))
    if P.order == 1:
        qz = inner_array(P.Q, P.Z)
        out["QZ_constant"] = float(np.ptp(qz)) / max(1.0, float(np.abs(qz).max()))
    if z2 > tol:
        inc = 0.0
        for k, (p, q) in enumerate(net.edges()):
            S = _unit_rows(Sp[k])
            for x in (p, q):
                inc = max(inc, abs(float(np.sum(S * Fu[x] * eta))))
        out["curvature_sphere_incidence"] = inc
    return out


def flat_structure_check(net: QuadNet, P: ConservedQuantity, fstar: QuadNet | None = None) -> dict:
    """For flat ``Q = [[0, 1], [0, 0]]``: constant lower-left entry ``H`` of ``Z``,
    constant ``|n|^2``, ``df* = d(H f + n)`` and ``df n_q + n_p df = 0``.

    ``n_p`` is the upper-left entry of ``Z_p`` minus ``H f_p``.
    """
    if not net.factorized:
        net = factorize(net)
    fstar = fstar or christoffel(net)
    Z = P.Z
    V = net.vertices
    Hs = Z[..., 3]
    H = float(Hs[0, 0])
    nvec = Z[..., :3] - Hs[..., None] * V
    n2 = np.sum(nvec ** 2, axis=-1)
    G = H * V + nvec
    dstar_h = np.diff(fstar.vertices, axis=0) - np.diff(G, axis=0)
    dstar_v = np.diff(fstar.vertices, axis=1) - np.diff(G, axis=1)
    anti = 0.0
    for p, q in net.edges():
        df = V[q] - V[p]
        # for imaginary u, v: u v + v u = -2 u . v ; the vector parts cancel only if
        # df x n_q + n_p x df = 0 as well, so both parts are checked
        s = -np.dot(df, nvec[q]) - np.dot(nvec[p], df)
        v = np.cross(df, nvec[q]) + np.cross(nvec[p], df)
        anti = max(anti, abs(s), float(np.abs(v).max()))
    sc = max(1.0, float(np.abs(V).max()))
    return {
        "H": H,
        "H_constant": float(np.ptp(Hs)),
        "n_norm_constant": float(np.ptp(n2)),
        "dfstar": max(float(np.abs(dstar_h).max(initial=0.0)), float(np.abs(dstar_v).max(initial=0.0))) / sc,
        "df_n_anticommute": anti / sc,
    }
