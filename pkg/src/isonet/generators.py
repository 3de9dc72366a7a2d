"""Explicit discrete surfaces: holomorphic functions, minimal and CMC-1 nets,
CMC surfaces of revolution, spacelike nets in R^{2,1} and smooth maximal samples."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .conserved import ConservedQuantity
from .errors import DomainError, NotIsothermicError, StepFailure
from .mink import hermitian_to_poincare
from .net import QuadNet, comb_tree
from .quat import I as QI, J as QJ, Quaternion

# ----------------------------------------------------- holomorphic functions


@dataclass(frozen=True, eq=False)
class DiscreteHolo:
    """Complex lattice function ``g`` with real edge factors ``a_h`` (m-edges) and ``a_v`` (n-edges)."""

    g: np.ndarray
    a_h: np.ndarray
    a_v: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        M, N = g.shape
        a_h = np.broadcast_to(np.asarray(self.a_h, float), (M - 1, N)).copy()
        a_v = np.broadcast_to(np.asarray(self.a_v, float), (M, N - 1)).copy()
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "a_h", a_h)
        object.__setattr__(self, "a_v", a_v)

    @property
    def shape(self):
        return self.g.shape

    def cross_ratios(self) -> np.ndarray:
        g = self.g
        p, q, r, s = g[:-1, :-1], g[1:, :-1], g[1:, 1:], g[:-1, 1:]
        return (q - p) / (r - q) * (s - r) / (p - s)

    def factor_residual(self) -> float:
        q = self.cross_ratios()
        target = self.a_h[:, :-1] / self.a_v[:-1, :]
        return float(np.abs(q - target).max(initial=0.0) / max(1.0, float(np.abs(target).max(initial=0.0))))

    def min_edge(self) -> float:
        return float(min(np.abs(np.diff(self.g, axis=0)).min(initial=np.inf),
                         np.abs(np.diff(self.g, axis=1)).min(initial=np.inf)))

    def check(self, tol: float = 1e-10) -> None:
        if self.min_edge() <= tol:
            raise DomainError("g takes equal values at adjacent vertices")
        r = self.factor_residual()
        if r > tol:
            raise NotIsothermicError(f"cross ratios do not match the edge factors (residual {r:.3e})",
                                     residual=r)

    def as_planar_net(self) -> QuadNet:
        V = np.stack([self.g.real, self.g.imag, np.zeros(self.g.shape)], axis=-1)
        return QuadNet(V, a_h=self.a_h, a_v=self.a_v, meta=dict(self.meta))


def _grid(M, N, m0=0, n0=0):
    m = np.arange(m0, m0 + M)[:, None]
    n = np.arange(n0, n0 + N)[None, :]
    return m, n


def dhf_linear(c: complex, M: int, N: int, m0: int = 0, n0: int = 0) -> DiscreteHolo:
    """``g = c (m + i n)``; every cross ratio is -1."""
    if c == 0:
        raise DomainError("c must be nonzero")
    m, n = _grid(M, N, m0, n0)
    g = c * (m + 1j * n)
    return DiscreteHolo(g, -1.0, 1.0, {"kind": "linear", "c": complex(c)})


def exp_cross_ratio(c1: float, c2: float) -> float:
    """Closed form ``-sinh^2(c1/2) / sin^2(c2/2)`` of the quads of ``exp(c1 m + i c2 n)``."""
    return -math.sinh(c1 / 2) ** 2 / math.sin(c2 / 2) ** 2


def _exp_quad_ratio(c1: float, c2: float) -> complex:
    g = [cmath.exp(c1 * m + 1j * c2 * n) for m, n in ((0, 0), (1, 0), (1, 1), (0, 1))]
    p, q, r, s = g
    return (q - p) / (r - q) * (s - r) / (p - s)


def dhf_exp(c1: float, c2: float, M: int, N: int, m0: int = 0, n0: int = 0) -> DiscreteHolo:
    """``g = exp(c1 m + i c2 n)``; the constant cross ratio is computed from one quad."""
    if c1 == 0 and c2 == 0:
        raise DomainError("c1 and c2 cannot both vanish")
    if abs(math.remainder(c2, 2 * math.pi)) < 1e-12:
        raise DomainError("c2 is a multiple of 2 pi: the n-edges collapse")
    if c1 == 0:
        raise DomainError("c1 = 0 puts every quad on one circle through the origin")
    m, n = _grid(M, N, m0, n0)
    g = np.exp(c1 * m + 1j * c2 * n)
    a_h = -math.sinh(c1 / 2) ** 2
    a_v = math.sin(c2 / 2) ** 2
    return DiscreteHolo(g, a_h, a_v, {"kind": "exp", "c1": c1, "c2": c2})


def solve_c1(c2: float, tol: float = 1e-15) -> float:
    """The ``c1 > 0`` for which the quads of ``exp(c1 m + i c2 n)`` have cross ratio -1."""
    if abs(math.remainder(c2, 2 * math.pi)) < 1e-12:
        raise DomainError("c2 is a multiple of 2 pi")
    f = lambda c1: _exp_quad_ratio(c1, c2).real + 1.0
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    return bisect(f, 1e-12, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def fill_from_axes(g: np.ndarray, q) -> np.ndarray:
    """Complete ``g`` from its first row and column so that quad (m, n) has cross ratio ``q[m, n]``."""
    g = np.array(g, dtype=complex)
    M, N = g.shape
    q = np.broadcast_to(np.asarray(q, dtype=complex), (M - 1, N - 1))
    for m in range(M - 1):
        for n in range(N - 1):
            gp, gq, gs = g[m, n], g[m + 1, n], g[m, n + 1]
            # (gq - gp)(gs - gr) = q (gr - gq)(gp - gs)
            A, B = gq - gp, q[m, n] * (gp - gs)
            den = A + B
            if abs(den) <= 1e-14 * max(1.0, abs(A), abs(B)):
                raise DomainError(f"cannot complete quad {(m, n)}")
            g[m + 1, n + 1] = (A * gs + B * gq) / den
    return g


def _axis_step(gm, gprev, m, alpha):
    A = gm - gprev
    den = 2 * m * A - alpha * gm
    if abs(den) <= 1e-14 * max(1.0, abs(A)):
        raise DomainError(f"recursion denominator vanishes at step {m}")
    return gm + alpha * gm * A / den


def dhf_zalpha(alpha: float, M: int, N: int) -> DiscreteHolo:
    """Discrete ``z^alpha`` on the quadrant ``0 <= m < M, 0 <= n < N``."""
    if not 0.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (0, 2)")
    g = np.zeros((M, N), dtype=complex)
    g[1, 0] = 1.0
    g[0, 1] = cmath.exp(1j * math.pi * alpha / 2.0)
    for m in range(1, M - 1):
        g[m + 1, 0] = _axis_step(g[m, 0], g[m - 1, 0], m, alpha)
    for n in range(1, N - 1):
        g[0, n + 1] = _axis_step(g[0, n], g[0, n - 1], n, alpha)
    g = fill_from_axes(g, -1.0)
    return DiscreteHolo(g, -1.0, 1.0, {"kind": "zalpha", "alpha": alpha})


def zalpha_recursion_residual(h: DiscreteHolo, alpha: float) -> np.ndarray:
    """``alpha g - 2m(...) - 2n(...)`` at each interior vertex of the quadrant."""
    g = h.g
    M, N = g.shape
    out = np.zeros((M - 2, N - 2))
    for m in range(1, M - 1):
        for n in range(1, N - 1):
            t1 = (g[m + 1, n] - g[m, n]) * (g[m, n] - g[m - 1, n]) / (g[m + 1, n] - g[m - 1, n])
            t2 = (g[m, n + 1] - g[m, n]) * (g[m, n] - g[m, n - 1]) / (g[m, n + 1] - g[m, n - 1])
            out[m - 1, n - 1] = abs(alpha * g[m, n] - 2 * m * t1 - 2 * n * t2) / max(1.0, abs(g[m, n]))
    return out


# -------------------------------------------------------- minimal surfaces


def _cq(z: complex) -> Quaternion:
    return Quaternion(z.real, z.imag, 0.0, 0.0)


def minimal_edge(gp: complex, gq: complex, a: float) -> Quaternion:
    """``(i - g_p j) j (a / (g_q - g_p)) (i - g_q j)``."""
    d = gq - gp
    if d == 0:
        raise DomainError("g takes equal values on an edge")
    return (QI - _cq(gp) * QJ) * QJ * _cq(a / d) * (QI - _cq(gq) * QJ)


def _integrate_edges(M, N, inc_h, inc_v) -> np.ndarray:
    V = np.zeros((M, N, 3))
    for p, q in comb_tree((M, N)):
        if p[1] == q[1]:
            d = inc_h[min(p[0], q[0]), p[1]] * (1 if q[0] > p[0] else -1)
        else:
            d = inc_v[p[0], min(p[1], q[1])] * (1 if q[1] > p[1] else -1)
        V[q] = V[p] + d
    return V


def minimal_net(h: DiscreteHolo, tol: float = 1e-10) -> QuadNet:
    """Discrete minimal net in R^3 from a discrete holomorphic function."""
    h.check(tol=max(tol, 1e-10))
    g = h.g
    M, N = g.shape
    inc_h = np.zeros((M - 1, N, 3))
    inc_v = np.zeros((M, N - 1, 3))
    worst_real = 0.0
    for m in range(M - 1):
        for n in range(N):
            e = minimal_edge(g[m, n], g[m + 1, n], h.a_h[m, n])
            worst_real = max(worst_real, abs(e.w) / max(1.0, abs(e)))
            inc_h[m, n] = e.vec
    for m in range(M):
        for n in range(N - 1):
            e = minimal_edge(g[m, n], g[m, n + 1], h.a_v[m, n])
            worst_real = max(worst_real, abs(e.w) / max(1.0, abs(e)))
            inc_v[m, n] = e.vec
    closure = inc_h[:, :-1] + inc_v[1:, :] - inc_h[:, 1:] - inc_v[:-1, :]
    scale = max(1.0, float(np.abs(inc_h).max(initial=0.0)), float(np.abs(inc_v).max(initial=0.0)))
    res = max(float(np.abs(closure).max(initial=0.0)) / scale, worst_real)
    if res > tol:
        raise NotIsothermicError(f"edge increments do not close (residual {res:.3e})", residual=res)
    V = _integrate_edges(M, N, inc_h, inc_v)
    return QuadNet(V, a_h=h.a_h, a_v=h.a_v, meta={"kind": "minimal", "source": dict(h.meta),
                                                  "closure_residual": res})


def discrete_catenoid(M: int = 8, N: int = 20, closed: bool = False) -> QuadNet:
    """Minimal net from ``exp(c1 m + i c2 n)`` with ``c2 = 2 pi / N`` and cross ratio -1."""
    c2 = 2 * math.pi / N
    c1 = solve_c1(c2)
    h = dhf_exp(c1, c2, M, N + 1 if closed else N, m0=-(M // 2))
    return minimal_net(h)


def discrete_enneper(M: int = 7, N: int = 7, c: complex = 0.2) -> QuadNet:
    return minimal_net(dhf_linear(c, M, N, m0=-(M // 2), n0=-(N // 2)))


# ------------------------------------------------------------ CMC 1 in H^3


@dataclass(frozen=True, eq=False)
class BryantResult:
    net: QuadNet
    F: np.ndarray
    hermitian: np.ndarray
    dets: np.ndarray
    closure_residual: float
    det_imag: float
    sheet: np.ndarray


def bryant_net(h: DiscreteHolo, lam: float, F0=None, tol: float = 1e-10) -> BryantResult:
    """Discrete CMC-1 net in H^3 from the discrete Bryant equation.

    ``F_q = F_p (I + c [[g_p, -g_p g_q], [1, -g_q]])`` with
    ``c = lam a_pq / (g_q - g_p)``; the vertices are ``F conj(F)^T / det F``,
    stored as Poincare-ball coordinates with ``kappa = -1`` and edge factors
    ``lam a / (1 - lam a)``, which normalise the conserved quantity to
    ``|H| = 1`` in curvature ``-1``.  Where
    ``det F < 0`` the matrix lies on the negative sheet; its negative is used
    and ``sheet`` records -1.
    """
    h.check(tol=max(tol, 1e-10))
    if lam == 0:
        raise DomainError("lam = 0 gives a constant frame and a single point")
    F0 = np.eye(2, dtype=complex) if F0 is None else np.asarray(F0, dtype=complex)
    d0 = np.linalg.det(F0)
    if abs(d0.imag) > tol * max(1.0, abs(d0)) or abs(d0) <= tol:
        raise DomainError("det F0 must be real and nonzero")
    g = h.g
    M, N = g.shape

    def step(Fp, gp, gq, a):
        c = lam * a / (gq - gp)
        return Fp @ (np.eye(2) + c * np.array([[gp, -gp * gq], [1.0, -gq]]))

    F = np.zeros((M, N, 2, 2), dtype=complex)
    F[0, 0] = F0
    for p, q in comb_tree((M, N)):
        if p[1] == q[1]:
            a = h.a_h[min(p[0], q[0]), p[1]]
        else:
            a = h.a_v[p[0], min(p[1], q[1])]
        if q[0] > p[0] or q[1] > p[1]:
            F[q] = step(F[p], g[p], g[q], a)
        else:
            F[q] = np.linalg.solve(step(np.eye(2), g[q], g[p], a).T, F[p].T).T
    worst = 0.0
    for m in range(M):
        for n in range(N):
            for dm, dn, a in ((1, 0, h.a_h), (0, 1, h.a_v)):
                if m + dm < M and n + dn < N:
                    pred = step(F[m, n], g[m, n], g[m + dm, n + dn], a[m, n])
                    worst = max(worst, float(np.abs(pred - F[m + dm, n + dn]).max())
                                / max(1.0, float(np.abs(pred).max())))
    if worst > tol:
        raise NotIsothermicError(f"Bryant frame does not close (residual {worst:.3e})", residual=worst)
    dets = np.linalg.det(F)
    det_imag = float((np.abs(dets.imag) / np.maximum(1.0, np.abs(dets))).max())
    if det_imag > tol:
        raise DomainError(f"det F drifted off the real line ({det_imag:.3e})")
    if np.any(np.abs(dets.real) <= tol):
        raise DomainError("det F vanishes: lam a = 1 on some edge")
    sheet = np.sign(dets.real)
    Hm = F @ np.conj(np.swapaxes(F, -1, -2)) / np.abs(dets.real)[..., None, None]
    V = np.array([[hermitian_to_poincare(Hm[m, n]) for n in range(N)] for m in range(M)])
    # the net carries the cross ratios of the Calapso transform of g
    a_h = lam * h.a_h / (1.0 - lam * h.a_h)
    a_v = lam * h.a_v / (1.0 - lam * h.a_v)
    net = QuadNet(V, a_h=a_h, a_v=a_v, kappa=-1.0,
                  meta={"kind": "bryant", "lam": lam, "source": dict(h.meta)})
    return BryantResult(net, F, Hm, dets.real, worst, det_imag, sheet)


# ---------------------------------------------------- planar and cylinder


def planar_grid(M: int, N: int, dx: float = 1.0, dy: float = 1.0) -> QuadNet:
    m, n = _grid(M, N)
    V = np.stack([np.broadcast_to(m * dx, (M, N)), np.broadcast_to(n * dy, (M, N)),
                  np.zeros((M, N))], axis=-1).astype(float)
    return QuadNet(V, a_h=-dx * dx, a_v=dy * dy, meta={"kind": "planar"})


def _cmc_Z(V, H, nvec) -> np.ndarray:
    """``[[H f + n, -n f - f n - H f^2], [H, -H f - n]]`` as coordinate arrays."""
    H = np.broadcast_to(np.asarray(H, float), V.shape[:-1])
    Z = np.empty(V.shape[:-1] + (5,))
    Z[..., :3] = H[..., None] * V + nvec
    Z[..., 3] = H
    Z[..., 4] = 2.0 * np.sum(nvec * V, axis=-1) + H * np.sum(V * V, axis=-1)
    return Z


def discrete_cylinder(N: int = 8, M: int = 5, delta: float = 0.3, alpha: float = 0.5,
                      closed: bool = True) -> tuple[QuadNet, ConservedQuantity]:
    """Unit-radius cylinder ``(cos, sin, m delta)`` with its linear conserved quantity.

    The normal is ``-(c i + s j)`` and the lower-left entry of ``Z`` is
    ``1 - alpha``, which is ``1/2`` for the default ``alpha``.
    """
    cols = N + 1 if closed else N
    th = 2 * np.pi * np.arange(cols) / N
    V = np.zeros((M, cols, 3))
    V[..., 0] = np.cos(th)[None]
    V[..., 1] = np.sin(th)[None]
    V[..., 2] = delta * np.arange(M)[:, None]
    a_h = -alpha * delta ** 2
    a_v = 4 * alpha * math.sin(math.pi / N) ** 2
    net = QuadNet(V, a_h=a_h, a_v=a_v, meta={"kind": "cylinder", "N": N, "delta": delta, "alpha": alpha})
    nvec = -V.copy()
    nvec[..., 2] = 0.0
    # (3) of the revolution system with r = 1, rho = -1: -1 + H = -alpha
    H = 1.0 - alpha
    Z = _cmc_Z(V, H, nvec)
    return net, ConservedQuantity.linear(np.array([0, 0, 0, 0, 1.0]), Z, kind="cylinder")


def half_cross_ratio_net(M: int = 4, N: int = 4) -> tuple[QuadNet, ConservedQuantity]:
    """Periodic net with values j, i + j, 0, i and cross ratio 1/2 on every quad.

    ``j`` at (even, even), ``i + j`` at (odd, even), ``0`` at (odd, odd) and
    ``i`` at (even, odd); ``a_h = 1``, ``a_v = 2``.  ``Z`` is minus the
    unscaled lift and ``Q = [[0, 1], [0, 0]]``, so ``||Z|| = 0``.
    """
    table = {(0, 0): (0, 1, 0), (1, 0): (1, 1, 0), (1, 1): (0, 0, 0), (0, 1): (1, 0, 0)}
    V = np.array([[table[(m % 2, n % 2)] for n in range(N)] for m in range(M)], dtype=float)
    net = QuadNet(V, a_h=1.0, a_v=2.0, meta={"kind": "half"})
    Z = np.empty((M, N, 5))
    Z[..., :3] = -V
    Z[..., 3] = -1.0
    Z[..., 4] = -np.sum(V * V, axis=-1)
    return net, ConservedQuantity.linear(np.array([0, 0, 0, 0, 1.0]), Z, kind="half")


# -------------------------------------------------- surfaces of revolution


@dataclass(frozen=True)
class RevolutionState:
    r: float
    h: float
    H: float
    rho: float
    eta: float
    alpha: float
    kappa: float
    H_kappa: float
    N: int = 12
    m: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.h, self.H, self.rho, self.eta])


def two_H_kappa(r, h, H, rho, eta, kappa) -> float:
    return H * (1 + kappa * (r * r + h * h)) + 2 * kappa * (r * rho + h * eta)


def revolution_seed(r0: float, h0: float, H0: float, eta0: float, kappa: float,
                    N: int = 12, rho_sign: float = -1.0) -> RevolutionState:
    """Initial data with ``rho^2 + eta^2 = 1``; ``alpha`` is then fixed by the first-integral equation."""
    if r0 <= 0:
        raise DomainError("r0 must be positive")
    if abs(eta0) > 1:
        raise DomainError("|eta0| must be at most 1")
    rho0 = rho_sign * math.sqrt(1.0 - eta0 * eta0)
    w = 1 + kappa * (r0 * r0 + h0 * h0)
    if abs(w) <= 1e-14:
        raise DomainError("seed lies on the excluded set of the space form")
    alpha = -r0 * (rho0 + H0 * r0) / w
    if alpha == 0:
        raise DomainError("seed gives alpha = 0")
    return RevolutionState(r0, h0, H0, rho0, eta0, alpha, kappa,
                           0.5 * two_H_kappa(r0, h0, H0, rho0, eta0, kappa), N, 0)


def revolution_seed_for(r0: float, h0: float, eta0: float, kappa: float, H_kappa: float,
                        N: int = 12, rho_sign: float = -1.0) -> RevolutionState:
    """Seed whose first integral equals ``H_kappa`` (the mean curvature in the space form)."""
    rho0 = rho_sign * math.sqrt(max(0.0, 1.0 - eta0 * eta0))
    w = 1 + kappa * (r0 * r0 + h0 * h0)
    if abs(w) <= 1e-14:
        raise DomainError("seed lies on the excluded set of the space form")
    H0 = (2 * H_kappa - 2 * kappa * (r0 * rho0 + h0 * eta0)) / w
    return revolution_seed(r0, h0, H0, eta0, kappa, N, rho_sign)


def revolution_residuals(s: RevolutionState, t: RevolutionState) -> np.ndarray:
    """Residuals of the nine equations linking consecutive profile states."""
    al, k = s.alpha, s.kappa
    r, h, H, rho, eta = s.as_array()
    r1, h1, H1, rho1, eta1 = t.as_array()
    dr, dh = r1 - r, h1 - h
    w, w1 = r * r + h * h, r1 * r1 + h1 * h1
    c = al / (r * r1)
    return np.array([
        (rho1 ** 2 + eta1 ** 2) - (rho ** 2 + eta ** 2),
        0.0,
        rho1 + H1 * r1 + al * (1 + k * w1) / r1,
        (rho1 + rho) * dr + (eta1 + eta) * dh,
        dr * (eta1 - eta) - dh * (rho1 - rho),
        H1 - H - al * k * (w - w1) / (r * r1),
        rho1 - rho + H1 * r1 - H * r - c * (dr + k * (r1 * w - r * w1)),
        eta1 - eta + H1 * h1 - H * h - c * (dh + k * (h1 * w - h * w1)),
        2 * (r * rho + h * eta - r1 * rho1 - h1 * eta1) + H * w - H1 * w1 - c * (w - w1),
    ])


def _explicit(s: RevolutionState, x: float, y: float):
    """H, rho, eta at the next step from the three explicit equations, with derivatives."""
    al, k = s.alpha, s.kappa
    r, h, H, rho, eta = s.as_array()
    dr, dh = x - r, y - h
    w, w1 = r * r + h * h, x * x + y * y
    c = al / (r * x)
    c_x = -al / (r * x * x)
    H1 = H + al * k / r * (w - w1) / x
    H1_x = al * k / r * (-2.0 - (w - w1) / (x * x))
    H1_y = al * k / r * (-2.0 * y / x)
    br = dr + k * (x * w - r * w1)
    bh = dh + k * (y * w - h * w1)
    rho1 = rho - H1 * x + H * r + c * br
    eta1 = eta - H1 * y + H * h + c * bh
    rho1_x = -H1_x * x - H1 + c_x * br + c * (1 + k * (w - 2 * r * x))
    rho1_y = -H1_y * x + c * (-2 * k * r * y)
    eta1_x = -H1_x * y + c_x * bh + c * (-2 * k * h * x)
    eta1_y = -H1_y * y - H1 + c * (1 + k * (w - 2 * h * y))
    return (H1, rho1, eta1), np.array([[rho1_x, rho1_y], [eta1_x, eta1_y]])


def _step_system(s: RevolutionState, x: float, y: float, speed: float):
    r, h, H, rho, eta = s.as_array()
    (H1, rho1, eta1), D = _explicit(s, x, y)
    (rx, ry), (ex, ey) = D
    dr, dh = x - r, y - h
    F = np.array([
        (rho1 + rho) * dr + (eta1 + eta) * dh,
        dr * (eta1 - eta) - dh * (rho1 - rho),
        (dr * dr + dh * dh) / (r * x) - speed,
    ])
    J = np.array([
        [rx * dr + (rho1 + rho) + ex * dh, ry * dr + ey * dh + (eta1 + eta)],
        [(eta1 - eta) + dr * ex - dh * rx, dr * ey - (rho1 - rho) - dh * ry],
        [2 * dr / (r * x) - (dr * dr + dh * dh) / (r * x * x), 2 * dh / (r * x)],
    ])
    return F, J, (H1, rho1, eta1)


def revolution_step(s: RevolutionState, speed: float = 0.05, guess=None,
                    tol: float = 1e-12, max_iter: int = 50) -> RevolutionState:
    """Next profile state.

    ``H``, ``rho`` and ``eta`` follow explicitly from three of the equations;
    ``(r, h)`` solves the two remaining ones together with the step-length
    condition ``(dr^2 + dh^2) / (r r') = speed`` by Gauss-Newton with an
    analytic Jacobian.
    """
    if s.r <= 0:
        raise DomainError("r must be positive")
    if speed <= 0:
        raise DomainError("speed must be positive")
    if guess is None:
        guess = s.r * math.sqrt(speed) * np.array([s.eta, -s.rho]) / math.hypot(s.rho, s.eta)
    x = np.array([s.r, s.h]) + np.asarray(guess, float)
    trace = []
    for _ in range(max_iter):
        if x[0] <= 0:
            raise DomainError("profile reached the axis of revolution")
        F, J, _ = _step_system(s, x[0], x[1], speed)
        dx = np.linalg.lstsq(J, -F, rcond=None)[0]
        x = x + dx
        trace.append(float(np.abs(F).max()))
        if np.abs(dx).max() <= tol * max(1.0, np.abs(x).max()):
            break
    else:
        raise StepFailure("revolution step did not converge", trace=trace)
    if x[0] <= 0:
        raise DomainError("profile reached the axis of revolution")
    F, _, (H1, rho1, eta1) = _step_system(s, x[0], x[1], speed)
    t = RevolutionState(float(x[0]), float(x[1]), H1, rho1, eta1, s.alpha, s.kappa, s.H_kappa, s.N, s.m + 1)
    res = revolution_residuals(s, t)
    if np.abs(res).max() > 1e-9:
        raise StepFailure(f"revolution step converged to a spurious root (residual {np.abs(res).max():.3e})",
                          trace=trace)
    return t


@dataclass(frozen=True, eq=False)
class RevolutionResult:
    net: QuadNet
    cq: ConservedQuantity
    states: list
    residuals: np.ndarray
    H_kappa_drift: float


def revolution_profile(seed: RevolutionState, steps: int, speed: float = 0.05) -> list:
    states = [seed]
    guess = None
    for _ in range(steps):
        t = revolution_step(states[-1], speed, guess)
        guess = np.array([t.r - states[-1].r, t.h - states[-1].h])
        states.append(t)
    return states


def revolution_net(seed: RevolutionState, steps: int, speed: float = 0.05,
                   N: int | None = None, closed: bool = True) -> RevolutionResult:
    """Net ``r_m (c_n i + s_n j) + h_m k`` and its conserved quantity ``Q + lam Z``."""
    N = N or seed.N
    states = revolution_profile(seed, steps, speed)
    r = np.array([s.r for s in states])
    hh = np.array([s.h for s in states])
    al, k = seed.alpha, seed.kappa
    cols = N + 1 if closed else N
    th = 2 * np.pi * np.arange(cols) / N
    c, sn = np.cos(th), np.sin(th)
    V = np.zeros((len(states), cols, 3))
    V[..., 0] = r[:, None] * c[None]
    V[..., 1] = r[:, None] * sn[None]
    V[..., 2] = hh[:, None]
    a_h = -al * (np.diff(hh) ** 2 + np.diff(r) ** 2) / (r[:-1] * r[1:])
    a_h = np.repeat(a_h[:, None], cols, axis=1)
    a_v = 4 * al * math.sin(math.pi / N) ** 2
    net = QuadNet(V, a_h=a_h, a_v=a_v, kappa=k,
                  meta={"kind": "revolution", "alpha": al, "speed": speed, "N": N})
    rho = np.array([s.rho for s in states])
    eta = np.array([s.eta for s in states])
    H = np.array([s.H for s in states])
    nvec = np.zeros_like(V)
    nvec[..., 0] = rho[:, None] * c[None]
    nvec[..., 1] = rho[:, None] * sn[None]
    nvec[..., 2] = eta[:, None]
    Z = _cmc_Z(V, np.repeat(H[:, None], cols, axis=1), nvec)
    cq = ConservedQuantity.linear(np.array([0, 0, 0, k, 1.0]), Z, kind="revolution")
    res = np.array([revolution_residuals(a, b) for a, b in zip(states[:-1], states[1:])])
    hk = np.array([two_H_kappa(s.r, s.h, s.H, s.rho, s.eta, k) for s in states])
    return RevolutionResult(net, cq, states, res, float(np.ptp(hk)))


# ------------------------------------------------------------------ R^{2,1}

R21_METRIC = np.array([1.0, 1.0, -1.0])


def r21_inner(u, v):
    return np.sum(np.asarray(u) * np.asarray(v) * R21_METRIC, axis=-1)


def r21_cross(u, v):
    """Lorentzian cross product, ``<u x v, w> = det(u, v, w)``."""
    return np.cross(u, v) * R21_METRIC


def r21_cross_ratio(points, tol: float = 1e-9) -> float:
    """Cross ratio of four concircular points in a spacelike plane of R^{2,1}.

    An orthonormal frame of the plane turns it into a Euclidean plane; the
    angles about the circle centre enter
    ``sin((tp-tq)/2) csc((tq-tr)/2) sin((tr-ts)/2) csc((ts-tp)/2)``.
    """
    P = np.asarray(points, dtype=float)
    if P.shape != (4, 3):
        raise DomainError("expected four points in R^{2,1}")
    u, v = P[1] - P[0], P[3] - P[0]
    e1 = u
    n1 = r21_inner(e1, e1)
    if n1 <= tol * max(1.0, float(u @ u)):
        raise DomainError("edge is not spacelike")
    e1 = e1 / math.sqrt(n1)
    e2 = v - r21_inner(v, e1) * e1
    n2 = r21_inner(e2, e2)
    scale = max(1.0, float(v @ v))
    if abs(n2) <= tol * scale:
        raise DomainError("points are collinear or span a lightlike plane")
    if n2 < 0:
        raise DomainError("points span a timelike plane")
    e2 = e2 / math.sqrt(n2)
    nrm = r21_cross(e1, e2)
    if abs(r21_inner(P[2] - P[0], nrm)) > tol * max(1.0, float(np.abs(P).max())):
        raise DomainError("points are not coplanar")
    X = np.array([[r21_inner(p - P[0], e1), r21_inner(p - P[0], e2)] for p in P])
    A = 2 * (X[1:3] - X[0])
    b = np.sum(X[1:3] ** 2, axis=1) - np.sum(X[0] ** 2)
    ctr = np.linalg.solve(A, b)
    rad = np.linalg.norm(X - ctr, axis=1)
    if np.ptp(rad) > tol * max(1.0, rad.max()):
        raise DomainError("points are not concircular")
    t = np.arctan2(X[:, 1] - ctr[1], X[:, 0] - ctr[0])
    s = lambda x: math.sin(x / 2.0)
    return s(t[0] - t[1]) / s(t[1] - t[2]) * s(t[2] - t[3]) / s(t[3] - t[0])


def random_r21_isometry(rng: np.random.Generator):
    """Random orthochronous isometry ``x -> L x + b`` of R^{2,1}; returns (L, b)."""
    def rot(a):
        return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1.0]])

    def boost(t):
        return np.array([[math.cosh(t), 0, math.sinh(t)], [0, 1.0, 0], [math.sinh(t), 0, math.cosh(t)]])

    L = rot(rng.uniform(0, 2 * math.pi)) @ boost(rng.normal() * 0.7) @ rot(rng.uniform(0, 2 * math.pi))
    return L, rng.normal(size=3)


@dataclass(frozen=True, eq=False)
class R21Net:
    vertices: np.ndarray
    normals: np.ndarray
    a_h: np.ndarray
    a_v: np.ndarray
    h: float
    H: float


def spacelike_cylinder(r: float = 1.0, delta: float = 0.2, eps: float = 0.3,
                       M: int = 6, N: int = 6, alpha: float = 0.5) -> R21Net:
    """``(r sinh(m delta), n eps, r cosh(m delta))`` in coordinates (x1, x2, x0)."""
    m = np.arange(M)[:, None] * delta
    n = np.arange(N)[None, :] * eps
    V = np.stack([np.broadcast_to(r * np.sinh(m), (M, N)), np.broadcast_to(n, (M, N)),
                  np.broadcast_to(r * np.cosh(m), (M, N))], axis=-1).astype(float)
    nrm = np.zeros_like(V)
    nrm[..., 0] = V[..., 0] / r
    nrm[..., 2] = V[..., 2] / r
    L2 = 2 * r * r * (math.cosh(delta) - 1.0)
    a_h = np.full((M - 1, N), -alpha * L2)
    a_v = np.full((M, N - 1), alpha * eps * eps)
    return R21Net(V, nrm, a_h, a_v, 2 * alpha * r, -1.0 / (2 * r))


def r21_cmc_verify(net: R21Net) -> dict:
    """The four spacelike-CMC conditions, each reported as a max residual."""
    V, Nn = net.vertices, net.normals
    M, N = V.shape[:2]
    c1 = float(np.abs(r21_inner(Nn, Nn) + 1.0).max())
    c2 = c3 = c4 = 0.0
    for m in range(M):
        for n in range(N):
            for dm, dn, A in ((1, 0, net.a_h), (0, 1, net.a_v)):
                if m + dm >= M or n + dn >= N:
                    continue
                p, q = (m, n), (m + dm, n + dn)
                d = V[q] - V[p]
                l2 = float(r21_inner(d, d))
                if l2 <= 0:
                    raise DomainError(f"edge {p}-{q} is not spacelike")
                sc = max(1.0, float(np.abs(d).max()))
                c2 = max(c2, float(np.abs(r21_cross(d, Nn[q]) + r21_cross(Nn[p], d)).max()) / sc)
                c3 = max(c3, abs(float(r21_inner(d, Nn[p] + Nn[q]))) / sc)
                lhs = net.h * ((Nn[q] - Nn[p]) + net.H * d)
                rhs = -A[p] * d / l2
                c4 = max(c4, float(np.abs(lhs - rhs).max()) / max(1.0, float(np.abs(rhs).max())))
    return {"unit_normal": c1, "wedge": c2, "orthogonal": c3, "christoffel": c4}


def r21_cross_ratios(V: np.ndarray) -> np.ndarray:
    M, N = V.shape[:2]
    return np.array([[r21_cross_ratio([V[m, n], V[m + 1, n], V[m + 1, n + 1], V[m, n + 1]])
                      for n in range(N - 1)] for m in range(M - 1)])


# ------------------------------------------------------- maximal surfaces


@dataclass(frozen=True, eq=False)
class KobayashiSample:
    w: np.ndarray
    z: np.ndarray
    f: np.ndarray
    metric: np.ndarray
    singular: np.ndarray
    normal: np.ndarray
    path_residual: float
    loop_residual: float | None


def _edge_integral(phi, zmap, dzmap, w0, w1, refine):
    """Trapezoid rule along the straight segment from ``w0`` to ``w1`` in the parameter plane."""
    t = np.linspace(0.0, 1.0, refine + 1)
    w = w0 + (w1 - w0) * t
    z = zmap(w)
    vals = phi(z) * (dzmap(w) * (w1 - w0))[:, None]
    return np.trapezoid(vals, t, axis=0) if hasattr(np, "trapezoid") else np.trapz(vals, t, axis=0)


def kobayashi_sample(g, eta, w: np.ndarray, zmap=None, dzmap=None, refine: int = 64,
                     periodic_n: bool = False, singular_tol: float = 1e-12) -> KobayashiSample:
    """Sample ``Re int (1 + g^2, i (1 - g^2), -2 g) eta`` on a parameter grid.

    ``eta`` is the coefficient of ``dz``.  The grid ``w`` lives in a
    parameter plane mapped to ``z`` by ``zmap`` (identity by default); edge
    integrals use the trapezoid rule in ``w`` with ``refine`` sub-steps.  The
    surface is integrated along a comb from ``w[0, 0]``; the largest real part
    of a quad loop is ``path_residual``, and with ``periodic_n`` the largest
    real part of the loop once around each row is ``loop_residual``.
    """
    w = np.asarray(w, dtype=complex)
    zmap = zmap or (lambda x: x)
    dzmap = dzmap or (lambda x: np.ones_like(x))
    M, N = w.shape

    def phi(z):
        gz = g(z)
        e = eta(z)
        return np.stack([(1 + gz * gz) * e, 1j * (1 - gz * gz) * e, -2 * gz * e], axis=-1)

    Ih = np.array([[_edge_integral(phi, zmap, dzmap, w[m, n], w[m + 1, n], refine) for n in range(N)]
                   for m in range(M - 1)]).reshape(M - 1, N, 3)
    Iv = np.array([[_edge_integral(phi, zmap, dzmap, w[m, n], w[m, n + 1], refine) for n in range(N - 1)]
                   for m in range(M)]).reshape(M, N - 1, 3)
    F = np.zeros((M, N, 3))
    for p, q in comb_tree((M, N)):
        if p[1] == q[1]:
            d = Ih[min(p[0], q[0]), p[1]] * (1 if q[0] > p[0] else -1)
        else:
            d = Iv[p[0], min(p[1], q[1])] * (1 if q[1] > p[1] else -1)
        F[q] = F[p] + d.real
    loops = Ih[:, :-1] + Iv[1:, :] - Ih[:, 1:] - Iv[:-1, :]
    path = float(np.abs(loops.real).max(initial=0.0))
    loop = None
    if periodic_n:
        # closing edge from the last column back to the first, one period on
        wrap = np.array([_edge_integral(phi, zmap, dzmap, w[m, N - 1], w[m, N - 1] + (w[m, 1] - w[m, 0]), refine)
                         for m in range(M)])
        loop = float(np.abs((Iv.sum(axis=1) + wrap).real).max())
    z = zmap(w)
    gz = g(z)
    ez = eta(z)
    gg = np.abs(gz) ** 2
    metric = (1 - gg) ** 2 * np.abs(ez) ** 2
    singular = np.abs(np.abs(gz) - 1.0) <= singular_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        den = gg - 1.0
        nrm = np.stack([(-gz - np.conj(gz)).real / den, (1j * (gz - np.conj(gz))).real / den,
                        (gg + 1) / den], axis=-1)
    nrm[singular] = np.nan
    return KobayashiSample(w, z, F, metric, singular, nrm, path, loop)


def annulus_grid(r_in: float, r_out: float, M: int, N: int):
    """Log-polar grid ``w = s + i theta`` with ``z = exp(w)``; the angle is periodic over N samples."""
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    s = np.linspace(math.log(r_in), math.log(r_out), M)
    th = 2 * np.pi * np.arange(N) / N
    return s[:, None] + 1j * th[None, :], np.exp, np.exp
