import math

import numpy as np
import pytest

from isonet import generators as gen
from isonet.errors import DegenerateQuadError, DomainError, NotIsothermicError
from isonet.mink import inner_array, lift_array, to_orthonormal
from isonet.net import (QuadNet, cross_ratio, cross_ratio_from_gram, factorization_report, factorize,
                        gram_E, hat_cross_ratio, is_concircular, is_vertex_star_spherical,
                        moutard_edge_residuals, moutard_lift, quad_cross_ratios, star_gram_det,
                        vertex_star_sphere)
from isonet.quat import I, J, ZERO, Quaternion, mob_apply, random_mob3, translation, INVERSION

from conftest import random_concircular_quad


def _gram(points, scales=None):
    L = lift_array(np.asarray(points), scale=np.ones(4) if scales is None else scales)
    return inner_array(L[:, None], L[None, :])


def test_square_cross_ratio():
    q = cross_ratio(ZERO, I, I + J, J)
    assert q.close_to(Quaternion(-1.0), 1e-15)
    assert hat_cross_ratio(ZERO, I, I + J, J) == pytest.approx(-1.0)


def test_half_cross_ratio_example():
    # every quad of the net with values j, i + j, 0, i has cross ratio 1/2
    net, _ = gen.half_cross_ratio_net(6, 6)
    q = quad_cross_ratios(net)
    assert np.abs(q[..., 0] - 0.5).max() <= 1e-14
    assert np.abs(q[..., 1:]).max() <= 1e-14
    assert cross_ratio(J, I + J, ZERO, I).close_to(Quaternion(0.5), 1e-14)


def test_cyclic_permutation_identities(rng):
    for _ in range(50):
        p, q, r, s = (Quaternion.imag(x) for x in random_concircular_quad(rng))
        A = (p - q) * (q - r) * (r - s) * (s - p)
        B = (s - p) * (r - s) * (q - r) * (p - q)
        C = (q - r) * (p - q) * (s - p) * (r - s)
        D = (q - r) * (r - s) * (s - p) * (p - q)
        for X in (B, C, D):
            assert X.close_to(A, 1e-10)


def test_hat_cross_ratio_invariance(rng):
    for _ in range(20):
        pts = [Quaternion.imag(rng.normal(size=3)) for _ in range(4)]
        T = random_mob3(rng)
        a = hat_cross_ratio(*pts)
        b = hat_cross_ratio(*[mob_apply(T, x) for x in pts])
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_tetrahedral_quad_is_not_real():
    pts = [np.array(v, float) for v in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))]
    assert hat_cross_ratio(*pts).imag > 0.1


def test_degenerate_quad():
    with pytest.raises(DegenerateQuadError):
        cross_ratio(ZERO, ZERO, I, J)


def test_gram_formula_examples(rng):
    sq = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    assert cross_ratio_from_gram(_gram(sq)) == pytest.approx(-1.0)
    assert cross_ratio_from_gram(_gram(sq, np.array([2.0, 0.3, -1.5, 7.0]))) == pytest.approx(-1.0)
    quad = random_concircular_quad(rng)
    s = _gram(quad)
    assert abs(gram_E(s)) <= 1e-10 * np.abs(s).max() ** 4


def test_gram_formula_matches_quaternionic(rng):
    for _ in range(100):
        pts = [rng.normal(size=3) for _ in range(4)]
        a = cross_ratio_from_gram(_gram(pts, np.exp(rng.normal(size=4))))
        b = hat_cross_ratio(*pts)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_gram_formula_degenerate():
    s = np.zeros((4, 4))
    with pytest.raises(DegenerateQuadError):
        cross_ratio_from_gram(s)


def test_factorize_planar_grid():
    V = np.array([[(m, n, 0.0) for n in range(4)] for m in range(5)])
    net = factorize(QuadNet(V), seed=1.0)
    assert np.allclose(net.a_h, 1.0) and np.allclose(net.a_v, -1.0)


def test_factorize_exp_net():
    h = gen.dhf_exp(0.4, 2 * math.pi / 9, 5, 6)
    net = factorize(h.as_planar_net())
    assert np.ptp(net.a_h) < 1e-12 and np.ptp(net.a_v) < 1e-12


def test_factorize_perturbed_reports_quad():
    net = gen.discrete_catenoid(6, 8)
    V = net.vertices.copy()
    V[3, 4] += [0.0, 0.0, 1e-3]
    with pytest.raises(NotIsothermicError) as err:
        factorize(QuadNet(V))
    assert err.value.worst in {(2, 3), (2, 4), (3, 3), (3, 4)}


def test_toda_relation_on_catenoid(catenoid):
    rep = factorization_report(catenoid)
    assert rep.ok and rep.toda_residual < 1e-12


def test_planar_grid_moutard_scales():
    V = np.array([[(m, n, 0.0) for n in range(4)] for m in range(4)])
    net = QuadNet(V, a_h=1.0, a_v=-1.0)
    s = np.array([[(-1.0) ** n / 2 for n in range(4)] for m in range(4)])
    F = lift_array(V, 0.0) * s[..., None]
    rh, rv = moutard_edge_residuals(F, net)
    assert rh.max() < 1e-15 and rv.max() < 1e-15


def test_moutard_lift_identities(catenoid):
    ml = moutard_lift(catenoid)
    F = ml.F
    assert ml.edge_residual < 1e-10 and ml.parallel_residual < 1e-10
    M, N = catenoid.shape
    for m in range(M - 1):
        for n in range(N - 1):
            p, q, r, s = F[m, n], F[m + 1, n], F[m + 1, n + 1], F[m, n + 1]
            ratio = inner_array(p, q) / inner_array(p, s)
            assert ratio == pytest.approx(catenoid.a_h[m, n] / catenoid.a_v[m, n], rel=1e-10)
            sc = np.abs(to_orthonormal(np.array([p, q, r, s]))).max() ** 2
            assert abs(inner_array(r + p, q - s)) <= 1e-10 * sc


def test_checkerboard_rescale(catenoid):
    ml = moutard_lift(catenoid).rescaled(2.0, -0.5)
    net = catenoid.with_factors(catenoid.a_h * -1.0, catenoid.a_v * -1.0)
    rh, rv = ml.edge_residuals(net)
    assert max(rh.max(), rv.max()) < 1e-10


def test_vertex_star_sphere(catenoid):
    V = np.array([[(m, n, 0.0) for n in range(4)] for m in range(4)])
    plane = vertex_star_sphere(QuadNet(V), (1, 1))
    assert abs(plane.sphere.x0) < 1e-12
    st = vertex_star_sphere(catenoid, (3, 5))
    assert st.incidence < 1e-9
    assert abs(star_gram_det(catenoid, (3, 5))) < 1e-9
    Vp = catenoid.vertices.copy()
    Vp[4, 6] += [0.01, -0.02, 0.03]
    with pytest.raises(NotIsothermicError):
        vertex_star_sphere(QuadNet(Vp), (3, 5))
    with pytest.raises(DomainError):
        vertex_star_sphere(catenoid, (0, 0))


def test_is_vertex_star_spherical(catenoid):
    V = np.array([[(m, n, 0.0) for n in range(4)] for m in range(4)])
    assert is_vertex_star_spherical(QuadNet(V), (1, 1))
    assert not is_vertex_star_spherical(catenoid, (3, 5))
    # a Moebius image of a planar grid lies on a round sphere
    T = translation(Quaternion.imag([0.1, 0.2, 0.7])) @ INVERSION @ translation(Quaternion.imag([0, 0, 1.5]))
    W = np.array([[mob_apply(T, Quaternion.imag(V[m, n] * 0.3)).vec for n in range(4)] for m in range(4)])
    assert is_vertex_star_spherical(QuadNet(W), (1, 2))


def test_concircularity_flag(catenoid):
    assert is_concircular(catenoid)
    V = catenoid.vertices.copy()
    V[2, 2, 2] += 0.05
    assert not is_concircular(QuadNet(V))


def test_scalar_factors_broadcast():
    net = QuadNet(np.zeros((3, 2, 3)) + np.arange(3)[:, None, None], a_h=2.0, a_v=-1.0)
    assert net.a_h.shape == (2, 2) and net.a_v.shape == (3, 1)
    with pytest.raises(DomainError):
        QuadNet(np.zeros((3, 3)))
