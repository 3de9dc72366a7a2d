import math

import numpy as np
import pytest

from isonet.errors import DomainError, ValidationError
from isonet.mink import (INFINITY, MinkVec, SpaceForm, antipodal_matrix, basis, conjugate_by,
                         from_hermitian, from_poincare, from_upper_half, gram, hermitian_to_poincare,
                         in_h3_hermitian, inner, inner_array, inner_via_matrices, invert_through,
                         is_lightlike, lift, lift_array, lorentz_boost, minkowski31_norm, plane_vec,
                         project, sphere_angle, sphere_from_center_radius, sphere_geometry,
                         to_hermitian, to_poincare, to_upper_half)
from isonet.net import gram_E
from isonet.quat import I, ZERO, Quaternion, QuatMat2, mob_apply, qinv, random_mob3

TANH_HALF = 0.4621171572600097585  # mpmath, 30 digits


def rpt(rng, s=1.0):
    return Quaternion.imag(rng.normal(size=3) * s)


def rvec(rng):
    return MinkVec.from_array(rng.normal(size=5))


def test_signature_of_basis():
    assert np.allclose(gram(basis()), np.diag([1, 1, 1, 1, -1]))


def test_inner_examples():
    e5 = MinkVec(ZERO, 1.0, 1.0)
    assert inner(e5, e5) == pytest.approx(-1.0)
    x = Quaternion.imag([0.3, -1.2, 0.5])
    assert inner(lift(x), lift(x)) == pytest.approx(0.0, abs=1e-14)
    assert inner(lift(ZERO), lift(I)) == pytest.approx(-2.0)


def test_inner_matches_matrix_form(rng):
    for _ in range(50):
        X, Y = rvec(rng), rvec(rng)
        assert inner(X, Y) == pytest.approx(inner_via_matrices(X, Y), abs=1e-12)
        S = X.as_mat() @ X.as_mat()
        assert S.close_to(QuatMat2.scalar(-inner(X, X)), 1e-12)


def test_lift_examples():
    assert np.allclose(lift(ZERO, 0.0).as_array(), [0, 0, 0, 2, 0])
    X = lift(I, 1.0)
    assert np.allclose(X.as_array(), [1, 0, 0, 1, 1])
    assert inner(X, SpaceForm(1.0).Q) == pytest.approx(-1.0)


@pytest.mark.parametrize("kappa", [-1.0, 0.0, 1.0])
def test_lift_project_round_trip(rng, kappa):
    for _ in range(3):
        x = rpt(rng, 0.3)
        X = lift(x, kappa)
        assert is_lightlike(X)
        assert inner(X, SpaceForm(kappa).Q) == pytest.approx(-1.0)
        y, scale = project(X * 3.7, kappa)
        assert y.close_to(x, 1e-12)
        assert scale * 3.7 == pytest.approx(1.0)


def test_lift_excluded_set():
    with pytest.raises(DomainError):
        lift(I, -1.0)


def test_project_infinity():
    assert project(MinkVec(ZERO, 0.0, 1.0))[0] is INFINITY


def test_sphere_geometry_examples(rng):
    S = MinkVec(ZERO, 1.0, -1.0)
    g = sphere_geometry(S)
    assert g.kind == "sphere"
    assert np.allclose(g.center, 0)
    assert g.radius == pytest.approx(2.0)
    assert g.H0 == pytest.approx(0.5)
    g5 = sphere_geometry(S * 5.0)
    assert np.allclose(g5.center, g.center) and g5.radius == pytest.approx(g.radius)
    # membership: Euclidean distance equals the Euclidean radius
    S = sphere_from_center_radius([0.3, -0.2, 1.0], 0.7)
    g = sphere_geometry(S)
    assert g.euclidean_radius == pytest.approx(0.7)
    for _ in range(5):
        u = rng.normal(size=3)
        y = g.center + 0.7 * u / np.linalg.norm(u)
        assert inner(lift(Quaternion.imag(y)), S) == pytest.approx(0.0, abs=1e-12)


def test_plane_variant():
    g = sphere_geometry(plane_vec([0, 0, 2], 1.5))
    assert g.kind == "plane"
    assert np.allclose(g.normal, [0, 0, 1]) and g.offset == pytest.approx(1.5)


def test_sphere_angle():
    S1 = sphere_from_center_radius([0, 0, 0], 1.0)
    assert sphere_angle(S1, S1) == pytest.approx(0.0, abs=1e-7)
    S2 = sphere_from_center_radius([1, 0, 0], 1.0)
    # law of cosines: d^2 = r1^2 + r2^2 - 2 r1 r2 cos(theta) -> cos = 1/2
    th = sphere_angle(S1, S2)
    assert min(th, math.pi - th) == pytest.approx(math.pi / 3)
    assert sphere_angle(plane_vec([1, 0, 0], 0), plane_vec([0, 1, 0], 0)) == pytest.approx(math.pi / 2)
    with pytest.raises(DomainError):
        sphere_angle(S1, sphere_from_center_radius([5, 0, 0], 1.0))


def test_inversion(rng):
    S = sphere_from_center_radius([0.5, 0, 0], 2.0)
    p = lift(Quaternion.imag([0.5, 0, 0.8]))
    img = invert_through(S, p)
    assert is_lightlike(img)
    y = project(img)[0]
    # classical inversion lands at r^2 / d from the centre on the same ray
    assert y.close_to(Quaternion.imag([0.5, 0, 4.0 / 0.8]), 1e-12)
    X = rvec(rng)
    back = invert_through(S, invert_through(S, X))
    assert np.allclose(back.as_array(), X.as_array(), atol=1e-12)
    on = lift(Quaternion.imag([0.5, 2.0, 0]))
    assert np.allclose(invert_through(S, on).as_array(), on.as_array(), atol=1e-12)


def test_conjugation_is_isometry(rng):
    for _ in range(20):
        T = random_mob3(rng)
        X, Y = rvec(rng), rvec(rng)
        a = inner(conjugate_by(T, X), conjugate_by(T, Y))
        assert a == pytest.approx(inner(X, Y), rel=1e-9, abs=1e-9)


def test_gram_E_nonpositive(rng):
    for _ in range(50):
        L = lift_array(rng.normal(size=(4, 3)), scale=np.exp(rng.normal(size=4)))
        s = inner_array(L[:, None], L[None, :])
        assert gram_E(s) <= 1e-10 * np.abs(s).max() ** 4


@pytest.mark.parametrize("kappa", [-1.0, 1.0])
def test_antipodal_map(rng, kappa):
    T = antipodal_matrix(kappa)
    x = rpt(rng)
    y = mob_apply(T, x)
    assert y.close_to(qinv(x) * (1.0 / kappa), 1e-12)


def test_poincare_examples():
    assert np.allclose(to_poincare(0, 0, 0, 1), 0)
    t = 1.0
    assert to_poincare(0, 0, math.sinh(t), math.cosh(t))[2] == pytest.approx(TANH_HALF, abs=1e-15)
    p = np.array([0.1, -0.4, 0.3])
    assert np.allclose(to_poincare(*from_poincare(p)), p)
    with pytest.raises(ValidationError):
        to_poincare(0, 0, 1, 1)


def test_upper_half_examples():
    assert np.allclose(to_upper_half([0, 0, 0]), [0, 0, 1])
    for th in (0.3, 1.7, 4.0):
        b = np.array([math.cos(th), math.sin(th), 0.0]) * (1 - 1e-15)
        assert np.allclose(to_upper_half(b)[:2], b[:2], atol=1e-12)
    p = np.array([0.2, 0.1, -0.5])
    assert np.allclose(from_upper_half(to_upper_half(p)), p)


def test_hermitian_model(rng):
    assert np.allclose(to_hermitian(0, 0, 0, 1), np.eye(2))
    for _ in range(10):
        x = rng.normal(size=4)
        A = to_hermitian(*x)
        assert -np.linalg.det(A).real == pytest.approx(minkowski31_norm(x))
        assert np.allclose(from_hermitian(A), x)
    t = 0.7
    x = from_poincare([0.2, -0.1, 0.3])
    B = lorentz_boost(2, t)
    y = B @ x
    # the boost along x3 acts on Hermitian matrices as D A D with D = diag(e^{t/2}, e^{-t/2})
    D = np.diag([math.exp(t / 2), math.exp(-t / 2)])
    assert np.allclose(to_hermitian(*y), D @ to_hermitian(*x) @ D)
    A = to_hermitian(*x)
    assert in_h3_hermitian(A)
    assert np.allclose(hermitian_to_poincare(A), [0.2, -0.1, 0.3])
