import math

import numpy as np
import pytest

from isonet.errors import SingularMatrixError, DomainError
from isonet.quat import (INFINITY, INVERSION, ONE, ZERO, I, J, K, Quaternion, QuatMat2, in_mob3,
                         mob3_residuals, mob_apply, qinv, qmat_inv, qmul, qmul_array, random_mob3,
                         study_det)
from isonet.net import hat_cross_ratio
from isonet.mink import conjugate_by, lift, project

from conftest import random_concircular_quad


def rq(rng):
    return Quaternion.from_array(rng.normal(size=4))


def test_basis_products():
    assert qmul(I, J).close_to(K)
    assert qmul(J, K).close_to(I)
    assert qmul(K, I).close_to(J)
    assert qmul(I, I).close_to(-ONE)


def test_product_expansion():
    assert ((ONE + I) * (ONE + J)).close_to(Quaternion(1, 1, 1, 1))


def test_trace_identity_cyclic(rng):
    for _ in range(200):
        a, b, c, d = (rq(rng) for _ in range(4))
        assert math.isclose((a * b * c * d).w, (b * c * d * a).w, rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose((a * b).w, (b * a).w, rel_tol=1e-12, abs_tol=1e-12)


def test_qmul_array_matches_scalar(rng):
    p = rng.normal(size=(10, 4))
    q = rng.normal(size=(10, 4))
    out = qmul_array(p, q)
    for k in range(10):
        ref = Quaternion.from_array(p[k]) * Quaternion.from_array(q[k])
        assert np.allclose(out[k], ref.as_array(), atol=1e-14)


@pytest.mark.parametrize("q, expected", [
    (I, -I), (2 * J, -0.5 * J), (I + J, -0.5 * (I + J)),
])
def test_qinv_examples(q, expected):
    assert qinv(q).close_to(expected)


def test_qinv_zero():
    with pytest.raises(DomainError):
        qinv(ZERO)


def test_study_det_examples():
    assert study_det(QuatMat2.identity()) == pytest.approx(1.0)
    assert study_det(QuatMat2(I, ZERO, ZERO, ONE)) == pytest.approx(1.0)
    assert study_det(QuatMat2(ONE, ONE, ONE, ONE)) == pytest.approx(0.0, abs=1e-15)


def test_qmat_inv_examples(rng):
    assert qmat_inv(QuatMat2.identity()).close_to(QuatMat2.identity())
    D = QuatMat2(I, ZERO, ZERO, -I)
    assert qmat_inv(D).close_to(QuatMat2(-I, ZERO, ZERO, I))
    for _ in range(20):
        T = random_mob3(rng)
        Ti = qmat_inv(T)
        assert (T @ Ti).close_to(QuatMat2.identity(), 1e-12)
        assert (Ti @ T).close_to(QuatMat2.identity(), 1e-12)


def test_qmat_inv_singular():
    with pytest.raises(SingularMatrixError):
        qmat_inv(QuatMat2(ONE, ONE, ONE, ONE))


def test_qmat_inv_general_matrix(rng):
    # the closed form inverts any quaternionic matrix with nonzero Study determinant
    for _ in range(20):
        T = QuatMat2(rq(rng), rq(rng), rq(rng), rq(rng))
        assert (T @ qmat_inv(T)).close_to(QuatMat2.identity(), 1e-10)


def test_in_mob3_examples():
    assert in_mob3(QuatMat2.identity())
    assert in_mob3(INVERSION)
    r = mob3_residuals(QuatMat2(ONE, ONE, ZERO, ONE))
    assert r[0] == pytest.approx(2.0)
    assert not in_mob3(QuatMat2(ONE, ONE, ZERO, ONE))


def test_mob_apply_examples(rng):
    x = Quaternion.imag(rng.normal(size=3))
    assert mob_apply(QuatMat2.identity(), x).close_to(x)
    assert mob_apply(INVERSION, I).close_to(-I)
    assert mob_apply(INVERSION, ZERO) is INFINITY


def test_mob_apply_agrees_with_conjugation(rng):
    for _ in range(10):
        T = random_mob3(rng)
        x = Quaternion.imag(rng.normal(size=3))
        y = mob_apply(T, x)
        Y = conjugate_by(T, lift(x))
        assert project(Y)[0].close_to(y, 1e-9)
        assert y.is_imaginary(1e-10)


def test_mob_apply_preserves_hat_cross_ratio(rng):
    for _ in range(20):
        T = random_mob3(rng)
        pts = [Quaternion.imag(rng.normal(size=3)) for _ in range(4)]
        before = hat_cross_ratio(*pts)
        after = hat_cross_ratio(*[mob_apply(T, p) for p in pts])
        assert abs(before - after) <= 1e-8 * max(1.0, abs(before))
    for _ in range(10):
        pts = [Quaternion.imag(p) for p in random_concircular_quad(rng)]
        T = random_mob3(rng)
        after = hat_cross_ratio(*[mob_apply(T, p) for p in pts])
        assert abs(after.imag) <= 1e-8 * max(1.0, abs(after))


def test_group_closure_and_multiplicativity(rng):
    for _ in range(50):
        A, B = random_mob3(rng), random_mob3(rng)
        assert in_mob3(A @ B, 1e-10)
        lhs = study_det(A @ B)
        rhs = study_det(A) * study_det(B)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
