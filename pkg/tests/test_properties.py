"""Randomised properties: each test draws its own data from a hypothesis-chosen seed."""
import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from isonet import generators as gen
from isonet.conserved import six_facts, verify_cq
from isonet.errors import IsonetError
from isonet.mink import MinkVec, conjugate_by, inner, inner_array, lift_array
from isonet.net import (QuadNet, concircularity_residuals, factorize, gram_E, hat_cross_ratio,
                        moutard_lift, quad_cross_ratios)
from isonet.netfile import NetFile, dumps
from isonet.quat import (INFINITY, Quaternion, in_mob3, mob_apply, qmat_inv, random_mob3,
                         study_det)
from isonet.transforms import calapso, calapso_factor, christoffel, darboux

from conftest import random_concircular_quad

seeds = st.integers(0, 2 ** 32 - 1)
PROP = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _mobius_image_net(rng, M=5, N=5):
    """Random Moebius image of a discrete holomorphic grid: isothermic with known cross ratios."""
    c = complex(*rng.normal(size=2)) * 0.3
    assume(abs(c) > 0.05)
    h = gen.dhf_linear(c, M, N, m0=-(M // 2), n0=-(N // 2))
    T = random_mob3(rng, scale=0.5)
    W = []
    for row in h.as_planar_net().vertices:
        out = []
        for x in row:
            y = mob_apply(T, Quaternion.imag(x))
            assume(y is not INFINITY and abs(y) < 1e3)
            out.append(y.vec)
        W.append(out)
    return QuadNet(np.array(W))


# --------------------------------------------------------------- algebra


@PROP
@given(seeds)
def test_study_det_multiplicative(seed):
    rng = np.random.default_rng(seed)
    A, B = random_mob3(rng), random_mob3(rng)
    assert study_det(A @ B) == pytest.approx(study_det(A) * study_det(B), rel=1e-10)
    assert in_mob3(A @ B, 1e-10)
    assert (A @ qmat_inv(A) - A.identity()).norm() < 1e-12 * max(1.0, A.norm() * qmat_inv(A).norm())


@PROP
@given(seeds)
def test_mobius_preserves_hat_cross_ratio(seed):
    rng = np.random.default_rng(seed)
    pts = [Quaternion.imag(p) for p in random_concircular_quad(rng)]
    T = random_mob3(rng)
    img = [mob_apply(T, p) for p in pts]
    assume(all(y is not INFINITY for y in img))
    a, b = hat_cross_ratio(*pts), hat_cross_ratio(*img)
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@PROP
@given(seeds)
def test_conjugation_preserves_inner(seed):
    rng = np.random.default_rng(seed)
    T = random_mob3(rng)
    X, Y = (MinkVec.from_array(rng.normal(size=5)) for _ in range(2))
    a = inner(conjugate_by(T, X), conjugate_by(T, Y))
    scale = max(1.0, np.linalg.norm(X.as_array()) * np.linalg.norm(Y.as_array())) * T.norm() ** 2
    assert abs(a - inner(X, Y)) < 1e-10 * scale
    L = lift_array(rng.normal(size=3))
    Lc = conjugate_by(T, MinkVec.from_array(L))
    assert abs(inner(Lc, Lc)) < 1e-10 * max(1.0, np.abs(Lc.as_array()).max() ** 2)


@PROP
@given(seeds, st.booleans())
def test_gram_E_nonpositive(seed, concircular):
    rng = np.random.default_rng(seed)
    pts = np.array(random_concircular_quad(rng)) if concircular else rng.normal(size=(4, 3))
    L = lift_array(pts, scale=np.exp(rng.normal(size=4)))
    s = inner_array(L[:, None], L[None, :])
    assert gram_E(s) <= 1e-10 * np.abs(s).max() ** 4


@PROP
@given(seeds, st.floats(0.1, 10.0))
def test_sphere_membership_is_projective(seed, c):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=5)
    x = rng.normal(size=3)
    F = lift_array(x)
    assert math.copysign(1, inner_array(F, S * c)) == math.copysign(1, inner_array(F, S)) or \
        abs(inner_array(F, S)) < 1e-14
    assert inner_array(F, S * c) == pytest.approx(c * inner_array(F, S), rel=1e-12, abs=1e-14)


# ----------------------------------------------------------------- nets


@PROP
@given(seeds)
def test_christoffel_keeps_cross_ratios(seed):
    rng = np.random.default_rng(seed)
    try:
        net = factorize(_mobius_image_net(rng))
    except IsonetError:
        assume(False)
    q = quad_cross_ratios(net)
    qs = quad_cross_ratios(christoffel(net))
    assert np.abs(q - qs).max() < 1e-9 * max(1.0, np.abs(q).max())


@PROP
@given(seeds)
def test_moutard_lift_relations(seed):
    rng = np.random.default_rng(seed)
    try:
        net = factorize(_mobius_image_net(rng))
        F = moutard_lift(net).F
    except IsonetError:
        assume(False)
    p, q, r, s = F[:-1, :-1], F[1:, :-1], F[1:, 1:], F[:-1, 1:]
    scale = np.abs(F).max() ** 2
    assert np.abs(inner_array(r + p, q - s)).max() < 1e-8 * scale
    # <F_p, F_q> / <F_p, F_s> = a_pq / a_ps on every quad
    a_h, a_v = net.a_h[:, :-1], net.a_v[:-1, :]
    lhs = inner_array(p, q) * a_v
    rhs = inner_array(p, s) * a_h
    assert np.abs(lhs - rhs).max() < 1e-8 * scale * max(1.0, np.abs(a_h).max(), np.abs(a_v).max())


# ------------------------------------------------------------ transforms


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seeds, st.floats(-0.9, 0.9))
def test_calapso_keeps_isothermic(seed, mu):
    rng = np.random.default_rng(seed)
    try:
        net = factorize(_mobius_image_net(rng))
    except IsonetError:
        assume(False)
    # frames blow up near a pole 1 - mu a = 0; stay well clear of it
    assume(np.all(np.abs(1 - mu * net.a_h) > 0.25) and np.all(np.abs(1 - mu * net.a_v) > 0.25))
    res = calapso(net, mu)
    expect = np.vectorize(lambda a: calapso_factor(a, mu))(net.a_h)
    assert np.abs(res.net.a_h - expect).max() < 1e-9 * max(1.0, np.abs(expect).max())
    # cross ratios come from vertex differences, so rounding is amplified by (size / edge)^2;
    # the transformed net can contract strongly towards one point
    V = res.net.vertices
    edge = min(np.linalg.norm(np.diff(V, axis=0), axis=-1).min(), np.linalg.norm(np.diff(V, axis=1), axis=-1).min())
    amplification = (max(1.0, np.abs(V).max()) / edge) ** 2
    assert concircularity_residuals(res.net).max() < 1e-12 * max(1e4, amplification)
    assert all(in_mob3(T, 1e-8) for T in res.frame.T.ravel())


@PROP
@given(seeds, st.floats(0.05, 0.8))
def test_darboux_keeps_cross_ratios(seed, mu):
    rng = np.random.default_rng(seed)
    net = gen.discrete_enneper(5, 5, 0.2)
    try:
        res = darboux(net, mu, net.vertices[0, 0] + rng.normal(size=3) * 0.5)
    except IsonetError:
        assume(False)
    assume(np.abs(res.net.vertices).max() < 1e3)
    assert res.riccati_residual < 1e-9
    q, qd = quad_cross_ratios(net), quad_cross_ratios(res.net)
    assert np.abs(q - qd).max() < 1e-7


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_darboux_noise_response_is_linear(seed):
    rng = np.random.default_rng(seed)
    net = gen.discrete_enneper(5, 5, 0.2)
    E = rng.normal(size=net.vertices.shape)
    res = []
    for eps in (1e-7, 1e-6):
        noisy = QuadNet(net.vertices + eps * E, a_h=net.a_h, a_v=net.a_v)
        fstar = christoffel(noisy, tol=math.inf)
        res.append(darboux(noisy, 0.3, net.vertices[0, 0] + [0.2, 0.1, 0.3], fstar=fstar,
                           tol=math.inf).riccati_residual)
    assert 3.0 < res[1] / res[0] < 30.0


# ------------------------------------------------------------ generators


@PROP
@given(st.floats(0.05, 0.5), st.floats(-math.pi, math.pi))
def test_minimal_net_closes(r, phi):
    net = gen.minimal_net(gen.dhf_linear(r * complex(math.cos(phi), math.sin(phi)), 5, 5, -2, -2))
    assert net.meta["closure_residual"] < 1e-12


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([-1.0, 0.0, 1.0]), st.floats(0.2, 1.2), st.floats(-0.6, 0.6))
def test_revolution_first_integral(kappa, H, eta0):
    r0, h0 = (0.4, -0.3) if kappa < 0 else (1.0, 0.0)
    try:
        seed = gen.revolution_seed_for(r0, h0, eta0, kappa, H, N=10)
        rv = gen.revolution_net(seed, 12)
    except IsonetError:
        assume(False)
    assert rv.H_kappa_drift < 1e-10
    assert np.abs(rv.residuals).max() < 1e-10
    assert verify_cq(rv.net, rv.cq).max_residual < 1e-9
    facts = six_facts(rv.net, rv.cq)
    for k, v in facts.items():
        if k != "Z_norm2":
            assert v < 1e-8, k


# ------------------------------------------------------------------ files


@PROP
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=6, max_size=6))
def test_netfile_text_round_trip(xs):
    V = np.array(xs * 2, dtype=float).reshape(2, 2, 3)
    nf = NetFile(QuadNet(V))
    text = dumps(nf.to_dict())
    back = NetFile.from_dict(json.loads(text))
    assert np.array_equal(back.net.vertices, V)
    assert dumps(back.to_dict()) == text
