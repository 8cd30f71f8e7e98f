import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgc.convex_geometry import (
    BodyError,
    ConvexBody,
    body_from_config,
    body_to_config,
    gauge_eval,
    gauge_jet,
    hausdorff,
    polar,
    smooth_approx,
    smoothing_sequence,
    support_eval,
    validate_body,
)

SETTINGS = settings(max_examples=40, deadline=None)


def _unit(th):
    return np.column_stack([np.cos(th), np.sin(th)])


@st.composite
def bodies(draw):
    kind = draw(st.sampled_from(["ball", "ellipse", "square", "polygon", "samples"]))
    if kind == "ball":
        return ConvexBody.ball(draw(st.floats(0.2, 5)))
    if kind == "ellipse":
        return ConvexBody.ellipse(draw(st.floats(0.2, 5)), draw(st.floats(0.2, 5)))
    if kind == "square":
        return ConvexBody.square(draw(st.floats(0.2, 5)))
    if kind == "polygon":
        return ConvexBody.regular_polygon(draw(st.integers(3, 9)), draw(st.floats(0.3, 3)),
                                          draw(st.floats(0, 2 * np.pi)))
    a, b = draw(st.floats(0.3, 3)), draw(st.floats(0.3, 3))
    th = 2 * np.pi * np.arange(360) / 360
    return ConvexBody.support_samples(support_eval(ConvexBody.ellipse(a, b), _unit(th)))


def _pts(seed, n=200):
    return np.random.default_rng(seed).normal(size=(n, 2)) * 3


# -- examples ----------------------------------------------------------------


def test_gauge_examples():
    assert gauge_eval(ConvexBody.square(1.0), [2.0, 1.0]) == pytest.approx(2.0, abs=1e-14)
    assert gauge_eval(ConvexBody.ball(1.0), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-14)


def test_gauge_kite_ray_oracle():
    verts = np.array([[2, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    K = ConvexBody.polygon(verts)
    x = np.array([1.0, 1.0])
    # ray-polygon intersection: scale s with s x on the edge (2,0)-(0,1), i.e. x1/2 + x2 = 1
    s = 1.0 / (x[0] / 2 + x[1])
    assert gauge_eval(K, x) == pytest.approx(1.0 / s, abs=1e-14)


def test_support_examples():
    assert support_eval(ConvexBody.square(1.0), [1.0, 1.0]) == pytest.approx(2.0)
    x = np.array([0.3, -1.7])
    assert support_eval(ConvexBody.ball(1.0), x) == pytest.approx(np.linalg.norm(x))
    assert support_eval(ConvexBody.interval(1.0, 2.0), -3.0) == pytest.approx(3.0)


def test_polar_examples():
    d = polar(ConvexBody.square(1.0))
    x = _pts(0)
    assert np.allclose(gauge_eval(d, x), np.abs(x).sum(axis=1), atol=1e-12)
    b = polar(ConvexBody.ball(2.0))
    assert np.allclose(gauge_eval(b, x), 2 * np.linalg.norm(x, axis=1), atol=1e-12)
    iv = polar(ConvexBody.interval(1.0, 2.0))
    # polar of [-1, 2] is [-1/2, 1]: h = max(t, -t/2)
    t = np.array([-3.0, -0.5, 0.7, 2.0])
    assert np.allclose(support_eval(iv, t), np.maximum(t, -0.5 * t))


def test_gauge_jet_ball():
    j = gauge_jet(ConvexBody.ball(1.0), np.array([0.0, 2.0]))
    assert j.value == pytest.approx(2.0)
    assert np.allclose(j.grad, [0.0, 1.0])
    assert np.allclose(j.hess, [[0.5, 0.0], [0.0, 0.0]])


def test_support_grad_ellipse_and_normalization():
    K = ConvexBody.ellipse(2.0, 1.0)
    j = gauge_jet(K, np.array([1.0, 0.0]), which="support")
    assert np.allclose(j.grad, [2.0, 0.0])
    # central-difference oracle on support_eval
    x = np.array([0.4, -1.3])
    e = 1e-6
    fd = [(support_eval(K, x + e * d) - support_eval(K, x - e * d)) / (2 * e) for d in np.eye(2)]
    g = gauge_jet(K, x, which="support").grad
    assert np.allclose(g, fd, atol=1e-8)
    assert gauge_eval(K, g) == pytest.approx(1.0, abs=1e-12)


def test_validate_examples():
    r = validate_body(ConvexBody.square(1.0))
    assert r.ok and not r.strictly_convex
    assert r.inner_radius == pytest.approx(1.0) and r.outer_radius == pytest.approx(np.sqrt(2))
    rb = validate_body(ConvexBody.ball(2.0))
    assert rb.ok and rb.strictly_convex
    assert rb.min_curvature_radius == pytest.approx(2.0)
    h = np.ones(360)
    h[50] -= 0.01
    with pytest.raises(BodyError):
        ConvexBody.support_samples(h)
    assert not validate_body(ConvexBody.support_samples(h, validate=False)).ok


def test_invalid_polygons():
    with pytest.raises(BodyError):
        ConvexBody.polygon([[1, 1], [2, 1], [2, 2], [1, 2]])  # origin outside
    with pytest.raises(BodyError):
        ConvexBody.polygon([[1, 0], [0.1, 0.1], [0, 1], [-1, 0], [0, -1]])  # reflex vertex


def test_config_round_trip():
    for K in (ConvexBody.square(0.5), ConvexBody.ellipse(1, 2), ConvexBody.interval(1, 2),
              ConvexBody.regular_polygon(5, 1.0)):
        K2 = body_from_config(body_to_config(K))
        x = _pts(1) if K.dim == 2 else np.linspace(-2, 2, 9)
        assert np.array_equal(gauge_eval(K, x), gauge_eval(K2, x))


def test_smoothing_ball_and_square():
    Kp = ConvexBody.ball(1.0)
    B = smooth_approx(Kp, 2)
    th = np.linspace(0, 2 * np.pi, 50)
    hb = support_eval(B, _unit(th))
    assert np.allclose(hb, hb[0], atol=1e-12) and hb[0] > 1
    seq, cert = smoothing_sequence(polar(ConvexBody.square()), 6)
    assert cert.ok
    assert all(np.diff(cert.hausdorff) < 0)
    assert all(r > 0 for r in cert.min_curvature_radius)


# -- properties ----------------------------------------------------------------


@SETTINGS
@given(bodies(), st.integers(0, 10_000))
def test_subadditive_homogeneous(K, seed):
    x, y = _pts(seed), _pts(seed + 1)
    gx, gy = gauge_eval(K, x), gauge_eval(K, y)
    assert np.all(gauge_eval(K, x + y) <= gx + gy + 1e-12 * (1 + gx + gy))
    for t in (0.1, 0.5, 2.0, 10.0):
        assert np.allclose(gauge_eval(K, t * x), t * gx, rtol=1e-12, atol=0)


@SETTINGS
@given(bodies(), st.integers(0, 10_000))
def test_cauchy_schwarz(K, seed):
    x, y = _pts(seed), _pts(seed + 7)
    lhs = np.sum(x * y, axis=1)
    rhs = gauge_eval(K, x) * support_eval(K, y)
    assert np.all(lhs <= rhs + 1e-10 * np.abs(rhs))


@SETTINGS
@given(bodies(), st.integers(0, 10_000))
def test_euler_and_normal(K, seed):
    x = _pts(seed, 50)
    j = gauge_jet(K, x)
    assert np.allclose(np.sum(j.grad * x, axis=1), j.value, rtol=1e-10, atol=1e-12)
    ok = j.hess_defined
    hx = np.einsum("nij,nj->ni", j.hess[ok], x[ok])
    scale = np.linalg.norm(j.hess[ok], axis=(1, 2)) * np.linalg.norm(x[ok], axis=1)
    assert np.all(np.linalg.norm(hx, axis=1) <= 1e-8 * scale + 1e-12)
    if K.kind in ("ball", "ellipse"):
        assert np.allclose(support_eval(K, j.grad), 1.0, atol=1e-8)


@SETTINGS
@given(bodies())
def test_bipolar(K):
    from nlgc.convex_geometry import diameter, resolution

    assert hausdorff(polar(polar(K)), K) <= max(2 * resolution(K) * diameter(K), 1e-10)


@SETTINGS
@given(st.sampled_from([ConvexBody.ball(1.3), ConvexBody.ellipse(1.5, 0.7)]), st.floats(0.2, 5))
def test_hessian_homogeneity(K, t):
    x = np.array([[0.3, 1.1], [-0.8, 0.2]])
    assert np.allclose(gauge_jet(K, t * x).hess, gauge_jet(K, x).hess / t, rtol=1e-10, atol=1e-14)
