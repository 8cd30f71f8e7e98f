import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from nlgc.convex_geometry import ConvexBody, gauge_eval, gauge_jet, support_eval
from nlgc.domain_obstacles import (
    Domain,
    DomainError,
    ExteriorData,
    ObstacleError,
    barrier_field,
    boundary_jet,
    characteristic_monotonicity,
    closest_points,
    domain_from_config,
    exterior_from_config,
    interior_hessian,
    rho_eval,
    ridge_scan,
    validate_exterior,
)

SETTINGS = settings(max_examples=25, deadline=None)
Z1, Z2 = ExteriorData.zero(1), ExteriorData.zero(2)


# -- obstacle values -----------------------------------------------------------


def test_rho_examples():
    assert rho_eval(Domain.interval(), ConvexBody.interval(), Z1, 0.3) == pytest.approx(0.7, abs=1e-14)
    assert rho_eval(Domain.disk(), ConvexBody.ball(), Z2, [0.5, 0.0]) == pytest.approx(0.5, abs=1e-10)
    assert rho_eval(Domain.interval(), ConvexBody.interval(1, 2), Z1, 0.0) == pytest.approx(0.5, abs=1e-14)


def test_rho_exterior_and_rho_bar():
    phi = ExteriorData.radial_quadratic(1, 0.4)
    K = ConvexBody.interval(1, 2)
    x = np.array([-1.5, 1.7])
    assert np.allclose(rho_eval(Domain.interval(), K, phi, x), phi(x))
    assert np.allclose(rho_eval(Domain.interval(), K, phi, x, side="rho_bar"), -phi(x))
    # rho_bar uses -K: gamma_{-K}(z) = gamma_K(-z), so at 0 the two ends swap roles
    assert rho_eval(Domain.interval(), K, Z1, 0.0, side="rho_bar") == pytest.approx(0.5)
    assert rho_eval(Domain.interval(), K, Z1, 0.5, side="rho_bar") == pytest.approx(min(0.5 / 2, 1.5))


def test_closest_points_examples():
    cp = closest_points(Domain.disk(), ConvexBody.ball(), Z2, [0.5, 0.0])
    assert not cp.multiple and np.allclose(cp.y, [[1.0, 0.0]], atol=1e-8)
    cc = closest_points(Domain.disk(), ConvexBody.ball(), Z2, [0.0, 0.0])
    assert cc.multiple and cc.degenerate
    cs = closest_points(Domain.square(), ConvexBody.ball(), Z2, [0.0, 0.2])
    assert not cs.multiple and np.allclose(cs.y, [[0.0, 1.0]], atol=1e-8)
    # brute force over a dense boundary sampling
    t = np.arange(40000) / 40000
    y = Domain.square().boundary(t).y
    j = np.argmin(np.linalg.norm(y - [0.0, 0.2], axis=1))
    assert np.allclose(cs.y[0], y[j], atol=1e-4)


def test_closest_points_diagonal_tie():
    cp = closest_points(Domain.square(), ConvexBody.ball(), Z2, [0.4, 0.4])
    assert cp.multiple and len(cp.t) == 2


# -- boundary and interior second-order data -------------------------------------


def test_boundary_jet_ball_disk():
    t = np.linspace(0, 1, 7, endpoint=False)
    jet = boundary_jet(Domain.disk(), ConvexBody.ball(), Z2, t)
    assert np.allclose(jet.lam, 1.0)
    assert np.allclose(jet.mu, jet.nu)
    X = jet.nu[:, :, None] * jet.nu[:, None, :]
    assert np.allclose(jet.X, X, atol=1e-12)
    assert np.allclose(jet.hess, -(np.eye(2)[None] - X), atol=1e-10)


def test_boundary_jet_zero_data_general():
    K = ConvexBody.ellipse(1.6, 0.7)
    t = np.linspace(0, 1, 9, endpoint=False)
    jet = boundary_jet(Domain.disk(), K, Z2, t)
    hn = support_eval(K, jet.nu)
    assert np.allclose(jet.lam, 1 / hn, rtol=1e-12)
    assert np.allclose(jet.mu, jet.nu / hn[:, None], rtol=1e-12)
    dg = gauge_jet(K, jet.nu, which="support").grad
    assert np.allclose(jet.X, dg[:, :, None] * jet.nu[:, None, :] / hn[:, None, None], atol=1e-12)


def test_boundary_jet_root_oracle():
    K = ConvexBody.ellipse(1.3, 0.8)
    phi = ExteriorData.radial_quadratic(2, 0.2)
    jet = boundary_jet(Domain.disk(), K, phi, 0.0)
    g = phi.grad_flat(np.array([[1.0, 0.0]]))[0]
    nu = np.array([-1.0, 0.0])
    lam = brentq(lambda l: support_eval(K, g + l * nu) - 1, 0, 10, xtol=1e-15, rtol=1e-15)
    assert jet.lam[0] == pytest.approx(lam, abs=1e-12)
    assert np.allclose(jet.mu[0], g + lam * nu, atol=1e-12)


def test_boundary_jet_rejects_steep_data():
    with pytest.raises(ObstacleError):
        boundary_jet(Domain.interval(), ConvexBody.interval(), ExteriorData.affine([2.0]), 1.0)


def test_interior_hessian_disk():
    ih = interior_hessian(Domain.disk(), ConvexBody.ball(), Z2, [0.5, 0.0])
    ev = np.linalg.eigvalsh(ih.hess[0])
    assert ev.min() == pytest.approx(-2.0, abs=1e-8) and ev.max() == pytest.approx(0.0, abs=1e-8)
    for r in (0.5, 0.1, 0.01):
        assert interior_hessian(Domain.disk(), ConvexBody.ball(), Z2, [0.0, r]).detQ[0] == pytest.approx(r, abs=1e-8)
    with pytest.raises(ObstacleError):
        interior_hessian(Domain.disk(), ConvexBody.ball(), Z2, [0.0, 0.0])


def test_interior_hessian_vs_differences():
    dom, K = Domain.disk(), ConvexBody.ellipse(1.4, 0.8)
    e = 1e-3
    for x in ([0.5, 0.2], [-0.3, 0.55], [0.1, -0.7]):
        x = np.array(x)
        H = interior_hessian(dom, K, Z2, x).hess[0]
        assert np.abs(H - H.T).max() <= 1e-8
        F = np.empty((2, 2))
        E = np.eye(2) * e
        r = lambda p: float(rho_eval(dom, K, Z2, p))  # noqa: E731
        for i in range(2):
            for j in range(2):
                F[i, j] = (r(x + E[i] + E[j]) - r(x + E[i] - E[j]) - r(x - E[i] + E[j]) + r(x - E[i] - E[j])) / (4 * e * e)
        assert np.abs(H - F).max() <= 1e-4 * max(np.abs(H).max(), 1.0)


# -- ridge ------------------------------------------------------------------------


def test_ridge_disk_center():
    h = 1 / 32
    g = np.arange(-1 + h, 1, h)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    rs = ridge_scan(Domain.disk(), ConvexBody.ball(), Z2, X)
    bad = X[rs.code > 0]
    assert len(bad) >= 1
    assert np.linalg.norm(bad, axis=1).max() <= np.sqrt(2) * h


def test_ridge_square_diagonals():
    h = 1 / 16
    g = np.arange(-1 + h / 2, 1, h)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    rs = ridge_scan(Domain.square(), ConvexBody.ball(), Z2, X)
    bad = X[rs.code > 0]
    d = np.minimum(np.abs(bad[:, 0] - bad[:, 1]), np.abs(bad[:, 0] + bad[:, 1])) / np.sqrt(2)
    assert len(bad) > 0 and d.max() <= h
    on = np.isclose(np.abs(X[:, 0]), np.abs(X[:, 1]))
    assert (rs.code[on] > 0).mean() > 0.9


@pytest.mark.parametrize("K", [ConvexBody.interval(), ConvexBody.interval(1, 2), ConvexBody.interval(0.5, 3)])
def test_ridge_1d_crossing(K):
    x = np.linspace(-0.999, 0.999, 401)[:, None]
    rs = ridge_scan(Domain.interval(), K, Z1, x)
    # crossing of gamma(x + 1) and gamma(x - 1) by bisection
    f = lambda s: gauge_eval(K, s + 1.0) - gauge_eval(K, s - 1.0)  # noqa: E731
    xr = brentq(f, -1, 1, xtol=1e-14)
    assert len(rs.points) == 1 and rs.points[0] == pytest.approx(xr, abs=1e-9)


# -- characteristics and barriers -----------------------------------------------


def test_characteristic_disk():
    rep = characteristic_monotonicity(Domain.disk(), ConvexBody.ball(), Z2, 0.0,
                                      [[0.0, 1.0], [1.0, 0.0]], n_samples=50)
    t = rep.t
    assert np.allclose(rep.q_formula[:, 0], -1 / (1 - t), rtol=1e-9)
    assert np.allclose(rep.q_formula[:, 1], 0.0, atol=1e-12)
    assert rep.monotone()


def test_characteristic_ellipse_riccati():
    rep = characteristic_monotonicity(Domain.disk(), ConvexBody.ellipse(1.5, 0.7), Z2, 0.1,
                                      [[0.0, 1.0], [0.6, 0.8]], n_samples=60)
    assert rep.max_rel_dev <= 1e-5 and rep.monotone()


def test_barrier_1d():
    x = np.linspace(-0.99, 0.99, 41)
    bf = barrier_field(Domain.interval(), ConvexBody.interval(), Z1, 1.0, 0.3, x)
    assert np.allclose(bf.values, 1 - x, atol=1e-12)
    assert bf.cert_dominates <= 1e-12


def test_barrier_disk_ball():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, (400, 2))
    x = x[np.linalg.norm(x, axis=1) < 1]
    bf = barrier_field(Domain.disk(), ConvexBody.ball(), Z2, 0.0, 0.5, x)
    ref = np.linalg.norm(x - [1.5, 0.0], axis=1) - 0.5
    assert np.allclose(bf.values, ref, atol=1e-4)
    assert bf.cert_dominates <= 1e-10


def test_barrier_rejects_square_corner():
    with pytest.raises(ObstacleError):
        barrier_field(Domain.square(), ConvexBody.ball(), Z2, 0.0, 0.5, np.zeros((1, 2)))


# -- exterior data ----------------------------------------------------------------


def test_validate_exterior_examples():
    dom, K = Domain.interval(), ConvexBody.interval()
    assert validate_exterior(Z1, K, dom).ok
    r = validate_exterior(ExteriorData.radial_quadratic(1, 0.4), K, dom)
    assert r.ok and r.lipschitz_max < 1 and r.convex_min_eig >= 0
    xs = np.linspace(-1, 1, 201)[:, None]
    assert np.abs(ExteriorData.radial_quadratic(1, 0.4).grad_flat(xs)).max() == pytest.approx(0.8)
    bad = validate_exterior(ExteriorData.affine([2.0]), K, dom)
    assert not bad.ok and bad.lipschitz_max == pytest.approx(2.0)


def test_config_round_trips():
    for d in (Domain.interval(-1, 2), Domain.disk(0.5, (0.1, 0.2)), Domain.square(2.0)):
        assert np.array_equal(domain_from_config(d.to_config()).data, d.data)
    phi = ExteriorData.radial_quadratic(2, 0.3, r_quad=1.1, r_flat=1.8)
    assert exterior_from_config(phi.to_config(), 2).to_config() == phi.to_config()
    with pytest.raises(DomainError):
        ExteriorData("cubic", 1)


# -- properties -------------------------------------------------------------------

CASES_2D = [
    (Domain.disk(), ConvexBody.ellipse(1.4, 0.8), ExteriorData.radial_quadratic(2, 0.2)),
    (Domain.ellipse(1.2, 0.8), ConvexBody.ball(), Z2),
    (Domain.square(), ConvexBody.square(), ExteriorData.affine([0.2, -0.1])),
]


@SETTINGS
@given(st.integers(0, len(CASES_2D) - 1), st.integers(0, 10_000))
def test_gauge_lipschitz_and_ordering(i, seed):
    dom, K, phi = CASES_2D[i]
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.3, 1.3, (60, 2))
    z = rng.uniform(-1.3, 1.3, (60, 2))
    rx = rho_eval(dom, K, phi, x)
    rz = rho_eval(dom, K, phi, z)
    assert np.all(rx - rz <= gauge_eval(K, x - z) + 1e-9)
    assert np.all(-rho_eval(dom, K, phi, x, side="rho_bar") <= rx + 1e-12)


@SETTINGS
@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(-0.99, 0.99))
def test_rho_1d_closed_form(a, b, x):
    K = ConvexBody.interval(a, b)
    ref = min(gauge_eval(K, x + 1.0), gauge_eval(K, x - 1.0))
    assert rho_eval(Domain.interval(), K, Z1, x) == pytest.approx(ref, abs=1e-14)
