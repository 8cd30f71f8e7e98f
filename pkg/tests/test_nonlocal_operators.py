import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nlgc.nonlocal_operators import (
    ExteriorRule,
    GridField,
    KernelError,
    KernelSpec,
    apply_operator,
    build_stencil,
    ellipticity_check,
    local_limit_probe,
    second_difference,
)

SETTINGS = settings(max_examples=30, deadline=None)
KINDS = [
    KernelSpec(s=0.5),
    KernelSpec(s=0.3, lam=0.5, Lam=2.0, kind="pucci_plus"),
    KernelSpec(s=0.8, lam=0.5, Lam=2.0, kind="pucci_minus"),
    KernelSpec(s=0.6, lam=0.5, Lam=1.5, kind="custom_L0", theta=lambda y: 1 + 0.5 * np.cos(3 * y[:, 0])),
]


def _grid1(vals, h, rule=None):
    return GridField(np.array([-0.5 * h * (len(vals) - 1)]), h, np.asarray(vals, float), rule or ExteriorRule.zero(1))


def _grid2(vals, h, rule=None):
    n = vals.shape[0]
    o = -0.5 * h * (n - 1)
    return GridField(np.array([o, o]), h, vals, rule or ExteriorRule.zero(2))


# -- second differences ----------------------------------------------------------


def test_second_difference_quadratic_and_affine():
    h = 1 / 64
    x = np.arange(-64, 65) * h
    sq = ExteriorRule.function(lambda p: p[:, 0] ** 2, 1)
    u = _grid1(x**2, h, sq)
    for xi, y in [(0.25, 0.125), (-0.5, 0.75), (0.0, 3.0)]:
        d, interp = second_difference(u, xi, y)
        assert d == pytest.approx(2 * y * y, abs=1e-12) and not interp
    aff = ExteriorRule.function(lambda p: 3 * p[:, 0] - 1, 1)
    ua = _grid1(3 * x - 1, h, aff)
    assert second_difference(ua, 0.5, 2.5)[0] == pytest.approx(0.0, abs=1e-13)


def test_second_difference_bump_by_hand():
    h = 0.25
    vals = np.array([0, 0, 0, 1, 2, 1, 0, 0, 0], float)
    u = _grid1(vals, h)
    # at the center, y one node: 1 + 1 - 2*2
    assert second_difference(u, 0.0, h)[0] == -2.0
    assert second_difference(u, 0.0, 2 * h)[0] == -4.0
    d, interp = second_difference(u, 0.0, 0.5 * h)
    assert interp and d == pytest.approx(1.5 + 1.5 - 4)


# -- operator values ---------------------------------------------------------------


@pytest.mark.parametrize("ker", KINDS)
def test_zero_and_affine(ker):
    h = 1 / 32
    x = np.arange(-32, 33) * h
    r0 = apply_operator(ker, _grid1(np.zeros_like(x), h))
    assert np.all(r0.value == 0.0) and np.all(r0.err == 0.0)
    ua = _grid1(0.7 * x + 0.2, h, ExteriorRule("affine" and (lambda p: 0.7 * p[:, 0] + 0.2), 1,
                                                       "affine", const=0.2, slope=(0.7,)))
    ra = apply_operator(ker, ua)
    assert np.abs(ra.value).max() <= 1e-12 and np.all(ra.err == 0.0)


def test_bump_against_quadrature():
    s, h = 0.5, 1 / 512
    f = lambda z: np.where(np.abs(z) < 1, (1 - z * z) ** 3, 0.0)  # noqa: E731
    x = np.arange(-512, 513) * h
    rule = ExteriorRule.function(lambda p: f(p[:, 0]), 1, bounds=(0.0, 0.0))
    u = _grid1(f(x), h, rule)
    j = 512 + 128
    x0 = x[j]
    val = apply_operator(KernelSpec(s=s), u, [[j]]).value[0]

    def g(y):
        return (f(x0 + y) + f(x0 - y) - 2 * f(x0)) * y ** (-1 - 2 * s)

    brk = sorted({1 - x0, 1 + x0})
    parts = [quad(g, a, b, limit=500, epsabs=1e-13)[0] for a, b in zip([0] + brk, brk + [np.inf])]
    ref = 2 * (1 - s) * sum(parts)
    assert abs(val - ref) <= 1e-3 * abs(ref)


def test_pucci_reduces_to_linear_when_second_differences_are_positive():
    h = 1 / 32
    x = np.arange(-32, 33) * h
    f = lambda z: np.minimum(z * z, 1.0)  # noqa: E731
    rule = ExteriorRule.function(lambda p: f(p[:, 0]), 1, bounds=(1.0, 1.0))
    u = _grid1(f(x), h, rule)
    node = [[32]]
    L1 = apply_operator(KernelSpec(s=0.4), u, node).value[0]
    Mp = apply_operator(KernelSpec(s=0.4, lam=0.5, Lam=2.0, kind="pucci_plus"), u, node).value[0]
    Mm = apply_operator(KernelSpec(s=0.4, lam=0.5, Lam=2.0, kind="pucci_minus"), u, node).value[0]
    assert L1 > 0
    assert Mp == pytest.approx(2.0 * L1, rel=1e-13) and Mm == pytest.approx(0.5 * L1, rel=1e-13)


def test_tail_bound_closed_form():
    errs = []
    for s in (0.3, 0.5, 0.7, 0.9):
        h = 1 / 16
        u = _grid1(np.zeros(17), h, ExteriorRule.function(lambda p: np.zeros(len(p)), 1, bounds=(-1.0, 1.0)))
        r = apply_operator(KernelSpec(s=s, R_inf=2.0), u, [[8]])
        ref = (1 - s) * 2 * 2 ** (-2 * s) / s
        assert r.err[0] == pytest.approx(ref, rel=1e-12)
        errs.append(r.err[0])
    assert np.all(np.diff(errs) < 0)


def test_r_inf_too_small():
    with pytest.raises(KernelError):
        build_stencil(KernelSpec(s=0.5, R_inf=0.5), 1, 1 / 16, 2.0)


def test_kernel_validation():
    with pytest.raises(KernelError, match="lambda"):
        KernelSpec(s=0.5, lam=2.0, Lam=1.0)
    with pytest.raises(KernelError):
        KernelSpec(s=1.0)
    with pytest.raises(KernelError):
        KernelSpec(s=0.5, s0=0.6)


def test_local_limit_gaussian_and_affine():
    f = lambda p: np.exp(-np.sum(p * p, axis=1))  # noqa: E731
    rows = local_limit_probe(f, lambda x: -2.0, [0.0], s_values=(0.6, 0.9, 0.99), bounds=(0.0, 1.0),
                             beyond=lambda r: (0.0, float(np.exp(-r * r))))
    devs = [r.rel_dev for r in rows]
    assert devs[-1] <= 0.05 and np.all(np.diff(devs) < 0)


# -- ellipticity -------------------------------------------------------------------


def _smooth2(seed, n=17):
    rng = np.random.default_rng(seed)
    h = 1 / (n - 1)
    g = np.linspace(-0.5, 0.5, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    a = rng.normal(size=4)
    return _grid2(a[0] * np.sin(3 * X + a[1]) * np.cos(2 * Y) + a[2] * X * Y + a[3], h)


@pytest.mark.parametrize("ker", [KINDS[0], KINDS[3]])
def test_ellipticity(ker):
    u = _grid1(np.sin(np.linspace(0, 3, 33)), 1 / 32)
    same = ellipticity_check(ker, u, u)
    assert same.ok and abs(same.lower_margin) <= 1e-12 and abs(same.upper_margin) <= 1e-12
    v = u.with_values(u.values * 0.3 - np.cos(np.linspace(0, 5, 33)))
    assert ellipticity_check(ker, u, v).ok


def test_ellipticity_2d_custom():
    ker = KernelSpec(s=0.5, lam=0.5, Lam=2.0, kind="custom_L0",
                     theta=lambda y: 1.25 + 0.75 * np.tanh(y[:, 0] - y[:, 1]))
    assert ellipticity_check(ker, _smooth2(1), _smooth2(2)).ok


def test_constant_difference():
    h = 1 / 32
    vals = np.sin(np.linspace(0, 4, 33))
    u = _grid1(vals, h, ExteriorRule.function(lambda p: np.full(len(p), 0.25), 1, bounds=(0.25, 0.25)))
    v = _grid1(vals - 0.25, h)
    w = u - v
    for sign in (+1, -1):
        assert np.abs(apply_operator(KINDS[1].pucci(sign), w).value).max() <= 1e-11
    assert np.allclose(apply_operator(KINDS[0], u).value, apply_operator(KINDS[0], v).value, atol=1e-11)


# -- properties --------------------------------------------------------------------


@SETTINGS
@given(st.integers(0, 3), st.integers(0, 10_000), st.floats(1e-3, 1.0))
def test_monotone_in_off_node_values(k, seed, bump):
    ker = KINDS[k]
    rng = np.random.default_rng(seed)
    n = 24
    vals = rng.normal(size=n)
    u = _grid1(vals, 1 / n)
    st_ = build_stencil(ker, 1, u.h, u.h * (n - 1))
    base = apply_operator(ker, u, None, st_).value
    j = int(rng.integers(n))
    v = vals.copy()
    v[j] += bump
    d = apply_operator(ker, u.with_values(v), None, st_).value - base
    d[j] = 0.0
    assert d.min() >= -1e-12 * max(1.0, np.abs(base).max())


@SETTINGS
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_pucci_subadditive_homogeneous(seed, t):
    rng = np.random.default_rng(seed)
    ker = KINDS[1]
    n = 24
    u = _grid1(rng.normal(size=n), 1 / n)
    v = _grid1(rng.normal(size=n), 1 / n)
    st_ = build_stencil(ker, 1, u.h, u.h * (n - 1))
    Mu = apply_operator(ker, u, None, st_).value
    Mv = apply_operator(ker, v, None, st_).value
    Muv = apply_operator(ker, u.with_values(u.values + v.values), None, st_).value
    scale = np.abs(Mu).max() + np.abs(Mv).max()
    assert np.all(Muv <= Mu + Mv + 1e-12 * scale)
    Mt = apply_operator(ker, u.with_values(t * u.values), None, st_).value
    assert np.allclose(Mt, t * Mu, rtol=1e-12, atol=1e-12 * t * scale)


@SETTINGS
@given(st.integers(0, 10_000), st.integers(-4, 4), st.integers(-4, 4))
def test_translation_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    n, pad = 20, 5
    core = rng.normal(size=(n - 2 * pad, n - 2 * pad))
    vals = np.zeros((n, n))
    vals[pad:-pad, pad:-pad] = core
    sh = np.roll(np.roll(vals, a, 0), b, 1)
    ker = KINDS[0]
    h = 1 / n
    u, us = _grid2(vals, h), _grid2(sh, h)
    st_ = build_stencil(ker, 2, h, h * (n - 1))
    idx = np.array([[pad + 2, pad + 3], [n // 2, n // 2], [pad, n - pad - 1]])
    r = apply_operator(ker, u, idx, st_).value
    rs = apply_operator(ker, us, idx + [a, b], st_).value
    assert np.allclose(r, rs, rtol=1e-12, atol=1e-12)
