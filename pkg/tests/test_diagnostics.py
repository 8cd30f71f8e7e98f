import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgc.constraint_solver import SolveConfig, certify_solution, solve
from nlgc.convex_geometry import ConvexBody
from nlgc.diagnostics import (
    Instance,
    complementarity_check,
    decompose,
    default_battery,
    euclidean_battery,
    holder_scan,
    lemma_suite,
)
from nlgc.domain_obstacles import Domain, ExteriorData, rho_eval
from nlgc.nonlocal_operators import ExteriorRule, GridField, KernelSpec


def _cfg(h=1 / 64, coef=0.4):
    return SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.radial_quadratic(1, coef),
                       KernelSpec(s=0.7), h)


@pytest.fixture(scope="module")
def solved():
    return solve(_cfg(), holder_tau=None)


# -- decomposition -------------------------------------------------------------------


def test_decompose_zero_solution():
    r = solve(SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.zero(1), KernelSpec(s=0.5), 1 / 32),
              holder_tau=None)
    dec = decompose(r)
    assert dec.elastic.all() and not dec.plus.any() and not dec.minus.any()
    assert len(dec.free_boundary) == 0


def test_decompose_huge_tolerance(solved):
    dec = decompose(solved, tol_contact=10.0)
    assert dec.plus.all() and dec.minus.all() and dec.degenerate and not dec.elastic.any()


def test_decompose_band(solved):
    dec = decompose(solved)
    p = np.flatnonzero(dec.plus)
    left = p[p < len(dec.plus) // 2]
    assert len(left) > 0 and left[0] == 0 and np.all(np.diff(left) == 1)
    assert not dec.minus.any()
    assert set(dec.free_boundary) == {left[-1] + 1, p[p >= len(dec.plus) // 2][0] - 1}


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_decompose_idempotent_and_monotone(solved, t1, t2):
    a, b = sorted((t1, t2))
    da, db = decompose(solved, tol_contact=a), decompose(solved, tol_contact=b)
    assert np.all(da.plus <= db.plus) and np.all(da.minus <= db.minus)
    again = decompose(solved, tol_contact=a)
    for f in ("plus", "minus", "elastic", "free_boundary"):
        assert np.array_equal(getattr(da, f), getattr(again, f))
    # partition
    assert np.all((da.plus | da.minus) ^ da.elastic)


# -- Hoelder quotients -----------------------------------------------------------------


def test_holder_quadratic_exact():
    h = 1 / 32
    g = np.arange(-32, 33) * h
    X, Y = np.meshgrid(g, g, indexing="ij")
    u = GridField(np.array([-1.0, -1.0]), h, 1.5 * X**2 + 0.5 * Y**2, ExteriorRule.zero(2))
    tab = holder_scan(u, Domain.disk(), windows=(0.25, 0.5), alphas=(1.0,))
    # D u = (3x, y); the largest Hessian eigenvalue is 3
    assert np.allclose(tab.seminorm[:, 0], 3.0, atol=1e-6)


def _rho_square_patch(n, half=0.4):
    h = 1 / n
    m = int(round(half * n))
    g = np.arange(-m, m + 1) * h
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1)
    r = rho_eval(Domain.disk(), ConvexBody.square(), ExteriorData.zero(2), X.reshape(-1, 2)).reshape(X.shape[:2])
    return GridField(np.array([-m * h, -m * h]), h, r, ExteriorRule.zero(2))


def test_holder_negative_control_square_gauge():
    win = (lambda p: np.linalg.norm(p, axis=1) < 0.3,)
    coarse = holder_scan(_rho_square_patch(16), Domain.disk(), windows=win, alphas=(1.0,)).seminorm[0, 0]
    fine = holder_scan(_rho_square_patch(192), Domain.disk(), windows=win, alphas=(1.0,)).seminorm[0, 0]
    assert fine >= 10 * coarse


def test_holder_solved_stable():
    vals = []
    for h in (1 / 64, 1 / 128):
        r = solve(_cfg(h), holder_tau=0.25)
        vals.append(next(row["seminorm"] for row in r.report.holder if row["alpha"] == 0.5))
    assert vals[1] <= 2 * vals[0] and vals[0] <= 2 * vals[1]


def test_holder_empty_window():
    u = GridField(np.array([-1.0]), 1 / 8, np.zeros(17), ExteriorRule.zero(1))
    tab = holder_scan(u, Domain.interval(), windows=(0.99,), alphas=(0.5,))
    assert tab.notes and tab.n_pairs[0] == 0


# -- checks and suites -----------------------------------------------------------------


def test_fault_injection(solved):
    r = solved
    dec = decompose(r)
    j = int(np.flatnonzero(dec.plus)[0])
    u = r.u.copy()
    u[j] += 0.1
    _, A, H = r.disc.residual(u)
    bad = dataclasses.replace(r, u=u, A=A, H=H)
    comp = complementarity_check(bad)
    assert not comp.passed and np.allclose(comp.location, r.disc.x[j])
    recs = {c.check_id: c for c in certify_solution(bad)}
    assert not recs["sandwich"].passed and np.allclose(recs["sandwich"].location, r.disc.x[j])
    assert complementarity_check(r).passed


def test_lemma_suite_deterministic():
    insts = [Instance(i.name, dataclasses.replace(i.config, h=1 / 64)) for i in default_battery()[:2]]
    a = lemma_suite(insts, include_euclidean=False).to_json()
    b = lemma_suite(insts, include_euclidean=False).to_json()
    assert a == b and a["pass"]


def test_euclidean_battery():
    recs = euclidean_battery(n_points=50)
    assert recs and all(r.passed for r in recs)


@pytest.mark.slow
def test_default_battery_passes():
    rep = lemma_suite()
    assert rep.passed, [r.check_id for r in rep.records if not r.passed]
