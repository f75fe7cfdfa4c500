import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import notched_domain
from rectrof.geometry import Grid, RectPolytope, box, boundary_grid, make_partition
from rectrof.pcr import PcrFunction
from rectrof.subgradient import (
    AxisComponent,
    GammaElement,
    PolynomialBump,
    SmoothFieldSpec,
    averaged_divergence,
    build_dual_field,
    check_axis_membership,
    check_gamma,
    fiber_runs,
)
from rectrof.verify import random_gamma_case

LINE = RectPolytope([box((0, 2))])
LINE_PART = make_partition(LINE, Grid(((0, 1, 2),)))


def comp1d(values, axis=0):
    return AxisComponent(axis, PcrFunction(LINE_PART, values))


def test_zero_component_passes():
    rep = check_axis_membership(comp1d([0, 0]), LINE, 1.0)
    assert rep.passed and rep.worst_partial == 0.0


def test_telescoping_pattern():
    rep = check_axis_membership(comp1d([1, -1]), LINE, 1.0)
    assert rep.passed
    assert rep.worst_partial == 1.0 and rep.worst_endpoint == 0.0
    assert rep.worst_cell == 0


def test_bound_exceeded():
    rep = check_axis_membership(comp1d([1.5, -1.5]), LINE, 1.0)
    assert not rep.passed and rep.worst_partial == 1.5


def test_nonzero_endpoint_fails():
    rep = check_axis_membership(comp1d([0.5, 0.0]), LINE, 1.0, tol=1e-9)
    assert not rep.passed and rep.worst_endpoint == 0.5


def square_pattern():
    dom = RectPolytope([box((0, 2), (0, 2))])
    p = make_partition(dom, Grid(((0, 1, 2), (0, 1, 2))))
    x, y = p.midpoints[:, 0], p.midpoints[:, 1]
    g0 = PcrFunction(p, np.where(x < 1, 1.0, -1.0))
    g1 = PcrFunction(p, np.where(y < 1, 1.0, -1.0))
    return dom, p, GammaElement([AxisComponent(0, g0), AxisComponent(1, g1)], 1.0)


def test_gamma_zero_and_separable():
    dom, p, e = square_pattern()
    assert check_gamma(GammaElement.zero(p), dom).passed
    assert check_gamma(e, dom).passed


def test_gamma_reports_failing_axis():
    dom, p, e = square_pattern()
    bad = GammaElement([e.components[0], AxisComponent(1, e.components[1].g * 2.0)], 1.0)
    rep = check_gamma(bad, dom)
    assert not rep.passed and rep.failing_axis == 1


def test_dual_field_of_zero():
    dom, p, _ = square_pattern()
    H = build_dual_field(GammaElement.zero(p), dom)
    assert H.max_abs() == 0.0
    assert np.all(H.evaluate(np.random.default_rng(0).uniform(0, 2, (50, 2))) == 0.0)


def test_dual_field_hat():
    e = GammaElement([comp1d([1, -1])], 1.0)
    H = build_dual_field(e, LINE)
    xs = np.array([[0.25], [0.5], [1.5], [1.75]])
    np.testing.assert_allclose(H.evaluate(xs)[:, 0], [0.25, 0.5, 0.5, 0.25])
    lo, hi = H.corner_values()
    np.testing.assert_array_equal(lo[0], [0, 1])
    np.testing.assert_array_equal(hi[0], [1, 0])
    np.testing.assert_array_equal(H.derivative(0).values, [1, -1])


def test_dual_field_rejects_non_members():
    with pytest.raises(ValueError, match="fails membership on axis 0"):
        build_dual_field(GammaElement([comp1d([2, -2])], 1.0), LINE)


def test_averaged_divergence_of_zero_field():
    dom = notched_domain()
    zero = lambda x: np.zeros(len(x))
    H = SmoothFieldSpec([zero, zero], [zero, zero], None, 1.0)
    e = averaged_divergence(H, boundary_grid(dom), dom)
    assert all(np.all(c.g.values == 0) for c in e.components)


def test_averaged_divergence_matches_symbolic_bump():
    t = sympy.symbols("t")
    Hs = 16 * t**2 * (1 - t) ** 2
    assert sympy.maximum(Hs, t, sympy.Interval(0, 1)) == 1
    dH = sympy.diff(Hs, t)
    expect = [sympy.integrate(dH, (t, a, b)) / (b - a) for a, b in ((0, sympy.Rational(1, 2)), (sympy.Rational(1, 2), 1))]
    assert expect == [2, -2]

    dom = RectPolytope([box((0, 1))])
    H = SmoothFieldSpec.from_bumps([[PolynomialBump([0.0], [1.0], 1.0)]], 1.0)
    ts = np.linspace(0, 1, 11)[:, None]
    np.testing.assert_allclose(H.components[0](ts), [float(Hs.subs(t, x)) for x in ts[:, 0]], atol=1e-14)
    e = averaged_divergence(H, Grid(((0, 0.5, 1),)), dom)
    np.testing.assert_allclose(e.components[0].g.values, [2.0, -2.0], atol=1e-13)
    # the midpoint rule converges to the same values
    mid = averaged_divergence(H, Grid(((0, 0.5, 1),)), dom, quadrature_depth=8, rule="midpoint")
    np.testing.assert_allclose(mid.components[0].g.values, [2.0, -2.0], atol=1e-4)
    rep = check_gamma(e, dom, tol=1e-12)
    assert rep.passed and rep.worst_partial == pytest.approx(1.0, abs=1e-12)


def test_bump_partial_matches_finite_difference():
    rng = np.random.default_rng(3)
    b = PolynomialBump([0.0, 1.0, -1.0], [2.0, 3.0, 0.5], -1.5)
    x = rng.uniform([0.1, 1.1, -0.9], [1.9, 2.9, 0.4], size=(20, 3))
    h = 1e-6
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = h
        fd = (b.value(x + dx) - b.value(x - dx)) / (2 * h)
        np.testing.assert_allclose(b.partial(x, i), fd, rtol=1e-6, atol=1e-8)


def test_fiber_runs_split_around_hole():
    dom = notched_domain()
    p = make_partition(dom, boundary_grid(dom))
    runs = fiber_runs(p, 0)
    # rows y in (0,1), (1,2) split in two, (2,3), (3,4)
    assert sorted(len(r) for r in runs) == [1, 1, 2, 4, 4]
    assert sum(len(r) for r in runs) == len(p)


# --- randomized properties ----------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3))
def test_subgradient_preservation(seed, n):
    rng = np.random.default_rng(seed)
    bound = float(rng.uniform(0.2, 3.0))
    dom, grid, H = random_gamma_case(rng, n, bound)
    e = averaged_divergence(H, grid, dom)
    rep = check_gamma(e, dom, tol=1e-6)
    assert rep.passed, rep
    assert rep.worst_endpoint <= 1e-6


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_dual_field_round_trip_and_sup_bound(seed, n):
    rng = np.random.default_rng(seed)
    dom, grid, H = random_gamma_case(rng, n, 1.0)
    e = averaged_divergence(H, grid, dom)
    rep = check_gamma(e, dom, tol=1e-9)
    assert rep.passed
    field = build_dual_field(e, dom, tol=1e-9)
    for c in e.components:
        np.testing.assert_array_equal(field.derivative(c.axis).values, c.g.values)
    assert field.max_abs() <= e.bound + 1e-12
    # the piecewise affine field agrees with its corner values at random interior points
    p = e.partition
    k = rng.integers(0, len(p), 10)
    x = rng.uniform(p.lo[k], p.hi[k])
    Hx = field.evaluate(x)
    lo, hi = field.corner_values()
    w = (x - p.lo[k]) / (p.hi[k] - p.lo[k])
    np.testing.assert_allclose(Hx, (lo[:, k] * (1 - w.T) + hi[:, k] * w.T).T, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 100.0))
def test_scaling_equivalence(seed, lam):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    dom, grid, H = random_gamma_case(rng, n, 1.0)
    e = averaged_divergence(H, grid, dom)
    # push some cases over the bound so both outcomes are exercised
    e = e.scale(float(rng.uniform(0.5, 1.5)))
    e = GammaElement(e.components, 1.0)
    # both conditions are homogeneous, so the tolerance scales with the bound
    a = check_gamma(e, dom, tol=1e-9)
    b = check_gamma(e.scale(lam), dom, tol=1e-9 * lam)
    assert a.passed == b.passed
    assert a.failing_axis == b.failing_axis
