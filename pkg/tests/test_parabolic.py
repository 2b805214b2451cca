import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectorcalc import parabolic, sectorial
from sectorcalc.errors import AngleOutOfRange, PreconditionViolated
from sectorcalc.parabolic import GridFunction

OBTUSE = 3 * math.pi / 4


def ones(T=1.0, m=200, n=1):
    return GridFunction.constant(np.ones(n), T, m)


def test_phi_functions_continuous_at_cutoff():
    for x in (0.49999, 0.5, 0.50001, -0.5, -0.50001):
        assert parabolic.phi1(x) == pytest.approx(np.expm1(x) / x, rel=1e-13)
        assert parabolic.phi2(x) == pytest.approx((np.expm1(x) - x) / x ** 2, rel=1e-9)
    assert parabolic.phi1(0.0) == 1.0 and parabolic.phi2(0.0) == 0.5
    assert parabolic.phi2(1e-8) == pytest.approx(0.5 + 1e-8 / 6, rel=1e-15)


def test_grid_norm_trapezoid():
    g = GridFunction(1.0, np.array([[1.0], [1.0], [1.0]]), p=2.0)
    assert g.norm() == pytest.approx(1.0)
    g = GridFunction(2.0, np.array([[0.0], [1.0], [0.0]]), p=3.0)
    assert g.norm() == pytest.approx(1.0)
    with pytest.raises(PreconditionViolated):
        GridFunction(1.0, np.ones((3, 1)), p=1.0)


def test_grid_rejects_bad_input():
    with pytest.raises(PreconditionViolated):
        GridFunction(1.0, np.array([[np.nan], [1.0]]))
    with pytest.raises(PreconditionViolated):
        GridFunction(-1.0, np.ones((3, 1)))


def test_b_resolvent_examples():
    g = ones()
    t = g.times
    np.testing.assert_allclose(parabolic.b_resolvent(g, 0.0).values[:, 0], t, atol=1e-14)
    h = parabolic.b_resolvent(g, 1.0)
    np.testing.assert_allclose(h.values[:, 0], 1 - np.exp(-t), atol=1e-14)
    assert h.values[-1, 0] == pytest.approx(0.632121, abs=1e-6)
    e = GridFunction.sample(lambda s: np.exp(-s), 1.0, 200)
    np.testing.assert_allclose(parabolic.b_resolvent(e, 1.0).values[:, 0], t * np.exp(-t), atol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-5.0, 5.0), st.floats(0.1, 5.0), st.floats(-5.0, 5.0))
def test_b_resolvent_first_identity(a, b, c, d):
    g = GridFunction.sample(lambda t: np.sin(3 * t) + t ** 2, 1.0, 100)
    assert parabolic.resolvent_identity_residual(g, complex(a, b), complex(c, d)) <= 1e-4


def test_b_resolvent_vanishes_at_zero(rng):
    g = GridFunction(1.0, rng.standard_normal((51, 3)) + 0j)
    for lam in (0.0, 1 + 2j, 50.0):
        assert np.all(parabolic.b_resolvent(g, lam).values[0] == 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(-20.0, 20.0), st.sampled_from([1.5, 2.0, 3.0]))
def test_young_bound(re, im, p):
    g = GridFunction.sample(lambda t: np.cos(5 * t) + 0.5, 1.0, 200, p=p)
    lhs, rhs, ok = parabolic.young_bound(g, complex(re, im))
    assert ok


def test_solver_examples():
    op = sectorial.certify([[1.0]], OBTUSE, 1024)
    f = parabolic.parabolic_solve(op, ones())
    np.testing.assert_allclose(f.values[:, 0], 1 - np.exp(-f.times), atol=1e-10)
    assert f.values[-1, 0] == pytest.approx(0.632121, abs=1e-6)
    assert f.values[0, 0] == 0
    z = parabolic.parabolic_solve(op, GridFunction.constant([0.0], 1.0, 20))
    assert np.all(z.values == 0)
    e = GridFunction.sample(lambda s: np.exp(-s), 1.0, 200)
    fe = parabolic.parabolic_solve(op, e)
    assert fe.values[-1, 0] == pytest.approx(math.exp(-1), abs=1e-5)


def test_solver_needs_obtuse_angle():
    with pytest.raises(AngleOutOfRange):
        parabolic.parabolic_solve(sectorial.certify([[1.0]], 1.0, 256), ones())


def test_refinement_order():
    op = sectorial.certify([[1.0]], OBTUSE, 1024)
    errs = []
    for m in (100, 200, 400):
        e = GridFunction.sample(lambda s: np.exp(-s), 1.0, m)
        f = parabolic.parabolic_solve(op, e)
        errs.append(np.max(np.abs(f.values[:, 0] - e.times * np.exp(-e.times))))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_solver_matches_duhamel_matrix(rng):
    from sectorcalc.suites import random_diagonalizable

    A = random_diagonalizable(rng, 4, math.pi / 6)
    op = sectorial.certify(A, OBTUSE - 0.1, 1024)
    g = GridFunction.sample(lambda t: np.outer(np.sin(2 * t), [1, 2, 0, 1]) + 1.0, 1.5, 120)
    f = parabolic.parabolic_solve(op, g)
    ref = parabolic.duhamel_oracle(A, g)
    assert np.max(np.abs(f.values - ref.values)) <= 1e-8
    # forward-difference residual is O(h)
    assert parabolic.equation_residual(A, f, g) <= 5 * g.h * max(1.0, g.sup())


def test_duhamel_oracle_closed_form():
    g = ones()
    f = parabolic.duhamel_oracle(np.diag([2.0]), g)
    np.testing.assert_allclose(f.values[:, 0], (1 - np.exp(-2 * g.times)) / 2, atol=1e-12)


def test_riemann_lebesgue():
    radii = [1.0, 10.0, 100.0, 1000.0]
    tab = parabolic.riemann_lebesgue_check(ones(), 1.0, radii)
    assert tab.verdict
    zero = parabolic.riemann_lebesgue_check(GridFunction.constant([0.0], 1.0, 50), 1.0, radii)
    assert all(v == 0 for _, v in zero.rows)
    spike = np.zeros((201, 1))
    spike[100] = 1.0
    assert parabolic.riemann_lebesgue_check(GridFunction(1.0, spike), 1.0, radii).verdict


def test_derivative_decay():
    radii = [1.0, 10.0, 100.0, 1000.0]
    ramp = GridFunction.sample(lambda t: t, 1.0, 200)
    tab = parabolic.derivative_decay_check(ramp, 1.0, radii)
    assert tab.verdict
    # lam ||t/lam - (1 - e^{-lam t})/lam^2|| stays below ||t||
    assert all(scaled <= ramp.norm() * 1.05 for _, scaled, _ in tab.rows)
    assert parabolic.derivative_decay_check(GridFunction.sample(lambda t: np.sin(math.pi * t), 1.0, 200), 1.0, radii).verdict
    zero = parabolic.derivative_decay_check(GridFunction.constant([0.0], 1.0, 50), 1.0, radii)
    assert all(row[1] == 0 for row in zero.rows)
    with pytest.raises(PreconditionViolated):
        parabolic.derivative_decay_check(ones(), 1.0, radii)
