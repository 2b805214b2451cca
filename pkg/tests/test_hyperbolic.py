import math

import numpy as np
import pytest

from sectorcalc import hyperbolic, opcore
from sectorcalc.errors import PreconditionViolated, RegionViolation
from sectorcalc.parabolic import GridFunction


def ones(n=1, T=math.pi, m=400):
    return GridFunction.constant(np.ones(n), T, m)


@pytest.fixture(scope="module")
def p4():
    return hyperbolic.make_problem(np.diag([4.0]), 2.0, ones())


def test_square_root(p4):
    assert p4.sqrtA[0, 0] == pytest.approx(2.0, abs=1e-10)
    A = np.array([[5.0, 1.0], [1.0, 3.0]])
    p = hyperbolic.make_problem(A, 1.0, ones(2))
    np.testing.assert_allclose(p.sqrtA, hyperbolic.eig_sqrt(A), atol=1e-9)


def test_split_examples(p4):
    assert hyperbolic.resolvent_split(p4, -2.0, 1)[0, 0] == pytest.approx((-2 - 2j) / 8, abs=1e-12)
    pI = hyperbolic.make_problem(np.eye(1), 1.0, ones())
    assert hyperbolic.resolvent_split(pI, -1.0, -1)[0, 0] == pytest.approx(1 / (-1j - 1), abs=1e-12)
    for sign in (1, -1):
        d = hyperbolic.resolvent_split(p4, -3 + 5j, sign) - hyperbolic.direct_split(p4, -3 + 5j, sign)
        assert opcore.op_norm(d) <= 1e-14


def test_split_region(p4):
    with pytest.raises(RegionViolation):
        hyperbolic.resolvent_split(p4, -1.0, 1)
    with pytest.raises(PreconditionViolated):
        hyperbolic.resolvent_split(p4, -3.0, 0)


def test_partial_fractions(rng):
    A = np.array([[5.0, 1.0], [1.0, 3.0]])
    p = hyperbolic.make_problem(A, 1.0, ones(2))
    for _ in range(20):
        z = complex(-1.0 - rng.exponential(2.0), rng.normal(0, 5))
        prod = (A + z * z * np.eye(2)) @ hyperbolic.resolvent_split(p, z, 1) @ hyperbolic.resolvent_split(p, z, -1)
        np.testing.assert_allclose(prod, np.eye(2), atol=1e-8)


def test_split_equivalence_random(rng):
    A = np.array([[5.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
    p = hyperbolic.make_problem(A, 1.0, ones(3))
    worst = 0.0
    for _ in range(200):
        z = complex(-p.c - rng.exponential(3.0), rng.normal(0.0, 10.0))
        for sign in (1, -1):
            worst = max(worst, opcore.op_norm(hyperbolic.resolvent_split(p, z, sign) - hyperbolic.direct_split(p, z, sign)))
    assert worst <= 1e-9


def test_decay_split(p4):
    tab = hyperbolic.decay_split_check(p4)
    assert tab.verdict
    real_ray = [row for row in tab.rows if row[0] == f"{math.pi:.4f}" and row[1] == 1]
    for _, _, r, v in real_ray[-3:]:
        # on the negative real axis z = -t: |(2i - t)^{-1}| / 2
        assert v == pytest.approx(1 / (2 * abs(2j - r)), rel=1e-8)
    pI = hyperbolic.make_problem(np.eye(1), 1.0, ones())
    assert hyperbolic.decay_split_check(pI).verdict


def test_uncertified_operator():
    with pytest.raises(RegionViolation):
        hyperbolic.make_problem(np.diag([-1.0]), 1.0, ones())


def test_solve_examples(p4):
    res = hyperbolic.hyperbolic_contour(p4)
    f = res.f
    assert f.values[0, 0] == 0
    np.testing.assert_allclose(f.values[:, 0], (1 - np.cos(2 * f.times)) / 4, atol=1e-3)
    assert f.values[200, 0] == pytest.approx(0.5, abs=1e-3)
    assert hyperbolic.second_difference_residual(p4.A, f, p4.g) <= 1e-2
    z = hyperbolic.hyperbolic_solve(p4.with_g(GridFunction.constant([0.0], math.pi, 40)))
    assert np.all(z.values == 0)


def test_solve_unit(rng):
    p = hyperbolic.make_problem(np.eye(1), 1.0, ones())
    f = hyperbolic.hyperbolic_solve(p)
    assert f.values[-1, 0] == pytest.approx(2.0, abs=1e-3)


def test_oracle_componentwise():
    p = hyperbolic.make_problem(np.diag([1.0, 4.0]), 1.0, ones(2))
    o = hyperbolic.sine_kernel_oracle(p)
    t = o.times
    np.testing.assert_allclose(o.values[:, 0], 1 - np.cos(t), atol=1e-13)
    np.testing.assert_allclose(o.values[:, 1], (1 - np.cos(2 * t)) / 4, atol=1e-13)
    z = hyperbolic.sine_kernel_oracle(p.with_g(GridFunction.constant([0.0, 0.0], 1.0, 10)))
    assert np.all(z.values == 0)
    f = hyperbolic.hyperbolic_solve(p)
    assert np.max(np.abs(f.values - o.values)) <= 1e-3


def test_contour_shift_independence(p4):
    g = GridFunction.constant([1.0], math.pi, 200)
    p = p4.with_g(g)
    a = hyperbolic.hyperbolic_contour(p).f.values
    b = hyperbolic.hyperbolic_contour(p, c=p.c + 0.5).f.values
    assert np.max(np.abs(a - b)) <= 1e-5
    with pytest.raises(RegionViolation):
        hyperbolic.hyperbolic_contour(p, c=1.0)


def test_identities_default(p4):
    rep = hyperbolic.verify_identities(p4)
    assert set(rep.residuals) == set(hyperbolic.IDENTITY_NAMES)
    assert rep.passed
    assert rep.c_prime == p4.c + 1


def test_identities_unit_qdark():
    p = hyperbolic.make_problem(np.eye(1), 1.0, ones())
    rep = hyperbolic.verify_identities(p)
    assert rep.residuals["Qdark"] <= 1e-3


def test_identities_zero(p4):
    z = GridFunction.constant([0.0], 1.0, 50)
    rep = hyperbolic.verify_identities(p4, g=z, w=z)
    assert all(v == 0.0 for v in rep.residuals.values())


def test_identities_need_flat_start(p4):
    with pytest.raises(PreconditionViolated):
        hyperbolic.verify_identities(p4, g=GridFunction.sample(lambda t: t, 1.0, 50))
    with pytest.raises(PreconditionViolated):
        hyperbolic.verify_identities(p4, c_prime=1.0)
