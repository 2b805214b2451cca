import math

import numpy as np
import pytest

from sectorcalc import dpgsum, opcore, sectorial, suites
from sectorcalc.dpgsum import SumProblem
from sectorcalc.errors import AngleOutOfRange, CommutationViolation, HypothesisViolation, SingularOperator

TA, TB = 3 * math.pi / 4, math.pi / 3


def problem(a, b, ta=TA, tb=TB):
    return SumProblem.certified(np.diag(a), np.diag(b), ta, tb, 1024)


@pytest.mark.parametrize(
    "a, b, y, expected",
    [([1.0], [2.0], [1.0], [1 / 3]), ([1.0], [1.0], [1.0], [0.5]), ([1.0, 2.0], [3.0, 4.0], [1.0, 1.0], [0.25, 1 / 6])],
)
def test_kappa_examples(a, b, y, expected):
    p = problem(a, b)
    np.testing.assert_allclose(dpgsum.kappa_apply(p, y), expected, atol=1e-9)
    assert dpgsum.sum_residual(p, y) <= 1e-6


def test_zero_rhs():
    p = problem([1.0], [2.0])
    assert dpgsum.sum_residual(p, [0.0]) == 0.0
    assert dpgsum.inverse_identity_check(p, [0.0]) == 0.0
    x, ax = dpgsum.smoothed_kappa(p, 1.0, [0.0])
    assert np.all(x == 0) and np.all(ax == 0)
    assert all(v == 0.0 for _, v in dpgsum.closedness_probe(p, [0.0], ws=[1.0, 0.5]).rows)
    assert dpgsum.regularity_fraction_check(p, 0.5, [0.0]) == 0.0


def test_hypothesis_checks():
    with pytest.raises(HypothesisViolation):
        problem([1.0], [2.0], 1.5, 1.5)
    with pytest.raises(HypothesisViolation):
        problem([1.0], [2.0], 1.8, 1.9)
    A = np.array([[1.0, 1.0], [0.0, 2.0]])
    with pytest.raises(CommutationViolation):
        SumProblem.certified(A, A.T, TA, TB, 1024)


def test_inverse_identity_examples():
    assert dpgsum.inverse_identity_check(problem([1.0], [2.0]), [1.0]) <= 1e-9
    assert dpgsum.inverse_identity_check(problem([1.0, 2.0], [3.0, 4.0]), [1.0, 1.0]) <= 1e-6


def test_inverse_identity_singular():
    opA = sectorial.SectorialOperator(np.diag([0.0, 1.0]), 2.0, TA)
    opB = sectorial.certify(np.diag([1.0, 1.0]), TB, 256)
    with pytest.raises(SingularOperator):
        dpgsum.inverse_identity_check(SumProblem(opA, opB), [1.0, 1.0])


def test_smoothed_examples():
    x, ax = dpgsum.smoothed_kappa(problem([1.0], [2.0]), 1.0, [1.0])
    assert x[0] == pytest.approx(math.exp(-1) / 3, abs=1e-10)
    assert ax[0] == pytest.approx(math.exp(-1) / 3, abs=1e-10)
    x, ax = dpgsum.smoothed_kappa(problem([1.0, 2.0], [1.0, 1.0]), 0.5, [1.0, 1.0])
    np.testing.assert_allclose(x, [math.exp(-0.5) / 2, math.exp(-1) / 3], atol=1e-10)
    np.testing.assert_allclose(ax, [math.exp(-0.5) / 2, 2 * math.exp(-1) / 3], atol=1e-10)


def test_smoothing_needs_obtuse_angle():
    # after swapping, the first operator carries the acute angle
    p = problem([1.0], [2.0]).swapped()
    with pytest.raises(AngleOutOfRange):
        dpgsum.smoothed_kappa(p, 1.0, [1.0])
    with pytest.raises(AngleOutOfRange):
        dpgsum.smoothed_kappa(problem([1.0], [2.0]), 0.0, [1.0])


def test_closedness_scalar_limit():
    tab = dpgsum.closedness_probe(problem([1.0], [2.0]), [1.0])
    assert tab.limit == pytest.approx(1 / 3, abs=1e-10)
    assert tab.final_gap <= 1e-4
    vals = [v for _, v in tab.rows]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_closedness_stiff_pair():
    y = np.array([1.0, 1.0])
    # e^{-w 1000} needs w far below 2^-20 before the large component settles
    tab = dpgsum.closedness_probe(problem([1.0, 1e3], [1.0, 1.0]), y, ws=dpgsum.default_ws(34))
    ax = np.array([1 / 2, 1e3 / 1001])
    assert tab.limit == pytest.approx(np.linalg.norm(ax) / np.linalg.norm(y), rel=1e-9)
    assert tab.final_gap <= 1e-6


def test_regularity_examples():
    p = problem([4.0], [1.0])
    assert dpgsum.fractional_contour(p, 0.5, [1.0])[0] == pytest.approx(0.1, abs=1e-10)
    assert dpgsum.regularity_fraction_check(p, 0.5, [1.0]) <= 1e-9
    p = problem([1.0, 9.0], [1.0, 1.0])
    np.testing.assert_allclose(dpgsum.fractional_contour(p, 0.5, [1.0, 1.0]), [0.5, 1 / 30], atol=1e-10)


def test_random_family_properties(rng):
    for p, A, B in suites.sum_family(rng, 3):
        y = suites.random_vector(rng, p.n)
        x = dpgsum.kappa_apply(p, y)
        ny = np.linalg.norm(y)
        assert np.linalg.norm(x - np.linalg.solve(A + B, y)) / ny <= 1e-6
        assert np.linalg.norm(dpgsum.kappa_apply(p.swapped(), y) - x) / ny <= 1e-6
        assert np.linalg.norm(dpgsum.kappa_apply(p, y, path=p.shifted_path()) - x) / ny <= 1e-6
        # order invariance: K (A+B) v = v
        v = suites.random_vector(rng, p.n)
        assert np.linalg.norm(dpgsum.kappa_apply(p, (A + B) @ v) - v) / np.linalg.norm(v) <= 1e-6
        # commutes with the resolvents of A
        lam = 0.7
        left = opcore.solve_shifted(A, lam, x)
        right = dpgsum.kappa_apply(p, opcore.solve_shifted(A, lam, y))
        assert np.linalg.norm(left - right) / ny <= 1e-8


def test_shifted_path_separates():
    p = problem([1.0, 2.0], [3.0, 4.0])
    path = p.shifted_path()
    assert abs(path.shift) == pytest.approx(p.rho() / 2)
    assert dpgsum.separates(path, p.opA.eigenvalues, -p.opB.eigenvalues)
