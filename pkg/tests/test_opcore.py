import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectorcalc import opcore
from sectorcalc.errors import NotDiagonalizable, PreconditionViolated, SingularShift


def test_solve_shifted_scalar():
    assert opcore.solve_shifted([[1.0]], 1.0, [1.0])[0] == pytest.approx(0.5)


def test_solve_shifted_diagonal():
    x = opcore.solve_shifted(np.diag([1.0, 2.0]), 0.0, [1.0, 1.0])
    np.testing.assert_allclose(x, [1.0, 0.5], atol=1e-15)


def test_solve_shifted_triangular():
    x = opcore.solve_shifted([[2.0, 1.0], [0.0, 2.0]], 1.0, [1.0, 1.0])
    np.testing.assert_allclose(x, [2 / 9, 1 / 3], atol=1e-15)


def test_solve_shifted_singular():
    with pytest.raises(SingularShift):
        opcore.solve_shifted([[1.0, 0.0], [0.0, 2.0]], -2.0, [1.0, 1.0])


def test_rejects_bad_input():
    with pytest.raises(PreconditionViolated):
        opcore.as_cmatrix([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(PreconditionViolated):
        opcore.as_cmatrix(np.ones((2, 3)))


@pytest.mark.parametrize(
    "A, expected",
    [(np.diag([1.0, 3.0]), 3.0), ([[0.0, 1.0], [0.0, 0.0]], 1.0), ([[1.0, 2.0], [3.0, 4.0]], 5.4649857042)],
)
def test_op_norm(A, expected):
    assert opcore.op_norm(A) == pytest.approx(expected, rel=1e-10)


def test_eig_decompose_diagonal():
    eo = opcore.eig_decompose(np.diag([1.0, 2.0]))
    assert sorted(eo.eigenvalues.real) == [1.0, 2.0]
    np.testing.assert_allclose(np.abs(eo.vectors), np.eye(2), atol=1e-15)


def test_eig_decompose_swap():
    eo = opcore.eig_decompose([[0.0, 1.0], [1.0, 0.0]])
    assert sorted(eo.eigenvalues.real) == pytest.approx([-1.0, 1.0])
    np.testing.assert_allclose(eo.reconstruct(), [[0, 1], [1, 0]], atol=1e-14)


def test_eig_decompose_jordan():
    with pytest.raises(NotDiagonalizable):
        opcore.eig_decompose([[2.0, 1.0], [0.0, 2.0]])


def test_expm_oracle_examples():
    assert opcore.expm_oracle([[1.0]], 0.0)[0, 0] == pytest.approx(1.0)
    assert opcore.expm_oracle([[math.log(2)]], 1.0)[0, 0] == pytest.approx(0.5)
    J = opcore.expm_oracle([[1.0, 1.0], [0.0, 1.0]], 1.0)
    np.testing.assert_allclose(J, math.exp(-1) * np.array([[1, -1], [0, 1]]), atol=1e-14)


def test_batched_solve_matches_loop(rng):
    A = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    zs = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    y = rng.standard_normal(5)
    X = opcore.batched_solve(A, zs, y)
    for z, x in zip(zs, X):
        np.testing.assert_allclose(x, opcore.solve_shifted(A, z, y), atol=1e-12)
    norms = opcore.batched_resolvent_norms(A, zs)
    for z, nrm in zip(zs, norms):
        assert nrm == pytest.approx(opcore.op_norm(opcore.resolvent(A, z)), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=5), st.floats(0.0, 5.0))
def test_diagonal_shift_solve(diag, z):
    A = np.diag(diag)
    x = opcore.solve_shifted(A, z, np.ones(len(diag)))
    np.testing.assert_allclose(x, 1.0 / (np.array(diag) + z), rtol=1e-13)
