import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectorcalc import fileio
from sectorcalc.errors import UsageError
from sectorcalc.parabolic import GridFunction
from sectorcalc.report import Report, fmt

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
cplx = st.builds(complex, finite, finite)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.lists(cplx, min_size=n * n, max_size=n * n)))
def test_matrix_round_trip_bit_exact(entries):
    n = int(round(len(entries) ** 0.5))
    A = np.array(entries, dtype=complex).reshape(n, n)
    B = fileio.loads_matrix(fileio.dumps_matrix(A).splitlines())
    assert A.tobytes() == B.tobytes()


def test_vector_and_grid_round_trip(tmp_path, rng):
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    fileio.write_vector(tmp_path / "v.vec", v)
    assert fileio.read_vector(tmp_path / "v.vec").tobytes() == v.tobytes()
    g = GridFunction(0.7, rng.standard_normal((11, 3)) + 0j, p=3.0)
    fileio.write_grid(tmp_path / "g.grid", g)
    h = fileio.read_grid(tmp_path / "g.grid")
    assert (h.T, h.p, h.m, h.n) == (0.7, 3.0, 10, 3)
    assert h.values.tobytes() == g.values.tobytes()


def test_matrix_format_text():
    assert fileio.dumps_matrix([[1, 2j], [0.5, -1]]) == "2\n1.0,0.0 0.0,2.0\n0.5,0.0 -1.0,0.0\n"


@pytest.mark.parametrize("text", ["", "2\n1,0 0,0\n", "1\n1,0,0\n", "1\nnan,0\n", "x\n1,0\n"])
def test_bad_matrix_files(tmp_path, text):
    path = tmp_path / "a.mat"
    path.write_text(text)
    with pytest.raises(UsageError):
        fileio.read_matrix(path)


def test_bad_grid_file(tmp_path):
    path = tmp_path / "g.grid"
    path.write_text("2 1.0 2.0 1\n0,0\n1,0\n")
    with pytest.raises(UsageError):
        fileio.read_grid(path)


def test_report_render_is_stable():
    rep = Report("demo", {"a": 0.1, "b": True, "z": 1 + 2j, "none": None})
    t = rep.table("t", ["x", "y"])
    t.add(1, 0.25)
    t.add(2, 1 - 1j)
    text = rep.render()
    assert text == (
        "report=demo\na=0.1\nb=true\nz=1.0,2.0\nnone=none\n\n# table=t\nx,y\n1,0.25\n2,1.0-1.0j\n"
    )
    assert fmt(np.float64(1 / 3)) == repr(1 / 3)
