"""Plain-text formats for matrices, vectors and time-grid functions.

Complex entries are written as ``re,im`` using Python's shortest round-trip
float repr, so reading back a written file reproduces every bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import UsageError


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r},{z.imag!r}"


def parse_complex(token: str) -> complex:
    parts = token.split(",")
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) != 2:
        raise ValueError(f"bad complex entry {token!r}")
    return complex(float(parts[0]), float(parts[1]))


def _lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def dumps_matrix(A) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    rows = [str(A.shape[0])]
    rows += [" ".join(format_complex(x) for x in row) for row in A]
    return "\n".join(rows) + "\n"


def loads_matrix(lines: list[str], source: str = "<matrix>") -> np.ndarray:
    if not lines:
        raise UsageError(f"{source}: empty matrix file")
    try:
        n = int(lines[0].split()[0])
        if n <= 0 or len(lines) != n + 1:
            raise ValueError(f"expected {n} rows after the header, found {len(lines) - 1}")
        A = np.array([[parse_complex(tok) for tok in ln.split()] for ln in lines[1:]], dtype=complex)
        if A.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {A.shape}")
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{source}: {exc}") from exc
    if not np.all(np.isfinite(A)):
        raise UsageError(f"{source}: non-finite entries")
    return A


def read_matrix(path) -> np.ndarray:
    return loads_matrix(_lines(path), str(path))


def write_matrix(path, A) -> None:
    Path(path).write_text(dumps_matrix(A), encoding="utf-8")


def dumps_vector(v) -> str:
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    return "\n".join([str(v.shape[0])] + [format_complex(x) for x in v]) + "\n"


def read_vector(path) -> np.ndarray:
    lines = _lines(path)
    if not lines:
        raise UsageError(f"{path}: empty vector file")
    try:
        n = int(lines[0].split()[0])
        if n <= 0 or len(lines) != n + 1:
            raise ValueError(f"expected {n} entries after the header, found {len(lines) - 1}")
        v = np.array([parse_complex(ln.split()[0]) for ln in lines[1:]], dtype=complex)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return v


def write_vector(path, v) -> None:
    Path(path).write_text(dumps_vector(v), encoding="utf-8")


def dumps_grid(g) -> str:
    head = f"{g.m} {g.T!r} {g.p!r} {g.n}"
    body = [" ".join(format_complex(x) for x in row) for row in g.values]
    return "\n".join([head] + body) + "\n"


def read_grid(path):
    from .parabolic import GridFunction

    lines = _lines(path)
    if not lines:
        raise UsageError(f"{path}: empty grid file")
    try:
        m_s, T_s, p_s, n_s = lines[0].split()
        m, T, p, n = int(m_s), float(T_s), float(p_s), int(n_s)
        if len(lines) != m + 2:
            raise ValueError(f"expected {m + 1} grid rows, found {len(lines) - 1}")
        vals = np.array([[parse_complex(tok) for tok in ln.split()] for ln in lines[1:]], dtype=complex)
        if vals.shape != (m + 1, n):
            raise ValueError(f"grid values have shape {vals.shape}, expected {(m + 1, n)}")
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return GridFunction(T=T, values=vals, p=p)


def write_grid(path, g) -> None:
    Path(path).write_text(dumps_grid(g), encoding="utf-8")
