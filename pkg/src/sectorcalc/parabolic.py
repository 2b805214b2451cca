"""First-order evolution ``f' + A f = g, f(0) = 0`` on a uniform time grid.

The time derivative B = d/dt with zero initial value has the resolvent
``((B + lam)^{-1} g)(t) = int_0^t e^{lam (x - t)} g(x) dx`` for every complex
lam.  It is evaluated exactly for the piecewise-linear interpolant of g, so
the value at t = 0 is exactly zero.  The solution is then

    f(t) = (1/2 pi i) int_Gamma (A + z)^{-1} ((B - z)^{-1} g)(t) dz

over a keyhole at the sector angle of A, with one node set shared by all
grid times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contour, opcore
from .errors import AngleOutOfRange, PreconditionViolated
from .sectorial import SectorialOperator, assess_decay

SERIES_CUTOFF = 0.5
_SERIES_TERMS = 24


def _phi_series(x: np.ndarray, k: int) -> np.ndarray:
    """sum_j x^j / (j + k)!"""
    out = np.zeros_like(x)
    for j in reversed(range(_SERIES_TERMS)):
        out = out * x / (j + k + 1) + 1.0
    return out / math.factorial(k)


def phi1(x) -> np.ndarray:
    """(e^x - 1) / x, stable near 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.expm1(safe) / safe
    return np.where(small, _phi_series(x, 1), direct)


def phi2(x) -> np.ndarray:
    """(e^x - 1 - x) / x^2, stable near 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = (np.expm1(safe) - safe) / (safe * safe)
    return np.where(small, _phi_series(x, 2), direct)


@dataclass
class GridFunction:
    """Samples ``g(t_j)``, ``t_j = j T / m``, of a vector-valued function."""

    T: float
    values: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 2:
            raise PreconditionViolated(f"grid values need shape (m+1, n) with m >= 1, got {v.shape}")
        if not self.T > 0:
            raise PreconditionViolated("horizon T must be positive")
        if not 1 < self.p < math.inf:
            raise PreconditionViolated("norm exponent p must lie in (1, inf)")
        if not np.all(np.isfinite(v)):
            raise PreconditionViolated("grid values must be finite")
        self.values = v

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def h(self) -> float:
        return self.T / self.m

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m + 1)

    @classmethod
    def sample(cls, func, T: float, m: int, p: float = 2.0) -> "GridFunction":
        t = np.linspace(0.0, T, m + 1)
        return cls(T, np.asarray(func(t), dtype=complex), p)

    @classmethod
    def constant(cls, vec, T: float, m: int, p: float = 2.0) -> "GridFunction":
        v = np.atleast_1d(np.asarray(vec, dtype=complex))
        return cls(T, np.tile(v, (m + 1, 1)), p)

    def like(self, values) -> "GridFunction":
        return GridFunction(self.T, values, self.p)

    def pointwise_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def norm(self) -> float:
        """Trapezoid-weighted grid L^p norm of the pointwise Euclidean norms."""
        w = np.full(self.m + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return float(np.sum(w * self.pointwise_norms() ** self.p) ** (1.0 / self.p))

    def sup(self) -> float:
        return float(np.max(self.pointwise_norms()))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.like(self.values - other.values)


def linear_weights(lam, h: float):
    """Per-panel factors ``(e^{-mu}, h (phi1 - phi2)(-mu), h phi2(-mu))`` with mu = lam h."""
    mu = np.asarray(lam, dtype=complex) * h
    p1, p2 = phi1(-mu), phi2(-mu)
    return np.exp(-mu), h * (p1 - p2), h * p2


def _convolve(values: np.ndarray, lams: np.ndarray, h: float) -> np.ndarray:
    """Exact ``int_0^{t_j} e^{lam (x - t_j)} g(x) dx`` for linear-interpolated g.

    values: (m+1, n); lams: (k,) -> result (k, m+1, n).
    """
    decay, w0, w1 = (x[:, None] for x in linear_weights(lams, h))
    m1, n = values.shape
    out = np.zeros((lams.shape[0], m1, n), dtype=complex)
    H = out[:, 0, :]
    for j in range(m1 - 1):
        H = decay * H + w0 * values[j][None, :] + w1 * values[j + 1][None, :]
        out[:, j + 1, :] = H
    return out


def b_resolvent(g: GridFunction, lam: complex) -> GridFunction:
    """(B + lam)^{-1} g with piecewise-linear reconstruction of g."""
    vals = _convolve(g.values, np.array([lam], dtype=complex), g.h)[0]
    return g.like(vals)


def b_resolvent_many(g: GridFunction, lams) -> np.ndarray:
    return _convolve(g.values, np.asarray(lams, dtype=complex).ravel(), g.h)


@dataclass
class PanelFunction:
    """Piecewise-constant function on the panels of a grid (m values)."""

    T: float
    values: np.ndarray
    p: float = 2.0


def discrete_derivative(g: GridFunction) -> PanelFunction:
    """Exact derivative of the piecewise-linear interpolant."""
    return PanelFunction(g.T, np.diff(g.values, axis=0) / g.h, g.p)


def b_resolvent_panels(d: PanelFunction, lam: complex) -> GridFunction:
    """(B + lam)^{-1} of a piecewise-constant function, exact on each panel."""
    m = d.values.shape[0]
    h = d.T / m
    mu = lam * h
    decay, w = np.exp(-mu), h * phi1(-mu)
    out = np.zeros((m + 1, d.values.shape[1]), dtype=complex)
    for j in range(m):
        out[j + 1] = decay * out[j] + w * d.values[j]
    return GridFunction(d.T, out, d.p)


# ---------------------------------------------------------------- checks


def young_bound(g: GridFunction, lam: complex):
    """(||(B+lam)^{-1} g||_p, ((1 - e^{-Re lam T}) / Re lam) ||g||_p, passed)."""
    a = complex(lam).real
    if not a > 0:
        raise PreconditionViolated("the convolution bound needs Re(lam) > 0")
    lhs = b_resolvent(g, lam).norm()
    rhs = -math.expm1(-a * g.T) / a * g.norm()
    return lhs, rhs, lhs <= rhs * (1.0 + 1.0 / g.m) + 1e-14


def resolvent_identity_residual(g: GridFunction, lam: complex, mu: complex) -> float:
    """||(B+lam)^{-1}g - (B+mu)^{-1}g - (mu-lam)(B+lam)^{-1}(B+mu)^{-1}g||_p / ||g||_p."""
    left = b_resolvent(g, lam).values - b_resolvent(g, mu).values
    right = (mu - lam) * b_resolvent(b_resolvent(g, mu), lam).values
    ng = g.norm()
    diff = g.like(left - right).norm()
    return diff / ng if ng else diff


@dataclass
class DecayTable:
    columns: tuple
    rows: list
    verdict: bool
    notes: list = field(default_factory=list)


def _ray_points(k: float, radii, angle: float) -> np.ndarray:
    if abs(angle) > math.pi / 2:
        raise PreconditionViolated("rays must keep Re(lam) >= k")
    return k + np.asarray(radii, dtype=float) * np.exp(1j * angle)


def riemann_lebesgue_check(g: GridFunction, k: float, radii, angle: float = 0.0,
                           ratio: float = 0.05) -> DecayTable:
    """Norms of (B+lam)^{-1} g along ``lam = k + r e^{i angle}``; pass if the
    last entry is at most ``ratio`` times the first.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise PreconditionViolated("radii must be increasing")
    lams = _ray_points(k, radii, angle)
    rows = [(float(abs(lam)), b_resolvent(g, lam).norm()) for lam in lams]
    first, last = rows[0][1], rows[-1][1]
    return DecayTable(("abs_lambda", "norm"), rows, last <= ratio * first)


def derivative_decay_check(g: GridFunction, k: float, radii, angle: float = 0.0,
                           identity_tol: float = 1e-6) -> DecayTable:
    """Tabulate ``|lam| ||(B+lam)^{-1} g||`` and check
    ``lam (B+lam)^{-1} g = g - (B+lam)^{-1} g'`` with the exact derivative of
    the interpolant.  Boundedness is judged against
    ``||g|| + ||g'|| / Re(lam)``, which the identity implies.
    """
    if np.linalg.norm(g.values[0]) != 0.0:
        raise PreconditionViolated("the derivative check needs g(0) = 0")
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise PreconditionViolated("radii must be increasing")
    d = discrete_derivative(g)
    dnorm = GridFunction(g.T, np.vstack([d.values, d.values[-1:]]), g.p).norm()
    ng = g.norm()
    scale = max(ng, 1e-300)
    rows, ok, notes = [], True, []
    for lam in _ray_points(k, radii, angle):
        h = b_resolvent(g, lam)
        scaled = abs(lam) * h.norm()
        ident = g.like(lam * h.values - g.values + b_resolvent_panels(d, lam).values).norm() / scale
        bound = ng + dnorm / lam.real
        rows.append((float(abs(lam)), scaled, ident))
        if ident > identity_tol:
            ok = False
            notes.append(f"identity residual {ident:.3g} at |lam|={abs(lam):.6g}")
        if scaled > bound * 1.05 + 1e-14:
            ok = False
            notes.append(f"|lam| norm {scaled:.6g} exceeds {bound:.6g}")
    return DecayTable(("abs_lambda", "scaled_norm", "identity_residual"), rows, ok, notes)


def decay_verdict(values, threshold: float = 0.1) -> bool:
    return assess_decay(values, threshold).passed


# ---------------------------------------------------------------- solver


@dataclass
class ParabolicResult:
    f: GridFunction
    contour: contour.DiscretizedContour | None


def parabolic_contour(op: SectorialOperator, g: GridFunction, tol: float = 1e-10) -> ParabolicResult:
    if op.theta <= math.pi / 2:
        raise AngleOutOfRange(f"the parabolic solver needs theta_A > pi/2, got {op.theta!r}")
    if g.n != op.n:
        raise PreconditionViolated(f"g has {g.n} components, A is {op.n}x{op.n}")
    op.require_invertible()
    gsup = g.sup()
    if gsup == 0.0:
        return ParabolicResult(g.like(np.zeros_like(g.values)), None)
    A = op.A
    path = contour.Keyhole(0.5 * op.min_abs_eigenvalue(), op.theta)
    # |((B - z)^{-1} g)(t)| <= sup|g| / (|z| |cos theta|) on the rays
    C = op.K * gsup / abs(math.cos(op.theta))
    envelope = contour.DoubleResolvent(C)

    def integrand(z):
        H = _convolve(g.values, -z, g.h)                 # (k, m+1, n)
        X = opcore.batched_solve(A, z, H.transpose(0, 2, 1), stacked=True)
        return X.transpose(0, 2, 1)

    focus = sorted(set(np.abs(op.eigenvalues).tolist()))
    disc = contour.discretize(path, envelope, tol * max(gsup, 1.0), probe=integrand, focus=focus)
    vals = disc.probe_value
    vals[0] = 0.0
    return ParabolicResult(g.like(vals), disc)


def parabolic_solve(op: SectorialOperator, g: GridFunction, tol: float = 1e-10) -> GridFunction:
    """Solve f' + A f = g, f(0) = 0 on the grid of g."""
    return parabolic_contour(op, g, tol).f


_ORACLE_GL = np.polynomial.legendre.leggauss(12)


def duhamel_oracle(A, g: GridFunction) -> GridFunction:
    """f(t) = int_0^t e^{-(t-x)A} g(x) dx from matrix exponentials.

    Steps ``f_{j+1} = e^{-hA} f_j + int_0^h e^{-(h-s)A} g(t_j + s) ds`` with
    the panel integral done by 12-point Gauss-Legendre on the linear
    interpolant, so only 13 exponentials are ever formed.
    """
    A = opcore.as_cmatrix(A)
    h = g.h
    x, w = _ORACLE_GL
    s = 0.5 * h * (x + 1.0)
    ws = 0.5 * h * w
    E = [opcore.expm_oracle(A, h - si) for si in s]
    Eh = opcore.expm_oracle(A, h)
    out = np.zeros_like(g.values)
    for j in range(g.m):
        gj, gk = g.values[j], g.values[j + 1]
        acc = Eh @ out[j]
        for Ei, si, wi in zip(E, s, ws):
            acc = acc + wi * (Ei @ (gj + (gk - gj) * (si / h)))
        out[j + 1] = acc
    return g.like(out)


def equation_residual(A, f: GridFunction, g: GridFunction) -> float:
    """Grid norm of the forward-difference residual ``(f_{j+1}-f_j)/h + A f_j - g_j``."""
    A = opcore.as_cmatrix(A)
    res = np.diff(f.values, axis=0) / f.h + f.values[:-1] @ A.T - g.values[:-1]
    return GridFunction(f.T, np.vstack([res, res[-1:]]), f.p).norm()
