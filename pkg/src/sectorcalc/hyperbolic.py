"""Second-order evolution ``f'' + A f = g, f(0) = f'(0) = 0``.

With B = d/dt (zero initial value) the problem is ``(B^2 + A) f = g`` and

    f(t) = (1/2 pi i) int_{i R - c} (A + z^2)^{-1} ((B + z)^{-1} g)(t) dz,

valid when the resolvent of A exists and decays right of the parabola
``Re w >= c^2 - (Im w)^2 / (4 c^2)``, the image of ``Re z <= -c`` under
``z -> z^2``.  The split ``(+-i sqrt(A) + z)^{-1} = (z -+ i sqrt(A))(A + z^2)^{-1}``
reduces everything to that resolvent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contour, opcore
from .errors import (
    NotDecaying,
    PreconditionViolated,
    RegionViolation,
    SpectrumInRegion,
)
from .funcalc import frac_power_neg
from .parabolic import GridFunction, _convolve
from .sectorial import (
    CertificationReport,
    SectorialOperator,
    assess_decay,
    certify,
    certify_parabola_class,
    extend_sector,
)

LINE_PHASE = 40.0  # max phase (radians) of e^{-i y t} across one line panel
SQRT_TOL = 1e-8
REGION_SLACK = 1e-12
IDENTITY_NAMES = ("Q1", "Q2", "Q3", "Q4", "satyrdark", "Qdark")


@dataclass
class HyperbolicProblem:
    opA: SectorialOperator
    c: float
    sqrtA: np.ndarray
    g: GridFunction
    q_report: CertificationReport | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.opA.n

    @property
    def A(self) -> np.ndarray:
        return self.opA.A

    def with_g(self, g: GridFunction) -> "HyperbolicProblem":
        return HyperbolicProblem(self.opA, self.c, self.sqrtA, g, self.q_report)


def make_problem(A, c: float, g: GridFunction, samples: int = 64) -> HyperbolicProblem:
    """Certify A in Q(c^2) and build the square root through the power integral.

    Any failure of the parabola certification is reported as RegionViolation.
    """
    A = opcore.as_cmatrix(A)
    if not c > 0:
        raise PreconditionViolated("c must be positive")
    if g.n != A.shape[0]:
        raise PreconditionViolated(f"g has {g.n} components, A is {A.shape[0]}x{A.shape[0]}")
    try:
        base = certify(A, 0.0, 1024)
    except Exception as exc:  # noqa: BLE001 - every certification failure maps to one error
        raise RegionViolation(f"A is not certified in P(0): {exc}") from exc
    op = extend_sector(base)
    inv_sqrt = frac_power_neg(op, 0.5)
    try:
        rep = certify_parabola_class(A, c * c, samples=samples, inv_sqrt=inv_sqrt)
    except (SpectrumInRegion, NotDecaying, PreconditionViolated) as exc:
        raise RegionViolation(f"A is not certified in Q(c^2) for c = {c!r}: {exc}") from exc
    sqrtA = np.linalg.inv(inv_sqrt)
    scale = max(opcore.op_norm(A), 1.0)
    if opcore.op_norm(sqrtA @ sqrtA - A) > SQRT_TOL * scale:
        raise PreconditionViolated("square root from the power integral does not square to A")
    if not np.all(np.isfinite(g.values @ (A @ sqrtA).T)):
        raise PreconditionViolated("A^{3/2} g is not finite on the grid")
    return HyperbolicProblem(op, float(c), sqrtA, g, rep)


def eig_sqrt(A) -> np.ndarray:
    """Principal square root from the eigendecomposition (cross-check only)."""
    return opcore.eig_decompose(A).apply(np.sqrt)


# ---------------------------------------------------------------- splitting


def _check_half_plane(p: HyperbolicProblem, zs) -> None:
    zs = np.asarray(zs, dtype=complex)
    if np.any(zs.real > -p.c + REGION_SLACK * max(1.0, p.c)):
        bad = complex(zs.ravel()[np.argmax(zs.real.ravel())])
        raise RegionViolation(f"split formula needs Re(z) <= -c = {-p.c!r}, got z = {bad!r}")


def split_many(p: HyperbolicProblem, zs, sign: int) -> np.ndarray:
    """Stack of ``(sign i sqrt(A) + z)^{-1}`` from ``(z - sign i sqrt(A)) (A + z^2)^{-1}``."""
    zs = np.asarray(zs, dtype=complex).ravel()
    _check_half_plane(p, zs)
    R2 = opcore.batched_resolvent(p.A, zs * zs)
    return zs[:, None, None] * R2 - sign * 1j * (p.sqrtA[None] @ R2)


def resolvent_split(p: HyperbolicProblem, z: complex, sign: int) -> np.ndarray:
    if sign not in (1, -1):
        raise PreconditionViolated("sign must be +1 or -1")
    return split_many(p, [z], sign)[0]


def direct_split(p: HyperbolicProblem, z: complex, sign: int) -> np.ndarray:
    """Same operator by an LU solve of ``sign i sqrt(A) + z``."""
    return opcore.resolvent(sign * 1j * p.sqrtA, z)


@dataclass
class SplitDecay:
    rows: list  # (ray, sign, |z|, value)
    verdict: bool
    notes: list


def decay_split_check(p: HyperbolicProblem, samples: int = 64, threshold: float = 0.1) -> SplitDecay:
    """``||(+-i sqrt(A) + z)^{-1} A^{-1/2}||`` along rays ``z = -c + r e^{i phi}`` in ``Re z <= -c``."""
    inv_sqrt = np.linalg.inv(p.sqrtA)
    top = 1e4 * max(1.0, p.c, math.sqrt(opcore.op_norm(p.A)))
    r = np.geomspace(1e-2, top, max(samples, 8))
    rows, ok, notes = [], True, []
    for k in (-2, -1, 0, 1, 2):
        phi = math.pi + k * math.pi / 4
        zs = -p.c + r * np.exp(1j * phi)
        zs = zs.real.clip(max=-p.c) + 1j * zs.imag
        for sign in (1, -1):
            vals = opcore.batched_op_norms(split_many(p, zs, sign) @ inv_sqrt[None])
            for z, v in zip(zs, vals):
                rows.append((f"{phi:.4f}", sign, float(abs(z)), float(v)))
            res = assess_decay(vals, threshold)
            if not res.passed:
                ok = False
                notes.append(f"ray {phi:.4f} sign {sign:+d}: {res.reason}")
    return SplitDecay(rows, ok, notes)


# ---------------------------------------------------------------- solver


def _line(c: float, R: float, level: int, T: float, focus) -> contour.DiscretizedContour:
    return contour.fixed_rule(contour.VerticalLine(c), R, level, focus, w_max=LINE_PHASE / T)


def _focus(p: HyperbolicProblem) -> list[float]:
    """|Im| of the poles z = +-i sqrt(a) of (A + z^2)^{-1}."""
    return sorted(set(np.abs(np.linalg.eigvals(p.sqrtA).real).tolist()))


def _r0(p: HyperbolicProblem, c: float) -> float:
    return 16.0 * max(1.0, c, math.sqrt(opcore.op_norm(p.A)))


def _apply_ops(ops: np.ndarray, grids: np.ndarray) -> np.ndarray:
    """ops (k, n, n) acting on grids (k, m+1, n)."""
    return np.einsum("kij,ktj->kti", ops, grids)


def _line_solution(p: HyperbolicProblem, values: np.ndarray, h: float, disc) -> np.ndarray:
    """(1/2 pi i) sum_k w_k (A + z_k^2)^{-1} ((B + z_k)^{-1} g)."""
    A = p.A

    def integrand(z):
        H = _convolve(values, z, h)
        X = opcore.batched_solve(A, z * z, H.transpose(0, 2, 1), stacked=True)
        return X.transpose(0, 2, 1)

    return contour.integrate(disc, integrand, vectorized=True)


@dataclass
class HyperbolicResult:
    f: GridFunction
    radius: float
    level: int
    N: int
    change: float
    c: float


def hyperbolic_contour(p: HyperbolicProblem, tol: float = 1e-6, c: float | None = None) -> HyperbolicResult:
    """Solve on the line ``i R - c``; the radius grows until the result settles."""
    c = p.c if c is None else float(c)
    if c < p.c * (1 - REGION_SLACK):
        raise RegionViolation(f"line offset {c!r} lies outside the certified half-plane Re z <= -{p.c!r}")
    g = p.g
    if g.sup() == 0.0:
        return HyperbolicResult(g.like(np.zeros_like(g.values)), 0.0, 0, 0, 0.0, c)
    focus = _focus(p)
    sizes = {}

    def evaluate(R, level):
        disc = _line(c, R, level, g.T, focus)
        sizes[(R, level)] = disc.N
        return _line_solution(p, g.values, g.h, disc)

    s = contour.settle(evaluate, _r0(p, c), tol * max(g.sup(), 1.0))
    vals = s.value
    vals[0] = 0.0
    return HyperbolicResult(g.like(vals), s.radius, s.level, sizes[(s.radius, s.level)], s.change, c)


def hyperbolic_solve(p: HyperbolicProblem, tol: float = 1e-6) -> GridFunction:
    return hyperbolic_contour(p, tol).f


def sine_kernel_oracle(p: HyperbolicProblem) -> GridFunction:
    """``f(t) = int_0^t sin((t-x) sqrt(A)) / sqrt(A) g(x) dx`` in the eigenbasis,
    integrated exactly against the piecewise-linear interpolant of g.
    """
    eo = opcore.eig_decompose(p.A)
    lam = eo.eigenvalues
    if np.any(np.abs(lam.imag) > 1e-10 * np.abs(lam)) or np.any(lam.real <= 0):
        raise PreconditionViolated("the sine-kernel oracle needs a positive real spectrum")
    om = np.sqrt(lam.real)
    g = p.g
    gt = g.values @ eo.inverse_vectors.T  # eigen-coordinates, (m+1, n)
    h = g.h
    cw, sw = np.cos(om * h), np.sin(om * h)
    # panel moments of cos(om s) and sin(om s) against 1 and s on [0, h]
    c0 = sw / om
    c1 = h * sw / om + (cw - 1.0) / om ** 2
    s0 = (1.0 - cw) / om
    s1 = -h * cw / om + sw / om ** 2
    C = np.zeros(g.n, dtype=complex)
    S = np.zeros(g.n, dtype=complex)
    out = np.zeros_like(gt)
    for j in range(g.m):
        a, b = gt[j + 1], (gt[j] - gt[j + 1]) / h  # g(t_{j+1} - s) = a + b s
        C, S = cw * C - sw * S + a * c0 + b * c1, sw * C + cw * S + a * s0 + b * s1
        out[j + 1] = S / om
    return g.like(out @ eo.vectors.T)


def second_difference_residual(A, f: GridFunction, g: GridFunction) -> float:
    """Grid norm of ``(f_{j+1} - 2 f_j + f_{j-1}) / h^2 + A f_j - g_j`` at interior points."""
    A = opcore.as_cmatrix(A)
    v = f.values
    res = (v[2:] - 2 * v[1:-1] + v[:-2]) / f.h ** 2 + v[1:-1] @ A.T - g.values[1:-1]
    return GridFunction(f.T, res, f.p).norm() if res.shape[0] >= 2 else float(np.linalg.norm(res))


# ---------------------------------------------------------------- identities


def second_derivative(g: GridFunction) -> np.ndarray:
    """Second-order accurate g'' on the grid (exact for quadratics)."""
    d1 = np.gradient(g.values, g.h, axis=0, edge_order=2)
    return np.gradient(d1, g.h, axis=0, edge_order=2)


def default_identity_g(n: int, T: float = 1.0, m: int = 200) -> GridFunction:
    return GridFunction.sample(lambda t: np.outer(t ** 2, np.ones(n)), T, m)


def default_identity_w(n: int, T: float = 1.0, m: int = 200) -> GridFunction:
    return GridFunction.sample(lambda t: np.outer(t, np.ones(n)), T, m)


@dataclass
class IdentityReport:
    residuals: dict
    radius: float
    level: int
    change: float
    c: float
    c_prime: float
    tol: float = 1e-3

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())


def _rel_gap(lhs: np.ndarray, rhs: np.ndarray, g: GridFunction) -> float:
    def nrm(v):
        return g.like(v).norm()

    scale = max(nrm(g.values), nrm(lhs))
    gap = nrm(lhs - rhs)
    if scale == 0.0:
        return 0.0 if gap == 0.0 else math.inf
    return gap / scale


def _identity_values(p: HyperbolicProblem, g: GridFunction, w: GridFunction, c: float, cp: float,
                     R: float, level: int) -> dict:
    n, T, h = p.n, g.T, g.h
    focus = _focus(p)
    Zc = _line(cp, R, level, T, focus)   # outer variable z on i R - c'
    Lc = _line(c, R, level, T, focus)    # inner variable lam on i R - c
    z, wz = Zc.nodes, Zc.weights / contour.TWO_PI_I
    lam, wl = Lc.nodes, Lc.weights / contour.TWO_PI_I
    tail_l, tail_z = contour.line_tail(c, R), contour.line_tail(cp, R)

    hv = second_derivative(g) + g.values @ p.A.T
    P = -split_many(p, z, -1)        # (i sqrt(A) - z)^{-1}
    Q = split_many(p, lam, +1)       # (i sqrt(A) + lam)^{-1}
    Gz = _convolve(hv, z, h)         # (B + z)^{-1} h
    Gl = _convolve(hv, lam, h)       # (B + lam)^{-1} h

    out = {}
    # s(z, lam) = 1 / ((z + lam)(z - lam)), rows z, columns lam
    S = 1.0 / ((z[:, None] + lam[None, :]) * (z[:, None] - lam[None, :]))
    sigma = S @ wl - tail_l              # inner lam-integral; s ~ -1/lam^2
    tau = wz @ S + tail_z                # inner z-integral; s ~ +1/z^2

    Bi_sqrt_g = _convolve(g.values @ p.sqrtA.T, np.zeros(1), h)[0]
    out["Q1"] = (-0.5j * Bi_sqrt_g + 0.5 * g.values,
                 np.einsum("k,kti->ti", wz * sigma, _apply_ops(P, Gz)))
    U = np.einsum("kl,k,kij->lij", S, wz, P)
    out["Q2"] = (np.zeros_like(g.values), -np.einsum("l,lti->ti", wl, _apply_ops(U, Gl)))
    V = np.einsum("kl,l,lij->kij", S, wl, Q)
    out["Q3"] = (0.5j * Bi_sqrt_g + 0.5 * g.values, -np.einsum("k,kti->ti", wz, _apply_ops(V, Gz)))
    out["Q4"] = (np.zeros_like(g.values), np.einsum("l,lti->ti", wl * tau, _apply_ops(Q, Gl)))

    def separable(src: np.ndarray) -> np.ndarray:
        # (1/(2 pi i))^2 int int (i sqrt(A) - z)^{-1} (-i sqrt(A) - lam)^{-1} (B + z)^{-1} (B + lam)^{-1} src
        inner = -np.einsum("l,lti->ti", wl, _apply_ops(Q, _convolve(src, lam, h))) - src * tail_l
        outer = np.einsum("k,kti->ti", wz, _apply_ops(P, _convolve(inner, z, h))) - inner * tail_z
        return outer

    out["satyrdark"] = (g.values, separable(hv))

    def wline(zs):
        H = _convolve(w.values, zs, h)
        X = opcore.batched_solve(p.A, zs * zs, H.transpose(0, 2, 1), stacked=True)
        return X.transpose(0, 2, 1)

    out["Qdark"] = (np.einsum("l,lti->ti", wl, wline(lam)), separable(w.values))
    return out


def verify_identities(p: HyperbolicProblem, c_prime: float | None = None, g: GridFunction | None = None,
                      w: GridFunction | None = None, tol: float = 1e-3, quad_tol: float = 1e-5) -> IdentityReport:
    """Evaluate both sides of the resolvent identities behind the solution formula.

    Double line integrals use ``z`` on ``i R - c'`` and ``lam`` on ``i R - c``.
    Inner integrals of the scalar kernel and of products decaying like
    ``1/lam^2`` get an exact correction for the leading tail term.  The test
    function must satisfy ``g(0) = g'(0) = 0``.
    """
    c = p.c
    cp = c + 1.0 if c_prime is None else float(c_prime)
    if not cp > c:
        raise PreconditionViolated(f"need c' > c, got c' = {cp!r}, c = {c!r}")
    g = default_identity_g(p.n) if g is None else g
    w = default_identity_w(p.n, g.T, g.m) if w is None else w
    if g.n != p.n or w.n != p.n:
        raise PreconditionViolated("test functions must match the size of A")
    gsup = max(g.sup(), 1e-300)
    if np.linalg.norm(g.values[0]) != 0.0 or np.linalg.norm(g.values[1]) > 10 * g.h ** 2 * max(gsup, 1.0):
        raise PreconditionViolated("the test function needs g(0) = g'(0) = 0")
    if np.linalg.norm(w.values[0]) != 0.0:
        raise PreconditionViolated("the second test function needs w(0) = 0")
    if g.sup() == 0.0 and w.sup() == 0.0:
        return IdentityReport({k: 0.0 for k in IDENTITY_NAMES}, 0.0, 0, 0.0, c, cp, tol)

    last = {}

    def evaluate(R, level):
        last[(R, level)] = vals = _identity_values(p, g, w, c, cp, R, level)
        return np.concatenate([np.ravel(vals[k][1]) for k in IDENTITY_NAMES])

    s = contour.settle(evaluate, _r0(p, cp), quad_tol * max(g.sup(), w.sup(), 1.0))
    vals = last[(s.radius, s.level)]
    residuals = {}
    for k in IDENTITY_NAMES:
        lhs, rhs = vals[k]
        ref = w if k == "Qdark" else g
        residuals[k] = _rel_gap(lhs, rhs, ref)
    return IdentityReport(residuals, s.radius, s.level, s.change, c, cp, tol)
