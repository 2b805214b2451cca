"""Inverse of A + B for resolvent-commuting sectorial A, B by a single contour.

With ``A in P(theta_A)``, ``B in P(theta_B)`` and ``theta_A + theta_B > pi``::

    K y = (1/2 pi i) int_{Gamma_{theta_B}} (A - z)^{-1} (B + z)^{-1} y dz

The keyhole at theta_B encloses the spectrum of -B and leaves the spectrum of
A outside, so residues give ``K = (A + B)^{-1}``.  In finite dimensions that
is a plain matrix inverse; the diagnostics below exercise the identities
used to show the infinite-dimensional statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contour, opcore
from .errors import (
    AngleOutOfRange,
    CommutationViolation,
    HypothesisViolation,
    PreconditionViolated,
    SingularOperator,
    SingularShift,
)
from .funcalc import frac_power_neg
from .sectorial import SectorialOperator, certify, check_resolvent_commuting

COMMUTE_TOL = 1e-10
DEFAULT_TOL = 1e-10
COMMUTE_SHIFTS = ((0.0, 0.0), (1.0, 2.0), (3.0, 0.5))
EXP_PANEL_CAP = 1.0


def commutation_residual(A, B) -> float:
    """Largest relative resolvent commutator over a few real shift pairs.

    Pairs that hit the spectrum are skipped; at least one must be usable.
    """
    worst, used = 0.0, 0
    for lam, mu in COMMUTE_SHIFTS:
        try:
            chk = check_resolvent_commuting(A, B, lam, mu)
        except SingularShift:
            continue
        used += 1
        worst = max(worst, chk.residual / chk.scale)
    if not used:
        raise SingularShift("every commutation test shift hits the spectrum")
    return worst


@dataclass
class SumProblem:
    opA: SectorialOperator
    opB: SectorialOperator
    commutation: float = field(default=math.nan)
    strict_order: bool = True

    def __post_init__(self):
        if self.opA.n != self.opB.n:
            raise PreconditionViolated("A and B must have the same size")
        ta, tb = self.opA.theta, self.opB.theta
        if not ta + tb > math.pi:
            raise HypothesisViolation(f"need theta_A + theta_B > pi, got {ta!r} + {tb!r}")
        if self.strict_order and not ta > tb:
            raise HypothesisViolation(f"need theta_A > theta_B, got {ta!r} <= {tb!r}")
        if math.isnan(self.commutation):
            self.commutation = commutation_residual(self.opA.A, self.opB.A)
        if self.commutation > COMMUTE_TOL:
            raise CommutationViolation(f"resolvent commutator {self.commutation:.3g} exceeds {COMMUTE_TOL}")

    @classmethod
    def certified(cls, A, B, theta_a: float, theta_b: float, samples: int = 4096) -> "SumProblem":
        return cls(certify(A, theta_a, samples), certify(B, theta_b, samples))

    @property
    def n(self) -> int:
        return self.opA.n

    def swapped(self) -> "SumProblem":
        """Roles of A and B exchanged (the angle ordering is not required)."""
        return SumProblem(self.opB, self.opA, self.commutation, strict_order=False)

    def rho(self) -> float:
        lam = np.concatenate([self.opA.eigenvalues, self.opB.eigenvalues])
        return 0.5 * float(np.min(np.abs(lam)))

    def focus(self) -> list[float]:
        lam = np.concatenate([self.opA.eigenvalues, self.opB.eigenvalues])
        return sorted(set(np.abs(lam).tolist()))

    def default_path(self) -> contour.Keyhole:
        return contour.Keyhole(self.rho(), self.opB.theta)

    def shifted_path(self) -> contour.Keyhole:
        """``c + Gamma_{rho, theta_B - eps}`` with ``eps = (theta_A + theta_B - pi)/4``
        and ``|c| = rho/2``, the sign chosen so that the spectra stay separated.
        """
        eps = (self.opA.theta + self.opB.theta - math.pi) / 4
        rho = self.rho()
        for c in (0.5 * rho, -0.5 * rho):
            path = contour.shifted_keyhole(c, rho, self.opB.theta - eps)
            if separates(path, self.opA.eigenvalues, -self.opB.eigenvalues):
                return path
        raise PreconditionViolated("no shifted keyhole separates the spectra")


def encloses(path: contour.Keyhole, pts) -> np.ndarray:
    d = np.asarray(pts, dtype=complex) - path.shift
    return (np.abs(d) > path.rho) & (np.abs(np.angle(d)) > path.theta)


def separates(path: contour.Keyhole, outside, inside) -> bool:
    return bool(np.all(encloses(path, inside)) and not np.any(encloses(path, outside)))


def _vec(p: SumProblem, y) -> np.ndarray:
    return opcore.as_cvector(y, p.n)


def kappa_contour(p: SumProblem, y, tol: float = DEFAULT_TOL, path: contour.Keyhole | None = None):
    """K y and the discretized path used."""
    y = _vec(p, y)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        return np.zeros_like(y), None
    A, B = p.opA.A, p.opB.A
    if path is None:
        path = p.default_path()
        C = p.opA.K * p.opB.K
    else:
        if not separates(path, p.opA.eigenvalues, -p.opB.eigenvalues):
            raise PreconditionViolated(f"{path.serialize()} does not separate the spectra of A and -B")
        C = (2 * p.opA.K + 1) * (2 * p.opB.K + 1)

    def integrand(z):
        u = opcore.batched_solve(B, z, y)
        return opcore.batched_solve(A, -z, u, stacked=True)

    disc = contour.discretize(path, contour.DoubleResolvent(C * ny), tol * ny, probe=integrand, focus=p.focus())
    return disc.probe_value, disc


def kappa_apply(p: SumProblem, y, tol: float = DEFAULT_TOL, path: contour.Keyhole | None = None) -> np.ndarray:
    return kappa_contour(p, y, tol, path)[0]


def _rel(num: np.ndarray, y: np.ndarray) -> float:
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        return float(np.linalg.norm(num))
    return float(np.linalg.norm(num)) / ny


def sum_residual(p: SumProblem, y, tol: float = DEFAULT_TOL) -> float:
    """||A K y + B K y - y|| / ||y||."""
    y = _vec(p, y)
    x = kappa_apply(p, y, tol)
    return _rel(p.opA.A @ x + p.opB.A @ x - y, y)


def inverse_identity_check(p: SumProblem, w, tol: float = DEFAULT_TOL) -> float:
    """||A^{-1} B^{-1} w - (A^{-1} + B^{-1}) K w|| / ||w||."""
    w = _vec(p, w)
    for op, name in ((p.opA, "A"), (p.opB, "B")):
        try:
            op.require_invertible()
        except SingularOperator:
            raise SingularOperator(f"{name} is not invertible") from None
    A, B = p.opA.A, p.opB.A
    x = kappa_apply(p, w, tol)
    lhs = opcore.solve_shifted(A, 0.0, opcore.solve_shifted(B, 0.0, w))
    rhs = opcore.solve_shifted(A, 0.0, x) + opcore.solve_shifted(B, 0.0, x)
    return _rel(lhs - rhs, w)


def _smoothing_parts(p: SumProblem, w: float, y, tol: float):
    if p.opA.theta <= math.pi / 2:
        raise AngleOutOfRange(f"smoothing by e^(-wA) needs theta_A > pi/2, got {p.opA.theta!r}")
    if not w > 0:
        raise AngleOutOfRange(f"w must be positive, got {w!r}")
    y = _vec(p, y)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        return np.zeros_like(y), np.zeros_like(y)
    A, B = p.opA.A, p.opB.A
    path = contour.Keyhole(p.rho(), p.opA.theta)
    delta = w * abs(math.cos(p.opA.theta))
    C = p.opA.K * p.opB.K * ny

    def base(lam):
        u = opcore.batched_solve(B, -lam, y)
        return np.exp(w * lam)[:, None] * opcore.batched_solve(A, lam, u, stacked=True)

    def both(lam):
        v = base(lam)
        return np.concatenate([v, -lam[:, None] * v], axis=1)

    env = contour.Exponential(delta, C)
    disc = contour.discretize(path, env, tol * ny, probe=both, focus=p.focus(), w_max=EXP_PANEL_CAP)
    n = p.n
    return disc.probe_value[:n], disc.probe_value[n:]


def smoothed_kappa(p: SumProblem, w: float, y, tol: float = DEFAULT_TOL):
    """(K e^{-wA} y, A K e^{-wA} y), both from contour integrals over Gamma_{theta_A}."""
    return _smoothing_parts(p, w, y, tol)


def smoothed_cross_check(p: SumProblem, w: float, y, tol: float = DEFAULT_TOL) -> float:
    """Relative gap between A applied to the first component and the second one."""
    y = _vec(p, y)
    x, Ax = smoothed_kappa(p, w, y, tol)
    return _rel(p.opA.A @ x - Ax, y)


@dataclass
class ProbeTable:
    rows: list  # (w, ||A K e^{-wA} y|| / ||y||)
    limit: float  # ||A K y|| / ||y|| from the unsmoothed inverse
    sup: float

    @property
    def final_gap(self) -> float:
        return abs(self.rows[-1][1] - self.limit) if self.rows else 0.0


def default_ws(levels: int = 20) -> list[float]:
    return [2.0 ** -j for j in range(levels + 1)]


def closedness_probe(p: SumProblem, y, ws=None, tol: float = DEFAULT_TOL) -> ProbeTable:
    """Tabulate ``||A K e^{-wA} y|| / ||y||`` as w decreases to 0."""
    y = _vec(p, y)
    ws = default_ws() if ws is None else list(ws)
    ny = float(np.linalg.norm(y))
    rows = []
    for w in ws:
        _, Ax = smoothed_kappa(p, w, y, tol)
        rows.append((float(w), float(np.linalg.norm(Ax)) / ny if ny else 0.0))
    limit = _rel(p.opA.A @ kappa_apply(p, y, tol), y) if ny else 0.0
    return ProbeTable(rows, limit, max((r[1] for r in rows), default=0.0))


def fractional_contour(p: SumProblem, phi: float, y, tol: float = DEFAULT_TOL) -> np.ndarray:
    """(1/2 pi i) int_{Gamma_{rho, theta_A}} (A + lam)^{-1} (B - lam)^{-1} (-lam)^{phi - 1} y dlam.

    This is the integral over ``-Gamma`` in the variable ``z = -lam`` with the
    orientation kept, so residues at the spectrum of -A give ``A^{phi-1} K y``.
    """
    if not 0 < phi < 1:
        raise PreconditionViolated(f"phi must lie in (0, 1), got {phi!r}")
    y = _vec(p, y)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        return np.zeros_like(y)
    A, B = p.opA.A, p.opB.A
    path = contour.Keyhole(p.rho(), p.opA.theta)

    def integrand(lam):
        u = opcore.batched_solve(B, -lam, y)
        v = opcore.batched_solve(A, lam, u, stacked=True)
        return np.exp((phi - 1.0) * np.log(-lam))[:, None] * v

    env = contour.Power(3.0 - phi, p.opA.K * p.opB.K * ny)
    disc = contour.discretize(path, env, tol * ny, probe=integrand, focus=p.focus())
    return disc.probe_value


def regularity_fraction_check(p: SumProblem, phi: float, y, tol: float = DEFAULT_TOL) -> float:
    """Relative gap between the contour form and ``A^{phi-1}`` composed with ``K y``."""
    y = _vec(p, y)
    p.opA.require_invertible()
    rhs = fractional_contour(p, phi, y, tol)
    lhs = frac_power_neg(p.opA, 1.0 - phi) @ kappa_apply(p, y, tol)
    return _rel(lhs - rhs, y)
