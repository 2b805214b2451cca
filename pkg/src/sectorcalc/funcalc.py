"""Functions of a sectorial matrix by resolvent contour integrals.

All three constructions integrate ``F(lam) (A + lam)^{-1}`` over a keyhole
that encloses the spectrum of -A and excludes the small disk ``|lam| < rho``:

* negative fractional powers, ``F(lam) = (-lam)^{-theta}`` (principal branch;
  the cut along lam >= 0 stays outside the enclosed region),
* the semigroup, ``F(lam) = e^{w lam}``,
* exponentially decaying holomorphic families ``F = f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import contour, opcore
from .errors import AngleOutOfRange, EnvelopeViolation, PreconditionViolated, SingularOperator
from .sectorial import CertificationReport, SectorialOperator, extend_sector

DELTA_SAFETY = 0.9
ARG_SLACK = 1e-12
EXP_PANEL_CAP = 1.0  # log-radius panel cap for oscillating exponential integrands


def _require_invertible(op: SectorialOperator) -> None:
    try:
        op.require_invertible()
    except SingularOperator:
        raise SingularOperator("0 is (numerically) in the spectrum of -A") from None


def _keyhole_rho(op: SectorialOperator, rho: float | None) -> float:
    lo = op.min_abs_eigenvalue()
    if rho is None:
        return 0.5 * lo
    if not 0 < rho < lo:
        raise PreconditionViolated(f"rho must lie in (0, {lo!r}) to keep the spectrum enclosed")
    return float(rho)


def _focus(op: SectorialOperator) -> list[float]:
    return sorted(set(np.abs(op.eigenvalues).tolist()))


# ---------------------------------------------------------------- powers


@dataclass(frozen=True)
class PowerExponent:
    """Exponent of a single-contour power; ``0 < |theta| < 1``."""

    theta: float

    def __post_init__(self):
        if not (0.0 < abs(self.theta) < 1.0):
            raise PreconditionViolated(f"power exponent must satisfy 0 < |theta| < 1, got {self.theta}")


def power_contour(op: SectorialOperator, theta: float, tol: float = 1e-11, rho: float | None = None):
    """A^{-theta} and the discretized path that produced it.

    The scalar part ``(-lam)^{-theta} / lam`` integrates to zero over the
    keyhole, so subtracting it replaces ``(A+lam)^{-1}`` by
    ``-A (A+lam)^{-1} / lam``: same integral, one extra power of decay.
    """
    PowerExponent(theta)
    if not 0 < theta < 1:
        raise PreconditionViolated("negative powers need theta in (0, 1)")
    _require_invertible(op)
    if op.theta == 0.0:
        op = extend_sector(op)
    angle = min(op.theta, math.pi / 2)
    A = op.A
    path = contour.Keyhole(_keyhole_rho(op, rho), angle)
    envelope = contour.Power(2.0 + theta, op.K * max(opcore.op_norm(A), 1.0))

    def integrand(lam):
        AR = opcore.batched_solve(A, lam, A)
        scal = -np.exp(-theta * np.log(-lam)) / lam
        return scal[:, None, None] * AR

    disc = contour.discretize(path, envelope, tol, probe=integrand, focus=_focus(op))
    return disc.probe_value, disc


def frac_power_neg(op: SectorialOperator, theta: float, tol: float = 1e-11, rho: float | None = None) -> np.ndarray:
    """A^{-theta} for 0 < theta < 1."""
    return power_contour(op, theta, tol, rho)[0]


class PowerMap:
    """y -> A^{theta} y realized as A (A^{theta - 1} y)."""

    def __init__(self, op: SectorialOperator, theta: float, tol: float = 1e-11):
        if not 0 < theta < 1:
            raise PreconditionViolated("positive powers need theta in (0, 1)")
        self.theta = theta
        self.matrix = op.A @ frac_power_neg(op, 1.0 - theta, tol)

    def __call__(self, y) -> np.ndarray:
        return self.matrix @ np.asarray(y, dtype=complex)


def frac_power_pos(op: SectorialOperator, theta: float, tol: float = 1e-11) -> PowerMap:
    return PowerMap(op, theta, tol)


# ---------------------------------------------------------------- semigroup


def semigroup_angle(theta_ext: float, arg_w: float) -> float:
    """Ray angle on which |e^{w lam}| decays for both rays, as central as possible."""
    lo = math.pi / 2 + abs(arg_w)
    hi = min(theta_ext, 1.5 * math.pi - abs(arg_w))
    if not lo < hi:
        raise AngleOutOfRange(f"no decaying ray angle for arg w = {arg_w!r}")
    return 0.5 * (lo + hi)


def semigroup_contour(op: SectorialOperator, w: complex, tol: float = 1e-11, rho: float | None = None):
    w = complex(w)
    if op.theta <= math.pi / 2:
        raise AngleOutOfRange(f"the semigroup needs theta_A > pi/2, got {op.theta!r}")
    if w == 0:
        raise AngleOutOfRange("w must be nonzero")
    arg_w = math.atan2(w.imag, w.real)
    if abs(arg_w) > op.theta - math.pi / 2 + ARG_SLACK:
        raise AngleOutOfRange(f"|arg w| = {abs(arg_w)!r} exceeds theta_A - pi/2 = {op.theta - math.pi / 2!r}")
    _require_invertible(op)
    ext = extend_sector(op)
    angle = semigroup_angle(ext.theta, arg_w)
    K = op.K if angle <= op.theta else ext.K
    delta = -abs(w) * max(math.cos(angle + arg_w), math.cos(angle - arg_w))
    path = contour.Keyhole(_keyhole_rho(op, rho), angle)
    A = op.A

    def integrand(lam):
        R = opcore.batched_resolvent(A, lam)
        return np.exp(w * lam)[:, None, None] * R

    disc = contour.discretize(path, contour.Exponential(delta, K), tol, probe=integrand,
                              focus=_focus(op), w_max=EXP_PANEL_CAP)
    return disc.probe_value, disc


def semigroup(op: SectorialOperator, w: complex, tol: float = 1e-11) -> np.ndarray:
    """e^{-wA} for |arg w| <= theta_A - pi/2, w != 0."""
    return semigroup_contour(op, w, tol)[0]


# ---------------------------------------------------------------- H^{e,oo} calculus


@dataclass
class HeFunction:
    """Holomorphic family off a sector with ``||f(lam)|| <= c |lam|/(1+|lam|) e^{-delta |lam|}``.

    ``evaluator`` maps an array of points to an array of scalars (``scalar``)
    or to a stack of matrices commuting with the resolvents of A.
    """

    evaluator: Callable
    c: float
    delta: float
    scalar: bool = True
    commutes: bool = True
    name: str = "f"

    def __call__(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        return np.asarray(self.evaluator(lam), dtype=complex)

    def bound(self, lam) -> np.ndarray:
        r = np.abs(lam)
        return self.c * r / (1.0 + r) * np.exp(-self.delta * r)

    def combine(self, alpha: complex, other: "HeFunction", beta: complex) -> "HeFunction":
        """alpha f + beta g, with constants that keep the envelope valid."""
        if self.scalar != other.scalar:
            raise PreconditionViolated("cannot combine scalar and matrix-valued families")
        f, g = self.evaluator, other.evaluator
        return HeFunction(
            lambda lam: alpha * f(lam) + beta * g(lam),
            abs(alpha) * self.c + abs(beta) * other.c,
            min(self.delta, other.delta),
            self.scalar,
            self.commutes and other.commutes,
            f"({alpha}*{self.name}+{beta}*{other.name})",
        )


def _exp_envelope_constant(eps: float) -> float:
    """sup_r (1 + r) e^{-eps r}."""
    if eps >= 1:
        return 1.0
    return math.exp(eps - 1.0) / eps


def lam_exp(theta: float, scale: float = 1.0) -> HeFunction:
    """lam -> lam e^{scale lam} with constants valid outside S_theta, theta > pi/2."""
    if theta <= math.pi / 2:
        raise AngleOutOfRange("lam e^lam decays off the sector only for theta > pi/2")
    decay = scale * abs(math.cos(theta))
    delta = DELTA_SAFETY * decay
    c = _exp_envelope_constant(decay - delta)
    return HeFunction(lambda lam: lam * np.exp(scale * lam), c, delta, name="lam*exp(lam)")


def zero_function() -> HeFunction:
    return HeFunction(lambda lam: np.zeros(lam.shape, dtype=complex), 0.0, 1.0, name="0")


def constant_function(value: complex = 1.0) -> HeFunction:
    return HeFunction(lambda lam: np.full(lam.shape, value, dtype=complex), 1.0, 1.0, name="const")


def _off_sector_points(theta: float, samples: int) -> np.ndarray:
    side = max(10, int(round(math.sqrt(samples))))
    radii = np.geomspace(1e-3, 1e3, side)
    half = np.linspace(theta, math.pi, max(2, side // 2))
    angles = np.unique(np.concatenate([half, -half]))
    return (radii[None, :] * np.exp(1j * angles)[:, None]).ravel()


def envelope_check(f: HeFunction, theta: float, samples: int = 4096, A=None,
                   rtol: float = 1e-10) -> CertificationReport:
    """Sample the decay bound on rays ``theta <= |arg lam| <= pi``.

    For matrix-valued families and a given A, commutators with
    ``(A + z)^{-1}`` at a few real z are checked too.
    """
    if samples < 100:
        raise PreconditionViolated(f"sample budget must be at least 100, got {samples}")
    lam = _off_sector_points(theta, samples)
    vals = f(lam)
    if f.scalar:
        norms = np.abs(vals)
    else:
        norms = opcore.batched_op_norms(vals)
    bound = f.bound(lam)
    ok = norms <= bound * (1 + 1e-12) + 1e-300
    excess = np.where(bound > 0, norms / np.where(bound > 0, bound, 1.0), np.where(norms > 0, np.inf, 0.0))
    worst = int(np.argmax(excess))
    notes = []
    comm_ok = True
    if A is not None and not f.scalar:
        A = opcore.as_cmatrix(A)
        picks = vals[:: max(1, len(vals) // 16)]
        for z in (0.5, 1.0, 4.0):
            R = opcore.resolvent(A, z)
            for F in picks:
                res = opcore.op_norm(F @ R - R @ F)
                if res > rtol * max(opcore.op_norm(F) * opcore.op_norm(R), 1e-300):
                    comm_ok = False
        if not comm_ok:
            notes.append("family does not commute with the resolvent")
    radii = np.abs(lam)
    table = [(float(r), float(np.max(excess[radii == r]))) for r in np.unique(radii)]
    return CertificationReport(
        target="He(theta)",
        constants={"theta": float(theta), "c": f.c, "delta": f.delta, "max_ratio": float(excess[worst])},
        worst_point=complex(lam[worst]),
        columns=("abs_lambda", "max_norm_over_bound"),
        table=table,
        verdict=bool(np.all(ok)) and comm_ok,
        samples_used=int(lam.size),
        notes=notes,
    )


def hcalc_contour(op: SectorialOperator, f: HeFunction, tol: float = 1e-11, rho: float | None = None,
                  check: bool = True):
    if op.theta <= math.pi / 2:
        raise AngleOutOfRange(f"the calculus needs theta_A > pi/2, got {op.theta!r}")
    if check:
        rep = envelope_check(f, op.theta, A=op.A)
        if not rep.verdict:
            raise EnvelopeViolation(
                f"{f.name} exceeds c |lam|/(1+|lam|) e^(-delta |lam|) at lam = {rep.worst_point!r}"
            )
    _require_invertible(op)
    n = op.n
    if f.c == 0.0:
        return np.zeros((n, n), dtype=complex), None
    if f.delta <= 0:
        raise EnvelopeViolation("the family must decay exponentially (delta > 0)")
    A = op.A
    path = contour.Keyhole(_keyhole_rho(op, rho), op.theta)

    def integrand(lam):
        R = opcore.batched_resolvent(A, lam)
        vals = f(lam)
        if f.scalar:
            return vals[:, None, None] * R
        return vals @ R

    disc = contour.discretize(path, contour.Exponential(f.delta, f.c * op.K), tol, probe=integrand,
                              focus=_focus(op), w_max=EXP_PANEL_CAP)
    return disc.probe_value, disc


def hcalc_apply(op: SectorialOperator, f: HeFunction, tol: float = 1e-11) -> np.ndarray:
    """f(-A) = (1/2 pi i) int f(lam) (A + lam)^{-1} dlam over the keyhole at theta_A."""
    return hcalc_contour(op, f, tol)[0]


def sup_norm(f: HeFunction, theta: float, samples: int = 4096) -> float:
    lam = _off_sector_points(theta, samples)
    vals = f(lam)
    return float(np.max(np.abs(vals) if f.scalar else opcore.batched_op_norms(vals)))


def estimate_calculus_constant(op: SectorialOperator, family, samples: int = 4096) -> float:
    """Largest observed ``||f(-A)|| / sup ||f||`` over a family of functions.

    Only an empirical lower estimate of the calculus bound; nothing is claimed
    about its true value.
    """
    best = 0.0
    for f in family:
        sup = sup_norm(f, op.theta, samples)
        if sup > 0:
            best = max(best, opcore.op_norm(hcalc_apply(op, f)) / sup)
    return best
