"""Sampled certification of sector and parabola resolvent bounds.

A matrix A belongs to P_K(theta) when every z in the closed sector
``S_theta = {|arg z| <= theta} U {0}`` makes A + z invertible with
``(1 + |z|) ||(A + z)^{-1}|| <= K``.  Membership is decided exactly for the
spectrum and by sampling for the constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import opcore
from .errors import (
    NotDecaying,
    PreconditionViolated,
    SingularOperator,
    SpectrumInRegion,
    SpectrumInSector,
)
from .report import Report

PROVENANCES = ("certified-by-sampling", "asserted-by-user", "extended-by-appendix")
ROUNDING = 1.05
R_MIN, R_MAX = 1e-3, 1e3
DEFAULT_BUDGET = 4096
ANGLE_SLACK = 1e-12


@dataclass
class CertificationReport:
    target: str
    constants: dict
    worst_point: complex | None
    columns: tuple
    table: list
    verdict: bool
    samples_used: int
    notes: list = field(default_factory=list)

    def to_report(self, title: str | None = None) -> Report:
        rep = Report(title or "certification")
        rep.set("target", self.target)
        rep.update(self.constants)
        rep.set("worst_point", self.worst_point)
        rep.set("samples_used", self.samples_used)
        for i, note in enumerate(self.notes):
            rep.set(f"note{i}", note)
        rep.set("verdict", "pass" if self.verdict else "fail")
        t = rep.table("decay", self.columns)
        for row in self.table:
            t.add(*row)
        return rep


@dataclass
class SectorialOperator:
    A: np.ndarray
    K: float
    theta: float
    provenance: str = "asserted-by-user"
    report: CertificationReport | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A = opcore.as_cmatrix(self.A)
        if not (self.K >= 1.0 and math.isfinite(self.K)):
            raise PreconditionViolated(f"sectoriality constant must be a finite K >= 1, got {self.K}")
        if not 0.0 <= self.theta < math.pi:
            raise PreconditionViolated(f"sector angle must lie in [0, pi), got {self.theta}")
        if self.provenance not in PROVENANCES:
            raise PreconditionViolated(f"unknown provenance {self.provenance!r}")
        self._eig = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        if self._eig is None:
            self._eig = opcore.eigenvalues(self.A)
        return self._eig

    def min_abs_eigenvalue(self) -> float:
        return float(np.min(np.abs(self.eigenvalues)))

    def default_rho(self) -> float:
        """Half the distance from 0 to the spectrum."""
        return 0.5 * self.min_abs_eigenvalue()

    def require_invertible(self) -> None:
        scale = max(opcore.op_norm(self.A), 1.0)
        if self.min_abs_eigenvalue() <= self.n * opcore.ULP * scale * 10:
            raise SingularOperator("0 is numerically in the spectrum of the operator")


def in_sector(z, theta: float) -> np.ndarray:
    """Membership in the closed sector S_theta (the origin included)."""
    z = np.asarray(z, dtype=complex)
    return (np.abs(z) == 0) | (np.abs(np.angle(z)) <= theta + ANGLE_SLACK)


def _check_spectrum_outside(A, theta: float) -> None:
    lam = opcore.eigenvalues(A)
    scale = max(opcore.op_norm(A), 1.0)
    hit = in_sector(-lam, theta) | (np.abs(lam) <= A.shape[0] * opcore.ULP * scale)
    if np.any(hit):
        bad = complex(-lam[np.argmax(hit)])
        raise SpectrumInSector(f"z = {bad!r} lies in S_theta and in the spectrum of -A")


def _grid(theta: float, n_ang: int, n_rad: int, r_hi: float):
    radii = np.geomspace(R_MIN, r_hi, n_rad)
    if theta == 0.0:
        angles = np.zeros(1)
    else:
        angles = np.linspace(-theta, theta, n_ang)
    pts = (radii[None, :] * np.exp(1j * angles)[:, None]).ravel()
    # boundary rays sampled four times as densely
    fine = np.geomspace(R_MIN, r_hi, 4 * n_rad)
    edges = [fine] if theta == 0.0 else [fine * np.exp(1j * theta), fine * np.exp(-1j * theta)]
    return np.concatenate([np.zeros(1, dtype=complex), pts] + edges)


def certify_sector(A, theta: float, samples: int = DEFAULT_BUDGET) -> CertificationReport:
    """Estimate K for P_K(theta) by sampling ``(1 + |z|) ||(A + z)^{-1}||``.

    The spectrum of -A is checked exactly first.  Radii run geometrically up
    to ``R_MAX * max(1, ||A||)``; the returned ``K`` is the sampled maximum
    rounded up by 5%.
    """
    A = opcore.as_cmatrix(A)
    if not 0.0 <= theta < math.pi:
        raise PreconditionViolated(f"theta must lie in [0, pi), got {theta}")
    if samples < 100:
        raise PreconditionViolated(f"sample budget must be at least 100, got {samples}")
    _check_spectrum_outside(A, theta)

    side = max(10, int(round(math.sqrt(samples))))
    r_hi = R_MAX * max(1.0, opcore.op_norm(A))
    zs = _grid(theta, side, side, r_hi)
    norms = opcore.batched_resolvent_norms(A, zs)
    if not np.all(np.isfinite(norms)):
        bad = complex(zs[np.argmax(~np.isfinite(norms))])
        raise SpectrumInSector(f"A + zI is singular at sampled z = {bad!r}")
    vals = (1.0 + np.abs(zs)) * norms
    k = int(np.argmax(vals))
    K_sampled = float(vals[k])
    K = max(1.0, ROUNDING * K_sampled)

    # decay-sequence table: worst value over angles at each radius
    radii = np.abs(zs)
    order = np.argsort(radii, kind="stable")
    table = []
    r_sorted, v_sorted = radii[order], vals[order]
    uniq = np.unique(r_sorted)
    for r in uniq[:: max(1, len(uniq) // 64)]:
        table.append((float(r), float(np.max(v_sorted[r_sorted == r]))))
    return CertificationReport(
        target="P_K(theta)",
        constants={"theta": float(theta), "K": K, "K_sampled": K_sampled, "r_max": r_hi},
        worst_point=complex(zs[k]),
        columns=("abs_z", "max_scaled_resolvent_norm"),
        table=table,
        verdict=True,
        samples_used=int(zs.size),
    )


def certify(A, theta: float, samples: int = DEFAULT_BUDGET) -> SectorialOperator:
    """Certify A at angle theta and wrap it as a SectorialOperator."""
    rep = certify_sector(A, theta, samples)
    return SectorialOperator(A, rep.constants["K"], float(theta), "certified-by-sampling", rep)


def extended_angle(theta: float, K: float) -> float:
    """Opening of the largest sector inside the union of disks
    ``|z - lam| <= (1 + |lam|) / (2K)`` over ``lam`` in S_theta.

    Along the ray at distance r the disk subtends the half-angle
    ``arcsin((1 + r) / (2 K r))``, whose infimum over r is ``arcsin(1/(2K))``.
    """
    return min(theta + math.asin(1.0 / (2.0 * K)), math.nextafter(math.pi, 0.0))


def extend_sector(op: SectorialOperator) -> SectorialOperator:
    """Enlarge the certified sector using the disks where the Neumann series converges.

    For ``|z - lam| <= (1 + |lam|)/(2K)`` one has
    ``(A + z)^{-1} = (A + lam)^{-1} sum_k ((lam - z)(A + lam)^{-1})^k`` with
    ratio at most 1/2, which gives ``(1 + |z|) ||(A + z)^{-1}|| <= 2K + 1``.
    """
    return SectorialOperator(
        op.A,
        2.0 * op.K + 1.0,
        extended_angle(op.theta, op.K),
        "extended-by-appendix",
        op.report,
    )


def disk_radius(lam: complex, K: float) -> float:
    return (1.0 + abs(lam)) / (2.0 * K)


class CommutationCheck(NamedTuple):
    passed: bool
    residual: float
    scale: float


def check_resolvent_commuting(A, B, lam: complex, mu: complex, rtol: float = 1e-10) -> CommutationCheck:
    """Spectral norm of the commutator of (A + lam)^{-1} and (B + mu)^{-1}."""
    RA = opcore.resolvent(A, lam)
    RB = opcore.resolvent(B, mu)
    residual = opcore.op_norm(RA @ RB - RB @ RA)
    scale = opcore.op_norm(RA) * opcore.op_norm(RB)
    return CommutationCheck(residual <= rtol * scale, residual, scale)


# ---------------------------------------------------------------- parabola class


@dataclass(frozen=True)
class ParabolaRegion:
    """``{z : Re z >= c - (Im z)^2 / (4c)}``, the region right of a parabola."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise PreconditionViolated("parabola parameter c must be positive")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        out = z.real >= self.c - z.imag ** 2 / (4.0 * self.c)
        return bool(out) if out.ndim == 0 else out

    def boundary(self, y):
        y = np.asarray(y, dtype=float)
        return self.c - y ** 2 / (4.0 * self.c) + 1j * y

    def entry_radius(self, phi: float) -> float:
        """Smallest r with r e^{i phi} in the region (inf if the ray never enters)."""
        d = 1.0 + math.cos(phi)
        return 2.0 * self.c / d if d > 0 else math.inf


class DecayVerdict(NamedTuple):
    passed: bool
    knee: int
    reason: str


def assess_decay(values, threshold: float = 0.1, rtol: float = 1e-9) -> DecayVerdict:
    """Finite stand-in for ``o(1)``: non-increasing after the maximum and a
    final value at most ``threshold`` times the first one.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return DecayVerdict(False, 0, "too few samples")
    if not np.all(np.isfinite(v)):
        return DecayVerdict(False, 0, "non-finite sample")
    knee = int(np.argmax(v))
    tail = v[knee:]
    rises = np.diff(tail) > rtol * np.maximum(np.abs(tail[:-1]), 1e-300)
    if np.any(rises):
        return DecayVerdict(False, knee, f"increase after the knee at sample {knee + 1 + int(np.argmax(rises))}")
    if v[0] == 0.0 and v[-1] == 0.0:
        return DecayVerdict(True, knee, "identically zero")
    if v[-1] > threshold * v[0]:
        return DecayVerdict(False, knee, f"last sample {v[-1]!r} above {threshold} x first {v[0]!r}")
    return DecayVerdict(True, knee, "decaying")


def _region_sweeps(region: ParabolaRegion, n: int, r_top: float) -> list[tuple[str, np.ndarray]]:
    c = region.c
    y_top = 2.0 * math.sqrt(c * r_top)
    y = np.concatenate([[0.0], np.geomspace(1e-2 * c, y_top, n - 1)])
    sweeps = [("boundary+", region.boundary(y)), ("boundary-", region.boundary(-y))]
    for k in (0, 1, -1, 2, -2, 3, -3):
        phi = k * math.pi / 4
        r0 = region.entry_radius(phi)
        r = np.geomspace(r0, max(r_top, 100 * r0), n)
        sweeps.append((f"ray{phi:+.4f}", r * np.exp(1j * phi)))
    return sweeps


def certify_parabola_class(A, c: float, samples: int = 64, threshold: float = 0.1,
                           inv_sqrt=None, sector_samples: int = 1024) -> CertificationReport:
    """Sampled check that A belongs to Q(c).

    Tabulates ``q1 = ||(A+z)^{-1}||`` and ``q2 = |z|^{1/2} ||(A+z)^{-1} A^{-1/2}||``
    along the parabola boundary (both halves) and along seven rays entering
    the region, and requires each column to decay along each sweep
    (see :func:`assess_decay`).  The limit is read as ``|z| -> oo`` inside
    the region.  ``samples`` is the number of points per sweep.
    """
    A = opcore.as_cmatrix(A)
    region = ParabolaRegion(c)
    lam = opcore.eigenvalues(A)
    scale = max(opcore.op_norm(A), 1.0)
    if np.min(np.abs(lam)) <= 10 * A.shape[0] * opcore.ULP * scale:
        raise SingularOperator("A is not invertible")
    try:
        base = certify(A, 0.0, sector_samples)
    except SpectrumInSector as exc:
        raise PreconditionViolated(f"A is not in P(0): {exc}") from exc
    inside = region.contains(-lam)
    if np.any(inside):
        raise SpectrumInRegion(f"-A has spectrum {complex(-lam[np.argmax(inside)])!r} inside the parabola region")
    if inv_sqrt is None:
        from .funcalc import frac_power_neg

        inv_sqrt = frac_power_neg(extend_sector(base), 0.5)

    r_top = 1e4 * max(c, scale)
    rows, verdict, worst, worst_val, used = [], True, None, -1.0, 0
    notes = ["o(1) read as |z| -> infinity inside the region"]
    for name, zs in _region_sweeps(region, max(samples, 8), r_top):
        n1 = opcore.batched_resolvent_norms(A, zs)
        if not np.all(np.isfinite(n1)):
            raise SpectrumInRegion(f"A + zI singular on sweep {name}")
        X = opcore.batched_solve(A, zs, inv_sqrt)
        q2 = np.sqrt(np.abs(zs)) * opcore.batched_op_norms(X)
        used += zs.size
        for z, a, b in zip(zs, n1, q2):
            rows.append((name, float(abs(z)), float(a), float(b)))
        for label, col in (("q1", n1), ("q2", q2)):
            res = assess_decay(col, threshold)
            if not res.passed:
                verdict = False
                notes.append(f"{name}/{label}: {res.reason}")
        k = int(np.argmax(q2))
        if q2[k] > worst_val:
            worst, worst_val = complex(zs[k]), float(q2[k])
    rep = CertificationReport(
        target="Q(c)",
        constants={"c": float(c), "threshold": threshold, "K0": base.K, "max_q2": worst_val},
        worst_point=worst,
        columns=("sweep", "abs_z", "q1", "q2"),
        table=rows,
        verdict=verdict,
        samples_used=used,
        notes=notes,
    )
    if not verdict:
        err = NotDecaying("; ".join(notes[1:]))
        err.report = rep
        raise err
    return rep
