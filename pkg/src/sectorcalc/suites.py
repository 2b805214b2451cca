"""Seeded random operator families and the property suites run by ``verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dpgsum, funcalc, hyperbolic, opcore, parabolic, sectorial

SUITES = ("sector", "funcalc", "dpg", "parabolic", "hyperbolic")


def random_spectrum(rng: np.random.Generator, n: int, max_arg: float, lo: float = 0.2, hi: float = 5.0,
                    min_re: float = 0.1) -> np.ndarray:
    """n points with |arg| <= max_arg, moduli log-uniform in [lo, hi] and Re >= min_re."""
    out = []
    while len(out) < n:
        r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        lam = r * complex(math.cos(a := rng.uniform(-max_arg, max_arg)), math.sin(a))
        if lam.real >= min_re:
            out.append(lam)
    return np.array(out)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


def random_diagonalizable(rng: np.random.Generator, n: int, max_arg: float, spread: float = 0.3) -> np.ndarray:
    """V diag(lam) V^{-1} with a mildly non-normal, well-conditioned V."""
    lam = random_spectrum(rng, n, max_arg)
    V = np.eye(n) + spread * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    return (V * lam[None, :]) @ np.linalg.inv(V)


def commuting_pair(rng: np.random.Generator, n: int, arg_a: float, arg_b: float):
    """A, B diagonal in one random unitary basis."""
    Q = random_unitary(rng, n)
    a = random_spectrum(rng, n, arg_a)
    b = random_spectrum(rng, n, arg_b)
    A = (Q * a[None, :]) @ Q.conj().T
    B = (Q * b[None, :]) @ Q.conj().T
    return A, B


# sector angles used by the random sum-problem family; spectra keep a 0.1 rad margin
THETA_A, THETA_B = 3 * math.pi / 4, math.pi / 3
ARG_A, ARG_B = math.pi - THETA_A - 0.1, math.pi / 2 - 0.1


def sum_family(rng: np.random.Generator, count: int, n: int = 8, samples: int = 1024):
    for _ in range(count):
        A, B = commuting_pair(rng, n, ARG_A, ARG_B)
        yield dpgsum.SumProblem.certified(A, B, THETA_A, THETA_B, samples), A, B


def random_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@dataclass
class Check:
    suite: str
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def sector_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    rep = sectorial.certify_sector([[1.0]], math.pi / 2)
    K = rep.constants["K"]
    out.append(Check("sector", "K_minus_upper", K - 1.05 * math.sqrt(2), 0.0))
    out.append(Check("sector", "lower_minus_K", math.sqrt(2) - K, 0.0))
    ext = sectorial.extend_sector(sectorial.certify([[1.0]], math.pi / 2))
    rec = sectorial.certify_sector([[1.0]], ext.theta)
    out.append(Check("sector", "extension_recertify_excess", rec.constants["K"] - ext.K, 0.0))
    for i in range(3):
        A = random_diagonalizable(rng, 4, math.pi / 4)
        k1 = sectorial.certify_sector(A, math.pi / 2, 1024).constants["K"]
        k10 = sectorial.certify_sector(A, math.pi / 2, 10240).constants["K"]
        out.append(Check("sector", f"budget_stability_{i}", k10 / k1 - 1.05, 0.0))
    return out


def funcalc_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    for i in range(3):
        A = random_diagonalizable(rng, 6, math.pi / 4)
        op = sectorial.certify(A, 3 * math.pi / 4 - 0.05, 1024)
        eo = opcore.eig_decompose(A)
        M = funcalc.frac_power_neg(op, 0.5)
        out.append(Check("funcalc", f"power_half_{i}", _rel(M, eo.apply(lambda x: x ** -0.5)), 1e-8))
        comp = funcalc.frac_power_neg(op, 0.3) @ funcalc.frac_power_neg(op, 0.4)
        out.append(Check("funcalc", f"power_composition_{i}", _rel(comp, funcalc.frac_power_neg(op, 0.7)), 1e-7))
        for w in (0.1, 1.0, 10.0):
            S = funcalc.semigroup(op, w)
            out.append(Check("funcalc", f"semigroup_w{w!r}_{i}", _rel(S, opcore.expm_oracle(A, w)), 1e-8))
        law = funcalc.semigroup(op, 0.3) @ funcalc.semigroup(op, 0.5)
        out.append(Check("funcalc", f"semigroup_law_{i}", _rel(law, funcalc.semigroup(op, 0.8)), 1e-8))
    op = sectorial.certify(np.diag([1.0, 2.0]), 3 * math.pi / 4)
    F = funcalc.hcalc_apply(op, funcalc.lam_exp(op.theta))
    out.append(Check("funcalc", "lam_exp_residue", _rel(F, np.diag([-math.exp(-1), -2 * math.exp(-2)])), 1e-7))
    bad = funcalc.envelope_check(funcalc.constant_function(), op.theta)
    out.append(Check("funcalc", "constant_rejected", 0.0 if not bad.verdict else 1.0, 0.0))
    return out


def dpg_suite(rng: np.random.Generator, count: int = 4) -> list[Check]:
    out = []
    for i, (p, A, B) in enumerate(sum_family(rng, count)):
        y = random_vector(rng, p.n)
        x = dpgsum.kappa_apply(p, y)
        direct = opcore.solve_shifted(A + B, 0.0, y)
        ny = float(np.linalg.norm(y))
        out.append(Check("dpg", f"sum_residual_{i}", dpgsum.sum_residual(p, y), 1e-6))
        out.append(Check("dpg", f"direct_{i}", float(np.linalg.norm(x - direct)) / ny, 1e-6))
        sym = dpgsum.kappa_apply(p.swapped(), y)
        out.append(Check("dpg", f"symmetry_{i}", float(np.linalg.norm(sym - x)) / ny, 1e-6))
        shifted = dpgsum.kappa_apply(p, y, path=p.shifted_path())
        out.append(Check("dpg", f"contour_shift_{i}", float(np.linalg.norm(shifted - x)) / ny, 1e-6))
        out.append(Check("dpg", f"inverse_identity_{i}", dpgsum.inverse_identity_check(p, y), 1e-6))
        out.append(Check("dpg", f"smoothed_cross_{i}", dpgsum.smoothed_cross_check(p, 1.0, y), 1e-6))
        tab = dpgsum.closedness_probe(p, y)
        out.append(Check("dpg", f"closedness_gap_{i}", tab.final_gap, 1e-4))
        out.append(Check("dpg", f"regularity_{i}", dpgsum.regularity_fraction_check(p, 0.5, y), 1e-6))
    return out


def parabolic_suite(rng: np.random.Generator, m: int = 200) -> list[Check]:
    out = []
    op = sectorial.certify([[1.0]], 3 * math.pi / 4)
    g = parabolic.GridFunction.constant([1.0], 1.0, m)
    f = parabolic.parabolic_solve(op, g)
    err = float(np.max(np.abs(f.values[:, 0] - (1 - np.exp(-g.times)))))
    out.append(Check("parabolic", "scalar_const_error", err, 1e-4))
    errs = []
    for mm in (m, 2 * m):
        ge = parabolic.GridFunction.sample(lambda t: np.exp(-t), 1.0, mm)
        fe = parabolic.parabolic_solve(op, ge)
        errs.append(float(np.max(np.abs(fe.values[:, 0] - ge.times * np.exp(-ge.times)))))
    out.append(Check("parabolic", "refinement_ratio_inverse", errs[1] / errs[0], 1 / 3))
    lam = complex(rng.uniform(0.5, 3.0), rng.uniform(-3.0, 3.0))
    lhs, rhs, ok = parabolic.young_bound(g, lam)
    out.append(Check("parabolic", "young_excess", lhs - rhs * (1 + 1 / m), 0.0))
    mu = complex(rng.uniform(0.5, 3.0), rng.uniform(-3.0, 3.0))
    gs = parabolic.GridFunction.sample(lambda t: np.sin(math.pi * t), 1.0, m)
    out.append(Check("parabolic", "resolvent_identity", parabolic.resolvent_identity_residual(gs, lam, mu), 1e-4))
    rl = parabolic.riemann_lebesgue_check(g, 1.0, [1.0, 10.0, 100.0, 1000.0])
    out.append(Check("parabolic", "riemann_lebesgue", 0.0 if rl.verdict else 1.0, 0.0))
    dd = parabolic.derivative_decay_check(gs, 1.0, [1.0, 10.0, 100.0, 1000.0])
    out.append(Check("parabolic", "derivative_decay", 0.0 if dd.verdict else 1.0, 0.0))
    return out


def hyperbolic_suite(rng: np.random.Generator, m: int = 400) -> list[Check]:
    out = []
    g = parabolic.GridFunction.constant([1.0], math.pi, m)
    p = hyperbolic.make_problem(np.diag([4.0]), 2.0, g)
    f = hyperbolic.hyperbolic_solve(p)
    err = float(np.max(np.abs(f.values[:, 0] - (1 - np.cos(2 * g.times)) / 4)))
    out.append(Check("hyperbolic", "sine_oracle_error", err, 1e-3))
    worst = 0.0
    for _ in range(100):
        z = complex(-p.c - rng.exponential(3.0), rng.normal(0.0, 10.0))
        sign = 1 if rng.random() < 0.5 else -1
        d = hyperbolic.resolvent_split(p, z, sign) - hyperbolic.direct_split(p, z, sign)
        worst = max(worst, opcore.op_norm(d))
    out.append(Check("hyperbolic", "split_equivalence", worst, 1e-9))
    rep = hyperbolic.verify_identities(p)
    for k, v in rep.residuals.items():
        out.append(Check("hyperbolic", f"identity_{k}", v, 1e-3))
    return out


def run_suite(name: str, seed: int, m: int | None = None) -> list[Check]:
    rng = np.random.default_rng([seed, SUITES.index(name)])
    if name == "sector":
        return sector_suite(rng)
    if name == "funcalc":
        return funcalc_suite(rng)
    if name == "dpg":
        return dpg_suite(rng)
    if name == "parabolic":
        return parabolic_suite(rng, m or 200)
    if name == "hyperbolic":
        return hyperbolic_suite(rng, m or 400)
    raise ValueError(f"unknown suite {name!r}")
