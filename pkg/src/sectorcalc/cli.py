"""Batch front end: ``sectorcalc <command> [flags]``.

Every command writes ``<out>/<command>.report`` (``key=value`` header, then
CSV tables) and, where there is one, a result file in the matrix, vector or
grid format.  Exit status is 0 when all checks pass, 1 when a certification
or residual check fails or a module raises, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import traceback
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import dpgsum, fileio, funcalc, hyperbolic, opcore, parabolic, sectorial, suites
from .errors import AngleOutOfRange, NotDecaying, NotDiagonalizable, PreconditionViolated, SectorialError, UsageError
from .report import Report

COMMANDS = ("certify-sector", "certify-q", "frac-power", "semigroup", "sum-solve", "parabolic", "hyperbolic", "verify")
SUITE_CHOICES = suites.SUITES + ("all",)


@dataclass
class RunConfig:
    command: str | None = None
    matrix: str | None = None
    matrix_a: str | None = None
    matrix_b: str | None = None
    rhs: str | None = None
    g: str | None = None
    theta: float | None = None
    theta_a: float | None = None
    theta_b: float | None = None
    sector_angle: float | None = None
    c: float | None = None
    c_prime: float | None = None
    w: complex | None = None
    phi: float | None = None
    tol: float | None = None
    samples: int | None = None
    m: int | None = None
    p: float | None = None
    suite: str | None = None
    seed: int | None = None
    verify_identities: bool = False
    out: str = "."

    def effective(self) -> dict:
        """Config entries that shape the results (the output directory does not)."""
        d = asdict(self)
        d.pop("out")
        return d


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
PATH_FIELDS = ("matrix", "matrix_a", "matrix_b", "rhs", "g")
ANGLE_FIELDS = ("theta_a", "theta_b", "sector_angle")

REQUIRED = {
    "certify-sector": ("matrix", "theta"),
    "certify-q": ("matrix", "c"),
    "frac-power": ("matrix", "theta"),
    "semigroup": ("matrix", "w"),
    "sum-solve": ("matrix_a", "matrix_b", "rhs", "theta_a", "theta_b"),
    "parabolic": ("matrix", "g", "theta"),
    "hyperbolic": ("matrix", "g", "c"),
    "verify": ("suite",),
}
OPTIONAL = {
    "certify-sector": ("samples",),
    "certify-q": ("samples",),
    "frac-power": ("sector_angle", "tol", "samples"),
    "semigroup": ("sector_angle", "tol", "samples"),
    "sum-solve": ("phi", "tol", "samples"),
    "parabolic": ("tol", "samples", "p"),
    "hyperbolic": ("tol", "samples", "p", "verify_identities", "c_prime"),
    "verify": ("seed", "m"),
}
DEFAULTS = {"seed": 0, "phi": 0.5}


def flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _complex_arg(text: str) -> complex:
    try:
        return fileio.parse_complex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        m = re.search(r"--[a-z-]+", message)
        raise UsageError(message, m.group(0) if m else None)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sectorcalc", description="Contour-integral calculus for sectorial matrices.",
                 argument_default=argparse.SUPPRESS)
    ap.add_argument("command", nargs="?", choices=COMMANDS, default=None)
    ap.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    for name in PATH_FIELDS:
        ap.add_argument(flag(name), dest=name)
    for name in ("theta", "theta_a", "theta_b", "sector_angle", "c", "c_prime", "phi", "tol", "p"):
        ap.add_argument(flag(name), dest=name, type=float)
    ap.add_argument("--w", dest="w", type=_complex_arg, help="complex time as re,im")
    for name in ("samples", "m", "seed"):
        ap.add_argument(flag(name), dest=name, type=int)
    ap.add_argument("--suite", dest="suite")
    ap.add_argument("--verify-identities", dest="verify_identities", action="store_true")
    ap.add_argument("--out", dest="out")
    return ap


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}", "--config") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object", "--config")
    for key in data:
        if key not in FIELD_NAMES:
            raise UsageError(f"unknown config key {key!r}", flag(key) if isinstance(key, str) else "--config")
    if "w" in data and isinstance(data["w"], str):
        try:
            data["w"] = fileio.parse_complex(data["w"])
        except ValueError as exc:
            raise UsageError(str(exc), "--w") from None
    return data


def _check_number(name, value, kind):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        ok = ok and float(value).is_integer()
    if kind is complex:
        ok = isinstance(value, (int, float, complex)) and not isinstance(value, bool)
    if not ok or not np.isfinite(complex(value)):
        raise UsageError(f"{flag(name)} must be a finite {kind.__name__}, got {value!r}", flag(name))


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.command is None:
        raise UsageError("a command is required", None)
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown command {cfg.command!r}", None)
    allowed = set(REQUIRED[cfg.command]) | set(OPTIONAL[cfg.command]) | {"command", "out"}
    blank = RunConfig()
    for name in FIELD_NAMES:
        value = getattr(cfg, name)
        if value != getattr(blank, name) and name not in allowed:
            raise UsageError(f"{flag(name)} does not apply to {cfg.command}", flag(name))
    for name in REQUIRED[cfg.command]:
        if getattr(cfg, name) is None:
            raise UsageError(f"the following arguments are required: {flag(name)}", flag(name))
    for name, value in DEFAULTS.items():
        if name in allowed and getattr(cfg, name) is None:
            setattr(cfg, name, value)
    for name in ("theta", "theta_a", "theta_b", "sector_angle", "c", "c_prime", "phi", "tol", "p"):
        if getattr(cfg, name) is not None:
            _check_number(name, getattr(cfg, name), float)
            setattr(cfg, name, float(getattr(cfg, name)))
    for name in ("samples", "m", "seed"):
        if getattr(cfg, name) is not None:
            _check_number(name, getattr(cfg, name), int)
            setattr(cfg, name, int(getattr(cfg, name)))
    if cfg.w is not None:
        _check_number("w", cfg.w, complex)
        cfg.w = complex(cfg.w)
    for name in PATH_FIELDS + ("suite", "out"):
        if getattr(cfg, name) is not None and not isinstance(getattr(cfg, name), str):
            raise UsageError(f"{flag(name)} must be a string", flag(name))
    if not isinstance(cfg.verify_identities, bool):
        raise UsageError("--verify-identities must be true or false", "--verify-identities")

    angles = ANGLE_FIELDS + (("theta",) if cfg.command in ("certify-sector", "parabolic") else ())
    for name in angles:
        v = getattr(cfg, name)
        if v is not None and not 0.0 <= v < math.pi:
            raise UsageError(f"{flag(name)} must lie in [0, pi), got {v!r}", flag(name))
    if cfg.command == "frac-power" and not 0.0 < cfg.theta < 1.0:
        raise UsageError(f"--theta is the exponent of A^(-theta) and must lie in (0, 1), got {cfg.theta!r}", "--theta")
    for name in ("c", "c_prime", "tol"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            raise UsageError(f"{flag(name)} must be positive, got {v!r}", flag(name))
    if cfg.phi is not None and not 0.0 < cfg.phi < 1.0:
        raise UsageError(f"--phi must lie in (0, 1), got {cfg.phi!r}", "--phi")
    if cfg.p is not None and not cfg.p > 1.0:
        raise UsageError(f"--p must exceed 1, got {cfg.p!r}", "--p")
    if cfg.samples is not None and cfg.samples < 8:
        raise UsageError(f"--samples must be at least 8, got {cfg.samples}", "--samples")
    if cfg.m is not None and cfg.m < 4:
        raise UsageError(f"--m must be at least 4, got {cfg.m}", "--m")
    if cfg.suite is not None and cfg.suite not in SUITE_CHOICES:
        raise UsageError(f"--suite must be one of {', '.join(SUITE_CHOICES)}", "--suite")
    if cfg.w is not None and cfg.w == 0:
        raise UsageError("--w must be nonzero", "--w")
    return cfg


def parse_config(argv=None) -> RunConfig:
    """Flags (and an optional ``--config`` JSON file) to a validated RunConfig."""
    ns = vars(build_parser().parse_args(argv))
    if ns.get("command") is None:
        ns.pop("command", None)
    merged = {}
    if "config" in ns:
        merged.update(_load_config_file(ns.pop("config")))
    merged.update(ns)
    return _validate(RunConfig(**merged))


# ---------------------------------------------------------------- dispatch


def _require_paths(cfg: RunConfig) -> None:
    for name in PATH_FIELDS:
        path = getattr(cfg, name)
        if path is not None and not Path(path).is_file():
            raise UsageError(f"{flag(name)}: no such file {path}", flag(name))


def _header(rep: Report, cfg: RunConfig) -> None:
    for k, v in cfg.effective().items():
        rep.set(f"config.{k}", v)


def _disc(rep: Report, disc, prefix: str) -> None:
    if disc is None:
        rep.set(prefix + "contour", "none")
        return
    d = disc.describe()
    d["contour"] = _spec_text(disc.spec)
    rep.update(d, prefix)


def _spec_text(spec) -> str:
    return spec.serialize().removeprefix("contour=")


def _max_arg(A) -> float:
    lam = opcore.eigenvalues(A)
    return float(np.max(np.abs(np.angle(lam))))


def default_sector_angle(A, needed: float = 0.0) -> float:
    """Midpoint between the smallest useful angle and the spectral limit pi - max|arg eig|."""
    hi = math.pi - _max_arg(A)
    lo = max(needed, 0.0)
    if not lo < hi:
        raise AngleOutOfRange(f"spectrum reaches |arg| = {_max_arg(A)!r}; no sector angle above {lo!r} fits")
    if needed == 0.0:
        return min(math.pi / 2, 0.5 * hi)
    return 0.5 * (lo + hi)


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))


def cmd_certify_sector(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    cert = sectorial.certify_sector(A, cfg.theta, cfg.samples or sectorial.DEFAULT_BUDGET)
    rep = cert.to_report("certify-sector")
    return rep, cert.verdict


def cmd_certify_q(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    try:
        cert = sectorial.certify_parabola_class(A, cfg.c, cfg.samples or 64)
    except NotDecaying as exc:
        cert = getattr(exc, "report", None)
        if cert is None:
            raise
    return cert.to_report("certify-q"), cert.verdict


def cmd_frac_power(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    angle = cfg.sector_angle if cfg.sector_angle is not None else default_sector_angle(A)
    op = sectorial.certify(A, angle, cfg.samples or sectorial.DEFAULT_BUDGET)
    M, disc = funcalc.power_contour(op, cfg.theta, cfg.tol or 1e-11)
    fileio.write_matrix(out / "frac-power.mat", M)
    rep = Report("frac-power")
    rep.update({"sector_angle": angle, "K": op.K, "exponent": cfg.theta})
    _disc(rep, disc, "")
    ok = _oracle(rep, A, M, lambda lam: lam ** -cfg.theta, 1e-8)
    return rep, ok


def _oracle(rep: Report, A, M, f, limit: float) -> bool:
    try:
        ref = opcore.eig_decompose(A).apply(f)
    except NotDiagonalizable as exc:
        rep.set("oracle", f"unavailable ({exc})")
        return True
    err = _rel(M, ref)
    rep.update({"oracle": "eigendecomposition", "oracle_rel_error": err, "oracle_limit": limit})
    return err <= limit


def cmd_semigroup(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    w = cfg.w
    arg_w = abs(math.atan2(w.imag, w.real))
    angle = cfg.sector_angle if cfg.sector_angle is not None else default_sector_angle(A, math.pi / 2 + arg_w)
    op = sectorial.certify(A, angle, cfg.samples or sectorial.DEFAULT_BUDGET)
    M, disc = funcalc.semigroup_contour(op, w, cfg.tol or 1e-11)
    fileio.write_matrix(out / "semigroup.mat", M)
    rep = Report("semigroup")
    rep.update({"sector_angle": angle, "K": op.K, "w": w})
    _disc(rep, disc, "")
    ref = opcore.expm_oracle(A, w)
    err = _rel(M, ref)
    rep.update({"oracle": "expm", "oracle_rel_error": err, "oracle_limit": 1e-8})
    return rep, err <= 1e-8


SUM_LIMIT = 1e-6
GAP_LIMIT = 1e-4


def cmd_sum_solve(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix_a)
    B = fileio.read_matrix(cfg.matrix_b)
    y = fileio.read_vector(cfg.rhs)
    if B.shape != A.shape or y.shape[0] != A.shape[0]:
        raise UsageError("matrix and vector sizes disagree", "--rhs")
    samples = cfg.samples or sectorial.DEFAULT_BUDGET
    p = dpgsum.SumProblem.certified(A, B, cfg.theta_a, cfg.theta_b, samples)
    tol = cfg.tol or dpgsum.DEFAULT_TOL
    x, disc = dpgsum.kappa_contour(p, y, tol)
    fileio.write_vector(out / "sum-solve.vec", x)
    rep = Report("sum-solve")
    rep.update({"K_A": p.opA.K, "K_B": p.opB.K, "commutation": p.commutation, "rho": p.rho()})
    _disc(rep, disc, "")
    ny = float(np.linalg.norm(y)) or 1.0
    checks = {
        "sum_residual": float(np.linalg.norm(A @ x + B @ x - y)) / ny,
        "direct_gap": float(np.linalg.norm(x - opcore.solve_shifted(A + B, 0.0, y))) / ny,
        "symmetry_gap": float(np.linalg.norm(dpgsum.kappa_apply(p.swapped(), y, tol) - x)) / ny,
        "shift_gap": float(np.linalg.norm(dpgsum.kappa_apply(p, y, tol, p.shifted_path()) - x)) / ny,
        "inverse_identity": dpgsum.inverse_identity_check(p, y, tol),
        "smoothed_cross": dpgsum.smoothed_cross_check(p, 1.0, y, tol),
        "regularity": dpgsum.regularity_fraction_check(p, cfg.phi, y, tol),
    }
    rep.set("shifted_contour", _spec_text(p.shifted_path()))
    ok = True
    t = rep.table("checks", ("check", "value", "limit", "pass"))
    for k, v in checks.items():
        t.add(k, v, SUM_LIMIT, v <= SUM_LIMIT)
        ok &= v <= SUM_LIMIT
    probe = dpgsum.closedness_probe(p, y, tol=tol)
    rep.update({"probe_limit": probe.limit, "probe_sup": probe.sup, "probe_final_gap": probe.final_gap})
    ok &= probe.final_gap <= GAP_LIMIT
    t = rep.table("closedness_probe", ("w", "norm_AKe_wA_y_over_norm_y"))
    for row in probe.rows:
        t.add(*row)
    return rep, bool(ok)


def _with_p(g, p):
    return g if p is None else parabolic.GridFunction(g.T, g.values, p)


RADII = (1.0, 10.0, 100.0, 1000.0)


def cmd_parabolic(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    g = _with_p(fileio.read_grid(cfg.g), cfg.p)
    op = sectorial.certify(A, cfg.theta, cfg.samples or sectorial.DEFAULT_BUDGET)
    res = parabolic.parabolic_contour(op, g, cfg.tol or 1e-10)
    fileio.write_grid(out / "parabolic.grid", res.f)
    rep = Report("parabolic")
    rep.update({"K": op.K, "m": g.m, "T": g.T, "p": g.p})
    _disc(rep, res.contour, "")
    ref = parabolic.duhamel_oracle(A, g)
    err = float(np.max(np.abs(res.f.values - ref.values)))
    limit = 1e-6 * max(1.0, ref.sup())
    rep.update({"oracle": "duhamel", "oracle_max_error": err, "oracle_limit": limit,
                "equation_residual": parabolic.equation_residual(A, res.f, g)})
    ok = err <= limit
    lhs, rhs, young = parabolic.young_bound(g, 1.0)
    rep.update({"young_lhs": lhs, "young_rhs": rhs, "young_pass": young})
    ok &= young
    if g.sup() > 0:
        rl = parabolic.riemann_lebesgue_check(g, 1.0, RADII)
        rep.set("riemann_lebesgue_pass", rl.verdict)
        ok &= rl.verdict
        _table(rep, "riemann_lebesgue", rl)
    if np.linalg.norm(g.values[0]) == 0.0 and g.sup() > 0:
        dd = parabolic.derivative_decay_check(g, 1.0, RADII)
        rep.set("derivative_decay_pass", dd.verdict)
        ok &= dd.verdict
        _table(rep, "derivative_decay", dd)
    else:
        rep.set("derivative_decay_pass", "skipped (needs g(0) = 0)")
    return rep, bool(ok)


def _table(rep: Report, name: str, tab) -> None:
    t = rep.table(name, tab.columns)
    for row in tab.rows:
        t.add(*row)
    for i, note in enumerate(tab.notes):
        rep.set(f"{name}.note{i}", note)


def cmd_hyperbolic(cfg: RunConfig, out: Path):
    A = fileio.read_matrix(cfg.matrix)
    g = _with_p(fileio.read_grid(cfg.g), cfg.p)
    p = hyperbolic.make_problem(A, cfg.c, g, cfg.samples or 64)
    res = hyperbolic.hyperbolic_contour(p, cfg.tol or 1e-6)
    fileio.write_grid(out / "hyperbolic.grid", res.f)
    rep = Report("hyperbolic")
    rep.update({"K": p.opA.K, "extended_angle": p.opA.theta, "c": res.c, "R": res.radius, "N": res.N,
                "level": res.level, "settle_change": res.change, "m": g.m, "T": g.T, "p": g.p})
    ok = True
    try:
        ref = hyperbolic.sine_kernel_oracle(p)
    except (PreconditionViolated, NotDiagonalizable) as exc:
        rep.set("oracle", f"unavailable ({exc})")
    else:
        err = float(np.max(np.abs(res.f.values - ref.values)))
        limit = 1e-3 * max(1.0, ref.sup())
        rep.update({"oracle": "sine-kernel", "oracle_max_error": err, "oracle_limit": limit})
        ok &= err <= limit
    rep.set("second_difference_residual", hyperbolic.second_difference_residual(A, res.f, g))
    split = hyperbolic.decay_split_check(p)
    rep.set("split_decay_pass", split.verdict)
    for i, note in enumerate(split.notes):
        rep.set(f"split_decay.note{i}", note)
    ok &= split.verdict
    if cfg.verify_identities:
        ident = hyperbolic.verify_identities(p, cfg.c_prime)
        rep.update({"identities.c_prime": ident.c_prime, "identities.R": ident.radius,
                    "identities.level": ident.level, "identities_pass": ident.passed})
        t = rep.table("identities", ("identity", "residual", "limit", "pass"))
        for k, v in ident.residuals.items():
            t.add(k, v, ident.tol, v <= ident.tol)
        (out / "hyperbolic.identities.csv").write_text(t.render().split("\n", 1)[1] + "\n", encoding="utf-8")
        ok &= ident.passed
    return rep, bool(ok)


def cmd_verify(cfg: RunConfig, out: Path):
    names = suites.SUITES if cfg.suite == "all" else (cfg.suite,)
    rep = Report("verify")
    t = rep.table("residuals", ("suite", "check", "value", "threshold", "pass"))
    ok = True
    for name in names:
        for chk in suites.run_suite(name, cfg.seed, cfg.m):
            t.add(chk.suite, chk.name, chk.value, chk.threshold, chk.passed)
            ok &= chk.passed
    rep.set("checks", len(t.rows))
    rep.set("failed", sum(1 for r in t.rows if not r[-1]))
    (out / "verify.csv").write_text(t.render().split("\n", 1)[1] + "\n", encoding="utf-8")
    return rep, bool(ok)


HANDLERS = {
    "certify-sector": cmd_certify_sector,
    "certify-q": cmd_certify_q,
    "frac-power": cmd_frac_power,
    "semigroup": cmd_semigroup,
    "sum-solve": cmd_sum_solve,
    "parabolic": cmd_parabolic,
    "hyperbolic": cmd_hyperbolic,
    "verify": cmd_verify,
}


def _origin(exc: BaseException) -> tuple[str, str]:
    """Innermost library frame (outside this module) that raised."""
    module, op = "sectorcalc.cli", "run"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("sectorcalc.") and name != __name__:
            module, op = name, frame.f_code.co_name
    return module, op


def _error_report(cfg: RunConfig, exc: SectorialError, status: str) -> Report:
    rep = Report(cfg.command or "error")
    _header(rep, cfg)
    module, op = _origin(exc)
    rep.update({"status": status, "error": type(exc).__name__, "module": module, "operation": op,
                "message": " ".join(str(exc).split())})
    if getattr(exc, "flag", None):
        rep.set("flag", exc.flag)
    return rep


def _write(out: Path, cfg: RunConfig, rep: Report) -> None:
    (out / f"{cfg.command}.report").write_text(rep.render(), encoding="utf-8")


def run(cfg: RunConfig) -> int:
    """Execute one validated config; returns the exit status."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        _require_paths(cfg)
        body, ok = HANDLERS[cfg.command](cfg, out)
    except UsageError as exc:
        _write(out, cfg, _error_report(cfg, exc, "usage-error"))
        print(f"sectorcalc: {exc}", file=sys.stderr)
        return 2
    except SectorialError as exc:
        rep = _error_report(cfg, exc, "fail")
        print(f"sectorcalc: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write(out, cfg, rep)
        return 1
    rep = Report(body.title)
    _header(rep, cfg)
    rep.set("status", "pass" if ok else "fail")
    rep.update(body.header)
    rep.tables = body.tables
    _write(out, cfg, rep)
    return 0 if ok else 1


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"sectorcalc: usage error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
