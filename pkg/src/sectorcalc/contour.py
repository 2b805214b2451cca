"""Integration paths and their Gauss-Legendre discretization.

Three path families are supported:

* ``Keyhole(rho, theta, shift)`` -- the positively oriented path
  ``shift + {rho e^{i phi}: theta <= phi <= 2 pi - theta} U {r e^{+-i theta}: r >= rho}``.
  It runs in along the lower ray, clockwise around the origin through the
  negative axis, and out along the upper ray, so it encircles the region
  ``|arg(z - shift)| > theta`` counterclockwise.  ``rho = 0`` gives the two
  bare rays.
* ``VerticalLine(c)`` -- the line ``i R - c`` traversed upward.

Rays are parametrized logarithmically (``r = rho e^s``) so that algebraic
decay turns into exponential decay in the parameter; vertical lines use
linear panels whose width is capped to follow oscillation.  Panels are graded
geometrically away from *focus* points (where the integrand is known to vary
fastest, typically the spectrum) and refined by halving every panel until the
integral stops moving.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NoConvergence, NonFiniteIntegrand, QuadratureFailure

PANEL_NODES = 32
CHUNK = 2048
TWO_PI_I = 2j * math.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(PANEL_NODES)


def default_workers() -> int:
    env = os.environ.get("SECTORIAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Keyhole:
    rho: float
    theta: float
    shift: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"keyhole angle must lie in (0, pi), got {self.theta}")
        if self.rho < 0:
            raise ValueError("keyhole radius must be nonnegative")

    def serialize(self) -> str:
        return f"contour=keyhole;rho={self.rho!r};theta={self.theta!r};shift={self.shift!r}"


@dataclass(frozen=True)
class VerticalLine:
    """The line ``i R - c``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("vertical line offset c must be positive")

    def serialize(self) -> str:
        return f"contour=vline;c={self.c!r}"


@dataclass(frozen=True)
class Circle:
    """Counterclockwise circle; closed probe path for testing the machinery."""

    center: complex
    radius: float

    def serialize(self) -> str:
        return f"contour=circle;center={complex(self.center)!r};r={self.radius!r}"


def shifted_keyhole(c: float, rho: float, theta: float) -> Keyhole:
    """``c + Gamma_{rho, theta}``."""
    return Keyhole(rho=rho, theta=theta, shift=c)


ContourSpec = Keyhole | VerticalLine


@dataclass(frozen=True)
class DecayEnvelope:
    """Bound ``||F(z)|| <= C * t^{-order}`` or ``C * exp(-delta (t - base))``
    in terms of the path parameter ``t`` (radius on rays, ``|Im z|`` on lines).
    """

    kind: str
    order: float = 0.0
    delta: float = 0.0
    constant: float = 1.0

    def describe(self) -> str:
        if self.kind == "exponential":
            return f"exponential(delta={self.delta!r},C={self.constant!r})"
        return f"power(order={self.order!r},C={self.constant!r})"

    def tail(self, R: float, base: float = 0.0, branches: int = 2) -> float:
        C = self.constant
        if self.kind == "exponential":
            return branches * C * math.exp(-self.delta * (R - base)) / self.delta
        if self.order <= 1:
            return math.inf
        return branches * C * R ** (1.0 - self.order) / (self.order - 1.0)

    def radius(self, tol: float, base: float = 0.0) -> float:
        """Truncation parameter R with both tails together at most tol/50."""
        C = max(self.constant, 1e-300)
        if self.kind == "exponential":
            if self.delta <= 0:
                raise NoConvergence("exponential envelope needs delta > 0")
            return base + math.log(max(100.0 * C / (self.delta * tol), 1.0)) / self.delta
        if self.order <= 1:
            raise NoConvergence(
                f"tail of a power-{self.order} envelope diverges on an unbounded path; "
                "an additional decay factor is required"
            )
        p = self.order
        return (100.0 * C / ((p - 1.0) * tol)) ** (1.0 / (p - 1.0))


def Resolvent(constant: float = 1.0) -> DecayEnvelope:
    return DecayEnvelope("power", order=1.0, constant=constant)


def DoubleResolvent(constant: float = 1.0) -> DecayEnvelope:
    return DecayEnvelope("power", order=2.0, constant=constant)


def Power(order: float, constant: float = 1.0) -> DecayEnvelope:
    return DecayEnvelope("power", order=float(order), constant=constant)


def Exponential(delta: float, constant: float = 1.0) -> DecayEnvelope:
    return DecayEnvelope("exponential", delta=float(delta), constant=constant)


@dataclass
class DiscretizedContour:
    spec: ContourSpec
    nodes: np.ndarray
    weights: np.ndarray  # dz/dt * quadrature weight; 1/(2 pi i) applied in integrate()
    radius: float
    envelope: DecayEnvelope
    tail_estimate: float
    level: int = 0
    refinement_change: float = math.nan
    probe_value: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return int(self.nodes.shape[0])

    def to_csv(self) -> str:
        rows = ["re(z),im(z),re(w),im(w)"]
        for z, w in zip(self.nodes, self.weights):
            rows.append(f"{z.real!r},{z.imag!r},{w.real!r},{w.imag!r}")
        return "\n".join(rows) + "\n"

    def describe(self) -> dict:
        return {
            "contour": self.spec.serialize(),
            "R": self.radius,
            "N": self.N,
            "level": self.level,
            "envelope": self.envelope.describe(),
            "tail_estimate": self.tail_estimate,
        }


# ---------------------------------------------------------------- panels


def _graded_breaks(a: float, b: float, focus, w0: float, growth: float, w_max: float) -> list[float]:
    """Breakpoints on [a, b]: width w0 at focus points, growing linearly with distance.

    Focus points inside the interval are forced to be breakpoints.
    """
    pts = np.asarray(sorted(set([f for f in focus if a <= f <= b] + [a])))
    breaks = [a]
    s = a
    while s < b:
        d = float(np.min(np.abs(pts - s)))
        nxt = s + min(w0 + growth * d, w_max)
        ahead = pts[pts > s + 0.25 * w0]
        if ahead.size and ahead[0] < nxt:
            nxt = float(ahead[0])
        if nxt > b - 0.25 * w0:
            nxt = b
        breaks.append(nxt)
        s = nxt
    return breaks


def _gl_on(breaks, level: int):
    """Gauss-Legendre nodes/weights on the given panels, each split into 2**level."""
    br = np.asarray(breaks, dtype=float)
    if level:
        fine = [br[0]]
        k = 2 ** level
        for lo, hi in zip(br[:-1], br[1:]):
            fine.extend(lo + (hi - lo) * np.arange(1, k + 1) / k)
        br = np.asarray(fine)
    lo, hi = br[:-1, None], br[1:, None]
    half = 0.5 * (hi - lo)
    t = (0.5 * (hi + lo) + half * _GL_X[None, :]).ravel()
    w = (half * _GL_W[None, :]).ravel()
    return t, w


@dataclass(frozen=True)
class _Layout:
    kind: str          # "log_ray", "lin_ray", "arc", "line"
    breaks: tuple
    sign: int = 1      # ray direction (+1 upper ray, -1 lower ray)


def _layouts(spec: ContourSpec, R: float, focus, w0, growth, w_max) -> list[tuple[_Layout, float]]:
    """Panel layouts paired with the radius their parametrization starts from."""
    if isinstance(spec, VerticalLine):
        half = _graded_breaks(0.0, R, [abs(f) for f in focus], w0, growth, w_max)
        br = sorted(set([-x for x in half] + half))
        return [(_Layout("line", tuple(br)), 0.0)]
    theta, rho = spec.theta, spec.rho
    if rho > 0:
        start = rho
    else:
        # bare rays: a linear piece [0, r0] then logarithmic panels from r0
        positive = [f for f in focus if f > 0]
        start = min(positive) / 2 if positive else 1.0
    S = math.log(max(R / start, 1.0 + 1e-12))
    sf = [math.log(f / start) for f in focus if f > start]
    log_br = tuple(_graded_breaks(0.0, S, sf, w0, growth, w_max))
    if rho > 0:
        n_arc = max(1, math.ceil((2 * math.pi - 2 * theta) / math.pi))
        arc_br = tuple(np.linspace(theta, 2 * math.pi - theta, n_arc + 1))
        middle = [(_Layout("arc", arc_br), rho)]
    else:
        lin_br = (0.0, start)
        middle = [(_Layout("lin_ray", lin_br, -1), 0.0), (_Layout("lin_ray", lin_br, +1), 0.0)]
    return [(_Layout("log_ray", log_br, -1), start)] + middle + [(_Layout("log_ray", log_br, +1), start)]


def _nodes_for(spec: ContourSpec, layouts, level: int):
    zs, ws = [], []
    if isinstance(spec, VerticalLine):
        ((lay, _),) = layouts
        y, w = _gl_on(lay.breaks, level)
        return -spec.c + 1j * y, 1j * w
    shift = spec.shift
    for lay, base in layouts:
        t, w = _gl_on(lay.breaks, level)
        if lay.kind == "arc":
            z = base * np.exp(1j * t)
            dz = 1j * z * w
            # traversed from 2 pi - theta down to theta
            z, dz = z[::-1], -dz[::-1]
        else:
            direction = np.exp(1j * lay.sign * spec.theta)
            if lay.kind == "log_ray":
                r = base * np.exp(t)
                dr = r * w
            else:
                r, dr = t, w
            z = r * direction
            dz = dr * direction
            if lay.sign < 0:
                z, dz = z[::-1], -dz[::-1]
        zs.append(shift + z)
        ws.append(dz)
    return np.concatenate(zs), np.concatenate(ws)


def _base_of(spec: ContourSpec) -> float:
    return spec.c if isinstance(spec, VerticalLine) else 0.0


def discretize(
    spec: ContourSpec,
    decay: DecayEnvelope,
    tol: float,
    probe: Callable | None = None,
    focus=(),
    w0: float = 3.0,
    growth: float = 2.0,
    w_max: float = math.inf,
    max_level: int = 6,
    min_radius: float = 0.0,
    vectorized: bool = True,
) -> DiscretizedContour:
    """Truncate and discretize a path.

    ``R`` comes from the analytic tail of ``decay`` (both branches together at
    most tol/50, i.e. well inside tol/10).  The panel layout is then halved
    until doubling the node count changes the probe integral by at most
    tol/10; the coarser of the last two layouts is returned along with its
    probe integral.  Without a probe the envelope itself is used.

    ``focus`` lists moduli (rays) or imaginary parts (lines) where the
    integrand varies fastest.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    base = _base_of(spec)
    R = decay.radius(tol, base=base)
    focus = [float(abs(f)) for f in focus if np.isfinite(f)]
    scale = max(focus, default=1.0)
    R = max(R, min_radius, 4.0 * scale)
    if isinstance(spec, Keyhole):
        R = max(R, 4.0 * spec.rho)
        if spec.rho == 0 and not any(f > 0 for f in focus):
            focus.append(1.0)
    layouts = _layouts(spec, R, focus, w0, growth, w_max)
    tail = decay.tail(R, base=base)

    if probe is None:
        env = decay

        def probe(z):  # noqa: F811 - default probe is the envelope magnitude
            t = np.abs(z)
            if env.kind == "exponential":
                return env.constant * np.exp(-env.delta * t)
            return env.constant / (1.0 + t) ** env.order

        vectorized = True

    prev = None
    prev_value = None
    for level in range(max_level + 1):
        z, w = _nodes_for(spec, layouts, level)
        contour = DiscretizedContour(spec, z, w, R, decay, tail, level)
        value = integrate(contour, probe, vectorized=vectorized)
        if prev is not None:
            change = float(np.max(np.abs(value - prev_value))) if np.size(value) else 0.0
            if change <= tol / 10:
                prev.refinement_change = change
                prev.probe_value = prev_value
                return prev
        prev, prev_value = contour, value
    raise QuadratureFailure(
        f"panel refinement did not settle below tol/10={tol / 10:.3g} after {max_level} halvings "
        f"on {spec.serialize()}"
    )


def _evaluate_chunks(integrand, nodes, vectorized: bool, workers: int):
    if vectorized:
        chunks = [nodes[i:i + CHUNK] for i in range(0, nodes.shape[0], CHUNK)]
        fn = lambda zc: np.asarray(integrand(zc), dtype=complex)  # noqa: E731
    else:
        chunks = [nodes[i:i + 64] for i in range(0, nodes.shape[0], 64)]
        fn = lambda zc: np.stack([np.asarray(integrand(z), dtype=complex) for z in zc])  # noqa: E731
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def integrate(contour: DiscretizedContour, integrand: Callable, vectorized: bool = False,
              workers: int | None = None) -> np.ndarray:
    """(1/2 pi i) * sum_k w_k F(z_k), reduced in fixed node order.

    With ``vectorized=True`` the integrand receives an array of nodes and
    must return an array whose first axis runs over them.  Node evaluations
    may run on several threads; the reduction order never depends on that.
    """
    workers = default_workers() if workers is None else workers
    nodes, weights = contour.nodes, contour.weights
    parts = _evaluate_chunks(integrand, nodes, vectorized, workers)
    total = None
    start = 0
    for vals in parts:
        k = vals.shape[0]
        if not np.all(np.isfinite(vals)):
            bad = start + int(np.argmax(~np.isfinite(vals.reshape(k, -1)).all(axis=1)))
            raise NonFiniteIntegrand(f"integrand is not finite at z = {nodes[bad]!r}")
        w = weights[start:start + k].reshape((k,) + (1,) * (vals.ndim - 1))
        partial = np.sum(w * vals, axis=0)
        total = partial if total is None else total + partial
        start += k
    return total / TWO_PI_I


def closed_circle(center: complex, radius: float, n: int = 64) -> DiscretizedContour:
    """Trapezoidal nodes on a circle (spectrally accurate for periodic analytic integrands)."""
    phi = 2 * math.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * phi)
    w = 1j * (z - center) * (2 * math.pi / n)
    return DiscretizedContour(Circle(center, radius), z, w, radius, Exponential(1.0), 0.0)


def fixed_rule(spec: ContourSpec, R: float, level: int = 0, focus=(), w0: float = 3.0,
               growth: float = 2.0, w_max: float = math.inf,
               envelope: DecayEnvelope | None = None) -> DiscretizedContour:
    """Nodes for a path truncated at a given R, without adaptivity."""
    focus = [float(abs(f)) for f in focus if np.isfinite(f)]
    if isinstance(spec, Keyhole) and spec.rho == 0 and not any(f > 0 for f in focus):
        focus.append(1.0)
    z, w = _nodes_for(spec, _layouts(spec, R, focus, w0, growth, w_max), level)
    return DiscretizedContour(spec, z, w, R, envelope or Power(3.0), math.nan, level)


def line_tail(c: float, R: float) -> float:
    """(1/2 pi i) int dz / z^2 over the two pieces |Im z| > R of the line i R - c.

    Adding ``a2 * line_tail(c, R)`` corrects a truncated line integral whose
    integrand behaves like ``a2 / z^2``; that tail is even in Im z and does not
    cancel between the two ends.
    """
    return -R / (math.pi * (c * c + R * R))


@dataclass
class Settled:
    value: np.ndarray
    radius: float
    level: int
    change: float


def settle(evaluate: Callable[[float, int], np.ndarray], R0: float, tol: float,
           max_doublings: int = 12, max_level: int = 3) -> Settled:
    """Grow the truncation radius, then refine panels, until the value settles.

    For paths whose paired tails cancel, the analytic envelope radius is far
    too pessimistic; this doubles R until two successive values agree to
    ``tol`` (max abs entry), then halves panels until that also agrees.
    """
    R, level = float(R0), 0
    value = evaluate(R, level)
    for _ in range(max_doublings):
        nxt = evaluate(2 * R, level)
        change = float(np.max(np.abs(nxt - value))) if np.size(value) else 0.0
        R, value = 2 * R, nxt
        if change <= tol:
            break
    else:
        raise QuadratureFailure(f"truncation did not settle below {tol:.3g} by R = {R:.6g}")
    for lvl in range(1, max_level + 1):
        nxt = evaluate(R, lvl)
        change = float(np.max(np.abs(nxt - value))) if np.size(value) else 0.0
        value = nxt
        if change <= tol:
            return Settled(value, R, lvl, change)
    raise QuadratureFailure(f"panel refinement did not settle below {tol:.3g} at R = {R:.6g}")
