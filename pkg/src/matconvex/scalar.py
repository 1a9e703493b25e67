"""
Scalar functions on open intervals.

Holds the admissible function class (power, exponential, polynomial, and
their negations), closed-form derivatives up to order 3, first and second
divided differences with confluent fallbacks, and the Hermite-Hadamard gap

    g(x, y) = f''(x) - 2 (f'(x) - f'(y)) / (x - y) + f''(y)

in closed form and as a quadrature.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, DomainError

# |x - y| <= CONFLUENCE_RTOL * max(1, |x|, |y|) counts as a repeated node.
CONFLUENCE_RTOL = 1e-6
# Below this relative spread the difference quotients are replaced by
# Gauss-Legendre quadrature of the Hermite-Genocchi integral.
NEAR_CONFLUENCE_RTOL = 1e-3
CONCAVITY_RTOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _parse_endpoint(value) -> float:
    if value is None:
        return math.nan
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity", "oo"):
            return math.inf
        if text in ("-inf", "-infinity", "-oo"):
            return -math.inf
        return float(text)
    return float(value)


@dataclass(frozen=True)
class Interval:
    """The open interval (lo, hi); either end may be infinite."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ValueError(f"invalid interval ({self.lo}, {self.hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x, margin: float = 0.0) -> bool:
        """True if every entry of ``x`` lies strictly inside, ``margin`` away from the ends."""
        x = np.asarray(x, dtype=float)
        return bool(np.all((x > self.lo + margin) & (x < self.hi - margin)))

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def distance_to_boundary(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x) - self.lo, self.hi - np.max(x)))

    def to_json(self) -> dict:
        enc = lambda v: v if math.isfinite(v) else None
        return {"lo": enc(self.lo), "hi": enc(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "Interval":
        """Accepts ``{"lo":..,"hi":..}``, a pair, or text such as ``"(0,inf)"``.

        A null lower end means -inf and a null upper end means +inf.
        """
        if isinstance(obj, str):
            text = obj.strip()
            if text.startswith("{") or text.startswith("["):
                return cls.from_json(json.loads(text))
            text = text.strip("()[] ")
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != 2:
                raise ValueError(f"cannot parse interval {obj!r}")
            lo, hi = (None if p.lower() in ("", "null", "none") else p for p in parts)
        elif isinstance(obj, dict):
            lo, hi = obj.get("lo"), obj.get("hi")
        else:
            lo, hi = obj
        lo = _parse_endpoint(lo)
        hi = _parse_endpoint(hi)
        return cls(-math.inf if math.isnan(lo) else lo, math.inf if math.isnan(hi) else hi)

    def __str__(self):
        return f"({self.lo:g}, {self.hi:g})"


POSITIVE_AXIS = Interval(0.0, math.inf)
REAL_LINE = Interval()


@dataclass(frozen=True)
class FunctionSpec:
    """A closed-form scalar function with derivatives of every order.

    ``kind`` is one of ``"power"`` (x**p, needs a domain inside (0, inf)),
    ``"exp"`` or ``"poly"`` (ascending coefficients). ``negate`` flips the
    sign of the function and all of its derivatives.
    """

    kind: str
    p: Optional[float] = None
    coeffs: tuple = ()
    domain: Interval = field(default=None)
    negate: bool = False

    def __post_init__(self):
        if self.kind not in ("power", "exp", "poly"):
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == "power":
            if self.p is None:
                raise ValueError("power function needs an exponent p")
            object.__setattr__(self, "p", float(self.p))
        if self.kind == "poly":
            if len(self.coeffs) == 0:
                raise ValueError("polynomial needs at least one coefficient")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.domain is None:
            object.__setattr__(self, "domain", POSITIVE_AXIS if self.kind == "power" else REAL_LINE)
        if self.kind == "power" and self.domain.lo < 0:
            raise ValueError("power function domain must lie inside (0, inf)")

    @classmethod
    def power(cls, p: float, domain: Interval | None = None, negate: bool = False) -> "FunctionSpec":
        return cls("power", p=p, domain=domain, negate=negate)

    @classmethod
    def exponential(cls, domain: Interval | None = None, negate: bool = False) -> "FunctionSpec":
        return cls("exp", domain=domain, negate=negate)

    @classmethod
    def polynomial(cls, coeffs, domain: Interval | None = None, negate: bool = False) -> "FunctionSpec":
        return cls("poly", coeffs=tuple(coeffs), domain=domain, negate=negate)

    def with_domain(self, domain: Interval) -> "FunctionSpec":
        return FunctionSpec(self.kind, self.p, self.coeffs, domain, self.negate)

    def derivative(self, x, order: int = 0):
        """Unchecked, vectorized ``order``-th derivative."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            c = 1.0
            for j in range(order):
                c *= self.p - j
            out = c * np.power(x, self.p - order)
        elif self.kind == "exp":
            out = np.exp(x)
        else:
            c = np.polynomial.polynomial.polyder(np.array(self.coeffs), order) if order else np.array(self.coeffs)
            out = np.polynomial.polynomial.polyval(x, c) * np.ones_like(x)
        return -out if self.negate else out

    def __call__(self, x):
        return self.derivative(x, 0)

    def label(self) -> str:
        sign = "-" if self.negate else ""
        if self.kind == "power":
            return f"{sign}x^{self.p:g}"
        if self.kind == "exp":
            return f"{sign}exp"
        return f"{sign}poly{list(self.coeffs)}"

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "power":
            out["p"] = self.p
        elif self.kind == "poly":
            out["coeffs"] = list(self.coeffs)
        if self.negate:
            out["negate"] = True
        default = POSITIVE_AXIS if self.kind == "power" else REAL_LINE
        if self.domain != default:
            out["domain"] = self.domain.to_json()
        return out

    @classmethod
    def from_json(cls, obj) -> "FunctionSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        domain = Interval.from_json(obj["domain"]) if obj.get("domain") is not None else None
        negate = bool(obj.get("negate", False))
        if kind == "power":
            return cls.power(obj["p"], domain, negate)
        if kind in ("exp", "exponential"):
            return cls.exponential(domain, negate)
        if kind in ("poly", "polynomial"):
            return cls.polynomial(obj["coeffs"], domain, negate)
        raise ValueError(f"unknown function kind {kind!r}")

    @classmethod
    def parse(cls, text: str) -> "FunctionSpec":
        """Parse JSON or shorthand: ``power:2.5``, ``exp``, ``poly:t^3``, ``poly:1,0,2``.

        A leading ``-`` negates, e.g. ``-power:2.5``.
        """
        text = text.strip()
        if text.startswith("{"):
            return cls.from_json(text)
        negate = text.startswith("-")
        if negate:
            text = text[1:]
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        if kind in ("power", "pow", "x^"):
            return cls.power(float(arg), negate=negate)
        if kind in ("exp", "exponential"):
            return cls.exponential(negate=negate)
        if kind in ("poly", "polynomial"):
            m = re.fullmatch(r"\s*[tx]\^(\d+)\s*", arg)
            if m:
                deg = int(m.group(1))
                return cls.polynomial([0.0] * deg + [1.0], negate=negate)
            return cls.polynomial([float(c) for c in arg.split(",")], negate=negate)
        raise ValueError(f"cannot parse function {text!r}")


def _check_domain(spec: FunctionSpec, *points) -> None:
    for x in points:
        if not spec.domain.contains(x):
            raise DomainError(f"{x} is outside the domain {spec.domain} of {spec.label()}")


def eval_derivative(spec: FunctionSpec, x: float, order: int = 0) -> float:
    """Value of the ``order``-th derivative (0 to 3) of ``spec`` at ``x``."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"unsupported derivative order {order}")
    _check_domain(spec, x)
    return float(spec.derivative(x, order))


def _scale(*xs):
    s = np.ones_like(np.asarray(xs[0], dtype=float))
    for x in xs:
        s = np.maximum(s, np.abs(x))
    return s


def divided_difference_1_array(spec: FunctionSpec, x, y):
    """Vectorized f[x, y]; no domain checks."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    h = x - y
    scale = _scale(x, y)
    confluent = np.abs(h) <= CONFLUENCE_RTOL * scale
    near = ~confluent & (np.abs(h) <= NEAR_CONFLUENCE_RTOL * scale)
    out = np.where(confluent, spec.derivative(0.5 * (x + y), 1), 0.0)
    far = ~(confluent | near)
    if np.any(far):
        hs = np.where(far, h, 1.0)
        out = np.where(far, (spec(x) - spec(y)) / hs, out)
    if np.any(near):
        # f[x, y] = int_0^1 f'(y + s (x - y)) ds
        pts = y[..., None] + _GL_NODES * h[..., None]
        quad = np.sum(spec.derivative(pts, 1) * _GL_WEIGHTS, axis=-1)
        out = np.where(near, quad, out)
    return out


def divided_difference_2_array(spec: FunctionSpec, x, y, z):
    """Vectorized f[x, y, z]; no domain checks."""
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    a, b, c = np.sort(np.stack([x, y, z]), axis=0)
    spread = c - a
    scale = _scale(a, c)
    confluent = spread <= CONFLUENCE_RTOL * scale
    near = ~confluent & (spread <= NEAR_CONFLUENCE_RTOL * scale)
    far = ~(confluent | near)
    out = np.where(confluent, 0.5 * spec.derivative((a + b + c) / 3.0, 2), 0.0)
    if np.any(far):
        d = np.where(far, spread, 1.0)
        rec = (divided_difference_1_array(spec, b, c) - divided_difference_1_array(spec, a, b)) / d
        out = np.where(far, rec, out)
    if np.any(near):
        # Hermite-Genocchi: integral of f'' over the standard 2-simplex,
        # Duffy-collapsed onto the unit square.
        s = _GL_NODES[:, None]
        r = _GL_NODES[None, :]
        s1 = s * np.ones_like(r)
        s2 = (1.0 - s) * r
        jac = (1.0 - s) * np.ones_like(r)
        w = _GL_WEIGHTS[:, None] * _GL_WEIGHTS[None, :] * jac
        pts = a[..., None, None] + s1 * (b - a)[..., None, None] + s2 * (c - a)[..., None, None]
        quad = np.sum(spec.derivative(pts, 2) * w, axis=(-2, -1))
        out = np.where(near, quad, out)
    return out


def divided_difference_1(spec: FunctionSpec, x: float, y: float) -> float:
    """First divided difference f[x, y]; equals f'(x) when x == y."""
    _check_domain(spec, x, y)
    return float(divided_difference_1_array(spec, x, y))


def divided_difference_2(spec: FunctionSpec, x: float, y: float, z: float) -> float:
    """Second divided difference f[x, y, z], symmetric in its arguments.

    The fully confluent value f[x, x, x] is f''(x) / 2.
    """
    _check_domain(spec, x, y, z)
    return float(divided_difference_2_array(spec, x, y, z))


@dataclass(frozen=True)
class HypothesisReport:
    is_convex: bool
    second_derivative_strictly_concave: bool
    worst_violation_point: Optional[float]
    worst_margin: float
    window: Interval
    grid_points: int

    @property
    def passed(self) -> bool:
        return self.is_convex and self.second_derivative_strictly_concave

    def to_json(self) -> dict:
        return {
            "is_convex": self.is_convex,
            "second_derivative_strictly_concave": self.second_derivative_strictly_concave,
            "worst_violation_point": self.worst_violation_point,
            "worst_margin": self.worst_margin,
            "window": self.window.to_json(),
            "grid_points": self.grid_points,
        }


def check_hypothesis(spec: FunctionSpec, window: Interval, grid_points: int = 64) -> HypothesisReport:
    """Sample-based test that f'' >= 0 and f'' is strictly midpoint concave on ``window``.

    The grid is ``grid_points`` interior points of the (finite, open) window;
    every pair of grid points is tested at its midpoint.
    """
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")
    if not window.is_finite:
        raise ValueError("hypothesis window must be bounded")
    if not spec.domain.contains_interval(window):
        raise DomainError(f"window {window} is not inside the domain {spec.domain}")

    grid = window.lo + (window.hi - window.lo) * np.arange(1, grid_points + 1) / (grid_points + 1)
    f2 = spec.derivative(grid, 2)
    scale = float(np.max(np.abs(f2)))
    tol = CONCAVITY_RTOL * (1.0 + scale)

    i, j = np.triu_indices(grid_points, k=1)
    mid = 0.5 * (grid[i] + grid[j])
    margins = spec.derivative(mid, 2) - 0.5 * (f2[i] + f2[j])
    k = int(np.argmin(margins))
    worst_margin = float(margins[k])

    is_convex = bool(np.min(f2) >= -tol)
    concave = worst_margin > tol
    if not is_convex:
        worst_point = float(grid[int(np.argmin(f2))])
    elif not concave:
        worst_point = float(mid[k])
    else:
        worst_point = None
    return HypothesisReport(is_convex, concave, worst_point, worst_margin, window, grid_points)


def hh_gap_formula(spec: FunctionSpec, x: float, y: float) -> float:
    """Closed-form gap f''(x) - 2 (f'(x) - f'(y)) / (x - y) + f''(y)."""
    _check_domain(spec, x, y)
    if x == y:
        raise ValueError("the gap needs two distinct points")
    d1 = spec.derivative(np.array([x, y]), 1)
    d2 = spec.derivative(np.array([x, y]), 2)
    return float(d2[0] - 2.0 * (d1[0] - d1[1]) / (x - y) + d2[1])


def adaptive_simpson(func: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature with interval halving and Richardson correction."""

    def simpson(fa, fm, fb, h):
        return h * (fa + 4.0 * fm + fb) / 6.0

    fa, fb = func(a), func(b)
    m = 0.5 * (a + b)
    fm = func(m)
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = func(lm), func(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        err = left + right - whole
        if abs(err) <= 15.0 * eps:
            total += left + right + err / 15.0
        elif depth >= max_depth:
            raise ConvergenceError(f"adaptive Simpson exceeded depth {max_depth} on [{lo}, {hi}]")
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total


def hh_gap_quadrature(spec: FunctionSpec, x: float, y: float, tol: float = 1e-10) -> float:
    """The gap as 2 * int_0^1 [t f''(x) + (1-t) f''(y) - f''(t x + (1-t) y)] dt."""
    _check_domain(spec, x, y)
    if x == y:
        raise ValueError("the gap needs two distinct points")
    fx, fy = float(spec.derivative(x, 2)), float(spec.derivative(y, 2))

    def integrand(t):
        return t * fx + (1.0 - t) * fy - float(spec.derivative(t * x + (1.0 - t) * y, 2))

    return 2.0 * adaptive_simpson(integrand, 0.0, 1.0, tol=0.5 * tol)
