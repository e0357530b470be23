"""Metric charts on plane domains: coefficients, curvature, pullbacks.

A chart holds the three coefficient fields of a symmetric 2-form

    g = g11 dx^2 + 2 g12 dx dy + g22 dy^2

as expression trees, plus a domain, a signature tag and sampling metadata.
Christoffel symbols and Gaussian curvature are computed from exact symbolic
derivatives of the coefficients; the per-chart compiled bundles are cached so
repeated evaluation (geodesic right-hand sides in particular) stays cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import expr
from .expr import ScalarField, EvaluationError

__all__ = [
    "Signature", "CausalClass", "Domain", "MetricChart", "ChartMap",
    "VectorField", "DegenerateMetricError", "SignatureError", "DomainError",
    "metric_eval", "christoffel", "gaussian_curvature", "classify",
    "pullback", "lie_derivative_fields", "killing_residual",
    "identity_map", "chart_to_dict", "chart_from_dict",
]


class DegenerateMetricError(ValueError):
    """The coefficient matrix is singular where it must not be."""


class SignatureError(ValueError):
    """The sampled determinant sign contradicts the declared signature."""


class DomainError(ValueError):
    """A point or sample box is incompatible with the chart domain."""


class Signature(str, Enum):
    RIEMANNIAN = "riemannian"   # det g > 0 on the domain
    LORENTZIAN = "lorentzian"   # det g < 0 on the domain


class CausalClass(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


def _field_min(u, v):
    # exact pointwise min; only the sign is ever used
    return (u + v - expr.absval(u - v)) * 0.5


@dataclass(frozen=True)
class Domain:
    """Open box, optionally minus a closed origin disc, cut by a constraint.

    A point is inside when it lies strictly within the bounds, strictly
    outside the excluded disc, and the constraint field (when present) is
    strictly positive there.
    """

    x_min: float = -math.inf
    x_max: float = math.inf
    y_min: float = -math.inf
    y_max: float = math.inf
    exclude_radius: float = 0.0
    constraint: Optional[ScalarField] = None

    def contains(self, x, y):
        if not (self.x_min < x < self.x_max and self.y_min < y < self.y_max):
            return False
        if self.exclude_radius > 0.0 and x * x + y * y <= self.exclude_radius ** 2:
            return False
        if self.constraint is not None:
            try:
                return expr.evaluate(self.constraint, (x, y)) > 0.0
            except EvaluationError:
                return False
        return True

    def combined_field(self):
        """One field positive exactly on the domain, or None if unconstrained."""
        factors = []
        if math.isfinite(self.x_min):
            factors.append(expr.X - self.x_min)
        if math.isfinite(self.x_max):
            factors.append(self.x_max - expr.X)
        if math.isfinite(self.y_min):
            factors.append(expr.Y - self.y_min)
        if math.isfinite(self.y_max):
            factors.append(self.y_max - expr.Y)
        if self.exclude_radius > 0.0:
            factors.append(expr.X * expr.X + expr.Y * expr.Y - self.exclude_radius ** 2)
        if self.constraint is not None:
            factors.append(self.constraint)
        if not factors:
            return None
        out = factors[0]
        for f in factors[1:]:
            out = _field_min(out, f)
        return out


@dataclass
class VectorField:
    name: str
    vx: ScalarField
    vy: ScalarField

    def at(self, point):
        x, y = point
        return (self.vx(x, y), self.vy(x, y))


class _Runtime:
    """Compiled evaluators attached to one chart."""

    def __init__(self, chart):
        g11, g12, g22 = chart.g11, chart.g12, chart.g22
        d = {n: [g.diff(n) for g in (g11, g12, g22)] for n in ("x", "y")}
        self.coeffs = expr.compile_fields([g11, g12, g22])
        self._first = expr.compile_fields(
            [g11, g12, g22,
             d["x"][0], d["y"][0], d["x"][1], d["y"][1], d["x"][2], d["y"][2]])
        self._curv = None
        self._chart = chart

        dom = chart.domain
        cons = dom.constraint
        cons_fn = expr.compile_fields([cons]) if cons is not None else None
        x_min, x_max = dom.x_min, dom.x_max
        y_min, y_max = dom.y_min, dom.y_max
        r2 = dom.exclude_radius ** 2

        def in_domain(x, y):
            if not (x_min < x < x_max and y_min < y < y_max):
                return False
            if r2 > 0.0 and x * x + y * y <= r2:
                return False
            if cons_fn is not None:
                try:
                    c = cons_fn(x, y)[0]
                except (ValueError, ZeroDivisionError, OverflowError):
                    return False
                return c > 0.0 and math.isfinite(c)
            return True

        self.in_domain = in_domain

    def first_derivatives(self, x, y):
        return self._first(x, y)

    def christoffel(self, x, y):
        """Returns (E, F, G, (G^1_11, G^1_12, G^1_22), (G^2_11, G^2_12, G^2_22))."""
        E, F, G, Ex, Ey, Fx, Fy, Gx, Gy = self._first(x, y)
        det = E * G - F * F
        b111 = 0.5 * Ex
        b112 = Fx - 0.5 * Ey
        b121 = 0.5 * Ey
        b122 = 0.5 * Gx
        b221 = Fy - 0.5 * Gx
        b222 = 0.5 * Gy
        i11 = G / det
        i12 = -F / det
        i22 = E / det
        c1 = (i11 * b111 + i12 * b112, i11 * b121 + i12 * b122, i11 * b221 + i12 * b222)
        c2 = (i12 * b111 + i22 * b112, i12 * b121 + i22 * b122, i12 * b221 + i22 * b222)
        return E, F, G, c1, c2

    def curvature(self, x, y):
        if self._curv is None:
            c = self._chart
            E, F, G = c.g11, c.g12, c.g22
            Eu, Ev = E.diff("x"), E.diff("y")
            Fu, Fv = F.diff("x"), F.diff("y")
            Gu, Gv = G.diff("x"), G.diff("y")
            bundle = [E, F, G, Eu, Ev, Fu, Fv, Gu, Gv,
                      Ev.diff("y"), Fu.diff("y"), Gu.diff("x")]
            self._curv = expr.compile_fields(bundle)
        E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu = self._curv(x, y)
        det = E * G - F * F
        if abs(det) < 1e-14 * max(E * E, F * F, G * G, 1e-300):
            raise DegenerateMetricError(
                "metric is numerically degenerate at (%g, %g)" % (x, y))
        a = -0.5 * Evv + Fuv - 0.5 * Guu
        m1 = (a * (E * G - F * F)
              - 0.5 * Eu * ((Fv - 0.5 * Gu) * G - F * 0.5 * Gv)
              + (Fu - 0.5 * Ev) * ((Fv - 0.5 * Gu) * F - E * 0.5 * Gv))
        m2 = (- 0.5 * Ev * (0.5 * Ev * G - F * 0.5 * Gu)
              + 0.5 * Gu * (0.5 * Ev * F - E * 0.5 * Gu))
        return (m1 - m2) / (det * det)


@dataclass
class MetricChart:
    """A metric in one coordinate chart.

    sample_box is the rectangle used for validation grids and random state
    sampling; it should sit inside the honest part of the domain.  periods
    records coordinate periodicity (or None) per axis, used when comparing
    points for geodesic closure.
    """

    name: str
    g11: ScalarField
    g12: ScalarField
    g22: ScalarField
    domain: Domain
    signature: Signature
    sample_box: tuple
    periods: tuple = (None, None)
    _runtime: Optional[_Runtime] = dc_field(default=None, repr=False, compare=False)

    def runtime(self):
        if self._runtime is None:
            self._runtime = _Runtime(self)
        return self._runtime

    def coefficients_at(self, point):
        x, y = point
        return self.runtime().coeffs(x, y)

    def det_at(self, point):
        E, F, G = self.coefficients_at(point)
        return E * G - F * F

    def grid_points(self, n=8):
        """Deterministic in-domain grid drawn from the sample box."""
        xa, xb, ya, yb = self.sample_box
        xs = np.linspace(xa, xb, n + 2)[1:-1]
        ys = np.linspace(ya, yb, n + 2)[1:-1]
        dom = self.runtime().in_domain
        pts = [(float(x), float(y)) for x in xs for y in ys if dom(x, y)]
        if len(pts) < 4:
            raise DomainError(
                "sample box of chart %r misses its domain" % (self.name,))
        return pts

    def validate(self, n=8):
        """Check nondegeneracy and the signature tag on a sampled grid."""
        want = 1.0 if self.signature == Signature.RIEMANNIAN else -1.0
        for (x, y) in self.grid_points(n):
            E, F, G = self.runtime().coeffs(x, y)
            det = E * G - F * F
            scale = max(E * E, F * F, G * G, 1e-300)
            if abs(det) <= 1e-12 * scale:
                raise DegenerateMetricError(
                    "chart %r degenerate at (%g, %g): det=%g"
                    % (self.name, x, y, det))
            if det * want <= 0.0:
                raise SignatureError(
                    "chart %r tagged %s but det(%g, %g) = %g"
                    % (self.name, self.signature.value, x, y, det))
        return self


@dataclass
class ChartMap:
    """A smooth map between plane charts, with symbolic components."""

    name: str
    fx: ScalarField
    fy: ScalarField
    domain: Domain = dc_field(default_factory=Domain)
    inverse: Optional["ChartMap"] = None
    _jac: Optional[Callable] = dc_field(default=None, repr=False, compare=False)

    def apply(self, point):
        x, y = point
        return (self.fx(x, y), self.fy(x, y))

    def jacobian(self, point):
        if self._jac is None:
            self._jac = expr.compile_fields(
                [self.fx.diff("x"), self.fx.diff("y"),
                 self.fy.diff("x"), self.fy.diff("y")])
        x, y = point
        a, b, c, d = self._jac(x, y)
        return np.array([[a, b], [c, d]])

    def after(self, other):
        """self composed after other: p -> self(other(p))."""
        fx = expr.substitute(self.fx, other.fx, other.fy)
        fy = expr.substitute(self.fy, other.fx, other.fy)
        inv = None
        if self.inverse is not None and other.inverse is not None:
            inv = other.inverse.after(self.inverse)
        return ChartMap("%s*%s" % (self.name, other.name), fx, fy,
                        domain=other.domain, inverse=inv)


def identity_map():
    return ChartMap("id", expr.X, expr.Y)


def restrict_domain(domain, extra_constraint):
    """The domain cut down by one more strict-positivity constraint."""
    cons = extra_constraint if domain.constraint is None \
        else _field_min(domain.constraint, extra_constraint)
    return replace(domain, constraint=cons)


def gaussian_curvature_limit(chart, base, direction,
                             scales=(2e-2, 1e-2, 5e-3, 2.5e-3)):
    """Extrapolated curvature limit approaching base along direction.

    Evaluates K at base + s * direction for the given scales and removes the
    leading error terms by polynomial extrapolation to s = 0.  Useful where
    the coefficient fields degenerate on a curve through base.
    """
    xs = list(scales)
    ys = [gaussian_curvature(chart, (base[0] + s * direction[0],
                                     base[1] + s * direction[1]))
          for s in xs]
    table = list(ys)
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            table[i] = ((0.0 - xs[i + level]) * table[i]
                        - (0.0 - xs[i]) * table[i + 1]) / (xs[i] - xs[i + level])
    return table[0]


def metric_eval(chart, point, v, w=None):
    """g(v, w) at the point; w defaults to v."""
    if w is None:
        w = v
    E, F, G = chart.coefficients_at(point)
    return (E * v[0] * w[0] + F * (v[0] * w[1] + v[1] * w[0]) + G * v[1] * w[1])


def christoffel(chart, point):
    """Christoffel symbols as an array indexed [k, i, j]."""
    x, y = point
    _, _, _, c1, c2 = chart.runtime().christoffel(x, y)
    return np.array([[[c1[0], c1[1]], [c1[1], c1[2]]],
                     [[c2[0], c2[1]], [c2[1], c2[2]]]])


def gaussian_curvature(chart, point):
    x, y = point
    return chart.runtime().curvature(x, y)


def classify(chart, point, v, tol=None):
    """Causal class of the tangent vector v at the point.

    The lightlike band is |g(v,v)| <= tol; when tol is omitted it scales with
    the local coefficient magnitude and |v|^2 so the answer is invariant under
    rescaling v.
    """
    E, F, G = chart.coefficients_at(point)
    w = E * v[0] * v[0] + 2.0 * F * v[0] * v[1] + G * v[1] * v[1]
    if tol is None:
        scale = max(abs(E), abs(F), abs(G)) * (v[0] * v[0] + v[1] * v[1])
        tol = 1e-9 * (scale if scale > 0.0 else 1.0)
    if w > tol:
        return CausalClass.SPACELIKE
    if w < -tol:
        return CausalClass.TIMELIKE
    return CausalClass.LIGHTLIKE


def pullback(chart, cmap, name=None):
    """The pullback metric cmap^* g as a new chart.

    Coefficients are exact symbolic compositions; the domain is the map's own
    domain cut down to the preimage of the chart domain.
    """
    a, b = cmap.fx, cmap.fy
    ax, ay = a.diff("x"), a.diff("y")
    bx, by = b.diff("x"), b.diff("y")
    E = expr.substitute(chart.g11, a, b)
    F = expr.substitute(chart.g12, a, b)
    G = expr.substitute(chart.g22, a, b)
    p11 = E * ax * ax + 2.0 * F * ax * bx + G * bx * bx
    p12 = E * ax * ay + F * (ax * by + ay * bx) + G * bx * by
    p22 = E * ay * ay + 2.0 * F * ay * by + G * by * by

    target = chart.domain.combined_field()
    cons = None
    if target is not None:
        cons = expr.substitute(target, a, b)
    if cmap.domain.constraint is not None:
        cons = cmap.domain.constraint if cons is None \
            else _field_min(cons, cmap.domain.constraint)
    dom = replace(cmap.domain, constraint=cons)

    if cmap.inverse is not None:
        ix, iy = cmap.inverse.fx, cmap.inverse.fy
        xa, xb, ya, yb = chart.sample_box
        corners = [(xa, ya), (xa, yb), (xb, ya), (xb, yb)]
        pre = [(ix(*c), iy(*c)) for c in corners]
        xs = [p[0] for p in pre]
        ys = [p[1] for p in pre]
        box = (min(xs), max(xs), min(ys), max(ys))
    else:
        box = chart.sample_box

    out = MetricChart(
        name=name or "%s@%s" % (chart.name, cmap.name),
        g11=p11, g12=p12, g22=p22,
        domain=dom, signature=chart.signature,
        sample_box=box, periods=(None, None))
    return out.validate(n=5)


def lie_derivative_fields(chart, k):
    """Components of the Lie derivative of the metric along the vector field k."""
    E, F, G = chart.g11, chart.g12, chart.g22
    kx, ky = k.vx, k.vy
    kxx, kxy = kx.diff("x"), kx.diff("y")
    kyx, kyy = ky.diff("x"), ky.diff("y")
    l11 = kx * E.diff("x") + ky * E.diff("y") + 2.0 * (E * kxx + F * kyx)
    l12 = (kx * F.diff("x") + ky * F.diff("y")
           + F * kxx + G * kyx + E * kxy + F * kyy)
    l22 = kx * G.diff("x") + ky * G.diff("y") + 2.0 * (F * kxy + G * kyy)
    return l11, l12, l22


def killing_residual(chart, k, n=8):
    """Max sampled Lie-derivative magnitude, relative to the coefficient scale."""
    l11, l12, l22 = lie_derivative_fields(chart, k)
    fn = expr.compile_fields([l11, l12, l22, chart.g11, chart.g12, chart.g22,
                              k.vx, k.vy])
    worst = 0.0
    for (x, y) in chart.grid_points(n):
        a, b, c, E, F, G, kx, ky = fn(x, y)
        scale = max(abs(E), abs(F), abs(G)) * max(1.0, abs(kx), abs(ky))
        worst = max(worst, max(abs(a), abs(b), abs(c)) / max(scale, 1e-300))
    return worst


# -- serialization ------------------------------------------------------------

def chart_to_dict(chart):
    dom = chart.domain
    return {
        "schema": 1,
        "name": chart.name,
        "signature": chart.signature.value,
        "coefficients": {
            "g11": expr.to_prefix(chart.g11),
            "g12": expr.to_prefix(chart.g12),
            "g22": expr.to_prefix(chart.g22),
        },
        "domain": {
            "x_min": None if not math.isfinite(dom.x_min) else dom.x_min,
            "x_max": None if not math.isfinite(dom.x_max) else dom.x_max,
            "y_min": None if not math.isfinite(dom.y_min) else dom.y_min,
            "y_max": None if not math.isfinite(dom.y_max) else dom.y_max,
            "exclude_radius": dom.exclude_radius,
            "constraint": None if dom.constraint is None
            else expr.to_prefix(dom.constraint),
        },
        "sample_box": list(chart.sample_box),
        "periods": list(chart.periods),
    }


def chart_from_dict(data):
    if data.get("schema") != 1:
        raise DomainError("unsupported chart schema: %r" % (data.get("schema"),))
    co = data["coefficients"]
    dd = data.get("domain", {})
    dom = Domain(
        x_min=-math.inf if dd.get("x_min") is None else float(dd["x_min"]),
        x_max=math.inf if dd.get("x_max") is None else float(dd["x_max"]),
        y_min=-math.inf if dd.get("y_min") is None else float(dd["y_min"]),
        y_max=math.inf if dd.get("y_max") is None else float(dd["y_max"]),
        exclude_radius=float(dd.get("exclude_radius", 0.0)),
        constraint=None if dd.get("constraint") is None
        else expr.parse_prefix(dd["constraint"]),
    )
    periods = data.get("periods", [None, None])
    chart = MetricChart(
        name=data["name"],
        g11=expr.parse_prefix(co["g11"]),
        g12=expr.parse_prefix(co["g12"]),
        g22=expr.parse_prefix(co["g22"]),
        domain=dom,
        signature=Signature(data["signature"]),
        sample_box=tuple(float(v) for v in data["sample_box"]),
        periods=(None if periods[0] is None else float(periods[0]),
                 None if periods[1] is None else float(periods[1])),
    )
    return chart.validate(n=5)
