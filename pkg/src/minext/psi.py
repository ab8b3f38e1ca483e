"""The geodesic slicing functional and exact directional variations.

For a convex domain, a slicing direction and an injective piecewise-linear
boundary map, the functional adds two integrals: over horizontal slices, the
geodesic distance (inside the image polygon) between the images of the two
boundary points the slice cuts; and the same over vertical slices.  Between
parameter events (domain vertex ordinates, boundary-map breakpoints, geodesic
vertex-set changes) the integrand is a sum of square roots of quadratics, so
adaptive Gauss-Kronrod converges fast; the reported error bound combines the
K15-G7 estimator with a safety factor of 10 and rigorous slop terms for node
snapping (the integrand is Lipschitz via the 1-Lipschitz dependence of
geodesic distance on its endpoints).

Directional variations of a piecewise-affine mesh are exact per-triangle
accumulations area * |L e|, reported as certified intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .boundary import BoundaryMap, validate_injective
from .geodesics import shortest_path
from .geometry import (
    ConvexPolygon,
    Direction,
    GeometryError,
    Point,
    SimplePolygon,
    bounding_frame,
    dist2,
    lerp,
)
from .scalars import Interval, Q, SqrtSum, fr, interval_sum, sqrt_floor_ceil

__all__ = [
    "PsiBreakdown",
    "DirectionalVariation",
    "ToleranceUnreachable",
    "rho",
    "psi_alpha",
    "psi_of_map",
    "mesh_variation",
]


class ToleranceUnreachable(GeometryError):
    pass


def rho(poly: SimplePolygon, a: Point, b: Point) -> SqrtSum:
    """Geodesic distance in the closed polygon, exact."""
    return shortest_path(poly, a, b).length()


@dataclass(frozen=True)
class PsiBreakdown:
    """Certified value of the slicing functional.

    ``horizontal_integral`` integrates over slices parallel to e_alpha
    (parameter: the e_perp coordinate), ``vertical_integral`` over slices
    parallel to e_perp.  True values lie within +-error_bound of each
    component.
    """

    horizontal_integral: Fraction
    vertical_integral: Fraction
    error_bound: Fraction
    stats: dict

    @property
    def total(self) -> Fraction:
        return self.horizontal_integral + self.vertical_integral

    def horizontal(self) -> Interval:
        return Interval(self.horizontal_integral - self.error_bound, self.horizontal_integral + self.error_bound)

    def vertical(self) -> Interval:
        return Interval(self.vertical_integral - self.error_bound, self.vertical_integral + self.error_bound)

    def total_interval(self) -> Interval:
        return Interval(self.total - 2 * self.error_bound, self.total + 2 * self.error_bound)


@dataclass(frozen=True)
class DirectionalVariation:
    direction: Point
    value: Interval


# Gauss-Kronrod 15/7 nodes and weights; nodes are snapped to dyadic rationals
# so the integrand is evaluated at exact rational parameters.  The snap error
# is charged to the Lipschitz slop term.
_GK_RAW = (
    (0.991455371120813, 0.022935322010529, 0.0),
    (0.949107912342759, 0.063092092629979, 0.129484966168870),
    (0.864864423359769, 0.104790010322250, 0.0),
    (0.741531185599394, 0.140653259715525, 0.279705391489277),
    (0.586087235467691, 0.169004726639267, 0.0),
    (0.405845151377397, 0.190350578064785, 0.381830050505119),
    (0.207784955007898, 0.204432940075298, 0.0),
    (0.0, 0.209482141084728, 0.417959183673469),
)
_GK_NODES: list[tuple[Fraction, float, float]] = []
for _x, _wk, _wg in _GK_RAW:
    _fx = Fraction(_x).limit_denominator(1 << 40)
    if _x == 0.0:
        _GK_NODES.append((Q(0), _wk, _wg))
    else:
        _GK_NODES.append((_fx, _wk, _wg))
        _GK_NODES.append((-_fx, _wk, _wg))
_NODE_SNAP = 2.0 ** -39


def _enclosure_mid(length: SqrtSum) -> float:
    return float(length.enclosure(60).mid)


class _SliceIntegrand:
    """rho(image polygon; A(t), B(t)) with A, B affine on [t0, t1]."""

    __slots__ = ("poly", "t0", "t1", "a0", "a1", "b0", "b1", "evals")

    def __init__(self, poly, t0, t1, a0, a1, b0, b1):
        self.poly = poly
        self.t0 = t0
        self.t1 = t1
        self.a0 = a0
        self.a1 = a1
        self.b0 = b0
        self.b1 = b1
        self.evals = 0

    def endpoints_at(self, t: Fraction) -> tuple[Point, Point]:
        u = (t - self.t0) / (self.t1 - self.t0)
        return lerp(self.a0, self.a1, u), lerp(self.b0, self.b1, u)

    def __call__(self, t: Fraction) -> tuple[float, tuple[Point, ...]]:
        a, b = self.endpoints_at(t)
        self.evals += 1
        g = shortest_path(self.poly, a, b)
        return _enclosure_mid(g.length()), g.vertices

    def lipschitz(self) -> float:
        la = _enclosure_mid(SqrtSum.sqrt_rational(dist2(self.a0, self.a1)))
        lb = _enclosure_mid(SqrtSum.sqrt_rational(dist2(self.b0, self.b1)))
        return (la + lb) / float(self.t1 - self.t0) + 1e-12


def _gk_interval(f: _SliceIntegrand, lo: Fraction, hi: Fraction) -> tuple[float, float, bool]:
    """One K15/G7 pass: (value, certified error, vertex sets agreed)."""
    mid = (lo + hi) / 2
    half = (hi - lo) / 2
    k15 = 0.0
    g7 = 0.0
    fmax = 0.0
    sets: set = set()
    for node, wk, wg in _GK_NODES:
        t = mid + half * node
        val, verts = f(t)
        sets.add(verts)
        fmax = max(fmax, abs(val))
        k15 += wk * val
        if wg:
            g7 += wg * val
    width = float(hi - lo)
    k15 *= width / 2
    g7 *= width / 2
    lip = f.lipschitz()
    agreed = len(sets) == 1
    est = 10.0 * abs(k15 - g7)
    if not agreed:
        # A geodesic vertex-set change hides inside this interval; the
        # integrand is still lip-Lipschitz, which certifies the fallback.
        est = min(est + lip * width * width, 2.0 * lip * width * width)
    slop = lip * width * _NODE_SNAP + 1e-13 * max(fmax, 1.0) * width
    return k15, est + slop, agreed


def _integrate_piece(f: _SliceIntegrand, tol: float, max_depth: int = 42) -> tuple[float, float]:
    total = 0.0
    err = 0.0
    stack = [(f.t0, f.t1, 0)]
    full = float(f.t1 - f.t0)
    while stack:
        lo, hi, depth = stack.pop()
        val, e, agreed = _gk_interval(f, lo, hi)
        share = tol * float(hi - lo) / full
        if (e <= share and (agreed or e <= share * 0.25)) or depth >= max_depth:
            total += val
            err += e
            continue
        mid = (lo + hi) / 2
        stack.append((lo, mid, depth + 1))
        stack.append((mid, hi, depth + 1))
    return total, err


def _boundary_chains(domain: ConvexPolygon, bmap: BoundaryMap, horizontal: bool):
    """Split breakpoints into the two monotone chains left/right (or
    bottom/top) of the sweep, returning per-event-interval affine endpoint
    data.  Returns (events, pieces) with pieces[i] = (A0, A1, B0, B1)."""

    def key(p: Point) -> Fraction:
        return p.y if horizontal else p.x

    frame = bounding_frame(domain)
    lo = frame.b_minus if horizontal else frame.a_minus
    hi = frame.b_plus if horizontal else frame.a_plus
    events = {lo, hi}
    for p in bmap.pre:
        k = key(p)
        if lo < k < hi:
            events.add(k)
    for v in domain.vertices:
        k = key(v)
        if lo < k < hi:
            events.add(k)
    return sorted(events)


def _chord_points(domain: ConvexPolygon, horizontal: bool, value: Fraction) -> tuple[Point, Point]:
    from .geometry import chord

    axis = "parallel" if horizontal else "perpendicular"
    return chord(domain, Direction.axis(), axis, value)


def _direction_integral(
    domain: ConvexPolygon,
    bmap: BoundaryMap,
    poly: SimplePolygon,
    horizontal: bool,
    tol: float,
) -> tuple[float, float, int]:
    events = _boundary_chains(domain, bmap, horizontal)
    total = 0.0
    err = 0.0
    evals = 0
    span = float(events[-1] - events[0])
    for t0, t1 in zip(events, events[1:]):
        if t1 == t0:
            continue
        # Affine endpoint data: probe strictly inside to dodge the degenerate
        # chords at the extremes, then extrapolate linearly to the ends.
        q0 = t0 + (t1 - t0) / 64
        q1 = t1 - (t1 - t0) / 64
        h0 = _chord_points(domain, horizontal, q0)
        h1 = _chord_points(domain, horizontal, q1)
        a0, b0 = bmap.eval_point(h0[0]), bmap.eval_point(h0[1])
        a1, b1 = bmap.eval_point(h1[0]), bmap.eval_point(h1[1])
        # Extrapolate the affine motion back to [t0, t1].
        s = (t1 - t0) / (q1 - q0)
        a_start = lerp(a0, a1, (t0 - q0) / (q1 - q0))
        a_end = lerp(a0, a1, (t1 - q0) / (q1 - q0))
        b_start = lerp(b0, b1, (t0 - q0) / (q1 - q0))
        b_end = lerp(b0, b1, (t1 - q0) / (q1 - q0))
        f = _SliceIntegrand(poly, t0, t1, a_start, a_end, b_start, b_end)
        piece_tol = max(tol * float(t1 - t0) / span, 1e-17)
        v, e = _integrate_piece(f, piece_tol)
        total += v
        err += e
        evals += f.evals
    if err > tol * 4:
        raise ToleranceUnreachable(f"accumulated quadrature error {err} exceeds budget {tol}")
    return total, err, evals


def psi_alpha(
    domain: ConvexPolygon,
    direction: Direction,
    bmap: BoundaryMap,
    tol: Fraction | float = Q(1, 10**6),
) -> PsiBreakdown:
    """Certified two-directional slicing functional of a boundary map.

    The domain is rotated into the direction frame once (exactly: the
    direction is a rational rotation), after which both slicing families are
    axis-aligned.
    """
    tol_f = float(tol)
    if tol_f <= 0:
        raise ValueError("tolerance must be positive")
    image = validate_injective(bmap)
    if direction.is_axis():
        local_domain = domain
        local_map = bmap
    else:
        local_domain = ConvexPolygon.from_points(
            [direction.to_frame(p) for p in domain.vertices], validate=False
        )
        local_map = BoundaryMap(
            [direction.to_frame(p) for p in bmap.pre], bmap.img, closed=True
        )
    poly = image.polygon
    h_val, h_err, h_evals = _direction_integral(local_domain, local_map, poly, True, tol_f / 2)
    v_val, v_err, v_evals = _direction_integral(local_domain, local_map, poly, False, tol_f / 2)
    err = max(h_err, v_err)
    return PsiBreakdown(
        horizontal_integral=Fraction(h_val).limit_denominator(10**15),
        vertical_integral=Fraction(v_val).limit_denominator(10**15),
        error_bound=Fraction(err + 1e-15).limit_denominator(10**15),
        stats={"evals": h_evals + v_evals, "h_error": h_err, "v_error": v_err},
    )


def psi_of_map(domain: ConvexPolygon, bmap: BoundaryMap, tol: Fraction | float) -> PsiBreakdown:
    """Axis-frame shorthand used throughout the pipeline internals."""
    return psi_alpha(domain, Direction.axis(), bmap, tol)


# ---------------------------------------------------------------------------
# directional variation of affine meshes
# ---------------------------------------------------------------------------


def _triangle_derivative(p0: Point, p1: Point, p2: Point, i0: Point, i1: Point, i2: Point):
    """Affine derivative L (2x2 rational) with L(pk - p0) = ik - i0."""
    u = p1 - p0
    v = p2 - p0
    det = u.x * v.y - u.y * v.x
    if det == 0:
        raise GeometryError("degenerate preimage triangle")
    du = i1 - i0
    dv = i2 - i0
    # L = [du dv] * [[v.y, -v.x], [-u.y, u.x]] / det  (columns act on u, v)
    l00 = (du.x * v.y - dv.x * u.y) / det
    l01 = (-du.x * v.x + dv.x * u.x) / det
    l10 = (du.y * v.y - dv.y * u.y) / det
    l11 = (-du.y * v.x + dv.y * u.x) / det
    return l00, l01, l10, l11


def mesh_variation(mesh, direction: Direction) -> tuple[DirectionalVariation, DirectionalVariation, Interval]:
    """Exact per-triangle accumulation of |<Dv, e>| for both frame directions.

    Returns (variation along e_alpha, variation along e_perp, manhattan).
    """
    ex, ey = direction.cos, direction.sin
    px, py = -direction.sin, direction.cos
    terms_a: list[Interval] = []
    terms_p: list[Interval] = []
    for (ia, ib, ic) in mesh.triangles:
        p0, i0 = mesh.vertices[ia]
        p1, i1 = mesh.vertices[ib]
        p2, i2 = mesh.vertices[ic]
        l00, l01, l10, l11 = _triangle_derivative(p0, p1, p2, i0, i1, i2)
        u = p1 - p0
        v = p2 - p0
        area = abs(u.x * v.y - u.y * v.x) / 2
        # Column images of the two frame directions.
        ax, ay = l00 * ex + l01 * ey, l10 * ex + l11 * ey
        bx, by = l00 * px + l01 * py, l10 * px + l11 * py
        terms_a.append(Interval.sqrt_of(ax * ax + ay * ay, 80) * area)
        terms_p.append(Interval.sqrt_of(bx * bx + by * by, 80) * area)
    va = interval_sum(terms_a)
    vp = interval_sum(terms_p)
    manhattan = va + vp
    return (
        DirectionalVariation(direction.e_alpha, va),
        DirectionalVariation(direction.e_perp, vp),
        manhattan,
    )
