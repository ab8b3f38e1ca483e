"""Exact planar primitives: points, directions, polygons, chords, clipping.

All coordinates are ``Fraction``; every predicate is decided exactly.  The
pipeline applies its one inexact step (snapping an angle to a rational point
on the unit circle) at ingestion, after which slicing directions are the
coordinate axes of a rotated frame and everything here stays rational.

Polygons are stored counterclockwise.  ``ConvexPolygon`` merges collinear
vertex runs on construction; original breakpoints survive inside boundary
maps instead, which keeps the convexity invariants trivial.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .scalars import Q, SqrtSum, fr, rational_unit_vector


class GeometryError(ValueError):
    pass


class SelfIntersecting(GeometryError):
    pass


class Degenerate(GeometryError):
    pass


class OutOfRange(GeometryError):
    pass


# ---------------------------------------------------------------------------
# points and directions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    x: Fraction
    y: Fraction

    def __add__(self, other: "Point") -> "Point":
        return Point(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point") -> "Point":
        return Point(self.x - other.x, self.y - other.y)

    def scaled(self, c: Fraction | int) -> "Point":
        c = fr(c)
        return Point(self.x * c, self.y * c)

    def cross(self, other: "Point") -> Fraction:
        return self.x * other.y - self.y * other.x

    def dot(self, other: "Point") -> Fraction:
        return self.x * other.x + self.y * other.y

    def norm2(self) -> Fraction:
        return self.x * self.x + self.y * self.y

    def length(self) -> SqrtSum:
        return SqrtSum.sqrt_rational(self.norm2())

    def __repr__(self) -> str:
        return f"({self.x}, {self.y})"


def pt(x: int | str | Fraction, y: int | str | Fraction) -> Point:
    return Point(fr(x), fr(y))


def lerp(a: Point, b: Point, t: Fraction) -> Point:
    return Point(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)


def dist2(a: Point, b: Point) -> Fraction:
    return (a - b).norm2()


def seg_length(a: Point, b: Point) -> SqrtSum:
    return SqrtSum.sqrt_rational(dist2(a, b))


def polyline_length(points: Sequence[Point]) -> SqrtSum:
    total = SqrtSum.zero()
    for a, b in zip(points, points[1:]):
        total = total + seg_length(a, b)
    return total


@dataclass(frozen=True)
class Direction:
    """A rational rotation: e_alpha = (cos, sin) with cos^2 + sin^2 == 1."""

    cos: Fraction
    sin: Fraction

    def __post_init__(self) -> None:
        if self.cos * self.cos + self.sin * self.sin != 1:
            raise GeometryError("direction is not a rational unit vector")

    @staticmethod
    def from_angle(alpha: float, max_denominator: int = 1000) -> "Direction":
        c, s = rational_unit_vector(alpha, max_denominator)
        return Direction(c, s)

    @staticmethod
    def axis() -> "Direction":
        return Direction(Q(1), Q(0))

    @property
    def e_alpha(self) -> Point:
        return Point(self.cos, self.sin)

    @property
    def e_perp(self) -> Point:
        return Point(-self.sin, self.cos)

    def is_axis(self) -> bool:
        return self.cos == 1 and self.sin == 0

    def to_frame(self, p: Point) -> Point:
        """Coordinates of p in the (e_alpha, e_perp) basis."""
        return Point(self.cos * p.x + self.sin * p.y, -self.sin * p.x + self.cos * p.y)

    def from_frame(self, p: Point) -> Point:
        return Point(self.cos * p.x - self.sin * p.y, self.sin * p.x + self.cos * p.y)

    def perp(self) -> "Direction":
        return Direction(-self.sin, self.cos)


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------


def orient(p: Point, q: Point, r: Point) -> int:
    """Sign of the cross product (q-p) x (r-p): +1 ccw, -1 cw, 0 collinear."""
    v = (q - p).cross(r - p)
    return (v > 0) - (v < 0)


def point_on_segment(p: Point, a: Point, b: Point) -> bool:
    """True iff p lies on the closed segment ab (exact)."""
    if orient(a, b, p) != 0:
        return False
    return min(a.x, b.x) <= p.x <= max(a.x, b.x) and min(a.y, b.y) <= p.y <= max(a.y, b.y)


def segments_properly_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    """True iff open segments ab and cd cross in a single interior point."""
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def segment_intersection(a: Point, b: Point, c: Point, d: Point):
    """Exact intersection of closed segments.

    Returns None, ("point", p) or ("overlap", p, q) with p, q the endpoints of
    the shared subsegment (p != q).
    """
    r = b - a
    s = d - c
    denom = r.cross(s)
    if denom != 0:
        t = (c - a).cross(s) / denom
        u = (c - a).cross(r) / denom
        if 0 <= t <= 1 and 0 <= u <= 1:
            return ("point", lerp(a, b, t))
        return None
    # Parallel: either disjoint or collinear.
    if (c - a).cross(r) != 0:
        return None
    # Collinear: order by parameter along ab.
    if r.norm2() == 0:
        if point_on_segment(a, c, d):
            return ("point", a)
        return None
    denom2 = r.norm2()
    t0 = (c - a).dot(r) / denom2
    t1 = (d - a).dot(r) / denom2
    lo, hi = min(t0, t1), max(t0, t1)
    lo = max(lo, Q(0))
    hi = min(hi, Q(1))
    if lo > hi:
        return None
    if lo == hi:
        return ("point", lerp(a, b, lo))
    return ("overlap", lerp(a, b, lo), lerp(a, b, hi))


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------


def signed_area2(vertices: Sequence[Point]) -> Fraction:
    """Twice the signed area (positive for counterclockwise)."""
    total = Q(0)
    n = len(vertices)
    for i in range(n):
        total += vertices[i].cross(vertices[(i + 1) % n])
    return total


def merge_collinear(vertices: Sequence[Point]) -> tuple[Point, ...]:
    """Drop vertices interior to a straight run (and repeated points)."""
    pts = [p for i, p in enumerate(vertices) if p != vertices[(i + 1) % len(vertices)]]
    out: list[Point] = []
    n = len(pts)
    for i, p in enumerate(pts):
        if orient(pts[(i - 1) % n], p, pts[(i + 1) % n]) != 0:
            out.append(p)
    return tuple(out)


@dataclass(frozen=True)
class PolygonReport:
    simple: bool
    convex: bool
    area2: Fraction
    reflex_vertices: tuple[Point, ...]


def validate_polygon(vertices: Sequence[Point]) -> PolygonReport:
    """Exact simplicity/convexity audit of a counterclockwise-or-not ring.

    Raises Degenerate for repeated vertices or zero area, SelfIntersecting if
    any two non-adjacent edges touch (or adjacent edges overlap).
    """
    n = len(vertices)
    if n < 3:
        raise Degenerate("polygon needs at least 3 vertices")
    if len({(p.x, p.y) for p in vertices}) != n:
        raise Degenerate("repeated vertex")
    area2 = signed_area2(vertices)
    if area2 == 0:
        raise Degenerate("zero area")
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = edges[i]
            c, d = edges[j]
            hit = segment_intersection(a, b, c, d)
            if hit is None:
                continue
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                if hit[0] == "overlap":
                    raise SelfIntersecting(f"edges {i} and {j} overlap")
                shared = b if j == i + 1 else a
                if hit[1] != shared:
                    raise SelfIntersecting(f"edges {i} and {j} touch off the shared vertex")
            else:
                raise SelfIntersecting(f"edges {i} and {j} intersect")
    ccw = area2 > 0
    reflex = []
    convex = True
    for i in range(n):
        o = orient(vertices[(i - 1) % n], vertices[i], vertices[(i + 1) % n])
        if (o < 0 and ccw) or (o > 0 and not ccw):
            reflex.append(vertices[i])
            convex = False
    return PolygonReport(True, convex, area2, tuple(reflex))


@dataclass(frozen=True)
class SimplePolygon:
    """Simple polygon, counterclockwise, exact coordinates."""

    vertices: tuple[Point, ...]

    @staticmethod
    def from_points(points: Iterable[Point], validate: bool = True) -> "SimplePolygon":
        verts = tuple(points)
        if validate:
            report = validate_polygon(verts)
            if report.area2 < 0:
                verts = tuple(reversed(verts))
        elif signed_area2(verts) < 0:
            verts = tuple(reversed(verts))
        return SimplePolygon(verts)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def area2(self) -> Fraction:
        return signed_area2(self.vertices)

    def edges(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def perimeter(self) -> SqrtSum:
        total = SqrtSum.zero()
        for a, b in self.edges():
            total = total + seg_length(a, b)
        return total

    def reflex_vertices(self) -> tuple[Point, ...]:
        cached = self.__dict__.get("_reflex")
        if cached is None:
            v = self.vertices
            n = len(v)
            cached = tuple(
                v[i] for i in range(n) if orient(v[(i - 1) % n], v[i], v[(i + 1) % n]) < 0
            )
            self.__dict__["_reflex"] = cached
        return cached

    def is_convex(self) -> bool:
        return not self.reflex_vertices()

    def contains(self, p: Point) -> str:
        """Exact location: 'in', 'boundary' or 'out' (winding number)."""
        v = self.vertices
        n = len(v)
        winding = 0
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            if point_on_segment(p, a, b):
                return "boundary"
            if a.y <= p.y:
                if b.y > p.y and orient(a, b, p) > 0:
                    winding += 1
            elif b.y <= p.y and orient(a, b, p) < 0:
                winding -= 1
        return "in" if winding != 0 else "out"


@dataclass(frozen=True)
class ConvexPolygon(SimplePolygon):
    """Convex, counterclockwise, no three consecutive collinear vertices."""

    @staticmethod
    def from_points(points: Iterable[Point], validate: bool = True) -> "ConvexPolygon":
        verts = tuple(points)
        if signed_area2(verts) < 0:
            verts = tuple(reversed(verts))
        verts = merge_collinear(verts)
        if validate:
            report = validate_polygon(verts)
            if not report.convex:
                raise GeometryError("polygon is not convex")
        return ConvexPolygon(verts)


# ---------------------------------------------------------------------------
# frames, chords and clipping (alpha = 0 slicing in a given direction frame)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundingFrame:
    """Extents of a polygon along e_alpha (a-, a+) and e_perp (b-, b+)."""

    a_minus: Fraction
    a_plus: Fraction
    b_minus: Fraction
    b_plus: Fraction

    @property
    def ell(self) -> Fraction:
        return self.a_plus - self.a_minus

    @property
    def h(self) -> Fraction:
        return self.b_plus - self.b_minus


def bounding_frame(poly: SimplePolygon, direction: Direction | None = None) -> BoundingFrame:
    d = direction or Direction.axis()
    xs = []
    ys = []
    for p in poly.vertices:
        q = d.to_frame(p) if not d.is_axis() else p
        xs.append(q.x)
        ys.append(q.y)
    return BoundingFrame(min(xs), max(xs), min(ys), max(ys))


def _axis_chord(poly: SimplePolygon, horizontal: bool, value: Fraction) -> tuple[Point, Point]:
    frame = bounding_frame(poly)
    lo, hi = (frame.b_minus, frame.b_plus) if horizontal else (frame.a_minus, frame.a_plus)
    if not (lo < value < hi):
        raise OutOfRange(f"slice value {value} outside open extent ({lo}, {hi})")
    hits: list[Point] = []
    for a, b in poly.edges():
        ka, kb = (a.y, b.y) if horizontal else (a.x, b.x)
        if ka == kb:
            continue  # parallel edge; convexity puts those at the extremes only
        if min(ka, kb) <= value <= max(ka, kb):
            t = (value - ka) / (kb - ka)
            if 0 <= t <= 1:
                hits.append(lerp(a, b, t))
    uniq: list[Point] = []
    for h in hits:
        if h not in uniq:
            uniq.append(h)
    key = (lambda p: p.x) if horizontal else (lambda p: p.y)
    uniq.sort(key=key)
    if len(uniq) == 2:
        return uniq[0], uniq[1]
    if len(uniq) > 2:
        # Monotone non-convex pieces can put several boundary points on the
        # line; the cut is the first adjacent pair with an interior gap.
        for a, b in zip(uniq, uniq[1:]):
            mid = lerp(a, b, Q(1, 2))
            if poly.contains(mid) == "in":
                return a, b
    raise GeometryError(f"expected 2 chord points, got {len(uniq)}")


def chord(
    poly: SimplePolygon,
    direction: Direction,
    axis: str,
    value: Fraction,
) -> tuple[Point, Point]:
    """Boundary points cut by a slicing line, ordered along the line.

    ``axis='parallel'`` slices with a line parallel to e_alpha at e_perp
    coordinate ``value`` (the H points); ``axis='perpendicular'`` slices
    perpendicular to e_alpha at e_alpha coordinate ``value`` (the V points).
    Works for any polygon the line cuts in exactly two boundary points
    (convex always; x- or y-monotone pieces inside the decompositions).
    """
    if axis not in ("parallel", "perpendicular"):
        raise ValueError("axis must be 'parallel' or 'perpendicular'")
    if direction.is_axis():
        local = poly
    else:
        local = SimplePolygon.from_points(
            [direction.to_frame(p) for p in poly.vertices], validate=False
        )
    p1, p2 = _axis_chord(local, axis == "parallel", fr(value))
    if direction.is_axis():
        return p1, p2
    return direction.from_frame(p1), direction.from_frame(p2)


def _axis_clip(poly: ConvexPolygon, horizontal: bool, value: Fraction, below: bool) -> ConvexPolygon:
    _axis_chord(poly, horizontal, value)  # range check
    kept: list[Point] = []

    def coord(p: Point) -> Fraction:
        return p.y if horizontal else p.x

    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ka, kb = coord(a), coord(b)
        inside_a = ka <= value if below else ka >= value
        inside_b = kb <= value if below else kb >= value
        if inside_a:
            kept.append(a)
        if inside_a != inside_b:
            t = (value - ka) / (kb - ka)
            kept.append(lerp(a, b, t))
    return ConvexPolygon.from_points(kept, validate=False)


def clip_below(poly: ConvexPolygon, direction: Direction, value: Fraction) -> ConvexPolygon:
    """Convex part of the polygon on the lower side of a parallel slice."""
    if direction.is_axis():
        return _axis_clip(poly, True, fr(value), True)
    local = ConvexPolygon.from_points([direction.to_frame(p) for p in poly.vertices], validate=False)
    clipped = _axis_clip(local, True, fr(value), True)
    return ConvexPolygon.from_points([direction.from_frame(p) for p in clipped.vertices], validate=False)


def clip_above(poly: ConvexPolygon, direction: Direction, value: Fraction) -> ConvexPolygon:
    if direction.is_axis():
        return _axis_clip(poly, True, fr(value), False)
    local = ConvexPolygon.from_points([direction.to_frame(p) for p in poly.vertices], validate=False)
    clipped = _axis_clip(local, True, fr(value), False)
    return ConvexPolygon.from_points([direction.from_frame(p) for p in clipped.vertices], validate=False)


# ---------------------------------------------------------------------------
# segment-in-polygon tests and polygon surgery
# ---------------------------------------------------------------------------


def segment_boundary_contacts(poly: SimplePolygon, a: Point, b: Point) -> list[Fraction]:
    """Parameters t in [0,1] where a + t(b-a) touches the polygon boundary."""
    out: set[Fraction] = set()
    denom = dist2(a, b)
    for c, d in poly.edges():
        hit = segment_intersection(a, b, c, d)
        if hit is None:
            continue
        pts = [hit[1]] if hit[0] == "point" else [hit[1], hit[2]]
        for p in pts:
            if denom == 0:
                out.add(Q(0))
            else:
                out.add((p - a).dot(b - a) / denom)
    return sorted(out)


def segment_in_closure(poly: SimplePolygon, a: Point, b: Point) -> bool:
    """True iff the closed segment ab lies inside the closed polygon."""
    if poly.contains(a) == "out" or poly.contains(b) == "out":
        return False
    for c, d in poly.edges():
        if segments_properly_cross(a, b, c, d):
            return False
    cuts = [Q(0)] + segment_boundary_contacts(poly, a, b) + [Q(1)]
    cuts = sorted(set(c for c in cuts if 0 <= c <= 1))
    for t0, t1 in zip(cuts, cuts[1:]):
        mid = lerp(a, b, (t0 + t1) / 2)
        if poly.contains(mid) == "out":
            return False
    return True


def segment_interior_strictly_inside(
    poly: SimplePolygon, a: Point, b: Point, boundary_ok: tuple[Point, ...] = ()
) -> bool:
    """True iff ab minus the listed endpoints avoids the boundary entirely.

    Used to certify that modified geodesics enter the open polygon.
    """
    for c, d in poly.edges():
        if segments_properly_cross(a, b, c, d):
            return False
        hit = segment_intersection(a, b, c, d)
        if hit is None:
            continue
        if hit[0] == "overlap":
            return False
        if hit[1] not in boundary_ok:
            return False
    mid = lerp(a, b, Q(1, 2))
    return poly.contains(mid) == "in" or (mid in boundary_ok)


def polyline_is_simple(points: Sequence[Point]) -> bool:
    """Exact self-intersection test for an open polyline."""
    n = len(points) - 1
    for i in range(n):
        a, b = points[i], points[i + 1]
        if a == b:
            return False
        for j in range(i + 1, n):
            c, d = points[j], points[j + 1]
            hit = segment_intersection(a, b, c, d)
            if hit is None:
                continue
            if j == i + 1:
                if hit[0] == "overlap" or hit[1] != b:
                    return False
            else:
                return False
    return True


def boundary_arc(poly: SimplePolygon, start: Point, end: Point) -> list[Point]:
    """Counterclockwise boundary walk from start to end, both on the boundary.

    The returned list includes start and end plus every polygon vertex
    strictly between them.
    """
    verts = poly.vertices
    n = len(verts)

    def locate(p: Point) -> tuple[int, Fraction]:
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            if point_on_segment(p, a, b):
                denom = dist2(a, b)
                t = (p - a).dot(b - a) / denom
                return i, t
        raise GeometryError(f"point {p} is not on the polygon boundary")

    ei, ti = locate(start)
    ej, tj = locate(end)
    out = [start]
    if ei == ej and ti <= tj:
        if end != start:
            out.append(end)
        return out
    i = ei
    while True:
        nxt = verts[(i + 1) % n]
        if nxt != out[-1]:
            out.append(nxt)
        i = (i + 1) % n
        if i == ej:
            break
    if end != out[-1]:
        out.append(end)
    else:
        pass
    return out


def split_polygon(
    poly: SimplePolygon, curve: Sequence[Point]
) -> tuple[SimplePolygon, SimplePolygon]:
    """Split a polygon along a simple curve with endpoints on its boundary.

    The curve's interior must lie strictly inside the polygon.  Returns
    (side1, side2): side1 is bounded by the ccw boundary arc from curve start
    to curve end plus the reversed curve; side2 by the complementary arc plus
    the curve.  Both results are counterclockwise.
    """
    start, end = curve[0], curve[-1]
    arc1 = boundary_arc(poly, start, end)
    arc2 = boundary_arc(poly, end, start)
    rev = list(reversed(curve))
    side1 = arc1[:-1] + rev[:-1] if len(curve) > 1 else arc1[:-1]
    side2 = arc2[:-1] + list(curve)[:-1]
    p1 = SimplePolygon.from_points(_dedup_ring(side1), validate=False)
    p2 = SimplePolygon.from_points(_dedup_ring(side2), validate=False)
    return p1, p2


def _dedup_ring(points: Sequence[Point]) -> list[Point]:
    out: list[Point] = []
    for p in points:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out
