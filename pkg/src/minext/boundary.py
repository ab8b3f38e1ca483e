"""Piecewise-linear maps from one-dimensional skeletons to the plane.

A ``BoundaryMap`` is a chain of breakpoints (preimage point, image point):
consecutive preimage points span a straight segment of the skeleton and the
map interpolates linearly between the stored images.  Closed chains wrap
around; open chains are used for restrictions and for the sides of cells.

Preimage breakpoints are stored as exact points on the skeleton rather than
arclength offsets, so every incidence test is an exact rational computation
(arclengths of rational segments are typically irrational).  The
``SkeletonPoint`` (edge index, fraction) addressing from the problem-file
format converts losslessly to points via ``skeleton_point_to_point``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .geometry import (
    GeometryError,
    Point,
    SimplePolygon,
    dist2,
    lerp,
    merge_collinear,
    orient,
    point_on_segment,
    segment_intersection,
    signed_area2,
)
from .scalars import Q, SqrtSum, fr


class NotOnSkeleton(GeometryError):
    pass


class NotInjective(GeometryError):
    pass


class NotSubSkeleton(GeometryError):
    pass


@dataclass(frozen=True)
class SkeletonPoint:
    """Address on a polygon boundary: fraction t along edge ``edge_id``.

    t = 1 on edge e aliases t = 0 on the successor edge; the canonical form
    keeps t in [0, 1).
    """

    edge_id: int
    t: Fraction

    def canonical(self, n_edges: int) -> "SkeletonPoint":
        if self.t == 1:
            return SkeletonPoint((self.edge_id + 1) % n_edges, Q(0))
        return self


def skeleton_point_to_point(poly: SimplePolygon, sp: SkeletonPoint) -> Point:
    n = len(poly.vertices)
    if not (0 <= sp.edge_id < n) or not (0 <= sp.t <= 1):
        raise NotOnSkeleton(f"bad skeleton point {sp}")
    a = poly.vertices[sp.edge_id]
    b = poly.vertices[(sp.edge_id + 1) % n]
    return lerp(a, b, fr(sp.t))


def point_to_skeleton_point(poly: SimplePolygon, p: Point) -> SkeletonPoint:
    n = len(poly.vertices)
    for i in range(n):
        a = poly.vertices[i]
        b = poly.vertices[(i + 1) % n]
        if point_on_segment(p, a, b):
            t = (p - a).dot(b - a) / dist2(a, b)
            return SkeletonPoint(i, t).canonical(n)
    raise NotOnSkeleton(f"{p} is not on the polygon boundary")


class BoundaryMap:
    """Piecewise-linear map along a chain of skeleton breakpoints."""

    __slots__ = ("pre", "img", "closed")

    def __init__(self, pre: list[Point] | tuple[Point, ...], img, closed: bool):
        pre = tuple(pre)
        img = tuple(img)
        if len(pre) != len(img):
            raise ValueError("breakpoint lists disagree in length")
        if len(pre) < 2:
            raise ValueError("need at least two breakpoints")
        for a, b in zip(pre, pre[1:]):
            if a == b:
                raise ValueError("repeated consecutive preimage breakpoint")
        if closed and pre[0] == pre[-1]:
            raise ValueError("closed chains must not repeat the first breakpoint")
        self.pre = pre
        self.img = img
        self.closed = closed

    # -- construction ---------------------------------------------------------

    @staticmethod
    def identity(poly: SimplePolygon) -> "BoundaryMap":
        return BoundaryMap(poly.vertices, poly.vertices, closed=True)

    @staticmethod
    def affine(poly: SimplePolygon, matrix, offset: Point) -> "BoundaryMap":
        (a, b), (c, d) = matrix
        img = [
            Point(a * p.x + b * p.y + offset.x, c * p.x + d * p.y + offset.y)
            for p in poly.vertices
        ]
        return BoundaryMap(poly.vertices, img, closed=True)

    @staticmethod
    def from_polygon_breakpoints(
        poly: SimplePolygon, pairs: list[tuple[SkeletonPoint, Point]]
    ) -> "BoundaryMap":
        """Closed map from (skeleton point, image) pairs in boundary order.

        Polygon vertices without an explicit pair are rejected: the chain must
        bend only at stored breakpoints.
        """
        n = len(poly.vertices)
        keyed: list[tuple[int, Fraction, Point]] = []
        for sp, image in pairs:
            spc = sp.canonical(n)
            keyed.append((spc.edge_id, fr(spc.t), image))
        keyed.sort(key=lambda k: (k[0], k[1]))
        pre = [lerp(poly.vertices[e], poly.vertices[(e + 1) % n], t) for e, t, _ in keyed]
        img = [image for _, _, image in keyed]
        for i, v in enumerate(poly.vertices):
            if v not in pre:
                raise ValueError(f"vertex {v} has no breakpoint")
        return BoundaryMap(pre, img, closed=True)

    # -- basic structure -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.pre)

    def segments(self) -> list[tuple[Point, Point, Point, Point]]:
        """(pre_a, pre_b, img_a, img_b) for every linear piece."""
        out = []
        rng = range(len(self.pre)) if self.closed else range(len(self.pre) - 1)
        for i in rng:
            j = (i + 1) % len(self.pre)
            out.append((self.pre[i], self.pre[j], self.img[i], self.img[j]))
        return out

    def reversed(self) -> "BoundaryMap":
        return BoundaryMap(tuple(reversed(self.pre)), tuple(reversed(self.img)), self.closed)

    def image_length(self) -> SqrtSum:
        total = SqrtSum.zero()
        for _, _, ia, ib in self.segments():
            total = total + SqrtSum.sqrt_rational(dist2(ia, ib))
        return total

    def pre_length(self) -> SqrtSum:
        total = SqrtSum.zero()
        for pa, pb, _, _ in self.segments():
            total = total + SqrtSum.sqrt_rational(dist2(pa, pb))
        return total

    # -- evaluation -------------------------------------------------------------

    def locate(self, p: Point) -> tuple[int, Fraction]:
        """Index i and fraction t with p = pre[i] + t*(pre[i+1] - pre[i])."""
        for i, (pa, pb, _, _) in enumerate(self.segments()):
            if point_on_segment(p, pa, pb):
                t = (p - pa).dot(pb - pa) / dist2(pa, pb)
                return i, t
        raise NotOnSkeleton(f"{p} is not on the skeleton chain")

    def eval_point(self, p: Point) -> Point:
        i, t = self.locate(p)
        j = (i + 1) % len(self.pre)
        return lerp(self.img[i], self.img[j], t)

    def eval(self, poly: SimplePolygon, sp: SkeletonPoint) -> Point:
        return self.eval_point(skeleton_point_to_point(poly, sp))

    # -- refinement and restriction ----------------------------------------------

    def insert_breakpoints(self, points: list[Point]) -> "BoundaryMap":
        """Refine the chain; the map is unchanged pointwise."""
        inserts: dict[int, list[tuple[Fraction, Point, Point]]] = {}
        for p in points:
            i, t = self.locate(p)
            if t == 0 or (t == 1 and not self.closed and i == len(self.pre) - 2):
                continue
            if t == 1:
                continue
            j = (i + 1) % len(self.pre)
            image = lerp(self.img[i], self.img[j], t)
            inserts.setdefault(i, []).append((t, p, image))
        if not inserts:
            return self
        pre: list[Point] = []
        img: list[Point] = []
        count = len(self.pre) if self.closed else len(self.pre) - 1
        for i in range(len(self.pre)):
            pre.append(self.pre[i])
            img.append(self.img[i])
            if i < count and i in inserts:
                for _, p, image in sorted(inserts[i], key=lambda e: e[0]):
                    if p != pre[-1]:
                        pre.append(p)
                        img.append(image)
        if self.closed and pre[0] == pre[-1]:
            pre.pop()
            img.pop()
        return BoundaryMap(pre, img, self.closed)

    def restrict(self, start: Point, end: Point) -> "BoundaryMap":
        """Open sub-chain from start to end following the chain's orientation."""
        refined = self.insert_breakpoints([start, end])
        try:
            i0, t0 = refined.locate(start)
            i1, t1 = refined.locate(end)
        except NotOnSkeleton as exc:
            raise NotSubSkeleton(str(exc)) from None
        # After insertion both points are breakpoints.
        def index_of(p: Point) -> int:
            for k, q in enumerate(refined.pre):
                if q == p:
                    return k
            raise NotSubSkeleton(f"{p} is not a breakpoint after refinement")

        a = index_of(start)
        b = index_of(end)
        n = len(refined.pre)
        idx = [a]
        while idx[-1] != b:
            if not refined.closed and idx[-1] == n - 1:
                raise NotSubSkeleton("end point not reachable along open chain")
            idx.append((idx[-1] + 1) % n)
            if len(idx) > n + 1:
                raise NotSubSkeleton("restriction walk did not terminate")
        pre = [refined.pre[k] for k in idx]
        img = [refined.img[k] for k in idx]
        return BoundaryMap(pre, img, closed=False)


@dataclass(frozen=True)
class ImagePolygon:
    """Validated Jordan image of a closed boundary map."""

    polygon: SimplePolygon
    orientation_preserved: bool
    correspondence: dict

    def __hash__(self) -> int:
        return hash((self.polygon, self.orientation_preserved))


def validate_injective(bmap: BoundaryMap) -> ImagePolygon:
    """Confirm the image of a closed chain is a Jordan polygon (exact O(n^2)).

    The orientation flag records whether the image ring runs counterclockwise
    when the preimage does; the returned polygon itself is always stored
    counterclockwise.
    """
    if not bmap.closed:
        raise ValueError("injectivity validation needs a closed chain")
    img = bmap.img
    n = len(img)
    for i in range(n):
        if img[i] == img[(i + 1) % n]:
            raise NotInjective(f"image segment {i} is degenerate")
    for i in range(n):
        a, b = img[i], img[(i + 1) % n]
        for j in range(i + 1, n):
            c, d = img[j], img[(j + 1) % n]
            hit = segment_intersection(a, b, c, d)
            if hit is None:
                continue
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                if hit[0] == "overlap":
                    raise NotInjective(f"image segments {i},{j} overlap")
                shared = b if j == i + 1 else a
                if hit[1] != shared:
                    raise NotInjective(f"image segments {i},{j} cross")
            else:
                raise NotInjective(f"image segments {i},{j} intersect")
    area2 = signed_area2(img)
    if area2 == 0:
        raise NotInjective("image ring has zero area")
    preserved = area2 > 0
    ring = img if preserved else tuple(reversed(img))
    poly = SimplePolygon.from_points(merge_collinear(ring), validate=False)
    correspondence = {}
    for p, q in zip(bmap.pre, bmap.img):
        if q in poly.vertices and q not in correspondence:
            correspondence[q] = p
    return ImagePolygon(poly, preserved, correspondence)


def join_chains(chains: list[BoundaryMap], close: bool = True) -> BoundaryMap:
    """Concatenate open chains end-to-start; closed ring by default."""
    pre: list[Point] = []
    img: list[Point] = []
    for chain in chains:
        if chain.closed:
            raise ValueError("join expects open chains")
        start = 0
        if pre:
            if chain.pre[0] != pre[-1] or chain.img[0] != img[-1]:
                raise ValueError("chains do not meet")
            start = 1
        pre.extend(chain.pre[start:])
        img.extend(chain.img[start:])
    if not close:
        return BoundaryMap(pre, img, closed=False)
    if pre[0] != pre[-1] or img[0] != img[-1]:
        raise ValueError("chains do not close up")
    pre.pop()
    img.pop()
    return BoundaryMap(pre, img, closed=True)


def chain_from_points(pre: list[Point], img: list[Point]) -> BoundaryMap:
    return BoundaryMap(pre, img, closed=False)
