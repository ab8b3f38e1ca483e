"""One-dimensional skeleton decompositions: tips, strips, strip splits.

Everything here operates on *pieces*: a convex preimage polygon together
with a validated closed boundary map and its image polygon.  The core
operation cuts a piece along an axis-parallel preimage line whose image is a
delta-modified geodesic between the images of the chord endpoints; the chord
parametrization interpolates exactly computed last-crossing points of the
transverse geodesics, which is what makes the per-strip functional sums
telescope instead of drifting.

All decomposition invariants are verified on construction (exact area
bookkeeping, injectivity of every new skeleton map) and the functional
budgets are checked with certified quadrature; callers shrink delta and
densify events on failure, since the underlying thresholds are
non-constructive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .boundary import BoundaryMap, join_chains, validate_injective
from .geodesics import (
    DeltaTooLarge,
    crossing,
    modify,
    safe_delta,
    shortest_path,
)
from .geometry import (
    ConvexPolygon,
    Direction,
    GeometryError,
    Point,
    SimplePolygon,
    bounding_frame,
    chord,
    dist2,
    lerp,
    merge_collinear,
    segment_interior_strictly_inside,
    signed_area2,
)
from .psi import PsiBreakdown, psi_of_map
from .scalars import Q, fr

__all__ = [
    "Piece",
    "VerificationFailed",
    "classify_polygon",
    "TipDecomposition",
    "TipRecord",
    "remove_tips",
    "StripDecomposition",
    "slice_strips",
    "StripSplit",
    "split_strip",
    "strip_corner_data",
    "cut_piece",
]


class VerificationFailed(GeometryError):
    pass


@dataclass
class Piece:
    """Preimage region (convex in the strip machinery, simple for coarse
    pieces) with its validated closed boundary map."""

    domain: SimplePolygon
    bmap: BoundaryMap
    image: SimplePolygon

    @staticmethod
    def build(domain: SimplePolygon, bmap: BoundaryMap) -> "Piece":
        if signed_area2(bmap.pre) < 0:
            bmap = bmap.reversed()
        image = validate_injective(bmap)
        return Piece(domain, bmap, image.polygon)

    @staticmethod
    def from_map(bmap: BoundaryMap, convex: bool = True) -> "Piece":
        ring = merge_collinear(bmap.pre)
        domain = (
            ConvexPolygon.from_points(ring, validate=False)
            if convex
            else SimplePolygon.from_points(ring, validate=False)
        )
        return Piece.build(domain, bmap)

    def area2(self) -> Fraction:
        return self.domain.area2


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def classify_polygon(poly: ConvexPolygon, direction: Direction | None = None) -> str:
    """'rectangle' | 'i' | 'ii' | 'iii' by sides parallel to the direction."""
    d = direction or Direction.axis()
    verts = [d.to_frame(p) for p in poly.vertices] if not d.is_axis() else list(poly.vertices)
    n = len(verts)
    horizontal = sum(1 for i in range(n) if verts[i].y == verts[(i + 1) % n].y)
    vertical = sum(1 for i in range(n) if verts[i].x == verts[(i + 1) % n].x)
    if n == 4 and horizontal == 2 and vertical == 2:
        return "rectangle"
    if horizontal == 2:
        return "i"
    if horizontal == 1:
        return "ii"
    return "iii"


# ---------------------------------------------------------------------------
# the core cut
# ---------------------------------------------------------------------------


def _canon_pos(pos: tuple[int, Fraction], n_pts: int) -> tuple[int, Fraction]:
    """Canonical position on a polyline: (i, 1) aliases (i+1, 0)."""
    i, t = pos
    if t == 1 and i < n_pts - 2:
        return (i + 1, Q(0))
    return (i, t)


def _chord_param_chain(
    pre_a: Point,
    pre_b: Point,
    curve: tuple[Point, ...],
    feet: list[tuple[Fraction, tuple[int, Fraction], Point]],
    horizontal: bool,
    value: Fraction,
) -> BoundaryMap:
    """Monotone piecewise-linear parametrization of the cut curve over the
    chord.  ``feet`` holds (chord coordinate, curve position, point) anchors;
    non-monotone or duplicate anchors are dropped (the parametrization between
    surviving anchors is a free choice), and curve vertices between anchors
    are spread uniformly over the open preimage gap.
    """

    def pre_at(c: Fraction) -> Point:
        return Point(c, value) if horizontal else Point(value, c)

    coord_a = pre_a.x if horizontal else pre_a.y
    coord_b = pre_b.x if horizontal else pre_b.y
    npts = len(curve)
    anchors: list[tuple[Fraction, tuple[int, Fraction], Point]] = [(coord_a, (0, Q(0)), curve[0])]
    for c, pos, p in feet:
        pos = _canon_pos(pos, npts)
        if pos <= anchors[-1][1] or p == anchors[-1][2]:
            continue
        if not (anchors[-1][0] < c < coord_b):
            continue
        if p == curve[-1] or p == curve[0]:
            continue
        anchors.append((c, pos, p))
    end_pos = _canon_pos((npts - 2, Q(1)), npts)
    anchors.append((coord_b, end_pos, curve[-1]))
    pre: list[Point] = []
    img: list[Point] = []
    for (c0, pos0, p0), (c1, pos1, p1) in zip(anchors, anchors[1:]):
        if not img or img[-1] != p0:
            pre.append(pre_at(c0))
            img.append(p0)
        betw = [
            curve[vi]
            for vi in range(1, npts - 1)
            if pos0 < (vi, Q(0)) < pos1 and curve[vi] != p0 and curve[vi] != p1
        ]
        for k, v in enumerate(betw):
            c = c0 + (c1 - c0) * Q(k + 1, len(betw) + 1)
            pre.append(pre_at(c))
            img.append(v)
    pre.append(pre_at(coord_b))
    img.append(curve[-1])
    return BoundaryMap(pre, img, closed=False)


def cut_piece(
    piece: Piece,
    horizontal: bool,
    value: Fraction,
    delta: Fraction,
    event_values: list[Fraction],
) -> tuple[Piece, Piece, BoundaryMap]:
    """Cut a piece along an axis-parallel line; the image cut is a modified
    geodesic parametrized through last-crossing points at the given events.

    Returns (minus piece, plus piece, cut chain): minus is the side with the
    smaller transverse coordinate (below / left of the cut).  The cut chain
    runs with increasing chord coordinate and is shared by both pieces.
    """
    axis = "parallel" if horizontal else "perpendicular"
    h1, h2 = chord(piece.domain, Direction.axis(), axis, value)
    a_img = piece.bmap.eval_point(h1)
    b_img = piece.bmap.eval_point(h2)
    geo = shortest_path(piece.image, a_img, b_img)
    mod = modify(geo, delta, piece.image)
    curve = mod.points
    _check_cut_interior(piece.image, curve)
    feet: list[tuple[Fraction, tuple[int, Fraction], Point]] = []
    lo = h1.x if horizontal else h1.y
    hi = h2.x if horizontal else h2.y
    for ev in sorted(set(event_values)):
        if not (lo < ev < hi):
            continue
        try:
            v1, v2 = chord(
                piece.domain,
                Direction.axis(),
                "perpendicular" if horizontal else "parallel",
                ev,
            )
            s_img = piece.bmap.eval_point(v1)
            t_img = piece.bmap.eval_point(v2)
        except GeometryError:
            continue
        zeta = shortest_path(piece.image, s_img, t_img)
        hit = crossing(curve, zeta.points)
        if hit.last_point is not None:
            feet.append((ev, hit.last_param, hit.last_point))
    cut_chain = _chord_param_chain(h1, h2, curve, feet, horizontal, value)
    arc12 = piece.bmap.restrict(h1, h2)
    arc21 = piece.bmap.restrict(h2, h1)
    if horizontal:
        minus_bm = join_chains([arc12, cut_chain.reversed()])
        plus_bm = join_chains([arc21, cut_chain])
    else:
        minus_bm = join_chains([arc21, cut_chain])
        plus_bm = join_chains([arc12, cut_chain.reversed()])
    convex = isinstance(piece.domain, ConvexPolygon)
    minus = Piece.from_map(minus_bm, convex)
    plus = Piece.from_map(plus_bm, convex)
    if minus.area2() + plus.area2() != piece.area2():
        raise VerificationFailed("cut pieces do not tile the parent")
    return minus, plus, cut_chain


def _check_cut_interior(image: SimplePolygon, curve: tuple[Point, ...]) -> None:
    ends = (curve[0], curve[-1])
    for i in range(len(curve) - 1):
        allowed = tuple(e for e in ends if e in (curve[i], curve[i + 1]))
        if not segment_interior_strictly_inside(image, curve[i], curve[i + 1], allowed):
            raise VerificationFailed("cut curve is not interior to the image")


# ---------------------------------------------------------------------------
# tips (class ii / iii)
# ---------------------------------------------------------------------------


@dataclass
class TipRecord:
    triangle: Piece
    apex: Point
    chord_break: Point  # singular point of the bi-linear chord map


@dataclass
class TipDecomposition:
    delta_piece: Piece
    tips: list[TipRecord]
    psi_parent: PsiBreakdown
    psi_pieces: list[PsiBreakdown]


def _extreme_vertex(poly: ConvexPolygon, top: bool) -> Point | None:
    """The unique extreme vertex, or None when the extreme is an edge."""
    key = max(p.y for p in poly.vertices) if top else min(p.y for p in poly.vertices)
    hits = [p for p in poly.vertices if p.y == key]
    return hits[0] if len(hits) == 1 else None


def _approx_unit(p: Point) -> tuple[float, float]:
    import math

    n = math.hypot(float(p.x), float(p.y))
    return float(p.x) / n, float(p.y) / n


def _image_corner_push(piece: Piece, w_img: Point, dist: Fraction) -> Point | None:
    """A rational point near w_img, strictly inside the image, roughly along
    the internal bisector of the image corner."""
    import math

    bm = piece.bmap
    n = len(bm.img)
    idx = next((i for i, q in enumerate(bm.img) if q == w_img), None)
    if idx is None:
        return None
    prev = bm.img[(idx - 1) % n]
    nxt = bm.img[(idx + 1) % n]
    ux, uy = _approx_unit(prev - w_img)
    vx, vy = _approx_unit(nxt - w_img)
    bx, by = ux + vx, uy + vy
    nb = math.hypot(bx, by)
    if nb < 1e-9:
        cx, cy = _approx_unit(nxt - prev)
        bx, by = -cy, cx
        nb = 1.0
    for sign in (1.0, -1.0):
        scale = float(dist) / nb * sign
        cand = w_img + Point(
            Fraction(bx * scale).limit_denominator(1 << 16),
            Fraction(by * scale).limit_denominator(1 << 16),
        )
        if piece.image.contains(cand) == "in":
            return cand
    return None


def _tip_offset_bound(piece: Piece, w: Point) -> Fraction:
    """Largest chord distance from the apex clear of breakpoints/vertices."""
    bound = bounding_frame(piece.domain).h
    for p in list(piece.bmap.pre) + list(piece.domain.vertices):
        if p != w and abs(p.y - w.y) > 0:
            bound = min(bound, abs(p.y - w.y))
    return bound


def _remove_one_tip(
    piece: Piece, w: Point, top: bool, eps: Fraction, max_shrink: int
) -> tuple[TipRecord, Piece]:
    eta = eps / 24
    offset = _tip_offset_bound(piece, w) / 2
    w_img = piece.bmap.eval_point(w)
    last = "no attempt"
    for attempt in range(max_shrink):
        if attempt >= max_shrink // 2:
            eta = eta / 2
        t_star = w.y - offset if top else w.y + offset
        offset = offset / 2
        try:
            h1, h2 = chord(piece.domain, Direction.axis(), "parallel", t_star)
        except GeometryError as exc:
            last = str(exc)
            continue
        if dist2(h1, w) >= eta * eta or dist2(h2, w) >= eta * eta:
            last = "preimage chord too far from apex"
            continue
        a_img = piece.bmap.eval_point(h1)
        b_img = piece.bmap.eval_point(h2)
        if dist2(a_img, w_img) >= eta * eta or dist2(b_img, w_img) >= eta * eta:
            last = "image chord too far from apex image"
            continue
        x_pt = _image_corner_push(piece, w_img, eta / 2)
        if x_pt is None or dist2(x_pt, w_img) >= 4 * eta * eta:
            last = "no interior bisector point"
            continue
        if x_pt == a_img or x_pt == b_img:
            last = "bisector point collides with chord image"
            continue
        if not (
            segment_interior_strictly_inside(piece.image, a_img, x_pt, (a_img,))
            and segment_interior_strictly_inside(piece.image, x_pt, b_img, (b_img,))
        ):
            last = "chord image path not interior"
            continue
        w_star = lerp(h1, h2, Q(1, 2))
        cut_chain = BoundaryMap([h1, w_star, h2], [a_img, x_pt, b_img], closed=False)
        arc12 = piece.bmap.restrict(h1, h2)
        if any(p == w for p in arc12.pre):
            tip_bm = join_chains([arc12, cut_chain.reversed()])
            rest_bm = join_chains([piece.bmap.restrict(h2, h1), cut_chain])
        else:
            tip_bm = join_chains([piece.bmap.restrict(h2, h1), cut_chain])
            rest_bm = join_chains([arc12, cut_chain.reversed()])
        try:
            tip_piece = Piece.build(
                ConvexPolygon.from_points(merge_collinear(tip_bm.pre), validate=False), tip_bm
            )
            rest_piece = Piece.build(
                ConvexPolygon.from_points(merge_collinear(rest_bm.pre), validate=False), rest_bm
            )
        except GeometryError as exc:
            last = f"piece build failed: {exc}"
            continue
        if tip_piece.area2() + rest_piece.area2() != piece.area2():
            last = "tip areas do not tile"
            continue
        if not tip_piece.bmap.pre_length().enclosure(64).hi < eps:
            last = "tip perimeter not small"
            continue
        if not tip_piece.bmap.image_length().enclosure(64).hi < eps:
            last = "tip image perimeter not small"
            continue
        return TipRecord(tip_piece, w, w_star), rest_piece
    raise VerificationFailed(f"tip removal failed at {w}: {last}")


def remove_tips(
    q_poly: ConvexPolygon,
    bmap: BoundaryMap,
    eps: Fraction,
    quad_tol: Fraction | float | None = None,
    max_shrink: int = 24,
) -> TipDecomposition:
    """Remove tiny triangles at extreme vertices so the rest has two
    horizontal sides; the extended map is exactly bi-linear on each chord.

    The stated estimates (small tip perimeter and image perimeter, the
    functional sum within eps of the parent) are certified; the internal
    offset shrinks geometrically until they hold.
    """
    eps = fr(eps)
    cls = classify_polygon(q_poly)
    if cls in ("rectangle", "i"):
        raise VerificationFailed("no tips to remove for class i or rectangles")
    piece = Piece.build(q_poly, bmap)
    tol = float(quad_tol) if quad_tol is not None else float(eps) / 64
    psi_parent = psi_of_map(piece.domain, piece.bmap, tol)
    tips: list[TipRecord] = []
    work = piece
    for top in (False, True):
        w = _extreme_vertex(work.domain, top)
        if w is None:
            continue
        record, work = _remove_one_tip(work, w, top, eps / 2, max_shrink)
        tips.append(record)
    if not tips:
        raise VerificationFailed("classification promised tips but none were found")
    psi_pieces = [psi_of_map(t.triangle.domain, t.triangle.bmap, tol) for t in tips]
    psi_pieces.append(psi_of_map(work.domain, work.bmap, tol))
    total_hi = sum(p.total + 2 * p.error_bound for p in psi_pieces)
    parent_lo = psi_parent.total - 2 * psi_parent.error_bound
    if not total_hi <= parent_lo + eps:
        raise VerificationFailed(
            f"tip functional budget missed: {float(total_hi)} > {float(parent_lo)} + {float(eps)}"
        )
    return TipDecomposition(work, tips, psi_parent, psi_pieces)


# ---------------------------------------------------------------------------
# strips
# ---------------------------------------------------------------------------


@dataclass
class StripDecomposition:
    cuts: list[Fraction]
    strips: list[Piece]
    cut_chains: list[BoundaryMap]
    psi_parent: PsiBreakdown
    psi_strips: list[PsiBreakdown]


def _side_image_length(piece: Piece, t0: Fraction, t1: Fraction) -> float | None:
    """Upper estimate of both side-arc image lengths between two levels."""
    try:
        lo1, lo2 = chord(piece.domain, Direction.axis(), "parallel", t0 + (t1 - t0) / 256)
        hi1, hi2 = chord(piece.domain, Direction.axis(), "parallel", t1 - (t1 - t0) / 256)
    except GeometryError:
        return None
    total = 0.0
    for lo, hi in ((lo1, hi1), (lo2, hi2)):
        try:
            arc = piece.bmap.restrict(lo, hi)
        except GeometryError:
            try:
                arc = piece.bmap.restrict(hi, lo)
            except GeometryError:
                return None
        total += float(arc.image_length().enclosure(32).hi)
    return total


def _strip_cut_levels(piece: Piece, eps_step: Fraction, side_eps: Fraction) -> list[Fraction]:
    frame = bounding_frame(piece.domain)
    levels = {frame.b_minus, frame.b_plus}
    for v in piece.domain.vertices:
        if frame.b_minus < v.y < frame.b_plus:
            levels.add(v.y)
    for p in piece.bmap.pre:
        if frame.b_minus < p.y < frame.b_plus:
            levels.add(p.y)
    out = sorted(levels)
    dense: list[Fraction] = [out[0]]
    for t0, t1 in zip(out, out[1:]):
        pieces_needed = 1
        if t1 - t0 > eps_step:
            pieces_needed = int((t1 - t0) / eps_step) + 1
        side_len = _side_image_length(piece, t0, t1)
        if side_len is not None and side_len > float(side_eps):
            pieces_needed = max(pieces_needed, int(side_len / float(side_eps)) + 1)
        for k in range(1, pieces_needed):
            dense.append(t0 + (t1 - t0) * Q(k, pieces_needed))
        dense.append(t1)
    return sorted(set(dense))


def _cut_all(
    delta_piece: Piece, cuts: list[Fraction], events: int, delta_cap: Fraction
) -> tuple[list[Piece], list[BoundaryMap]]:
    frame = bounding_frame(delta_piece.domain)
    strips: list[Piece] = []
    chains: list[BoundaryMap] = []
    work = delta_piece
    prev_t = cuts[0]
    for t in cuts[1:-1]:
        sd = safe_delta(work.image)
        delta = min(sd.rational_bound(), delta_cap, (t - prev_t) / 4)
        xs = [
            frame.a_minus + (frame.a_plus - frame.a_minus) * Q(k, events + 1)
            for k in range(1, events + 1)
        ]
        lower, upper, chain = cut_piece(work, True, t, delta, xs)
        strips.append(lower)
        chains.append(chain)
        work = upper
        prev_t = t
    strips.append(work)
    return strips, chains


def slice_strips(
    delta_piece: Piece,
    eps: Fraction,
    events_per_cut: int = 6,
    max_refinements: int = 4,
    quad_tol: Fraction | float | None = None,
    max_spacing: Fraction | None = None,
) -> StripDecomposition:
    """Horizontal strips whose functional values sum to at most the parent's
    plus eps, certified componentwise; cut images are modified geodesics with
    the crossing parametrization.  Densifies and shrinks delta on failure.
    """
    eps = fr(eps)
    tol = float(quad_tol) if quad_tol is not None else float(eps) / 16
    psi_parent = psi_of_map(delta_piece.domain, delta_piece.bmap, tol)
    eps_step = eps if max_spacing is None else min(eps, max_spacing)
    side_eps = eps
    events = events_per_cut
    delta_cap = eps / 8
    last_error: Exception | None = None
    for round_no in range(max_refinements):
        try:
            cuts = _strip_cut_levels(delta_piece, eps_step, side_eps)
            strips, chains = _cut_all(delta_piece, cuts, events, delta_cap)
            strip_tol = max(float(eps) / (8 * max(len(strips), 1)), 1e-15)
            psi_strips = [psi_of_map(s.domain, s.bmap, strip_tol) for s in strips]
            hi_h = sum(p.horizontal_integral + p.error_bound for p in psi_strips)
            hi_v = sum(p.vertical_integral + p.error_bound for p in psi_strips)
            lo_h = psi_parent.horizontal_integral - psi_parent.error_bound
            lo_v = psi_parent.vertical_integral - psi_parent.error_bound
            if hi_h <= lo_h + eps / 2 and hi_v <= lo_v + eps / 2:
                return StripDecomposition(cuts, strips, chains, psi_parent, psi_strips)
            last_error = VerificationFailed(
                f"strip functional sum missed budget (round {round_no}): "
                f"H {float(hi_h)} vs {float(lo_h)}, V {float(hi_v)} vs {float(lo_v)}"
            )
        except (VerificationFailed, DeltaTooLarge, GeometryError) as exc:
            last_error = exc
        eps_step = eps_step / 2
        side_eps = side_eps / 2
        events = events * 2
        delta_cap = delta_cap / 2
    raise VerificationFailed(f"slice_strips exhausted refinements: {last_error}")


# ---------------------------------------------------------------------------
# strip splitting
# ---------------------------------------------------------------------------


@dataclass
class StripSplit:
    left_triangle: Piece | None
    rectangle: Piece
    right_triangle: Piece | None
    psi_strip: PsiBreakdown | None = None
    psi_pieces: list[PsiBreakdown] = field(default_factory=list)

    def pieces(self) -> list[Piece]:
        return [p for p in (self.left_triangle, self.rectangle, self.right_triangle) if p]


def strip_corner_data(strip: Piece) -> tuple[Fraction, Fraction, Fraction, Fraction, Fraction, Fraction]:
    """(t_lo, t_hi, xbl, xbr, xtl, xtr) of a two-horizontal-sides trapezoid."""
    frame = bounding_frame(strip.domain)
    t_lo, t_hi = frame.b_minus, frame.b_plus
    bottom = sorted([v for v in strip.domain.vertices if v.y == t_lo], key=lambda p: p.x)
    top = sorted([v for v in strip.domain.vertices if v.y == t_hi], key=lambda p: p.x)
    if len(bottom) < 2 or len(top) < 2:
        raise VerificationFailed("strip does not have two horizontal sides")
    return t_lo, t_hi, bottom[0].x, bottom[-1].x, top[0].x, top[-1].x


def split_strip(
    strip: Piece,
    eps_i: Fraction,
    verify: bool = True,
    quad_tol: Fraction | float | None = None,
    max_retries: int = 4,
) -> StripSplit:
    """Maximal inscribed axis-aligned rectangle plus up to two right triangles
    with hypotenuses on the slanted sides; vertical skeleton edges map onto
    modified geodesics.  The functional budget is certified when ``verify``.
    """
    eps_i = fr(eps_i)
    t_lo, t_hi, xbl, xbr, xtl, xtr = strip_corner_data(strip)
    x1 = max(xbl, xtl)
    x2 = min(xbr, xtr)
    if not x1 < x2:
        raise VerificationFailed("strip too slanted for an inscribed rectangle")
    delta = min(safe_delta(strip.image).rational_bound(), eps_i / 4, (t_hi - t_lo) / 4)
    last: Exception | None = None
    for _ in range(max_retries):
        try:
            left = None
            right = None
            work = strip
            if xbl != xtl:
                left, work, _ = cut_piece(work, False, x1, delta, [])
            if xbr != xtr:
                work, right, _ = cut_piece(work, False, x2, delta, [])
            split = StripSplit(left, work, right)
            if verify:
                _verify_split(strip, split, eps_i, quad_tol)
            return split
        except (VerificationFailed, DeltaTooLarge, GeometryError) as exc:
            last = exc
            delta = delta / 2
    raise VerificationFailed(f"split_strip exhausted retries: {last}")


def _verify_split(strip: Piece, split: StripSplit, eps_i: Fraction, quad_tol) -> None:
    tol = float(quad_tol) if quad_tol is not None else max(float(eps_i) / 16, 1e-12)
    psi_strip = psi_of_map(strip.domain, strip.bmap, tol)
    psis = [psi_of_map(p.domain, p.bmap, tol) for p in split.pieces()]
    hi = sum(p.total + 2 * p.error_bound for p in psis)
    lo = psi_strip.total - 2 * psi_strip.error_bound
    if not hi <= lo + eps_i:
        raise VerificationFailed(
            f"strip split functional budget missed: {float(hi)} > {float(lo)} + {float(eps_i)}"
        )
    split.psi_strip = psi_strip
    split.psi_pieces = psis
