"""Planar partitions as networks of circular arcs.

Edges carry a signed curvature ``kappa`` oriented from ``v_start`` to
``v_end`` with the convention ``kappa = p(left) - p(right)``: positive when
the edge is concave toward its left region (it turns counter-clockwise).
This is the opposite sign of :class:`isopart.geom.CircularArc`, whose
positive curvature bulges to the left; :func:`edge_arc` does the flip.

Vertices come in three kinds:

* ``interior``  -- junction of exactly three edges,
* ``infinity``  -- endpoint at infinity of a ray or line; ``position`` is an
  anchor on the supporting line and ``direction`` the outward unit vector,
* ``joint``     -- degree-2 point on a single interface (closed loops, window
  clamps of the minimizer).  ``pinned`` joints are held fixed by the
  minimizer.
"""

from __future__ import annotations

import dataclasses
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .geom import CircularArc, InfeasibleArcError, arc_area_moment, arc_length

INTERIOR = "interior"
INFINITY = "infinity"
JOINT = "joint"

CLUSTER = "cluster"
LINE = "line"
TRIPLE_RAYS = "triple_rays"
INVALID = "invalid"

TWO_PI_3 = 2.0 * math.pi / 3.0
# casting direction for point location; irrational slope avoids grid-aligned ties
_CAST_ANGLE = 0.3217505543966422


@dataclass(frozen=True)
class Vertex:
    id: int
    kind: str
    position: tuple[float, float]
    direction: tuple[float, float] | None = None
    pinned: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if self.direction is not None:
            object.__setattr__(
                self, "direction", (float(self.direction[0]), float(self.direction[1]))
            )


@dataclass(frozen=True)
class ArcEdge:
    id: int
    v_start: int
    v_end: int
    kappa: float
    left: int
    right: int
    major: bool = False


@dataclass(frozen=True)
class Region:
    label: int
    measure: float  # math.inf for unbounded regions, 0 for improper ones

    @property
    def infinite(self) -> bool:
        return math.isinf(self.measure)


@dataclass(frozen=True)
class ArcPartition:
    regions: tuple[Region, ...]
    vertices: tuple[Vertex, ...]
    edges: tuple[ArcEdge, ...]
    window_radius: float
    far_field: str = CLUSTER

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))

    # lookups are rebuilt on demand; partitions are small
    @property
    def vertex_map(self) -> dict[int, Vertex]:
        return {v.id: v for v in self.vertices}

    @property
    def edge_map(self) -> dict[int, ArcEdge]:
        return {e.id: e for e in self.edges}

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.regions]

    def region(self, label: int) -> Region:
        for r in self.regions:
            if r.label == label:
                return r
        raise KeyError(label)

    def infinite_labels(self) -> list[int]:
        return [r.label for r in self.regions if r.infinite]

    def finite_labels(self) -> list[int]:
        return [r.label for r in self.regions if not r.infinite and r.measure > 0]

    def incident(self) -> dict[int, list[ArcEdge]]:
        inc: dict[int, list[ArcEdge]] = defaultdict(list)
        for e in self.edges:
            inc[e.v_start].append(e)
            if e.v_end != e.v_start:
                inc[e.v_end].append(e)
        return inc

    def with_edge(self, edge_id: int, **changes) -> "ArcPartition":
        edges = tuple(
            dataclasses.replace(e, **changes) if e.id == edge_id else e for e in self.edges
        )
        return dataclasses.replace(self, edges=edges)


# ---------------------------------------------------------------------------
# edge geometry


@dataclass(frozen=True)
class Ray:
    """Half-line ``origin + t * direction``; traversed outward iff ``outward``."""

    origin: tuple[float, float]
    direction: tuple[float, float]
    outward: bool


@dataclass(frozen=True)
class Line:
    point: tuple[float, float]
    direction: tuple[float, float]  # traversal direction


def edge_kind(p: ArcPartition, e: ArcEdge) -> str:
    vm = p.vertex_map
    a, b = vm[e.v_start].kind == INFINITY, vm[e.v_end].kind == INFINITY
    if a and b:
        return "line"
    if a or b:
        return "ray"
    return "arc"


def edge_arc(p: ArcPartition, e: ArcEdge, vm=None) -> CircularArc:
    vm = vm or p.vertex_map
    return CircularArc(vm[e.v_start].position, vm[e.v_end].position, -e.kappa, e.major)


def edge_curve(p: ArcPartition, e: ArcEdge, vm=None):
    vm = vm or p.vertex_map
    vs, ve = vm[e.v_start], vm[e.v_end]
    if vs.kind == INFINITY and ve.kind == INFINITY:
        return Line(vs.position, ve.direction)
    if ve.kind == INFINITY:
        return Ray(vs.position, ve.direction, True)
    if vs.kind == INFINITY:
        return Ray(ve.position, vs.direction, False)
    return edge_arc(p, e, vm)


def outgoing_tangent(p: ArcPartition, e: ArcEdge, vid: int, vm=None) -> np.ndarray:
    """Unit tangent of ``e`` leaving vertex ``vid``."""
    curve = edge_curve(p, e, vm)
    if isinstance(curve, Ray):
        return np.asarray(curve.direction)
    if isinstance(curve, Line):
        raise ValueError("lines have no finite vertex")
    t0 = curve.tangent_at(0.0)
    t1 = curve.tangent_at(1.0)
    return t0 if e.v_start == vid else -t1


def outgoing_kappa(e: ArcEdge, vid: int) -> float:
    return e.kappa if e.v_start == vid else -e.kappa


def outgoing_sides(e: ArcEdge, vid: int) -> tuple[int, int]:
    """(left, right) regions of ``e`` oriented away from ``vid``."""
    return (e.left, e.right) if e.v_start == vid else (e.right, e.left)


# ---------------------------------------------------------------------------
# clipping against a disk


@dataclass
class _Clip:
    pieces: list[CircularArc]
    crossings: list[tuple[float, bool]]  # (angle on the circle, leaving the disk)


def _ray_interval(o, d, c, R):
    fx, fy = o[0] - c[0], o[1] - c[1]
    b = fx * d[0] + fy * d[1]
    cc = fx * fx + fy * fy - R * R
    disc = b * b - cc
    if disc <= 0.0:
        return None
    sq = math.sqrt(disc)
    return -b - sq, -b + sq


def _clip_curve(curve, c, R) -> _Clip:
    out = _Clip([], [])
    ang = lambda q: math.atan2(q[1] - c[1], q[0] - c[0])  # noqa: E731
    if isinstance(curve, (Ray, Line)):
        o = curve.origin if isinstance(curve, Ray) else curve.point
        d_geo = curve.direction
        iv = _ray_interval(o, d_geo, c, R)
        if iv is None:
            return out
        t_in, t_out = iv
        lo = max(t_in, 0.0) if isinstance(curve, Ray) else t_in
        if t_out <= lo:
            return out
        a = (o[0] + lo * d_geo[0], o[1] + lo * d_geo[1])
        b = (o[0] + t_out * d_geo[0], o[1] + t_out * d_geo[1])
        forward = not (isinstance(curve, Ray) and not curve.outward)
        if forward:
            out.pieces.append(CircularArc(a, b, 0.0))
            out.crossings.append((ang(b), True))
            if lo == t_in:
                out.crossings.append((ang(a), False))
        else:
            out.pieces.append(CircularArc(b, a, 0.0))
            out.crossings.append((ang(b), False))
            if lo == t_in:
                out.crossings.append((ang(a), True))
        return out
    arc: CircularArc = curve
    ts = [0.0] + [t for t in arc.circle_params(c, R) if 0.0 < t < 1.0] + [1.0]
    inside = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 <= 0.0:
            continue
        mid = arc.point_at(0.5 * (t0 + t1))
        inside.append((t0, t1, math.hypot(mid[0] - c[0], mid[1] - c[1]) < R))
    for i, (t0, t1, ins) in enumerate(inside):
        if ins:
            out.pieces.append(arc if (t0 == 0.0 and t1 == 1.0) else arc.sub_arc(t0, t1))
        if i + 1 < len(inside) and ins != inside[i + 1][2]:
            q = arc.point_at(t1)
            out.crossings.append((ang(q), ins))
    return out


def _circle_arc_moment(c, R, a0, a1) -> float:
    return 0.5 * (
        R * R * (a1 - a0)
        + R * c[0] * (math.sin(a1) - math.sin(a0))
        - R * c[1] * (math.cos(a1) - math.cos(a0))
    )


# ---------------------------------------------------------------------------
# reports


@dataclass
class Violation:
    code: str
    message: str
    ids: tuple = ()


@dataclass
class TopologyDiagnostics:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def add(self, code: str, message: str, *ids) -> None:
        self.violations.append(Violation(code, message, tuple(ids)))


@dataclass
class MeasureReport:
    radius: float
    center: tuple[float, float]
    areas: dict[int, float]
    interface_lengths: dict[tuple[int, int], float]
    perimeter: float

    def region_perimeters(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for (a, b), ell in self.interface_lengths.items():
            out[a] += ell
            out[b] += ell
        return dict(out)


@dataclass
class Pressures:
    p: dict[int, float]
    residual: float
    gauge: str = "infinite"  # or "first-region" when no unbounded region exists
    flagged: bool = False


@dataclass
class FarField:
    kind: str
    reason: str = ""
    directions: list[tuple[float, float]] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.kind != INVALID


@dataclass(frozen=True)
class Tolerances:
    angle: float = 1e-9
    curvature: float = 1e-9
    pressure: float = 1e-10


@dataclass
class StationarityReport:
    angle_residuals: dict[int, float]
    curvature_residuals: dict[int, float]
    infinite_interface_residual: float
    pressure_residual: float
    far_field: FarField
    eventually_flat: bool
    tolerances: Tolerances
    notes: list[str] = field(default_factory=list)

    @property
    def max_angle_residual(self) -> float:
        return max(self.angle_residuals.values(), default=0.0)

    @property
    def max_curvature_residual(self) -> float:
        return max(self.curvature_residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        t = self.tolerances
        return (
            self.max_angle_residual <= t.angle
            and self.max_curvature_residual <= t.curvature
            and self.infinite_interface_residual <= t.curvature
            and self.pressure_residual <= t.pressure
            and self.far_field.valid
            and self.eventually_flat
        )


# ---------------------------------------------------------------------------
# topology


def validate_topology(p: ArcPartition) -> TopologyDiagnostics:
    diag = TopologyDiagnostics()
    if not p.regions:
        diag.add("no-regions", "partition has no regions")
    seen: set[int] = set()
    for v in p.vertices:
        if v.id in seen:
            diag.add("duplicate-vertex", f"vertex id {v.id} appears twice", v.id)
        seen.add(v.id)
    seen_e: set[int] = set()
    for e in p.edges:
        if e.id in seen_e:
            diag.add("duplicate-edge-id", f"edge id {e.id} appears twice", e.id)
        seen_e.add(e.id)
    labels = set(p.labels)
    vm = p.vertex_map
    good_edges = []
    for e in p.edges:
        if e.v_start not in vm or e.v_end not in vm:
            diag.add("dangling-edge", f"edge {e.id} references a missing vertex", e.id)
            continue
        if e.left not in labels or e.right not in labels:
            diag.add("unknown-region", f"edge {e.id} references an unknown region", e.id)
            continue
        if e.left == e.right:
            diag.add("same-sides", f"edge {e.id} has the same region on both sides", e.id)
        kind = edge_kind(p, e)
        if kind != "arc" and e.kappa != 0.0:
            diag.add("curved-ray", f"unbounded edge {e.id} must be straight", e.id)
            continue
        if kind == "arc":
            try:
                edge_arc(p, e, vm)
            except InfeasibleArcError as exc:
                diag.add("infeasible-arc", f"edge {e.id}: {exc}", e.id)
                continue
            if e.v_start == e.v_end:
                diag.add("loop-edge", f"edge {e.id} is a loop", e.id)
                continue
        good_edges.append(e)

    sig = defaultdict(list)
    for e in good_edges:
        key = (frozenset((e.v_start, e.v_end)),)
        sig[key].append(e)
    for group in sig.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                ka = a.kappa if a.v_start == b.v_start else -a.kappa
                same_sides = (a.left, a.right) == (
                    (b.left, b.right) if a.v_start == b.v_start else (b.right, b.left)
                )
                if abs(ka - b.kappa) < 1e-12 and a.major == b.major and same_sides:
                    diag.add("duplicate-edge", f"edges {a.id} and {b.id} coincide", a.id, b.id)

    inc = p.incident()
    expected = {INTERIOR: 3, INFINITY: 1, JOINT: 2}
    for v in p.vertices:
        deg = len(inc.get(v.id, []))
        want = expected.get(v.kind)
        if want is None:
            diag.add("vertex-kind", f"vertex {v.id} has unknown kind {v.kind!r}", v.id)
            continue
        if deg != want:
            msg = "vertex order ≠ 3" if v.kind == INTERIOR else f"{v.kind} vertex has degree {deg}"
            diag.add("vertex-order", f"vertex {v.id}: {msg} (degree {deg})", v.id)
        if v.kind == INFINITY:
            d = v.direction
            if d is None or abs(math.hypot(*d) - 1.0) > 1e-9:
                diag.add("ray-direction", f"vertex {v.id} needs a unit direction", v.id)
            elif deg == 1:
                e = inc[v.id][0]
                other = vm[e.v_end if e.v_start == v.id else e.v_start]
                if other.kind != INFINITY:
                    off = (other.position[0] - v.position[0]) * d[1] - (
                        other.position[1] - v.position[1]
                    ) * d[0]
                    if abs(off) > 1e-9 * max(1.0, p.window_radius):
                        diag.add("ray-anchor", f"ray at vertex {v.id} is off its anchor line", v.id)
                else:
                    od = other.direction
                    if od is not None and abs(d[0] * od[1] - d[1] * od[0]) > 1e-9:
                        diag.add("line-direction", f"line ends {v.id}/{other.id} not opposite", v.id)
        if v.kind == JOINT and deg == 2:
            a, b = inc[v.id]
            if {a.left, a.right} != {b.left, b.right}:
                diag.add("joint-sides", f"joint {v.id} joins different interfaces", v.id)

    # angular consistency of the regions around each finite vertex
    for v in p.vertices:
        es = inc.get(v.id, [])
        if v.kind == INFINITY or len(es) < 2 or any(e not in good_edges for e in es):
            continue
        items = []
        for e in es:
            t = outgoing_tangent(p, e, v.id, vm)
            items.append((math.atan2(t[1], t[0]), -outgoing_kappa(e, v.id), outgoing_sides(e, v.id)))
        items.sort()
        for k in range(len(items)):
            left_here = items[k][2][0]
            right_next = items[(k + 1) % len(items)][2][1]
            if left_here != right_next:
                diag.add(
                    "region-order",
                    f"vertex {v.id}: regions around the vertex are inconsistent",
                    v.id,
                )
                break

    # finite regions must be enclosed by closed loops of finite edges
    by_region = defaultdict(list)
    for e in good_edges:
        by_region[e.left].append(e)
        by_region[e.right].append(e)
    for r in p.regions:
        if r.infinite:
            continue
        es = by_region.get(r.label, [])
        if r.measure > 0 and not es:
            diag.add("open-region", f"finite region {r.label} has no boundary", r.label)
            continue
        count = defaultdict(int)
        for e in es:
            if vm[e.v_start].kind == INFINITY or vm[e.v_end].kind == INFINITY:
                diag.add("open-region", f"finite region {r.label} touches infinity", r.label)
                break
            count[e.v_start] += 1
            count[e.v_end] += 1
        else:
            if any(c % 2 for c in count.values()):
                diag.add("open-region", f"boundary of region {r.label} is not closed", r.label)
    return diag


# ---------------------------------------------------------------------------
# measures


def _clip_all(p: ArcPartition, c, R):
    vm = p.vertex_map
    return [(e, _clip_curve(edge_curve(p, e, vm), c, R)) for e in p.edges]


def region_measures(p: ArcPartition, radius: float | None = None, center=(0.0, 0.0)) -> MeasureReport:
    """Areas, interface lengths and perimeter inside the disk ``B(center, radius)``.

    Finite regions lying inside the disk get their exact area from the
    divergence theorem; unbounded regions are clipped to the disk.
    """
    R = p.window_radius if radius is None else float(radius)
    c = (float(center[0]), float(center[1]))
    if math.hypot(*c) + R > p.window_radius * (1 + 1e-12):
        raise ValueError(f"disk of radius {R} exceeds the window radius {p.window_radius}")
    clips = _clip_all(p, c, R)
    areas = {lab: 0.0 for lab in p.labels}
    lengths: dict[tuple[int, int], float] = defaultdict(float)
    crossings = []
    for e, cl in clips:
        key = (min(e.left, e.right), max(e.left, e.right))
        for piece in cl.pieces:
            m = arc_area_moment(piece)
            areas[e.left] += m
            areas[e.right] -= m
            lengths[key] += arc_length(piece)
        for a, leaving in cl.crossings:
            ccw_region = e.left if leaving else e.right
            cw_region = e.right if leaving else e.left
            crossings.append((a, ccw_region, cw_region))
    if crossings:
        crossings.sort()
        for i, (a0, reg, _) in enumerate(crossings):
            a1 = crossings[(i + 1) % len(crossings)][0]
            if i + 1 == len(crossings):
                a1 += 2 * math.pi
            areas[reg] += _circle_arc_moment(c, R, a0, a1)
    else:
        probe = np.array([[c[0] + R * math.cos(0.1), c[1] + R * math.sin(0.1)]])
        reg = int(locate(p, probe)[0])
        areas[reg] += math.pi * R * R
    return MeasureReport(R, c, areas, dict(lengths), float(sum(lengths.values())))


def energy(p: ArcPartition, radius: float | None = None) -> float:
    """Total interface length inside the closed window."""
    return region_measures(p, radius).perimeter


def finite_region_areas(p: ArcPartition) -> dict[int, float]:
    """Exact areas of the bounded regions (no clipping)."""
    vm = p.vertex_map
    areas = {lab: 0.0 for lab in p.labels if not p.region(lab).infinite}
    for e in p.edges:
        if edge_kind(p, e) != "arc":
            continue
        m = arc_area_moment(edge_arc(p, e, vm))
        if e.left in areas:
            areas[e.left] += m
        if e.right in areas:
            areas[e.right] -= m
    return areas


def finite_region_centroid(p: ArcPartition, labels=None) -> tuple[float, float]:
    from .geom import arc_first_moments

    vm = p.vertex_map
    labels = set(p.finite_labels() if labels is None else labels)
    a = mx = my = 0.0
    for e in p.edges:
        if edge_kind(p, e) != "arc":
            continue
        arc = edge_arc(p, e, vm)
        m = arc_area_moment(arc)
        fx, fy = arc_first_moments(arc)
        sgn = (e.left in labels) - (e.right in labels)
        a += sgn * m
        mx += sgn * fx
        my += sgn * fy
    return mx / a, my / a


# ---------------------------------------------------------------------------
# point location


def _far_region(p: ArcPartition, angle: float) -> int:
    vm = p.vertex_map
    rays = []
    for e in p.edges:
        for vid, outward in ((e.v_end, True), (e.v_start, False)):
            v = vm[vid]
            if v.kind != INFINITY:
                continue
            ccw = e.left if outward else e.right
            rays.append((math.atan2(v.direction[1], v.direction[0]) % (2 * math.pi), ccw))
    if not rays:
        inf = p.infinite_labels()
        if len(inf) != 1:
            raise ValueError("cannot locate points at infinity without far-field rays")
        return inf[0]
    rays.sort()
    a = angle % (2 * math.pi)
    best = rays[-1][1]
    for ang, ccw in rays:
        if ang <= a:
            best = ccw
    return best


def locate(p: ArcPartition, points) -> np.ndarray:
    """Region label of each point, by casting a ray and reading the first edge hit."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.array([math.cos(_CAST_ANGLE), math.sin(_CAST_ANGLE)])
    best_t = np.full(len(pts), np.inf)
    label = np.full(len(pts), -1, dtype=int)
    vm = p.vertex_map
    for e in p.edges:
        curve = edge_curve(p, e, vm)
        t, tx, ty = _cast_hits(curve, pts, d)
        if t is None:
            continue
        side_left = (-tx * d[1] + ty * d[0]) > 0
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        label = np.where(closer, np.where(side_left, e.left, e.right), label)
    missing = ~np.isfinite(best_t)
    if missing.any():
        label[missing] = _far_region(p, _CAST_ANGLE)
    return label


def _cast_hits(curve, pts, d):
    """Nearest positive hit parameter and edge tangent for each cast ray."""
    n = len(pts)
    inf = np.full(n, np.inf)
    # near-straight arcs are cast against their chord; the circle fit is ill-conditioned there
    if isinstance(curve, (Ray, Line)) or (
        isinstance(curve, CircularArc) and not curve.major and abs(curve.kappa) * curve.chord <= 1e-9
    ):
        if isinstance(curve, CircularArc):
            a = np.asarray(curve.start)
            u = np.asarray(curve.end) - a
            smin, smax = 0.0, 1.0
            tang = u / np.linalg.norm(u) if np.linalg.norm(u) > 0 else u
        elif isinstance(curve, Ray):
            a = np.asarray(curve.origin)
            u = np.asarray(curve.direction)
            smin, smax = 0.0, np.inf
            tang = u if curve.outward else -u
        else:
            a = np.asarray(curve.point)
            u = np.asarray(curve.direction)
            smin, smax = -np.inf, np.inf
            tang = u
        den = d[0] * (-u[1]) - d[1] * (-u[0])
        if den == 0.0:
            return None, None, None
        w = a - pts
        # solve pts + t d = a + s u
        t = (w[:, 0] * (-u[1]) - w[:, 1] * (-u[0])) / den
        s = (d[0] * w[:, 1] - d[1] * w[:, 0]) / den
        ok = (t > 0) & (s >= smin) & (s <= smax)
        return np.where(ok, t, inf), np.full(n, tang[0]), np.full(n, tang[1])
    arc: CircularArc = curve
    o = np.asarray(arc.center)
    rho = arc.radius
    f = pts - o
    b = f @ d
    cc = np.einsum("ij,ij->i", f, f) - rho * rho
    disc = b * b - cc
    good = disc > 0
    sq = np.sqrt(np.where(good, disc, 0.0))
    a0 = math.atan2(arc.start[1] - o[1], arc.start[0] - o[0])
    sweep = arc.sweep
    best = inf.copy()
    tx = np.zeros(n)
    ty = np.zeros(n)
    for t in (-b - sq, -b + sq):
        q = pts + t[:, None] * d
        aq = np.arctan2(q[:, 1] - o[1], q[:, 0] - o[0])
        if sweep > 0:
            delta = np.mod(aq - a0, 2 * np.pi)
            tan = np.stack([-np.sin(aq), np.cos(aq)], 1)
        else:
            delta = np.mod(a0 - aq, 2 * np.pi)
            tan = np.stack([np.sin(aq), -np.cos(aq)], 1)
        on = good & (t > 0) & (delta <= abs(sweep))
        closer = on & (t < best)
        best = np.where(closer, t, best)
        tx = np.where(closer, tan[:, 0], tx)
        ty = np.where(closer, tan[:, 1], ty)
    return best, tx, ty


# ---------------------------------------------------------------------------
# pressures and stationarity


def solve_pressures(p: ArcPartition) -> Pressures:
    """Least-squares pressures with ``p = 0`` on every unbounded region."""
    labels = p.labels
    fixed = set(p.infinite_labels())
    gauge, flagged = "infinite", False
    if not fixed:
        fixed = {labels[0]}
        gauge, flagged = "first-region", True
    free = [lab for lab in labels if lab not in fixed]
    col = {lab: i for i, lab in enumerate(free)}
    rows, rhs = [], []
    for e in p.edges:
        row = np.zeros(len(free))
        if e.left in col:
            row[col[e.left]] += 1.0
        if e.right in col:
            row[col[e.right]] -= 1.0
        rows.append(row)
        rhs.append(e.kappa)
    pvals = {lab: 0.0 for lab in labels}
    if free and rows:
        A = np.array(rows)
        sol, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
        if np.linalg.matrix_rank(A) < len(free):
            flagged = True
        for lab, val in zip(free, sol):
            pvals[lab] = float(val)
    res = max((abs(e.kappa - (pvals[e.left] - pvals[e.right])) for e in p.edges), default=0.0)
    return Pressures(pvals, float(res), gauge, flagged)


def classify_far_field(p: ArcPartition) -> FarField:
    vm = p.vertex_map
    ends = [v for v in p.vertices if v.kind == INFINITY]
    dirs = [v.direction for v in ends]
    if not ends:
        return FarField(CLUSTER)
    if len(ends) >= 4:
        return FarField(INVALID, f"{len(ends)} unbounded interfaces; at most 3 are allowed", dirs)
    R = p.window_radius
    if len(ends) == 2:
        a, b = ends
        ang = math.acos(max(-1.0, min(1.0, a.direction[0] * b.direction[0] + a.direction[1] * b.direction[1])))
        if abs(ang - math.pi) > 1e-9:
            return FarField(INVALID, "two rays that are not opposite", dirs)
        da = _support_point(p, a, vm)
        db = _support_point(p, b, vm)
        off = abs((db[0] - da[0]) * a.direction[1] - (db[1] - da[1]) * a.direction[0])
        if off > 1e-9 * R:
            return FarField(INVALID, f"opposite rays offset by {off:.3g}", dirs)
        return FarField(LINE, "", dirs)
    if len(ends) == 3:
        angs = sorted(math.atan2(d[1], d[0]) % (2 * math.pi) for d in dirs)
        gaps = [angs[1] - angs[0], angs[2] - angs[1], 2 * math.pi - angs[2] + angs[0]]
        if max(abs(g - TWO_PI_3) for g in gaps) > 1e-9:
            return FarField(INVALID, "three rays not at mutual 120 degrees", dirs)
        return FarField(TRIPLE_RAYS, "", dirs)
    return FarField(INVALID, "a single unbounded interface", dirs)


def _support_point(p, v, vm):
    # the finite end of the ray if there is one, otherwise the anchor
    for e in p.edges:
        if v.id in (e.v_start, e.v_end):
            other = vm[e.v_end if e.v_start == v.id else e.v_start]
            if other.kind != INFINITY:
                return other.position
    return v.position


def eventually_flat(p: ArcPartition) -> bool:
    """Every interface between two unbounded regions contains a half-line."""
    inf = set(p.infinite_labels())
    pairs, ray_pairs = set(), set()
    for e in p.edges:
        if e.left in inf and e.right in inf:
            key = frozenset((e.left, e.right))
            pairs.add(key)
            if edge_kind(p, e) != "arc" and e.kappa == 0.0:
                ray_pairs.add(key)
    return pairs <= ray_pairs


def check_stationarity(p: ArcPartition, tolerances: Tolerances | None = None) -> StationarityReport:
    tol = tolerances or Tolerances()
    vm = p.vertex_map
    inc = p.incident()
    ang_res: dict[int, float] = {}
    curv_res: dict[int, float] = {}
    notes: list[str] = []
    for v in p.vertices:
        if v.kind == INFINITY:
            continue
        es = inc.get(v.id, [])
        if len(es) not in (2, 3):
            ang_res[v.id] = math.inf
            curv_res[v.id] = math.inf
            notes.append(f"vertex {v.id} has degree {len(es)}")
            continue
        angs = sorted(
            math.atan2(*outgoing_tangent(p, e, v.id, vm)[::-1]) % (2 * math.pi) for e in es
        )
        gaps = [b - a for a, b in zip(angs, angs[1:])] + [2 * math.pi - angs[-1] + angs[0]]
        target = TWO_PI_3 if len(es) == 3 else math.pi
        ang_res[v.id] = max(abs(g - target) for g in gaps)
        curv_res[v.id] = abs(sum(outgoing_kappa(e, v.id) for e in es))
    inf = set(p.infinite_labels())
    inf_res = max(
        (abs(e.kappa) for e in p.edges if e.left in inf and e.right in inf), default=0.0
    )
    ff = classify_far_field(p)
    if not ff.valid:
        notes.append(f"far field: {ff.reason}")
    flat = eventually_flat(p)
    return StationarityReport(
        ang_res, curv_res, inf_res, solve_pressures(p).residual, ff, flat, tol, notes
    )


def perturbation_response(p: ArcPartition, edge_id: int, dkappa: float):
    """Central differences of perimeter and region areas in the window.

    The edge keeps its endpoints and is re-fit with curvature ``kappa +- dkappa``.
    Returns ``(dP, {label: dA})``.
    """
    e = p.edge_map[edge_id]
    if dkappa == 0.0:
        return 0.0, {lab: 0.0 for lab in p.labels}
    if edge_kind(p, e) != "arc":
        raise InfeasibleArcError("unbounded edges must stay straight")
    plus = p.with_edge(edge_id, kappa=e.kappa + dkappa)
    minus = p.with_edge(edge_id, kappa=e.kappa - dkappa)
    for q in (plus, minus):
        edge_arc(q, q.edge_map[edge_id])  # raises when infeasible
    mp, mm = region_measures(plus), region_measures(minus)
    dP = 0.5 * (mp.perimeter - mm.perimeter)
    dA = {lab: 0.5 * (mp.areas[lab] - mm.areas[lab]) for lab in p.labels}
    return dP, dA


# ---------------------------------------------------------------------------
# rigid motions and scaling


def transform(p: ArcPartition, scale: float = 1.0, angle: float = 0.0, shift=(0.0, 0.0)) -> ArcPartition:
    ca, sa = math.cos(angle), math.sin(angle)

    def mv(q):
        x, y = q
        return (scale * (ca * x - sa * y) + shift[0], scale * (sa * x + ca * y) + shift[1])

    verts = []
    for v in p.vertices:
        d = None
        if v.direction is not None:
            d = (ca * v.direction[0] - sa * v.direction[1], sa * v.direction[0] + ca * v.direction[1])
        verts.append(dataclasses.replace(v, position=mv(v.position), direction=d))
    edges = [dataclasses.replace(e, kappa=e.kappa / scale) for e in p.edges]
    regions = [dataclasses.replace(r, measure=r.measure * scale * scale) for r in p.regions]
    return ArcPartition(
        tuple(regions), tuple(verts), tuple(edges), p.window_radius * scale, p.far_field
    )


def energy_of_edge(p: ArcPartition, e: ArcEdge) -> float:
    """Length of a finite edge (infinite for rays and lines)."""
    if edge_kind(p, e) != "arc":
        return math.inf
    return arc_length(edge_arc(p, e))
