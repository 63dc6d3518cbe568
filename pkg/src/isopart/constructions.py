"""Standard planar partitions with prescribed areas.

Each constructor works with pressures as unknowns: the shape of a standard
partition depends only on pressure ratios, so the area ratio is matched by a
safeguarded Newton iteration in one shape parameter and the result is then
scaled to the prescribed areas.

Region labels: unbounded regions come first, then the bounded ones in the
order their areas are given.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import network as nw
from .geom import segment_factor, segment_factor_prime
from .network import INFINITY, INTERIOR, JOINT, ArcEdge, ArcPartition, Region, Vertex

INF = math.inf
SQ3 = math.sqrt(3.0)
DEFAULT_WINDOW = 10.0

KINDS = ("halfplane", "triple_junction", "lens", "peanut", "reuleaux", "double_bubble")
AREA_COUNT = {"halfplane": 0, "triple_junction": 0, "lens": 1, "peanut": 2, "reuleaux": 1, "double_bubble": 2}


class ConstructionError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class ConstructionSpec:
    kind: str
    areas: tuple[float, ...] = ()
    window_radius: float = DEFAULT_WINDOW


def construct(spec: ConstructionSpec) -> ArcPartition:
    if spec.kind not in KINDS:
        raise ValueError(f"unknown construction {spec.kind!r}; choose from {KINDS}")
    if len(spec.areas) != AREA_COUNT[spec.kind]:
        raise ValueError(f"{spec.kind} takes {AREA_COUNT[spec.kind]} areas, got {len(spec.areas)}")
    R = spec.window_radius
    if spec.kind in ("halfplane", "triple_junction"):
        return make_cone(spec.kind, R)
    fn = {"lens": make_lens, "peanut": make_peanut, "reuleaux": make_reuleaux,
          "double_bubble": make_double_bubble}[spec.kind]
    return fn(*spec.areas, window_radius=R)


def _ray_vertex(vid: int, anchor, angle: float) -> Vertex:
    return Vertex(vid, INFINITY, anchor, (math.cos(angle), math.sin(angle)))


def _check_areas(m):
    for a in m:
        if not (a > 0 and math.isfinite(a)):
            raise ValueError(f"prescribed areas must be positive and finite, got {a}")


def _finish(p: ArcPartition, targets: dict[int, float]) -> ArcPartition:
    """Recentre the bounded regions, then verify window fit and areas."""
    cx, cy = nw.finite_region_centroid(p)
    p = nw.transform(p, shift=(-cx, -cy))
    p = dataclasses.replace(p, window_radius=p.window_radius)
    reach = max(
        (math.hypot(*v.position) for v in p.vertices if v.kind != INFINITY), default=0.0
    )
    areas = nw.finite_region_areas(p)
    for e in p.edges:
        if nw.edge_kind(p, e) == "arc":
            pts = nw.edge_arc(p, e).point_at(np.linspace(0, 1, 33))
            reach = max(reach, float(np.max(np.hypot(pts[:, 0], pts[:, 1]))))
    if reach > p.window_radius / 2:
        raise ValueError(
            f"window radius {p.window_radius} too small: bounded part reaches {reach:.4g}"
        )
    worst = max((abs(areas[k] - m) / m for k, m in targets.items()), default=0.0)
    if worst > 1e-10:
        raise ConstructionError("prescribed areas not reproduced", worst)
    return p


def _newton_1d(f: Callable[[float], float], lo: float, hi: float, x0: float,
               df: Callable[[float], float] | None = None, tol: float = 1e-14,
               max_iter: int = 100) -> float:
    """Newton on a bracketed monotone function, falling back to bisection."""
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ConstructionError("root not bracketed", min(abs(flo), abs(fhi)))
    x, fx = x0, f(x0)
    for _ in range(max_iter):
        if abs(fx) < tol:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        if df is not None:
            d = df(x)
        else:
            h = 1e-7 * max(1.0, abs(x))
            d = (f(x + h) - f(x - h)) / (2 * h)
        step = x - fx / d if d != 0 else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        fx = f(x)
        if hi - lo < 1e-16 * max(1.0, abs(x)):
            return x
    raise ConstructionError("Newton iteration did not converge", abs(fx))


# ---------------------------------------------------------------------------


def make_cone(kind: str, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """Half-plane (one line) or triple junction (three rays at 120 degrees)."""
    if kind == "halfplane":
        verts = (_ray_vertex(0, (0.0, 0.0), math.pi), _ray_vertex(1, (0.0, 0.0), 0.0))
        edges = (ArcEdge(0, 0, 1, 0.0, 0, 1),)
        regions = (Region(0, INF), Region(1, INF))
        return ArcPartition(regions, verts, edges, window_radius, nw.LINE)
    if kind == "triple_junction":
        angs = (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)
        verts = [Vertex(0, INTERIOR, (0.0, 0.0))]
        verts += [_ray_vertex(i + 1, (0.0, 0.0), a) for i, a in enumerate(angs)]
        edges = (
            ArcEdge(0, 0, 1, 0.0, 0, 2),
            ArcEdge(1, 0, 2, 0.0, 1, 0),
            ArcEdge(2, 0, 3, 0.0, 2, 1),
        )
        regions = tuple(Region(i, INF) for i in range(3))
        return ArcPartition(regions, tuple(verts), edges, window_radius, nw.TRIPLE_RAYS)
    raise ValueError(f"unknown cone {kind!r}")


def lens_radius(m: float) -> float:
    return math.sqrt(m / (2.0 * (math.pi / 3.0 - SQ3 / 4.0)))


def make_lens(m: float, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """One bounded region between two half-planes: two 120-degree caps of radius r."""
    _check_areas([m])
    r = lens_radius(m)
    c = r * SQ3 / 2.0
    verts = (
        Vertex(0, INTERIOR, (-c, 0.0)),
        Vertex(1, INTERIOR, (c, 0.0)),
        _ray_vertex(2, (-c, 0.0), math.pi),
        _ray_vertex(3, (c, 0.0), 0.0),
    )
    edges = (
        ArcEdge(0, 0, 1, -1.0 / r, 0, 2),
        ArcEdge(1, 0, 1, 1.0 / r, 2, 1),
        ArcEdge(2, 0, 2, 0.0, 1, 0),
        ArcEdge(3, 1, 3, 0.0, 0, 1),
    )
    regions = (Region(0, INF), Region(1, INF), Region(2, m))
    p = ArcPartition(regions, verts, edges, window_radius, nw.LINE)
    return _finish(p, {2: m})


def make_disk(m: float, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """A single round region of area ``m``; the circle is split at two joints."""
    _check_areas([m])
    s = math.sqrt(m / math.pi)
    verts = (Vertex(0, JOINT, (s, 0.0)), Vertex(1, JOINT, (-s, 0.0)))
    edges = (ArcEdge(0, 0, 1, 1.0 / s, 1, 0), ArcEdge(1, 1, 0, 1.0 / s, 1, 0))
    regions = (Region(0, INF), Region(1, m))
    return _finish(ArcPartition(regions, verts, edges, window_radius, nw.CLUSTER), {1: m})


def reuleaux_width(m: float) -> float:
    return math.sqrt(2.0 * m / (math.pi - SQ3))


def make_reuleaux(m: float, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """Reuleaux triangle of area m with a radial ray leaving each corner."""
    _check_areas([m])
    s = reuleaux_width(m)
    rc = s / SQ3
    angs = [math.pi / 2 + k * 2 * math.pi / 3 for k in range(3)]
    verts = [Vertex(k, INTERIOR, (rc * math.cos(a), rc * math.sin(a))) for k, a in enumerate(angs)]
    verts += [_ray_vertex(3 + k, verts[k].position, a) for k, a in enumerate(angs)]
    edges = []
    for k in range(3):
        edges.append(ArcEdge(k, k, (k + 1) % 3, 1.0 / s, 3, k))
    for k in range(3):
        edges.append(ArcEdge(3 + k, k, 3 + k, 0.0, k, (k - 1) % 3))
    regions = (Region(0, INF), Region(1, INF), Region(2, INF), Region(3, m))
    p = ArcPartition(regions, tuple(verts), tuple(edges), window_radius, nw.TRIPLE_RAYS)
    return _finish(p, {3: m})


# ---------------------------------------------------------------------------
# double bubble: three arcs over the common chord between (0, h) and (0, -h)


def _cap_area(psi: float) -> float:
    """Area east of a unit half-chord for an arc whose start tangent is tilted by psi."""
    return 4.0 * segment_factor(psi)


def _cap_area_prime(psi: float) -> float:
    return 4.0 * segment_factor_prime(psi)


def _bubble_areas(psi_m: float, h: float = 1.0) -> tuple[float, float]:
    a1 = _cap_area(psi_m) - _cap_area(psi_m - 2 * math.pi / 3)
    a2 = _cap_area(psi_m + 2 * math.pi / 3) - _cap_area(psi_m)
    return h * h * a1, h * h * a2


def make_double_bubble(m1: float, m2: float, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """Standard double bubble: bubbles 1 (west) and 2 (east) in an unbounded region 0."""
    _check_areas([m1, m2])
    target = math.log(m2 / m1)

    def f(psi):
        a1, a2 = _bubble_areas(psi)
        return math.log(a2 / a1) - target

    def df(psi):
        a1, a2 = _bubble_areas(psi)
        d1 = _cap_area_prime(psi) - _cap_area_prime(psi - 2 * math.pi / 3)
        d2 = _cap_area_prime(psi + 2 * math.pi / 3) - _cap_area_prime(psi)
        return d2 / a2 - d1 / a1

    eps = 1e-9
    psi_m = _newton_1d(f, -math.pi / 3 + eps, math.pi / 3 - eps, 0.0, df)
    a1, _ = _bubble_areas(psi_m)
    h = math.sqrt(m1 / a1)
    psis = (psi_m - 2 * math.pi / 3, psi_m, psi_m + 2 * math.pi / 3)
    kap = [-math.sin(ps) / h for ps in psis]  # network curvature of the downward arcs
    major = [abs(ps) > math.pi / 2 for ps in psis]
    verts = (Vertex(0, INTERIOR, (0.0, h)), Vertex(1, INTERIOR, (0.0, -h)))
    edges = (
        ArcEdge(0, 0, 1, kap[0], 1, 0, major[0]),
        ArcEdge(1, 0, 1, kap[1], 2, 1, major[1]),
        ArcEdge(2, 0, 1, kap[2], 0, 2, major[2]),
    )
    regions = (Region(0, INF), Region(1, m1), Region(2, m2))
    p = ArcPartition(regions, verts, edges, window_radius, nw.CLUSTER)
    return _finish(p, {1: m1, 2: m2})


# ---------------------------------------------------------------------------
# peanut: two bounded regions in a row on the x axis, mirror symmetric


def _arc_end(p0, phi0: float, turn: float, length: float):
    """Endpoint of an arc starting at p0 with heading phi0 that turns by ``turn``."""
    half = turn / 2.0
    sinc = math.sin(half) / half if half != 0 else 1.0
    return (
        p0[0] + length * sinc * math.cos(phi0 + half),
        p0[1] + length * sinc * math.sin(phi0 + half),
    )


def _peanut_network(p3: float, p4: float, window_radius: float, m3=1.0, m4=1.0) -> ArcPartition:
    from scipy.optimize import brentq

    def f(a):
        return (math.cos(a + math.pi / 3) - 0.5) / p4 - (math.cos(a) - 0.5) / p3

    # heading of the west upper arc on arrival at the top junction
    alpha = brentq(f, -math.pi / 3, 0.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    L = (0.0, 0.0)
    turn3 = math.pi / 3 - alpha
    T = _arc_end(L, math.pi / 3, -turn3, turn3 / p3)
    turn4 = alpha + 2 * math.pi / 3
    Rt = _arc_end(T, alpha + math.pi / 3, -turn4, turn4 / p4)
    if abs(Rt[1]) > 1e-9 * max(1.0, abs(Rt[0])):
        raise ConstructionError("peanut junction equations not satisfied", abs(Rt[1]))
    Rt = (Rt[0], 0.0)
    B = (T[0], -T[1])
    verts = (
        Vertex(0, INTERIOR, L),
        Vertex(1, INTERIOR, T),
        Vertex(2, INTERIOR, Rt),
        Vertex(3, INTERIOR, B),
        _ray_vertex(4, L, math.pi),
        _ray_vertex(5, Rt, 0.0),
    )
    edges = (
        ArcEdge(0, 0, 1, -p3, 0, 2),
        ArcEdge(1, 1, 2, -p4, 0, 3),
        ArcEdge(2, 0, 3, p3, 2, 1),
        ArcEdge(3, 3, 2, p4, 3, 1),
        ArcEdge(4, 1, 3, p4 - p3, 3, 2),
        ArcEdge(5, 0, 4, 0.0, 1, 0),
        ArcEdge(6, 2, 5, 0.0, 0, 1),
    )
    regions = (Region(0, INF), Region(1, INF), Region(2, m3), Region(3, m4))
    return ArcPartition(regions, verts, edges, window_radius, nw.LINE)


def make_peanut(m3: float, m4: float, window_radius: float = DEFAULT_WINDOW) -> ArcPartition:
    """Two bounded regions (2 west, 3 east) between the half-planes 0 (north) and 1 (south)."""
    _check_areas([m3, m4])
    target = math.log(m4 / m3)

    def areas(log_ratio):
        q = _peanut_network(1.0, math.exp(log_ratio), window_radius)
        a = nw.finite_region_areas(q)
        return a[2], a[3]

    def f(x):
        a3, a4 = areas(x)
        return math.log(a4 / a3) - target

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2
        if lo < -60:
            raise ConstructionError("peanut area ratio out of range", f(lo))
    while f(hi) > 0:
        hi *= 2
        if hi > 60:
            raise ConstructionError("peanut area ratio out of range", f(hi))
    x = _newton_1d(f, lo, hi, 0.0 if lo < 0 < hi else 0.5 * (lo + hi))
    a3, _ = areas(x)
    lam = math.sqrt(m3 / a3)
    p = _peanut_network(1.0 / lam, math.exp(x) / lam, window_radius, m3, m4)
    return _finish(p, {2: m3, 3: m4})
