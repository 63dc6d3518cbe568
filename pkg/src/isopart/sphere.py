"""Equal-volume Voronoi partitions of the sphere and their stereographic images.

Sites are the vertices of a regular simplex, so every pair of cells meets
symmetrically.  A rotation ``Q`` moves the sites relative to the projection
pole ``e_{d+1}``; rotating a site toward the pole pushes the pole into that
site's cell.  For ``d = 2`` the projected partition is converted exactly into
an arc network, since stereographic projection sends great circles to circles
or lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .network import INFINITY, INTERIOR, JOINT, ArcEdge, ArcPartition, Region, Vertex, region_measures

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SimplexSites:
    d: int
    N: int
    sites: np.ndarray  # (N, d+1) unit vectors

    def gram(self) -> np.ndarray:
        return self.sites @ self.sites.T


def make_equidistant_sites(N: int, d: int) -> SimplexSites:
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if N < 2:
        raise ValueError("need at least two sites")
    if N > d + 2:
        raise ValueError(f"equidistant standard partitions need N <= d+2 (got N={N}, d={d})")
    # centred basis vectors of R^N expressed in an orthonormal basis of the sum-zero hyperplane
    C = np.eye(N) - 1.0 / N
    basis, _ = np.linalg.qr(C[:, : N - 1])
    pts = C @ basis
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    sites = np.zeros((N, d + 1))
    sites[:, : N - 1] = pts
    return SimplexSites(d, N, sites)


@dataclass(frozen=True)
class SpherePartition:
    sites: SimplexSites
    rotation: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = self.sites.d + 1
        Q = np.eye(n) if self.rotation is None else np.asarray(self.rotation, dtype=float)
        if Q.shape != (n, n) or np.linalg.norm(Q.T @ Q - np.eye(n)) > 1e-12:
            raise ValueError("rotation must be an orthogonal (d+1)x(d+1) matrix")
        object.__setattr__(self, "rotation", Q)

    @property
    def d(self) -> int:
        return self.sites.d

    @property
    def N(self) -> int:
        return self.sites.N

    @property
    def pole(self) -> np.ndarray:
        e = np.zeros(self.d + 1)
        e[-1] = 1.0
        return e

    def rotated_sites(self) -> np.ndarray:
        return self.sites.sites @ self.rotation.T

    def rotated(self, Q: np.ndarray) -> "SpherePartition":
        return SpherePartition(self.sites, np.asarray(Q) @ self.rotation)


def rotation_toward_cell(part: SpherePartition, j: int, angle: float) -> np.ndarray:
    """Rotation that tilts site ``j`` toward the pole by ``angle``.

    Composing it with the current rotation moves the pole into cell ``j``
    for small positive angles.
    """
    v = part.rotated_sites()[j]
    pole = part.pole
    u = pole - (pole @ v) * v
    nu = np.linalg.norm(u)
    if nu < 1e-15:
        return np.eye(part.d + 1)
    u /= nu
    c, s = math.cos(angle), math.sin(angle)
    # rotation in the (v, u) plane; identity on the complement
    return (
        np.eye(part.d + 1)
        + (c - 1) * (np.outer(v, v) + np.outer(u, u))
        + s * (np.outer(u, v) - np.outer(v, u))
    )


def voronoi_label(x, part: SpherePartition, return_ties: bool = False):
    """Index of the nearest rotated site; optionally also a tie mask."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1) > 1e-9):
        raise ValueError("points must lie on the unit sphere")
    s = X @ part.rotated_sites().T
    lab = np.argmax(s, axis=1)
    if return_ties:
        srt = np.sort(s, axis=1)
        ties = srt[:, -1] - srt[:, -2] <= TIE_TOL
        return (int(lab[0]), bool(ties[0])) if single else (lab, ties)
    return int(lab[0]) if single else lab


def project_to_plane(x) -> np.ndarray:
    """Stereographic projection from the north pole; the pole maps to ``inf``."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    den = 1.0 - X[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        Y = X[:, :-1] / den[:, None]
    Y[den <= 1e-15] = np.inf
    return Y[0] if single else Y


def lift(y) -> np.ndarray:
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    r2 = np.sum(Y * Y, axis=1)
    inf = ~np.isfinite(r2)
    r2f = np.where(inf, 0.0, r2)
    X = np.empty((len(Y), Y.shape[1] + 1))
    X[:, :-1] = 2 * np.where(inf[:, None], 0.0, Y) / (r2f + 1)[:, None]
    X[:, -1] = (r2f - 1) / (r2f + 1)
    X[inf] = 0.0
    X[inf, -1] = 1.0
    return X[0] if single else X


def planar_label(y, part: SpherePartition, return_ties: bool = False):
    return voronoi_label(lift(y), part, return_ties)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCMeasures:
    volumes: np.ndarray
    stderr: np.ndarray
    n: int
    total: float


def sphere_area(d: int) -> float:
    return 2 * math.pi ** ((d + 1) / 2) / math.exp(gammaln((d + 1) / 2))


def ball_volume(d: int, R: float) -> float:
    return math.pi ** (d / 2) / math.exp(gammaln(d / 2 + 1)) * R**d


def monte_carlo_measures(part: SpherePartition, radius: float | None, n: int, seed: int,
                         shards: int = 4) -> MCMeasures:
    """Cell volumes on the sphere (``radius=None``) or of the projected cells in a ball."""
    if n < 1:
        raise ValueError("need at least one sample")
    d = part.d
    counts = np.zeros(part.N, dtype=np.int64)
    sizes = [n // shards + (i < n % shards) for i in range(shards)]
    for ss, m in zip(np.random.SeedSequence(seed).spawn(shards), sizes):
        if m == 0:
            continue
        rng = np.random.default_rng(ss)
        g = rng.normal(size=(m, d + 1 if radius is None else d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if radius is None:
            lab = voronoi_label(g, part)
        else:
            r = radius * rng.uniform(size=m) ** (1.0 / d)
            lab = planar_label(g * r[:, None], part)
        counts += np.bincount(lab, minlength=part.N)
    total = sphere_area(d) if radius is None else ball_volume(d, radius)
    f = counts / n
    return MCMeasures(total * f, total * np.sqrt(f * (1 - f) / n), n, total)


# ---------------------------------------------------------------------------
# boundaries


def _slerp(a, b, t):
    om = math.acos(max(-1.0, min(1.0, float(a @ b))))
    if om < 1e-15:
        return a.copy()
    return (math.sin((1 - t) * om) * a + math.sin(t * om) * b) / math.sin(om)


def sample_boundary(part: SpherePartition, n: int, seed: int, tol: float = 1e-10):
    """Boundary points found by bisection between differently labelled samples.

    Returns ``(points, pairs)`` with points on the sphere and the two cell labels
    on either side of each point.
    """
    rng = np.random.default_rng(seed)
    pts, pairs = [], []
    while len(pts) < n:
        g = rng.normal(size=(2 * n, part.d + 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        lab = voronoi_label(g, part)
        for a, b, la, lb in zip(g[0::2], g[1::2], lab[0::2], lab[1::2]):
            if la == lb or abs(a @ b) > 1 - 1e-9 or len(pts) >= n:
                continue
            lo, hi = 0.0, 1.0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if voronoi_label(_slerp(a, b, mid), part) == la:
                    lo = mid
                else:
                    hi = mid
            pts.append(_slerp(a, b, 0.5 * (lo + hi)))
            pairs.append((int(la), int(voronoi_label(_slerp(a, b, hi), part))))
    return np.array(pts), pairs


def circle_through(a, b, c):
    """Centre and radius of the circle through three planar points (None for collinear)."""
    a, b, c = (np.asarray(t, dtype=float) for t in (a, b, c))
    d = 2 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    scale = max(np.linalg.norm(b - a), np.linalg.norm(c - a)) ** 2
    if abs(d) <= 1e-14 * scale:
        return None
    A = np.array([[b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]])
    rhs = 0.5 * np.array([b @ b - a @ a, c @ c - a @ a])
    ctr = np.linalg.solve(A, rhs)
    return ctr, float(np.linalg.norm(a - ctr))


def _boundary_arcs(part: SpherePartition):
    """Cell interfaces on S^2 as (labels, start, mid, end) great-circle arcs."""
    S = part.rotated_sites()
    N = part.N
    if N == 2:
        w = S[0] - S[1]
        w /= np.linalg.norm(w)
        # two half circles of the bisecting great circle, split at points chosen away from the pole
        a = np.cross(w, part.pole)
        if np.linalg.norm(a) < 1e-12:
            a = np.cross(w, [1.0, 0.0, 0.0])
        a /= np.linalg.norm(a)
        b = np.cross(w, a)
        return [((0, 1), a, b, -a), ((0, 1), -a, -b, a)]
    if N == 3:
        nrm = np.cross(S[0], S[1])
        nrm /= np.linalg.norm(nrm)
        out = []
        for i, j in ((0, 1), (1, 2), (0, 2)):
            k = 3 - i - j
            out.append(((i, j), nrm, -S[k], -nrm))
        return out
    if N == 4:
        out = []
        for i in range(4):
            for j in range(i + 1, 4):
                k, l = [t for t in range(4) if t not in (i, j)]
                u, v = -S[k], -S[l]
                m = (u + v) / np.linalg.norm(u + v)
                out.append(((i, j), u, m, v))
        return out
    raise ValueError("projected partitions exist for N <= 4 on the 2-sphere")


def boundary_polylines(part: SpherePartition, n_per_arc: int = 200, window: float | None = None):
    """Projected interfaces of a 2-sphere partition as planar polylines."""
    if part.d != 2:
        raise ValueError("polylines are only defined for d = 2")
    out = []
    for labels, a, m, b in _boundary_arcs(part):
        t = np.linspace(0.0, 1.0, n_per_arc)
        half1 = np.array([_slerp(a, m, s) for s in t])
        half2 = np.array([_slerp(m, b, s) for s in t[1:]])
        Y = project_to_plane(np.vstack([half1, half2]))
        keep = np.all(np.isfinite(Y), axis=1)
        if window is not None:
            keep &= np.linalg.norm(np.where(np.isfinite(Y), Y, 0), axis=1) <= window
        # split at discarded samples
        run = []
        for y, k in zip(Y, keep):
            if k:
                run.append(y)
            elif run:
                out.append((labels, np.array(run)))
                run = []
        if run:
            out.append((labels, np.array(run)))
    return out


def _menger(a, m, b) -> float:
    cr = (m[0] - a[0]) * (b[1] - m[1]) - (m[1] - a[1]) * (b[0] - m[0])
    den = np.linalg.norm(m - a) * np.linalg.norm(b - m) * np.linalg.norm(b - a)
    return 2 * cr / den


@dataclass(frozen=True)
class _GreatArc:
    labels: tuple[int, int]
    start: np.ndarray
    u: np.ndarray  # unit tangent at start, in the plane of the arc
    sweep: float

    @classmethod
    def through(cls, labels, a, m, b):
        n = np.cross(a, m)
        n /= np.linalg.norm(n)
        u = np.cross(n, a)
        sweep = math.atan2(b @ u, b @ a) % (2 * math.pi)
        return cls(labels, np.asarray(a, float), u, sweep)

    def at(self, t: float) -> np.ndarray:
        return math.cos(t * self.sweep) * self.start + math.sin(t * self.sweep) * self.u

    def split(self, t: float) -> tuple["_GreatArc", "_GreatArc"]:
        x = self.at(t)
        u2 = -math.sin(t * self.sweep) * self.start + math.cos(t * self.sweep) * self.u
        return (_GreatArc(self.labels, self.start, self.u, t * self.sweep),
                _GreatArc(self.labels, x, u2, (1 - t) * self.sweep))

    def pole_param(self, pole, tol) -> float | None:
        n = np.cross(self.start, self.u)
        if abs(n @ pole) > tol:
            return None
        phi = math.atan2(pole @ self.u, pole @ self.start) % (2 * math.pi)
        return phi / self.sweep if phi < self.sweep else None


def to_arc_partition(part: SpherePartition, window_radius: float | None = None,
                     pole_tol: float = 1e-9) -> ArcPartition:
    """Exact arc-network image of a 2-sphere partition under stereographic projection."""
    if part.d != 2:
        raise ValueError("arc networks are planar; need d = 2")
    pole = part.pole
    arcs: list[_GreatArc] = []
    for labels, a, m, b in _boundary_arcs(part):
        arc = _GreatArc.through(labels, a, m, b)
        t = arc.pole_param(pole, pole_tol)
        if t is not None and pole_tol < t * arc.sweep < arc.sweep - pole_tol:
            arcs.extend(arc.split(t))
        else:
            arcs.append(arc)

    verts: list[Vertex] = []
    key_of: dict[tuple, int] = {}

    def vertex(x):
        key = tuple(np.round(x, 9))
        if key not in key_of:
            y = project_to_plane(x)
            key_of[key] = len(verts)
            verts.append(Vertex(len(verts), INTERIOR, (float(y[0]), float(y[1]))))
        return key_of[key]

    def at_pole(x):
        return np.linalg.norm(x - pole) <= pole_tol

    raw = []
    unbounded = {int(voronoi_label(pole, part))}
    for arc in arcs:
        s, e = arc.at(0.0), arc.at(1.0)
        t_mid = 0.5
        if at_pole(s):
            # traverse from the finite end toward the pole
            arc = _GreatArc.through(arc.labels, e, arc.at(0.5), s)
            s, e = e, s
        ym = project_to_plane(arc.at(t_mid))
        h = 1e-6
        tang = project_to_plane(arc.at(t_mid + h)) - project_to_plane(arc.at(t_mid - h))
        tang /= np.linalg.norm(tang)
        ys = project_to_plane(s)
        vs = vertex(s)
        if at_pole(e):
            unbounded.update(arc.labels)
            d = ym - ys
            d /= np.linalg.norm(d)
            vid = len(verts)
            verts.append(Vertex(vid, INFINITY, (float(ys[0]), float(ys[1])), (float(d[0]), float(d[1]))))
            raw.append((arc.labels, vs, vid, 0.0, False, ym, d))
        else:
            ye = project_to_plane(e)
            ve = vertex(e)
            kap = _menger(ys, ym, ye)
            if abs(kap) * np.linalg.norm(ye - ys) < 1e-12:
                kap = 0.0
            raw.append((arc.labels, vs, ve, kap, bool((ys - ym) @ (ye - ym) > 0), ym, tang))
    # the two split points of a lone circle have degree 2 and become joints
    deg = np.zeros(len(verts), dtype=int)
    for _, vs, ve, *_ in raw:
        deg[vs] += 1
        deg[ve] += 1
    verts = [Vertex(v.id, JOINT, v.position) if v.kind == INTERIOR and deg[v.id] == 2 else v for v in verts]
    # a line through the origin: both rays belong to the same straight interface
    verts, raw = _fuse_line(verts, raw)
    reach = max([math.hypot(*v.position) for v in verts if v.kind != INFINITY]
                + [float(np.linalg.norm(r[5])) for r in raw] + [1.0])
    R = window_radius or 10.0 * reach
    edges = []
    for eid, (labels, vs, ve, kap, major, ym, tang) in enumerate(raw):
        nrm = np.array([-tang[1], tang[0]])
        probe = ym + 1e-6 * max(1.0, float(np.linalg.norm(ym))) * nrm
        left = int(planar_label(probe, part))
        i, j = labels
        edges.append(ArcEdge(eid, vs, ve, float(kap), left, j if left == i else i, major))
    regions = [Region(k, math.inf if k in unbounded else 1.0) for k in range(part.N)]
    p = ArcPartition(tuple(regions), tuple(verts), tuple(edges), R)
    if any(math.isfinite(r.measure) for r in regions):
        areas = region_measures(p).areas
        regions = [Region(r.label, areas[r.label]) if math.isfinite(r.measure) else r for r in regions]
        p = ArcPartition(tuple(regions), tuple(verts), tuple(edges), R)
    return p


def _fuse_line(verts, raw):
    """Replace two opposite rays joined at a degree-2 point by one line edge."""
    deg: dict[int, list[int]] = {}
    for k, r in enumerate(raw):
        deg.setdefault(r[1], []).append(k)
        deg.setdefault(r[2], []).append(k)
    for vid, ks in deg.items():
        if verts[vid].kind == INFINITY or len(ks) != 2:
            continue
        a, b = raw[ks[0]], raw[ks[1]]
        if not (verts[a[2]].kind == INFINITY and verts[b[2]].kind == INFINITY and a[1] == b[1] == vid):
            continue
        # line from the far end of ray a to the far end of ray b, anchored at the shared point
        pos = verts[vid].position
        ia, ib = a[2], b[2]
        da = np.asarray(verts[ia].direction)
        db = np.asarray(verts[ib].direction)
        verts[ia] = Vertex(ia, INFINITY, pos, tuple(da))
        verts[ib] = Vertex(ib, INFINITY, pos, tuple(db))
        line = (a[0], ia, ib, 0.0, False, np.asarray(pos) + db, db)
        raw = [r for k, r in enumerate(raw) if k not in ks] + [line]
        verts = [v for v in verts if v.id != vid]
        remap = {v.id: n for n, v in enumerate(verts)}
        verts = [Vertex(remap[v.id], v.kind, v.position, v.direction, v.pinned) for v in verts]
        raw = [(r[0], remap[r[1]], remap[r[2]], *r[3:]) for r in raw]
        return verts, raw
    return verts, raw
