"""Constrained perimeter minimization of arc networks inside a window.

Degrees of freedom are the positions of the free vertices and one bulge
angle per finite edge, so every iterate is again an arc network.  The far
field is held fixed by clamping each unbounded interface at a pinned joint on
its far-field ray at radius ``pin_fraction * R``; only the piece between the
network and the pin can move.

Each iteration takes a reduced Newton step on the tangent space of the area
constraints (finite-difference Hessian of the Lagrangian, eigenvalues taken
in absolute value, null directions dropped), falls back to projected
steepest descent when that is not a descent direction, and projects back
onto the constraint manifold with Gauss-Newton.  The Lagrange multipliers
are the region pressures.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from . import network as nw
from .geom import CircularArc, half_aperture, length_and_grad, moment_and_grad
from .network import INFINITY, INTERIOR, JOINT, ArcEdge, ArcPartition, Vertex, energy  # noqa: F401

log = logging.getLogger(__name__)


class ProjectionError(RuntimeError):
    pass


class TopologyMoveRejected(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintMode:
    J: frozenset[int] | None = None  # None: every bounded region

    def labels(self, p: ArcPartition) -> list[int]:
        if self.J is None:
            return [r.label for r in p.regions if not r.infinite and r.measure > 0]
        unknown = set(self.J) - set(p.labels)
        if unknown:
            raise ValueError(f"constraint labels {sorted(unknown)} are not regions")
        return sorted(self.J)


@dataclass(frozen=True)
class DescentOptions:
    max_iter: int = 200
    trust_radius: float = 0.25
    constraint_tol: float = 1e-10
    energy_tol: float = 1e-13
    grad_tol: float = 1e-10
    topology_threshold: float = 1e-3
    pin_fraction: float = 0.9
    max_backtracks: int = 40

    def __post_init__(self):
        for name, value in dataclasses.asdict(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.pin_fraction >= 1:
            raise ValueError("pin_fraction must be below 1")


@dataclass
class MinimizeResult:
    partition: ArcPartition
    trace: list[dict]
    multipliers: dict[int, float]
    converged: bool
    short_edges: list[int] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.trace[-1]["energy"]


# ---------------------------------------------------------------------------
# window problem


def pin_far_field(p: ArcPartition, fraction: float = 0.9) -> ArcPartition:
    """Split every unbounded edge at a pinned joint on its far-field ray."""
    R = p.window_radius * fraction
    vm = p.vertex_map
    verts = list(p.vertices)
    next_v = max(vm) + 1
    next_e = max(e.id for e in p.edges) + 1 if p.edges else 0
    edges: list[ArcEdge] = []

    def pin_for(u: Vertex) -> int:
        nonlocal next_v
        a, d = u.position, u.direction
        b = a[0] * d[0] + a[1] * d[1]
        c = a[0] ** 2 + a[1] ** 2 - R * R
        t = -b + math.sqrt(max(b * b - c, 0.0))
        pos = (a[0] + t * d[0], a[1] + t * d[1])
        verts.append(Vertex(next_v, JOINT, pos, None, True))
        next_v += 1
        return next_v - 1

    for e in p.edges:
        vs, ve = vm[e.v_start], vm[e.v_end]
        if vs.kind != INFINITY and ve.kind != INFINITY:
            edges.append(e)
            continue
        if vs.kind != ve.kind and (vm[e.v_start if ve.kind == INFINITY else e.v_end]).pinned:
            edges.append(e)  # already clamped
            continue
        chain = [e.v_start]
        if vs.kind == INFINITY:
            chain.append(pin_for(vs))
        if ve.kind == INFINITY:
            chain.append(pin_for(ve))
        chain.append(e.v_end)
        for a, b in zip(chain[:-1], chain[1:]):
            edges.append(ArcEdge(next_e, a, b, 0.0, e.left, e.right))
            next_e += 1
    vmap = {v.id: v for v in verts}
    # rays now start at their pins
    verts = [
        dataclasses.replace(v, position=_pin_of(v.id, edges, vmap)) if v.kind == INFINITY else v
        for v in verts
    ]
    return dataclasses.replace(p, vertices=tuple(verts), edges=tuple(edges))


def _pin_of(vid, edges, vmap):
    for e in edges:
        if vid in (e.v_start, e.v_end):
            other = vmap[e.v_end if e.v_start == vid else e.v_start]
            return other.position
    return vmap[vid].position


class _Problem:
    def __init__(self, p: ArcPartition, labels: list[int], targets: dict[int, float]):
        self.p = p
        vm = p.vertex_map
        self.free_v = [v.id for v in p.vertices if v.kind != INFINITY and not v.pinned]
        self.vidx = {vid: i for i, vid in enumerate(self.free_v)}
        self.free_e = [e for e in p.edges if nw.edge_kind(p, e) == "arc"]
        self.nv = len(self.free_v)
        self.n = 2 * self.nv + len(self.free_e)
        self.fixed_pos = {v.id: np.asarray(v.position) for v in p.vertices if v.kind != INFINITY}
        self.labels = labels
        z0 = self.pack(p)
        meas = nw.region_measures(p)
        self.energy_const = meas.perimeter - self._length(z0)
        m0 = self._moments(z0)
        self.area_const = np.array(
            [
                0.0 if not p.region(k).infinite else meas.areas[k] - m0[i]
                for i, k in enumerate(labels)
            ]
        )
        self.target = np.array([targets[k] for k in labels])
        self.z0 = z0
        self.vm = vm

    def pack(self, p: ArcPartition) -> np.ndarray:
        vm = p.vertex_map
        z = np.zeros(self.n)
        for vid, i in self.vidx.items():
            z[2 * i: 2 * i + 2] = vm[vid].position
        for j, e in enumerate(self.free_e):
            arc = nw.edge_arc(p, e, vm)
            z[2 * self.nv + j] = arc.theta
        return z

    def _pos(self, z, vid):
        i = self.vidx.get(vid)
        if i is None:
            return self.fixed_pos[vid]
        return z[2 * i: 2 * i + 2]

    def _length(self, z) -> float:
        tot = 0.0
        for j, e in enumerate(self.free_e):
            ell, *_ = length_and_grad(self._pos(z, e.v_start), self._pos(z, e.v_end), z[2 * self.nv + j])
            tot += ell
        return tot

    def _moments(self, z) -> np.ndarray:
        out = np.zeros(len(self.labels))
        for j, e in enumerate(self.free_e):
            m, *_ = moment_and_grad(self._pos(z, e.v_start), self._pos(z, e.v_end), z[2 * self.nv + j])
            for i, k in enumerate(self.labels):
                out[i] += m * ((e.left == k) - (e.right == k))
        return out

    def energy(self, z) -> float:
        return self._length(z) + self.energy_const

    def areas(self, z) -> np.ndarray:
        return self._moments(z) + self.area_const

    def grad_energy(self, z) -> np.ndarray:
        g = np.zeros(self.n)
        for j, e in enumerate(self.free_e):
            _, d0, d1, dth = length_and_grad(
                self._pos(z, e.v_start), self._pos(z, e.v_end), z[2 * self.nv + j]
            )
            self._scatter(g, e, d0, d1)
            g[2 * self.nv + j] += dth
        return g

    def jac_areas(self, z) -> np.ndarray:
        G = np.zeros((len(self.labels), self.n))
        for j, e in enumerate(self.free_e):
            _, d0, d1, dth = moment_and_grad(
                self._pos(z, e.v_start), self._pos(z, e.v_end), z[2 * self.nv + j]
            )
            for i, k in enumerate(self.labels):
                s = (e.left == k) - (e.right == k)
                if s:
                    self._scatter(G[i], e, s * d0, s * d1)
                    G[i, 2 * self.nv + j] += s * dth
        return G

    def _scatter(self, g, e, d0, d1):
        i = self.vidx.get(e.v_start)
        if i is not None:
            g[2 * i: 2 * i + 2] += d0
        i = self.vidx.get(e.v_end)
        if i is not None:
            g[2 * i: 2 * i + 2] += d1

    def chords(self, z) -> np.ndarray:
        return np.array(
            [np.linalg.norm(self._pos(z, e.v_end) - self._pos(z, e.v_start)) for e in self.free_e]
        )

    def unpack(self, z) -> ArcPartition:
        verts = []
        for v in self.p.vertices:
            i = self.vidx.get(v.id)
            if i is not None:
                v = dataclasses.replace(v, position=(float(z[2 * i]), float(z[2 * i + 1])))
            verts.append(v)
        vm = {v.id: v for v in verts}
        edges = []
        for e in self.p.edges:
            edges.append(e)
        out = []
        th = {e.id: z[2 * self.nv + j] for j, e in enumerate(self.free_e)}
        for e in edges:
            if e.id in th:
                arc = CircularArc.from_theta(vm[e.v_start].position, vm[e.v_end].position, th[e.id])
                e = dataclasses.replace(e, kappa=-arc.kappa, major=arc.major)
            out.append(e)
        return dataclasses.replace(self.p, vertices=tuple(verts), edges=tuple(out))

    def project(self, z, tol: float, max_iter: int = 30) -> np.ndarray:
        if not self.labels:
            return z
        for _ in range(max_iter):
            g = self.areas(z) - self.target
            if np.max(np.abs(g)) <= tol * 1e-2:
                return z
            G = self.jac_areas(z)
            sv = np.linalg.svd(G, compute_uv=False)
            if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
                raise ProjectionError(f"singular area Jacobian (singular values {sv})")
            z = z - G.T @ np.linalg.solve(G @ G.T, g)
            if not np.all(np.abs(z[2 * self.nv:]) < math.pi):
                raise ProjectionError("bulge angle left (-pi, pi) during projection")
        g = self.areas(z) - self.target
        if np.max(np.abs(g)) > tol:
            raise ProjectionError(f"area projection stalled at violation {np.max(np.abs(g)):.3g}")
        return z


def _multipliers(prob: _Problem, z):
    gf = prob.grad_energy(z)
    if not prob.labels:
        return gf, np.zeros(0), gf
    G = prob.jac_areas(z)
    lam, *_ = np.linalg.lstsq(G.T, gf, rcond=None)
    return gf, lam, gf - G.T @ lam


def minimize(initial: ArcPartition, mode: ConstraintMode | None = None,
             opts: DescentOptions | None = None, seed: int = 0,
             targets: dict[int, float] | None = None) -> MinimizeResult:
    """Locally minimize the window perimeter with the areas of ``mode.J`` fixed.

    Bounded regions keep their prescribed measure (unless ``targets`` overrides
    it); unbounded regions in J keep their initial area inside the window.
    ``seed`` is accepted for interface uniformity; the descent is deterministic.
    """
    mode = mode or ConstraintMode()
    opts = opts or DescentOptions()
    diag = nw.validate_topology(initial)
    if not diag.ok:
        raise ValueError(f"initial partition is invalid: {diag.codes()}")
    labels = mode.labels(initial)
    pinned = pin_far_field(initial, opts.pin_fraction)
    window_areas = nw.region_measures(pinned).areas
    tgt = {}
    for k in labels:
        r = initial.region(k)
        tgt[k] = window_areas[k] if r.infinite else r.measure
    if targets:
        tgt.update(targets)
    prob = _Problem(pinned, labels, tgt)
    z = prob.project(prob.z0.copy(), opts.constraint_tol)
    f = prob.energy(z)
    trace = [dict(iteration=0, energy=f, max_area_violation=_viol(prob, z), step_norm=0.0)]
    converged = False
    for it in range(1, opts.max_iter + 1):
        gf, lam, r = _multipliers(prob, z)
        if np.linalg.norm(r) <= opts.grad_tol:
            converged = True
            break
        d = _newton_direction(prob, z, lam, gf)
        if d is None or gf @ d >= 0:
            d = -r
        norm = np.linalg.norm(d)
        if norm > opts.trust_radius:
            d *= opts.trust_radius / norm
        slope = gf @ d
        alpha, accepted = 1.0, None
        for _ in range(opts.max_backtracks):
            try:
                zt = prob.project(z + alpha * d, opts.constraint_tol)
                if np.all(prob.chords(zt) > 0):
                    ft = prob.energy(zt)
                    if ft <= f + 1e-4 * alpha * slope or (ft <= f and abs(slope) < 1e-12):
                        accepted = (zt, ft)
                        break
            except ProjectionError:
                pass
            alpha *= 0.5
        if accepted is None:
            log.debug("line search stalled at iteration %d", it)
            converged = np.linalg.norm(r) <= 1e3 * opts.grad_tol
            break
        zt, ft = accepted
        step = float(np.linalg.norm(zt - z))
        df = f - ft
        z, f = zt, ft
        trace.append(dict(iteration=it, energy=f, max_area_violation=_viol(prob, z), step_norm=step))
        if df < opts.energy_tol * max(1.0, abs(f)) and step < 1e-9:
            _, _, r = _multipliers(prob, z)
            converged = np.linalg.norm(r) <= 1e3 * opts.grad_tol
            break
    _, lam, _ = _multipliers(prob, z)
    out = _merge_pins(prob.unpack(z))
    short = [e.id for e, c in zip(prob.free_e, prob.chords(z)) if c < opts.topology_threshold
             and not _touches_pin(prob.p, e)]
    return MinimizeResult(out, trace, {k: float(v) for k, v in zip(labels, lam)}, bool(converged), short)


def _touches_pin(p, e):
    vm = p.vertex_map
    return vm[e.v_start].pinned or vm[e.v_end].pinned


def _viol(prob, z) -> float:
    if not prob.labels:
        return 0.0
    return float(np.max(np.abs(prob.areas(z) - prob.target)))


def _newton_direction(prob: _Problem, z, lam, gf):
    G = prob.jac_areas(z) if prob.labels else np.zeros((0, prob.n))
    Z = null_space(G) if len(G) else np.eye(prob.n)
    if Z.shape[1] == 0:
        return None

    def grad_lag(x):
        g = prob.grad_energy(x)
        if prob.labels:
            g = g - prob.jac_areas(x).T @ lam
        return g

    h = 1e-6
    H = np.zeros((Z.shape[1], Z.shape[1]))
    for i in range(Z.shape[1]):
        gp = grad_lag(z + h * Z[:, i])
        gm = grad_lag(z - h * Z[:, i])
        H[:, i] = Z.T @ (gp - gm) / (2 * h)
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    aw = np.abs(w)
    keep = aw > 1e-8 * max(aw.max(), 1e-300)
    if not keep.any():
        return None
    rg = Z.T @ gf
    coef = V[:, keep].T @ rg / aw[keep]
    return -Z @ (V[:, keep] @ coef)


def _merge_pins(p: ArcPartition, tol: float = 1e-7) -> ArcPartition:
    """Fold a pinned joint back into its ray when the interface is straight through it."""
    changed = True
    while changed:
        changed = False
        vm = p.vertex_map
        inc = p.incident()
        for v in p.vertices:
            if not v.pinned:
                continue
            es = inc[v.id]
            ray = [e for e in es if vm[e.v_start].kind == INFINITY or vm[e.v_end].kind == INFINITY]
            other = [e for e in es if e not in ray]
            if len(ray) == 2:
                q = _merge_rays(p, v, ray, tol)
                if q is not None:
                    p, changed = q, True
                    break
                continue
            if len(ray) != 1 or len(other) != 1 or abs(other[0].kappa) > tol:
                continue
            r, a = ray[0], other[0]
            far = r.v_end if vm[r.v_end].kind == INFINITY else r.v_start
            near = a.v_start if a.v_end == v.id else a.v_end
            d = vm[far].direction
            q = vm[near].position
            if vm[near].kind == INFINITY:
                # both sides are rays: a straight line between two ends at infinity
                if abs(d[0] * vm[near].direction[1] - d[1] * vm[near].direction[0]) > tol:
                    continue
            else:
                u = np.subtract(v.position, q)
                lu = np.linalg.norm(u)
                if lu == 0 or abs((u[0] * d[1] - u[1] * d[0]) / lu) > tol or u @ d <= 0:
                    continue
            if a.v_end == v.id:
                merged = dataclasses.replace(a, v_end=far, kappa=0.0, major=False)
                if r.v_start != v.id:
                    continue
            else:
                merged = dataclasses.replace(a, v_start=far, kappa=0.0, major=False)
                if r.v_end != v.id:
                    continue
            edges = tuple(merged if e.id == a.id else e for e in p.edges if e.id != r.id)
            verts = []
            for w in p.vertices:
                if w.id == v.id:
                    continue
                if w.id == far and vm[near].kind != INFINITY:
                    w = dataclasses.replace(w, position=vm[near].position)
                verts.append(w)
            p = dataclasses.replace(p, vertices=tuple(verts), edges=edges)
            changed = True
            break
    return p


def _merge_rays(p: ArcPartition, v: Vertex, rays, tol: float):
    """Two opposite rays meeting at a pinned joint become one line."""
    vm = p.vertex_map
    a, b = rays
    if a.v_start == v.id:
        a, b = b, a  # a should enter the joint
    ends = []
    for e in (a, b):
        far = e.v_end if e.v_start == v.id else e.v_start
        ends.append(vm[far])
    da, db = ends[0].direction, ends[1].direction
    if abs(da[0] * db[1] - da[1] * db[0]) > tol or da[0] * db[0] + da[1] * db[1] > 0:
        return None
    left, right = (b.left, b.right) if b.v_start == v.id else (b.right, b.left)
    line = ArcEdge(a.id, ends[0].id, ends[1].id, 0.0, left, right)
    pos = v.position
    verts = tuple(
        dataclasses.replace(w, position=pos) if w.id in (ends[0].id, ends[1].id) else w
        for w in p.vertices if w.id != v.id
    )
    edges = tuple(line if e.id == a.id else e for e in p.edges if e.id != b.id)
    return dataclasses.replace(p, vertices=verts, edges=edges)


# ---------------------------------------------------------------------------


def jitter(p: ArcPartition, amount: float, seed: int) -> ArcPartition:
    """Move every interior vertex by ``amount`` in a random direction, keeping bulge angles."""
    rng = np.random.default_rng(seed)
    vm = p.vertex_map
    theta = {}
    for e in p.edges:
        if nw.edge_kind(p, e) == "arc":
            theta[e.id] = nw.edge_arc(p, e, vm).theta
    # vertices carrying a ray may only slide along it
    ray_dir = {}
    for e in p.edges:
        for a, b in ((e.v_start, e.v_end), (e.v_end, e.v_start)):
            if vm[b].kind == INFINITY:
                ray_dir[a] = vm[b].direction
    verts = []
    for v in p.vertices:
        if v.kind in (INTERIOR, JOINT) and not v.pinned:
            a = rng.uniform(0, 2 * math.pi)
            step = np.array([math.cos(a), math.sin(a)]) * amount
            if v.id in ray_dir:
                step = np.asarray(ray_dir[v.id]) * amount * math.cos(a)
            v = dataclasses.replace(v, position=(v.position[0] + step[0], v.position[1] + step[1]))
        verts.append(v)
    vm = {v.id: v for v in verts}
    edges = []
    for e in p.edges:
        if e.id in theta:
            arc = CircularArc.from_theta(vm[e.v_start].position, vm[e.v_end].position, theta[e.id])
            e = dataclasses.replace(e, kappa=-arc.kappa, major=arc.major)
        edges.append(e)
    return dataclasses.replace(p, vertices=tuple(verts), edges=tuple(edges))


def local_minimality_check(result: MinimizeResult, mode: ConstraintMode | None = None,
                           n: int = 50, scale: float = 1e-3, seed: int = 0,
                           opts: DescentOptions | None = None) -> float:
    """Smallest energy change over random feasible perturbations of a minimizer."""
    mode = mode or ConstraintMode()
    opts = opts or DescentOptions()
    p = result.partition
    pinned = pin_far_field(p, opts.pin_fraction) if any(v.kind == INFINITY for v in p.vertices) else p
    labels = mode.labels(p)
    areas = nw.region_measures(pinned).areas
    tgt = {k: (areas[k] if p.region(k).infinite else p.region(k).measure) for k in labels}
    prob = _Problem(pinned, labels, tgt)
    z0 = prob.project(prob.z0, opts.constraint_tol)
    f0 = prob.energy(z0)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n):
        dz = rng.normal(size=prob.n)
        dz *= scale / np.linalg.norm(dz)
        z = prob.project(z0 + dz, opts.constraint_tol)
        worst = min(worst, prob.energy(z) - f0)
    return worst


# ---------------------------------------------------------------------------
# topology moves


@dataclass(frozen=True)
class TopologyMove:
    kind: str  # "collapse" | "flip" | "remove_triangle"
    target: int  # edge id, or region label for remove_triangle


def apply_topology_move(p: ArcPartition, move: TopologyMove, threshold: float) -> ArcPartition:
    if move.kind == "remove_triangle":
        return _remove_triangle(p, move.target, threshold)
    e = p.edge_map.get(move.target)
    if e is None:
        raise TopologyMoveRejected(f"no edge {move.target}")
    if nw.edge_kind(p, e) != "arc":
        raise TopologyMoveRejected("unbounded edges cannot be collapsed")
    length = nw.energy_of_edge(p, e)
    if length >= threshold:
        raise TopologyMoveRejected(f"edge {e.id} has length {length:.3g} >= threshold {threshold}")
    if move.kind == "collapse":
        return _collapse(p, e)
    if move.kind == "flip":
        return _flip(p, e, threshold)
    raise TopologyMoveRejected(f"unknown move {move.kind!r}")


def _thetas(p):
    vm = p.vertex_map
    return {e.id: nw.edge_arc(p, e, vm).theta for e in p.edges if nw.edge_kind(p, e) == "arc"}


def _rebuild(p, verts, edges, theta):
    vm = {v.id: v for v in verts}
    out = []
    for e in edges:
        if e.id in theta and vm[e.v_start].kind != INFINITY and vm[e.v_end].kind != INFINITY:
            arc = CircularArc.from_theta(vm[e.v_start].position, vm[e.v_end].position, theta[e.id])
            e = dataclasses.replace(e, kappa=-arc.kappa, major=arc.major)
        out.append(e)
    return dataclasses.replace(p, vertices=tuple(verts), edges=tuple(out))


def _collapse(p, e):
    inc = p.incident()
    deg = len(inc[e.v_start]) + len(inc[e.v_end]) - 2
    if deg >= 4:
        raise TopologyMoveRejected(f"collapsing edge {e.id} would create a degree-{deg} vertex")
    vm = p.vertex_map
    a, b = vm[e.v_start], vm[e.v_end]
    mid = ((a.position[0] + b.position[0]) / 2, (a.position[1] + b.position[1]) / 2)
    kind = INTERIOR if deg == 3 else JOINT
    theta = _thetas(p)
    verts = [
        dataclasses.replace(a, position=mid, kind=kind) if v.id == a.id else v
        for v in p.vertices
        if v.id != b.id
    ]
    edges = []
    for f in p.edges:
        if f.id == e.id:
            continue
        f = dataclasses.replace(
            f,
            v_start=a.id if f.v_start == b.id else f.v_start,
            v_end=a.id if f.v_end == b.id else f.v_end,
        )
        edges.append(f)
    return _rebuild(p, verts, edges, theta)


def _flip(p, e, threshold):
    inc = p.incident()
    vm = p.vertex_map
    u, v = e.v_start, e.v_end
    if len(inc[u]) != 3 or len(inc[v]) != 3 or vm[u].kind != INTERIOR or vm[v].kind != INTERIOR:
        raise TopologyMoveRejected("flip needs two degree-3 interior vertices")
    around = []
    for vid in (u, v):
        for f in inc[vid]:
            if f.id == e.id:
                continue
            t = nw.outgoing_tangent(p, f, vid, vm)
            around.append((math.atan2(t[1], t[0]), f, vid, t))
    if len({f.id for _, f, _, _ in around}) != 4:
        raise TopologyMoveRejected("flip would merge parallel edges")
    around.sort(key=lambda x: x[0])
    # rotate so that the two u-edges come first
    while not (around[0][2] == u and around[1][2] == u):
        around = around[1:] + around[:1]
    (_, a, _, ta), (_, b, _, tb), (_, c, _, tc), (_, d, _, td) = around
    P = nw.outgoing_sides(b, u)[1]
    Q = nw.outgoing_sides(c, v)[0]
    if P == Q:
        raise TopologyMoveRejected("flip would separate a region from itself")
    pu, pv = np.asarray(vm[u].position), np.asarray(vm[v].position)
    mid = (pu + pv) / 2
    half = threshold / 2

    def unit(x):
        n = np.linalg.norm(x)
        return x / n if n > 0 else np.array([1.0, 0.0])

    new_u = mid + half * unit(tb + tc)
    new_v = mid + half * unit(td + ta)
    theta = _thetas(p)
    verts = []
    for w in p.vertices:
        if w.id == u:
            w = dataclasses.replace(w, position=tuple(new_u))
        elif w.id == v:
            w = dataclasses.replace(w, position=tuple(new_v))
        verts.append(w)

    def reattach(f, old, new):
        return dataclasses.replace(
            f, v_start=new if f.v_start == old else f.v_start, v_end=new if f.v_end == old else f.v_end
        )

    edges = []
    for f in p.edges:
        if f.id == e.id:
            f = ArcEdge(e.id, u, v, 0.0, P, Q)
            theta[e.id] = 0.0
        elif f.id == c.id:
            f = reattach(f, v, u)
        elif f.id == a.id:
            f = reattach(f, u, v)
        edges.append(f)
    return _rebuild(p, verts, edges, theta)


def _remove_triangle(p, label, threshold):
    es = [e for e in p.edges if label in (e.left, e.right)]
    vm = p.vertex_map
    inc = p.incident()
    vids = sorted({e.v_start for e in es} | {e.v_end for e in es})
    if len(es) != 3 or len(vids) != 3 or any(len(inc[x]) != 3 for x in vids):
        raise TopologyMoveRejected(f"region {label} is not a three-sided cell")
    longest = max(nw.energy_of_edge(p, e) for e in es)
    if longest >= threshold:
        raise TopologyMoveRejected(f"region {label} has an edge of length {longest:.3g}")
    tri = {e.id for e in es}
    outer = [f for x in vids for f in inc[x] if f.id not in tri]
    pts = np.array([vm[x].position for x in vids])
    centre = pts.mean(axis=0)
    for f in outer:
        ends = [vm[f.v_start], vm[f.v_end]]
        inf = [w for w in ends if w.kind == INFINITY]
        if inf:
            a, d = np.asarray(inf[0].position), np.asarray(inf[0].direction)
            centre = a + ((centre - a) @ d) * d
    keep = vids[0]
    theta = _thetas(p)
    verts = [
        dataclasses.replace(w, position=tuple(centre)) if w.id == keep else w
        for w in p.vertices
        if w.id not in vids[1:]
    ]
    edges = []
    for f in p.edges:
        if f.id in tri:
            continue
        f = dataclasses.replace(
            f,
            v_start=keep if f.v_start in vids else f.v_start,
            v_end=keep if f.v_end in vids else f.v_end,
        )
        edges.append(f)
    regions = tuple(
        dataclasses.replace(r, measure=0.0) if r.label == label else r for r in p.regions
    )
    q = _rebuild(p, verts, edges, theta)
    return dataclasses.replace(q, regions=regions)
