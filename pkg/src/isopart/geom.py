"""Exact planar primitives for straight segments and circular arcs.

An arc is given by its endpoints, a signed curvature ``kappa`` and a
``major`` flag.  The arc is traversed from ``start`` to ``end``; positive
``kappa`` bulges to the LEFT of the chord (the traversal turns clockwise).
``kappa == 0`` is a straight segment.

Internally most formulas are written in terms of the chord length ``L`` and
the signed half-aperture ``theta`` (angle between the chord and the start
tangent, positive towards the left).  ``kappa = 2 sin(theta) / L`` and the
pair ``(L, theta)`` is unambiguous for major arcs as well.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

# below this |theta| the closed forms cancel badly; use Taylor series instead
SERIES_THETA = 1e-3
FEASIBILITY_SLACK = 1e-12


class DegenerateArcError(ValueError):
    pass


class DegenerateArcWarning(UserWarning):
    pass


class InfeasibleArcError(ValueError):
    """|kappa| * chord / 2 > 1: no circular arc of that curvature fits the chord."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


def _xy(p) -> tuple[float, float]:
    return float(p[0]), float(p[1])


# ---------------------------------------------------------------------------
# scalar kernels in (L, theta)


def length_factor(theta: float) -> float:
    """theta / sin(theta): arc length divided by chord length."""
    if abs(theta) < SERIES_THETA:
        t2 = theta * theta
        return 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0 + 31.0 * t2**3 / 15120.0
    return theta / math.sin(theta)


def length_factor_prime(theta: float) -> float:
    if abs(theta) < SERIES_THETA:
        t2 = theta * theta
        return theta * (1.0 / 3.0 + 7.0 * t2 / 90.0 + 31.0 * t2 * t2 / 2520.0)
    s = math.sin(theta)
    return (s - theta * math.cos(theta)) / (s * s)


def segment_factor(theta: float) -> float:
    """Signed area between chord and arc divided by chord length squared."""
    if abs(theta) < SERIES_THETA:
        t2 = theta * theta
        return theta * (1.0 / 6.0 + t2 / 45.0 + t2 * t2 / 315.0 + 2.0 * t2**3 / 4725.0)
    s = math.sin(theta)
    return (theta - s * math.cos(theta)) / (4.0 * s * s)


def segment_factor_prime(theta: float) -> float:
    if abs(theta) < SERIES_THETA:
        t2 = theta * theta
        return 1.0 / 6.0 + t2 / 15.0 + t2 * t2 / 63.0 + 2.0 * t2**3 / 675.0
    s = math.sin(theta)
    return (s - theta * math.cos(theta)) / (2.0 * s**3)


def half_aperture(chord: float, kappa: float, major: bool = False) -> float:
    """Signed half-aperture of the arc with the given chord and curvature."""
    if kappa == 0.0:
        if major:
            raise InfeasibleArcError("a straight segment cannot be a major arc")
        return 0.0
    u = kappa * chord / 2.0
    if abs(u) > 1.0 + FEASIBILITY_SLACK:
        raise InfeasibleArcError(
            f"|kappa|*chord/2 = {abs(u):.6g} > 1 (kappa={kappa}, chord={chord})"
        )
    u = max(-1.0, min(1.0, u))
    theta = math.asin(u)
    if major:
        theta = math.copysign(math.pi, u) - theta
    return theta


def kappa_from_theta(chord: float, theta: float) -> float:
    if chord == 0.0:
        return 0.0
    return 2.0 * math.sin(theta) / chord


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircularArc:
    start: tuple[float, float]
    end: tuple[float, float]
    kappa: float = 0.0
    major: bool = False

    def __post_init__(self):
        object.__setattr__(self, "start", _xy(self.start))
        object.__setattr__(self, "end", _xy(self.end))
        object.__setattr__(self, "kappa", float(self.kappa))
        # validates feasibility eagerly
        half_aperture(self.chord, self.kappa, self.major)

    @classmethod
    def from_theta(cls, start, end, theta: float) -> "CircularArc":
        s, e = _xy(start), _xy(end)
        chord = math.hypot(e[0] - s[0], e[1] - s[1])
        return cls(s, e, kappa_from_theta(chord, theta), abs(theta) > math.pi / 2)

    @property
    def chord(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def chord_angle(self) -> float:
        return math.atan2(self.end[1] - self.start[1], self.end[0] - self.start[0])

    @property
    def theta(self) -> float:
        return half_aperture(self.chord, self.kappa, self.major)

    @property
    def sweep(self) -> float:
        """Signed total turning of the tangent (counter-clockwise positive)."""
        return -2.0 * self.theta

    @property
    def is_straight(self) -> bool:
        return self.kappa == 0.0

    @property
    def radius(self) -> float:
        return math.inf if self.kappa == 0.0 else 1.0 / abs(self.kappa)

    @property
    def center(self) -> tuple[float, float] | None:
        if self.kappa == 0.0:
            return None
        phi0 = self.chord_angle + self.theta
        # turning rate is -kappa; the centre sits on the turning side
        return (
            self.start[0] + math.sin(phi0) / self.kappa,
            self.start[1] - math.cos(phi0) / self.kappa,
        )

    def reversed(self) -> "CircularArc":
        return CircularArc(self.end, self.start, -self.kappa, self.major)

    def point_at(self, t) -> np.ndarray:
        """Point at fraction ``t`` of the arc length (array-friendly)."""
        t = np.asarray(t, dtype=float)
        s = t * arc_length(self)
        phi0 = self.chord_angle + self.theta
        half = -self.kappa * s / 2.0
        sinc = np.sinc(half / np.pi)
        ang = phi0 + half
        x = self.start[0] + s * sinc * np.cos(ang)
        y = self.start[1] + s * sinc * np.sin(ang)
        return np.stack([x, y], axis=-1)

    def tangent_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = t * arc_length(self)
        ang = self.chord_angle + self.theta - self.kappa * s
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def sub_arc(self, t0: float, t1: float) -> "CircularArc":
        p0, p1 = self.point_at([t0, t1])
        sweep = abs(self.sweep) * (t1 - t0)
        return CircularArc(tuple(p0), tuple(p1), self.kappa, sweep > math.pi)

    def circle_params(self, center, radius: float) -> list[float]:
        """Arc fractions in [0, 1] where the arc meets the given circle."""
        cx, cy = _xy(center)
        out: list[float] = []
        if self.kappa == 0.0:
            (x0, y0), (x1, y1) = self.start, self.end
            dx, dy = x1 - x0, y1 - y0
            fx, fy = x0 - cx, y0 - cy
            a = dx * dx + dy * dy
            if a == 0.0:
                return out
            b = 2.0 * (fx * dx + fy * dy)
            c = fx * fx + fy * fy - radius * radius
            disc = b * b - 4 * a * c
            if disc <= 0.0:
                return out
            sq = math.sqrt(disc)
            for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
                if 0.0 <= t <= 1.0:
                    out.append(t)
            return out
        ox, oy = self.center
        rho = self.radius
        d = math.hypot(ox - cx, oy - cy)
        if d == 0.0 or d > rho + radius or d < abs(rho - radius):
            return out
        a = (rho * rho - radius * radius + d * d) / (2 * d)
        hh = max(rho * rho - a * a, 0.0)
        h = math.sqrt(hh)
        ux, uy = (cx - ox) / d, (cy - oy) / d
        mx, my = ox + a * ux, oy + a * uy
        pts = [(mx - h * uy, my + h * ux), (mx + h * uy, my - h * ux)]
        if h == 0.0:
            pts = pts[:1]
        for q in pts:
            t = self.param_of(q)
            if t is not None:
                out.append(t)
        return sorted(out)

    def param_of(self, q) -> float | None:
        """Arc fraction of a point known to lie on the supporting circle."""
        ox, oy = self.center
        a0 = math.atan2(self.start[1] - oy, self.start[0] - ox)
        aq = math.atan2(q[1] - oy, q[0] - ox)
        sweep = self.sweep
        delta = (aq - a0) % (2 * math.pi) if sweep > 0 else (a0 - aq) % (2 * math.pi)
        t = delta / abs(sweep)
        if t <= 1.0 + 1e-12:
            return min(t, 1.0)
        # point just before the start
        if (2 * math.pi - delta) / abs(sweep) < 1e-12:
            return 0.0
        return None


def arc_length(arc: CircularArc) -> float:
    """Arc length; the chord for straight segments."""
    chord = arc.chord
    if chord == 0.0 and arc.kappa == 0.0:
        warnings.warn("zero-length degenerate arc", DegenerateArcWarning, stacklevel=2)
        return 0.0
    return chord * length_factor(arc.theta)


def arc_area_moment(arc: CircularArc) -> float:
    """Contribution 1/2 * integral(x dy - y dx) along the arc.

    Summed over a closed counter-clockwise boundary this gives the enclosed
    area.
    """
    (x0, y0), (x1, y1) = arc.start, arc.end
    chord = arc.chord
    tri = 0.5 * (x0 * y1 - y0 * x1)
    if arc.kappa == 0.0:
        return tri
    return tri - chord * chord * segment_factor(arc.theta)


def arc_first_moments(arc: CircularArc) -> tuple[float, float]:
    """Line integrals (1/2 x^2 dy, -1/2 y^2 dx) along the arc.

    Summed over a closed counter-clockwise boundary these are the first
    moments (integral of x dA, integral of y dA) of the enclosed region.
    """
    (x0, y0), (x1, y1) = arc.start, arc.end
    if arc.kappa == 0.0:
        dx, dy = x1 - x0, y1 - y0
        mx = 0.5 * dy * (x0 * x0 + x0 * x1 + x1 * x1) / 3.0
        my = -0.5 * dx * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
        return mx, my
    ox, oy = arc.center
    rho = arc.radius
    a0 = math.atan2(y0 - oy, x0 - ox)
    a1 = a0 + arc.sweep
    # x = ox + rho cos a, y = oy + rho sin a
    def ix(a):  # integral of (ox + rho cos a)^2 * rho cos a da
        return (
            ox * ox * rho * math.sin(a)
            + ox * rho * rho * (a + math.sin(a) * math.cos(a))
            + rho**3 * (math.sin(a) - math.sin(a) ** 3 / 3.0)
        )

    def iy(a):  # integral of (oy + rho sin a)^2 * (-rho sin a) da
        return (
            oy * oy * rho * math.cos(a)
            - oy * rho * rho * (a - math.sin(a) * math.cos(a))
            + rho**3 * (math.cos(a) - math.cos(a) ** 3 / 3.0)
        )

    return 0.5 * (ix(a1) - ix(a0)), -0.5 * (iy(a1) - iy(a0))


def endpoint_tangents(arc: CircularArc) -> tuple[np.ndarray, np.ndarray]:
    """Unit tangents of the start->end traversal at both endpoints."""
    if arc.chord == 0.0:
        raise DegenerateArcError("tangent of a degenerate arc is undefined")
    alpha = arc.chord_angle
    theta = arc.theta
    return (
        np.array([math.cos(alpha + theta), math.sin(alpha + theta)]),
        np.array([math.cos(alpha - theta), math.sin(alpha - theta)]),
    )


def sample_arc(arc: CircularArc, n: int) -> np.ndarray:
    return arc.point_at(np.linspace(0.0, 1.0, n))


# ---------------------------------------------------------------------------
# gradients used by the minimizer; variables are (start, end, theta)


def length_and_grad(p0, p1, theta: float):
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    chord = math.hypot(dx, dy)
    g = length_factor(theta)
    ell = chord * g
    ux, uy = (dx / chord, dy / chord) if chord > 0 else (0.0, 0.0)
    d_p1 = np.array([g * ux, g * uy])
    return ell, -d_p1, d_p1, chord * length_factor_prime(theta)


def moment_and_grad(p0, p1, theta: float):
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    c2 = dx * dx + dy * dy
    q = segment_factor(theta)
    m = 0.5 * (x0 * y1 - y0 * x1) - c2 * q
    d_p0 = np.array([0.5 * y1 + 2.0 * dx * q, -0.5 * x1 + 2.0 * dy * q])
    d_p1 = np.array([-0.5 * y0 - 2.0 * dx * q, 0.5 * x0 - 2.0 * dy * q])
    return m, d_p0, d_p1, -c2 * segment_factor_prime(theta)
