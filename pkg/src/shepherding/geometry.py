"""
Planar geometry used by every force computation.

Points and vectors are plain ``float64`` arrays whose last axis has length 2.
All functions broadcast over leading axes, so the same routine serves a single
query point of shape ``(2,)`` and a whole population of shape ``(n, 2)``.

Convex polygons are stored counter-clockwise.  Projection onto the boundary is
a total function: interior points are mapped to their nearest boundary point,
and equidistant edges are resolved in favour of the smallest edge index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirection, InsideObstacle

Vec2 = np.ndarray

# distances closer than this are treated as equal when comparing clearances
BLOCK_TOL = 1e-9


def vec2(x: float, y: float) -> Vec2:
    v = np.array([x, y], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector component: ({x}, {y})")
    return v


def cross_z(a, b):
    """z-component of the 3D cross product of two planar vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def dot(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def norm(v):
    v = np.asarray(v, dtype=float)
    return np.hypot(v[..., 0], v[..., 1])


def unit(v):
    """Normalize ``v``; zero vectors raise :class:`DegenerateDirection`."""
    v = np.asarray(v, dtype=float)
    n = norm(v)
    if np.any(n == 0.0):
        raise DegenerateDirection("cannot normalize a zero-length vector")
    return v / n[..., None]


def safe_unit(v):
    """Normalize ``v``, mapping zero vectors to zero."""
    v = np.asarray(v, dtype=float)
    n = norm(v)
    out = np.zeros_like(v)
    nz = n > 0.0
    out[nz] = v[nz] / n[nz][..., None]
    return out


def rotate(v, angle):
    v = np.asarray(v, dtype=float)
    c = np.cos(angle)
    s = np.sin(angle)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)


def perp(v, sign=1.0):
    """Exact rotation by ``sign * pi/2`` (sign is +1 or -1, may be an array)."""
    v = np.asarray(v, dtype=float)
    sign = np.asarray(sign, dtype=float)
    return np.stack([-sign * v[..., 1], sign * v[..., 0]], axis=-1)


# numpy's vectorised arctan2 may differ from the C library in the last bit;
# the C library version is used so that compiled kernels agree exactly
_atan2 = np.frompyfunc(math.atan2, 2, 1)


def signed_angle(a, b):
    """Angle from ``a`` to ``b`` in (-pi, pi]."""
    return np.asarray(_atan2(cross_z(a, b), dot(a, b)), dtype=float)


def wrap_angle(theta):
    """Wrap to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class Rotation:
    angle: float

    def apply(self, v):
        return rotate(v, self.angle)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.angle + other.angle)

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon with counter-clockwise vertices."""

    vertices: np.ndarray
    _starts: np.ndarray = field(init=False, repr=False)
    _edges: np.ndarray = field(init=False, repr=False)
    _edge_len2: np.ndarray = field(init=False, repr=False)
    _centroid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ValueError("a polygon needs at least 3 planar vertices")
        if not np.all(np.isfinite(verts)):
            raise ValueError("polygon vertices must be finite")
        edges = np.roll(verts, -1, axis=0) - verts
        turns = cross_z(edges, np.roll(edges, -1, axis=0))
        if not np.all(turns > 0.0):
            raise ValueError("vertices must form a strictly convex counter-clockwise polygon")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "_starts", verts)
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_edge_len2", dot(edges, edges))
        object.__setattr__(self, "_centroid", _area_centroid(verts))

    @classmethod
    def rectangle(cls, center, width: float, height: float, angle: float = 0.0) -> "ConvexPolygon":
        """Rectangle whose ``width`` side lies along ``angle``.

        Edge 0 is the side facing the rotated +x direction.
        """
        hw, hh = 0.5 * width, 0.5 * height
        local = np.array([[hw, -hh], [hw, hh], [-hw, hh], [-hw, -hh]])
        return cls(np.asarray(center, dtype=float) + rotate(local, angle))

    @property
    def centroid(self) -> np.ndarray:
        return self._centroid

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(cross_z(v, np.roll(v, -1, axis=0))))

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    def query(self, q):
        """Nearest boundary point, distance to it, and strict-interior flag.

        One pass over the edges; the other boundary queries are built on it.
        """
        q = np.asarray(q, dtype=float)
        shape = q.shape[:-1]
        flat = q.reshape(-1, 2)
        qx = flat[:, 0:1]
        qy = flat[:, 1:2]
        sx, sy = self._starts[:, 0], self._starts[:, 1]
        ex, ey = self._edges[:, 0], self._edges[:, 1]
        wx = qx - sx
        wy = qy - sy
        t = (wx * ex + wy * ey) / self._edge_len2
        np.clip(t, 0.0, 1.0, out=t)
        dx = wx - t * ex
        dy = wy - t * ey
        d2 = dx * dx + dy * dy
        k = np.argmin(d2, axis=1)
        rows = np.arange(len(flat))
        point = np.empty_like(flat)
        point[:, 0] = sx[k] + t[rows, k] * ex[k]
        point[:, 1] = sy[k] + t[rows, k] * ey[k]
        inside = np.all(ex * wy - ey * wx > 0.0, axis=1)
        return point.reshape(q.shape), np.sqrt(d2[rows, k]).reshape(shape), inside.reshape(shape)

    def contains(self, q, strict: bool = True):
        """Point membership; ``strict`` excludes the boundary."""
        q = np.asarray(q, dtype=float)
        c = cross_z(self._edges, q[..., None, :] - self._starts)
        return np.all(c > 0.0, axis=-1) if strict else np.all(c >= 0.0, axis=-1)

    def closest_boundary_point(self, q):
        """Return ``(point, distance)`` of the nearest boundary point."""
        point, dist, _ = self.query(q)
        return point, dist


def _area_centroid(verts: np.ndarray) -> np.ndarray:
    nxt = np.roll(verts, -1, axis=0)
    c = cross_z(verts, nxt)
    area = 0.5 * np.sum(c)
    cx = np.sum((verts[:, 0] + nxt[:, 0]) * c) / (6.0 * area)
    cy = np.sum((verts[:, 1] + nxt[:, 1]) * c) / (6.0 * area)
    return np.array([cx, cy])


def project_onto_boundary(q, poly: ConvexPolygon):
    return poly.closest_boundary_point(q)[0]


def boundary_distance(q, poly: ConvexPolygon):
    return poly.closest_boundary_point(q)[1]


def separation_vector(q, poly: ConvexPolygon):
    """Vector from the boundary projection of ``q`` to ``q``.

    Raises :class:`InsideObstacle` when any query point is strictly inside.
    """
    q = np.asarray(q, dtype=float)
    point, _, inside = poly.query(q)
    if np.any(inside):
        raise InsideObstacle("query point strictly inside obstacle")
    return q - point


def point_segment_distance(q, a, b):
    q, a, b = (np.asarray(x, dtype=float) for x in (q, a, b))
    e = b - a
    ee = dot(e, e)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(ee > 0.0, dot(q - a, e) / np.where(ee > 0.0, ee, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return norm(q - (a + t[..., None] * e))


def segments_intersect(p0, p1, q0, q1):
    """Closed-segment intersection test (touching counts)."""
    p0, p1, q0, q1 = (np.asarray(x, dtype=float) for x in (p0, p1, q0, q1))
    d1 = cross_z(q1 - q0, p0 - q0)
    d2 = cross_z(q1 - q0, p1 - q0)
    d3 = cross_z(p1 - p0, q0 - p0)
    d4 = cross_z(p1 - p0, q1 - p0)
    proper = (d1 * d2 <= 0.0) & (d3 * d4 <= 0.0)
    # collinear segments need an overlap check on the projections
    collinear = (d1 == 0.0) & (d2 == 0.0)
    if np.any(collinear):
        e = p1 - p0
        ee = np.where(dot(e, e) > 0.0, dot(e, e), 1.0)
        t0 = dot(q0 - p0, e) / ee
        t1 = dot(q1 - p0, e) / ee
        overlap = (np.maximum(t0, t1) >= 0.0) & (np.minimum(t0, t1) <= 1.0)
        proper = np.where(collinear, overlap, proper)
    return proper


def segment_polygon_distance(p0, p1, poly: ConvexPolygon):
    """Distance between segment ``[p0, p1]`` and the filled polygon."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.broadcast_to(np.asarray(p1, dtype=float), p0.shape)
    a = poly.vertices
    b = np.roll(a, -1, axis=0)
    hits = segments_intersect(p0[..., None, :], p1[..., None, :], a, b).any(axis=-1)
    inside = poly.contains(p0, strict=False) | poly.contains(p1, strict=False)
    d = np.minimum(boundary_distance(p0, poly), boundary_distance(p1, poly))
    dv = point_segment_distance(a, p0[..., None, :], p1[..., None, :]).min(axis=-1)
    d = np.minimum(d, dv)
    return np.where(hits | inside, 0.0, d)


def set_distance(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Distance between the boundaries of two polygons."""
    a0, a1 = a.vertices, np.roll(a.vertices, -1, axis=0)
    b0, b1 = b.vertices, np.roll(b.vertices, -1, axis=0)
    cross = segments_intersect(a0[:, None, :], a1[:, None, :], b0[None, :, :], b1[None, :, :])
    if np.any(cross):
        return 0.0
    da = boundary_distance(a.vertices, b).min()
    db = boundary_distance(b.vertices, a).min()
    return float(min(da, db))
