"""
Compiled per-step kernels.

The numpy routines in :mod:`control`, :mod:`targets` and :mod:`embodiment`
define the behaviour; the loops here compute the same quantities one agent at
a time so that long runs do not pay numpy's per-call overhead on arrays of a
handful of rows.  Operation order follows the numpy versions, and the test
suite checks both backends against each other.

Obstacles are packed into padded arrays: ``starts[l, e]`` is the first vertex
of edge ``e`` of obstacle ``l``, ``edges[l, e]`` its direction, and only the
first ``n_vertices[l]`` entries are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import BLOCK_TOL

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class PackedObstacles:
    starts: np.ndarray
    edges: np.ndarray
    edge_len2: np.ndarray
    n_vertices: np.ndarray
    centroids: np.ndarray

    @classmethod
    def pack(cls, polygons) -> "PackedObstacles":
        polygons = list(polygons)
        k = max((len(p.vertices) for p in polygons), default=3)
        starts = np.zeros((len(polygons), k, 2))
        edges = np.zeros((len(polygons), k, 2))
        len2 = np.ones((len(polygons), k))
        nv = np.zeros(len(polygons), dtype=np.int64)
        cent = np.zeros((len(polygons), 2))
        for i, p in enumerate(polygons):
            m = len(p.vertices)
            starts[i, :m] = p.vertices
            edges[i, :m] = p.edges
            len2[i, :m] = p._edge_len2
            nv[i] = m
            cent[i] = p.centroid
        return cls(starts, edges, len2, nv, cent)

    @property
    def arrays(self):
        return self.starts, self.edges, self.edge_len2, self.n_vertices, self.centroids


# -- geometry ------------------------------------------------------------------


@njit(cache=True)
def _query(px, py, starts, edges, len2, nv, l):
    """Nearest boundary point of obstacle ``l``: ``(x, y, dist, strictly_inside)``."""
    best = np.inf
    bx = by = 0.0
    inside = True
    for e in range(nv[l]):
        sx, sy = starts[l, e, 0], starts[l, e, 1]
        ex, ey = edges[l, e, 0], edges[l, e, 1]
        wx = px - sx
        wy = py - sy
        t = (wx * ex + wy * ey) / len2[l, e]
        t = min(max(t, 0.0), 1.0)
        dx = wx - t * ex
        dy = wy - t * ey
        d2 = dx * dx + dy * dy
        if d2 < best:
            best = d2
            bx = sx + t * ex
            by = sy + t * ey
        if not ex * wy - ey * wx > 0.0:
            inside = False
    return bx, by, math.sqrt(best), inside


@njit(cache=True)
def _contains_closed(px, py, starts, edges, nv, l):
    for e in range(nv[l]):
        c = edges[l, e, 0] * (py - starts[l, e, 1]) - edges[l, e, 1] * (px - starts[l, e, 0])
        if not c >= 0.0:
            return False
    return True


@njit(cache=True)
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _segments_intersect(p0x, p0y, p1x, p1y, q0x, q0y, q1x, q1y):
    d1 = _cross(q1x - q0x, q1y - q0y, p0x - q0x, p0y - q0y)
    d2 = _cross(q1x - q0x, q1y - q0y, p1x - q0x, p1y - q0y)
    d3 = _cross(p1x - p0x, p1y - p0y, q0x - p0x, q0y - p0y)
    d4 = _cross(p1x - p0x, p1y - p0y, q1x - p0x, q1y - p0y)
    if d1 == 0.0 and d2 == 0.0:
        ex, ey = p1x - p0x, p1y - p0y
        ee = ex * ex + ey * ey
        if not ee > 0.0:
            ee = 1.0
        t0 = ((q0x - p0x) * ex + (q0y - p0y) * ey) / ee
        t1 = ((q1x - p0x) * ex + (q1y - p0y) * ey) / ee
        return max(t0, t1) >= 0.0 and min(t0, t1) <= 1.0
    return d1 * d2 <= 0.0 and d3 * d4 <= 0.0


@njit(cache=True)
def _point_segment_distance(qx, qy, ax, ay, bx, by):
    ex, ey = bx - ax, by - ay
    ee = ex * ex + ey * ey
    t = ((qx - ax) * ex + (qy - ay) * ey) / ee if ee > 0.0 else 0.0
    t = min(max(t, 0.0), 1.0)
    return math.hypot(qx - (ax + t * ex), qy - (ay + t * ey))


@njit(cache=True)
def _segment_polygon_distance(p0x, p0y, p1x, p1y, starts, edges, len2, nv, l):
    n = nv[l]
    for e in range(n):
        nxt = (e + 1) % n
        if _segments_intersect(
            p0x, p0y, p1x, p1y, starts[l, e, 0], starts[l, e, 1], starts[l, nxt, 0], starts[l, nxt, 1]
        ):
            return 0.0
    if _contains_closed(p0x, p0y, starts, edges, nv, l) or _contains_closed(p1x, p1y, starts, edges, nv, l):
        return 0.0
    d = min(_query(p0x, p0y, starts, edges, len2, nv, l)[2], _query(p1x, p1y, starts, edges, len2, nv, l)[2])
    for e in range(n):
        d = min(d, _point_segment_distance(starts[l, e, 0], starts[l, e, 1], p0x, p0y, p1x, p1y))
    return d


@njit(cache=True)
def _ramp_down(x, start, width):
    if x <= start:
        return 1.0
    if x >= start + width:
        return 0.0
    return (start + width - x) / width


@njit(cache=True)
def _ramp_up(x, lo, hi):
    if x <= lo:
        return 0.0
    if x >= hi:
        return 1.0
    return (x - lo) / (hi - lo)


# -- potentials ----------------------------------------------------------------


@njit(cache=True)
def _force_scale(r, k, r_cut, s_min):
    """Factor turning a separation of length ``r`` into the repulsive force."""
    rc = max(r, s_min)
    mag = k * (1.0 / rc - 1.0 / r_cut) / (rc * rc) if rc <= r_cut else 0.0
    if r > 0.0 and mag > 0.0:
        return mag / r
    return 0.0


@njit(cache=True)
def _pairwise(P, k, r_cut, s_min):
    n = P.shape[0]
    out = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = P[i, 0] - P[j, 0]
            dy = P[i, 1] - P[j, 1]
            sc = _force_scale(math.hypot(dx, dy), k, r_cut, s_min)
            out[i, 0] += dx * sc
            out[i, 1] += dy * sc
    return out


# -- per-step kernels ----------------------------------------------------------


@njit(cache=True)
def resolve_penetration(P, starts, edges, len2, nv, centroids, s_min):
    """Move points out of obstacles; returns ``(P, seps, resolved, singular, min_dist, ok)``."""
    L = nv.shape[0]
    n = P.shape[0]
    P = P.copy()
    proj = np.empty((L, n, 2))
    dist = np.empty((L, n))
    resolved = 0
    for l in range(L):
        for i in range(n):
            bx, by, d, inside = _query(P[i, 0], P[i, 1], starts, edges, len2, nv, l)
            if inside or d == 0.0:
                resolved += 1
                ox, oy = bx - P[i, 0], by - P[i, 1]
                if not math.hypot(ox, oy) > 0.0:
                    ox, oy = P[i, 0] - centroids[l, 0], P[i, 1] - centroids[l, 1]
                on = math.hypot(ox, oy)
                P[i, 0] = bx + s_min * (ox / on)
                P[i, 1] = by + s_min * (oy / on)
            proj[l, i, 0] = bx
            proj[l, i, 1] = by
            dist[l, i] = d
    ok = True
    if resolved:
        for l in range(L):
            for i in range(n):
                bx, by, d, inside = _query(P[i, 0], P[i, 1], starts, edges, len2, nv, l)
                if inside or d == 0.0:
                    ok = False
                proj[l, i, 0] = bx
                proj[l, i, 1] = by
                dist[l, i] = d
    seps = np.empty((L, n, 2))
    singular = 0
    min_dist = np.inf
    for i in range(n):
        nearest = np.inf
        for l in range(L):
            seps[l, i, 0] = P[i, 0] - proj[l, i, 0]
            seps[l, i, 1] = P[i, 1] - proj[l, i, 1]
            nearest = min(nearest, dist[l, i])
        if nearest < s_min:
            singular += 1
        min_dist = min(min_dist, nearest)
    return P, seps, resolved, singular, min_dist, ok


@njit(cache=True)
def select_targets(H, T, rho_g):
    n, m = H.shape[0], T.shape[0]
    sel = np.full(n, -1, dtype=np.int64)
    best = np.full(n, -np.inf)
    for a in range(m):
        radius = math.hypot(T[a, 0], T[a, 1])
        if not radius > rho_g or n == 0:
            continue
        owner = 0
        dmin = np.inf
        for i in range(n):
            d = math.hypot(T[a, 0] - H[i, 0], T[a, 1] - H[i, 1])
            if d < dmin:
                dmin = d
                owner = i
        if radius > best[owner]:
            best[owner] = radius
            sel[owner] = a
    return sel


@njit(cache=True)
def decide(
    H,
    T,
    seps_h,
    seps_t,
    starts,
    edges,
    len2,
    nv,
    centroids,
    k_o,
    lambda_o,
    v_h,
    alpha,
    delta,
    gamma,
    rho_g,
    epsilon_o,
    embodied,
    alpha_o,
    alpha_r,
    r_th,
    epsilon_h,
    beta_orb,
    beta_th,
    k_d,
    d_th,
    s_min,
):
    """Herder decisions; the array outputs match :class:`control.Decisions`."""
    n = H.shape[0]
    L = nv.shape[0]
    target = select_targets(H, T, rho_g)
    mu = np.ones(n, dtype=np.int64)
    psi = np.ones(n, dtype=np.int64)
    C = np.zeros((n, 2))
    nu = np.zeros((n, 2))
    sigma = np.zeros(n)
    zeta = np.zeros(n)
    phi = np.zeros(n)
    raw = np.zeros((n, 2))
    cmd = np.zeros((n, 2))
    saturated = np.zeros(n, dtype=np.bool_)
    G = _pairwise(H, k_d, d_th, s_min) if embodied else np.zeros((n, 2))

    for i in range(n):
        hx, hy = H[i, 0], H[i, 1]
        a = target[i]
        chasing = a >= 0
        tx = ty = 0.0
        sx = sy = 0.0
        dj = np.inf
        if chasing:
            tx, ty = T[a, 0], T[a, 1]
            if L:
                j = 0
                dj = np.inf
                for l in range(L):
                    d = math.hypot(seps_t[l, a, 0], seps_t[l, a, 1])
                    if d < dj:
                        dj = d
                        j = l
                sx, sy = seps_t[j, a, 0], seps_t[j, a, 1]
                if dj <= lambda_o + epsilon_o:
                    gap = _segment_polygon_distance(tx, ty, 0.0, 0.0, starts, edges, len2, nv, j)
                    if gap <= epsilon_o and gap < dj - BLOCK_TOL:
                        mu[i] = 0
                cx, cy = centroids[j, 0], centroids[j, 1]
                sign = -1.0 if _cross(tx - cx, ty - cy, -cx, -cy) > 0.0 else 1.0
                px, py = -sign * sy, sign * sx
                pn = math.hypot(px, py)
                if pn > 0.0:
                    nu[i, 0], nu[i, 1] = px / pn, py / pn
            rn = math.hypot(tx, ty)
            ux, uy = (tx / rn, ty / rn) if rn > 0.0 else (0.0, 0.0)
            m = float(mu[i])
            C[i, 0] = tx + delta * (m * ux + (1.0 - m) * nu[i, 0])
            C[i, 1] = ty + delta * (m * uy + (1.0 - m) * nu[i, 1])

        # return to goal
        fx = fy = 0.0
        hr = math.hypot(hx, hy)
        if hr > rho_g:
            fx, fy = -v_h * (hx / hr), -v_h * (hy / hr)
        steer_x = steer_y = 0.0
        if chasing:
            steer_x, steer_y = -alpha * (hx - C[i, 0]), -alpha * (hy - C[i, 1])

        # hybrid obstacle force
        ox = oy = 0.0
        for l in range(L):
            sc = _force_scale(math.hypot(seps_h[l, i, 0], seps_h[l, i, 1]), k_o, lambda_o, s_min)
            gx, gy = seps_h[l, i, 0] * sc, seps_h[l, i, 1] * sc
            cx, cy = centroids[l, 0], centroids[l, 1]
            sign = 1.0 if _cross(hx - cx, hy - cy, C[i, 0] - cx, C[i, 1] - cy) > 0.0 else -1.0
            ox = ox + gamma * gx + (1.0 - gamma) * (-sign * gy)
            oy = oy + gamma * gy + (1.0 - gamma) * (sign * gx)

        eta = 1.0 if chasing else 0.0
        dx = dy = dcx = dcy = cr = 0.0
        if chasing:
            dx, dy = hx - tx, hy - ty
            dcx, dcy = C[i, 0] - tx, C[i, 1] - ty
            cr = _cross(dx, dy, dcx, dcy)
            phi[i] = HALF_PI if cr > 0.0 else -HALF_PI
        if embodied:
            orb_x = orb_y = 0.0
            if chasing:
                beta = abs(math.atan2(cr, dx * dcx + dy * dcy))
                if L and dj <= lambda_o + epsilon_o:
                    side = abs(math.atan2(_cross(-sx, -sy, dx, dy), -sx * dx - sy * dy)) < HALF_PI
                    if beta > HALF_PI and side:
                        psi[i] = -1
                r = math.hypot(dx, dy)
                sigma[i] = _ramp_down(r, r_th, epsilon_h)
                zeta[i] = _ramp_up(beta, beta_orb, beta_th)
                if r > 0.0:
                    dhx, dhy = dx / r, dy / r
                    spin = np.sign(float(psi[i]) * phi[i])
                    radial = alpha_r * (1.0 - r / r_th)
                    orb_x = alpha_o * (-spin * dhy) + radial * dhx
                    orb_y = alpha_o * (spin * dhx) + radial * dhy
            w_steer = (1.0 - sigma[i]) * eta
            w_orb = sigma[i] * zeta[i]
            raw[i, 0] = (1.0 - eta) * fx + w_steer * steer_x + ox + G[i, 0] + w_orb * orb_x
            raw[i, 1] = (1.0 - eta) * fy + w_steer * steer_y + oy + G[i, 1] + w_orb * orb_y
        else:
            raw[i, 0] = (1.0 - eta) * fx + eta * steer_x + ox
            raw[i, 1] = (1.0 - eta) * fy + eta * steer_y + oy

        r = math.hypot(raw[i, 0], raw[i, 1])
        scale = 1.0
        if r > v_h:
            saturated[i] = True
            scale = v_h / r
        cmd[i, 0] = raw[i, 0] * scale
        cmd[i, 1] = raw[i, 1] * scale
    return target, mu, C, nu, sigma, zeta, psi, phi, raw, cmd, saturated


@njit(cache=True)
def target_drift(T, H, seps_t, k_o, lambda_o, lam, beta, embodied, k_d, d_th, cap, s_min):
    """Noise-free target velocities and the number of capped obstacle forces.

    ``cap <= 0`` disables the obstacle step cap.
    """
    m, n, L = T.shape[0], H.shape[0], seps_t.shape[0]
    v = np.zeros((m, 2))
    capped = 0
    for a in range(m):
        rx = ry = 0.0
        for i in range(n):
            dx, dy = T[a, 0] - H[i, 0], T[a, 1] - H[i, 1]
            r = math.hypot(dx, dy)
            if r < lam and r > 0.0:
                w = beta * (lam - r) / r
                rx += dx * w
                ry += dy * w
        ox = oy = 0.0
        for l in range(L):
            sc = _force_scale(math.hypot(seps_t[l, a, 0], seps_t[l, a, 1]), k_o, lambda_o, s_min)
            ox += seps_t[l, a, 0] * sc
            oy += seps_t[l, a, 1] * sc
        if cap > 0.0:
            r = math.hypot(ox, oy)
            if r > cap:
                capped += 1
                ox *= cap / r
                oy *= cap / r
        v[a, 0] = rx + ox
        v[a, 1] = ry + oy
    if embodied:
        v += _pairwise(T, k_d, d_th, s_min)
    return v, capped


@njit(cache=True)
def drive(P, heading, cos_h, sin_h, u, d, l, v_max, eps, dt):
    """Unicycle step for every robot; returns ``(P, heading, max_wheel_speed)``.

    The heading cosines and sines come from the caller: numba's own cos/sin
    can differ from the platform libm in the last bit.
    """
    n = P.shape[0]
    P = P.copy()
    out = np.empty(n)
    top = 0.0
    for i in range(n):
        c, s = cos_h[i], sin_h[i]
        v = c * u[i, 0] + s * u[i, 1]
        w = (-s * u[i, 0] + c * u[i, 1]) / d
        right, left = v + 0.5 * l * w, v - 0.5 * l * w
        k = min(1.0, min(v_max / (abs(right) + eps), v_max / (abs(left) + eps)))
        v, w = k * v, k * w
        top = max(top, abs(v + 0.5 * l * w), abs(v - 0.5 * l * w))
        P[i, 0] = P[i, 0] + v * c * dt
        P[i, 1] = P[i, 1] + v * s * dt
        out[i] = math.pi - (math.pi - (heading[i] + w * dt)) % (2.0 * math.pi)
    return P, out, top
