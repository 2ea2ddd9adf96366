"""Hot numeric kernels with two interchangeable backends.

Three inner loops dominate the engine's runtime: capsule rasterization,
popcount-based mask intersection over candidate frame pairs, and the
step-synchronous relaxation inside the beam search. Each exists twice:

* a numba ``@njit`` kernel (default when numba imports cleanly), and
* a pure-numpy fallback with identical arithmetic.

Set ``MOTIONGRAPH_DISABLE_NUMBA=1`` to force the numpy path (useful for
debugging and for the bench/ comparison). Both backends are exact integer /
same-order float arithmetic, so results are bit-identical; the test suite
asserts this whenever numba is importable.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("MOTIONGRAPH_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if not _DISABLE:
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised only without numba
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

#: Name of the backend actually in use ("numba" or "numpy").
BACKEND = "numba" if HAVE_NUMBA else "numpy"

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


# ---------------------------------------------------------------------------
# capsule rasterization
#
# A pixel is set iff its center lies within the projected bone segment's
# perspective-scaled radius: with screen endpoints p0, p1, inverse depths
# iz0, iz1 and world radius r, the nearest segment point at parameter t has
# projected radius f*r*((1-t)*iz0 + t*iz1). Inverse depth interpolates
# linearly along the *projected* segment.
# ---------------------------------------------------------------------------


def _raster_numpy(p0, p1, iz0, iz1, radius, focal, width, height, out):
    for b in range(p0.shape[0]):
        ax, ay = p0[b]
        bx, by = p1[b]
        rmax = focal * radius[b] * max(iz0[b], iz1[b])
        x_lo = max(int(np.floor(min(ax, bx) - rmax - 1.0)), 0)
        x_hi = min(int(np.ceil(max(ax, bx) + rmax + 1.0)), width - 1)
        y_lo = max(int(np.floor(min(ay, by) - rmax - 1.0)), 0)
        y_hi = min(int(np.ceil(max(ay, by) + rmax + 1.0)), height - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        xs = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
        ys = np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5
        px, py = np.meshgrid(xs, ys)
        dx = bx - ax
        dy = by - ay
        denom = dx * dx + dy * dy
        if denom > 0.0:
            t = ((px - ax) * dx + (py - ay) * dy) / denom
            t = np.clip(t, 0.0, 1.0)
        else:
            t = np.zeros_like(px)
        sx = ax + t * dx
        sy = ay + t * dy
        iz = (1.0 - t) * iz0[b] + t * iz1[b]
        rho = focal * radius[b] * iz
        d2 = (px - sx) ** 2 + (py - sy) ** 2
        inside = d2 <= rho * rho
        out[y_lo : y_hi + 1, x_lo : x_hi + 1] |= inside


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _raster_numba(p0, p1, iz0, iz1, radius, focal, width, height, out):
        for b in range(p0.shape[0]):
            ax = p0[b, 0]
            ay = p0[b, 1]
            bx = p1[b, 0]
            by = p1[b, 1]
            rmax = focal * radius[b] * max(iz0[b], iz1[b])
            x_lo = max(int(np.floor(min(ax, bx) - rmax - 1.0)), 0)
            x_hi = min(int(np.ceil(max(ax, bx) + rmax + 1.0)), width - 1)
            y_lo = max(int(np.floor(min(ay, by) - rmax - 1.0)), 0)
            y_hi = min(int(np.ceil(max(ay, by) + rmax + 1.0)), height - 1)
            if x_lo > x_hi or y_lo > y_hi:
                continue
            dx = bx - ax
            dy = by - ay
            denom = dx * dx + dy * dy
            for yi in range(y_lo, y_hi + 1):
                py = yi + 0.5
                for xi in range(x_lo, x_hi + 1):
                    px = xi + 0.5
                    if denom > 0.0:
                        t = ((px - ax) * dx + (py - ay) * dy) / denom
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                    else:
                        t = 0.0
                    sx = ax + t * dx
                    sy = ay + t * dy
                    iz = (1.0 - t) * iz0[b] + t * iz1[b]
                    rho = focal * radius[b] * iz
                    d2 = (px - sx) ** 2 + (py - sy) ** 2
                    if d2 <= rho * rho:
                        out[yi, xi] = True


def rasterize_capsules(p0, p1, iz0, iz1, radius, focal, width, height):
    """Rasterize projected bone capsules into a fresh (height, width) bool mask.

    ``p0``/``p1`` are (B, 2) screen-space segment endpoints in pixels,
    ``iz0``/``iz1`` the matching inverse camera depths, ``radius`` the
    per-bone world radii in meters.
    """
    out = np.zeros((height, width), dtype=bool)
    if p0.shape[0] == 0:
        return out
    args = (
        np.ascontiguousarray(p0, dtype=np.float64),
        np.ascontiguousarray(p1, dtype=np.float64),
        np.ascontiguousarray(iz0, dtype=np.float64),
        np.ascontiguousarray(iz1, dtype=np.float64),
        np.ascontiguousarray(radius, dtype=np.float64),
        float(focal),
        int(width),
        int(height),
        out,
    )
    if HAVE_NUMBA:
        _raster_numba(*args)
    else:
        _raster_numpy(*args)
    return out


# ---------------------------------------------------------------------------
# pairwise mask intersections (packed popcount)
# ---------------------------------------------------------------------------


def pack_masks(masks):
    """Bit-pack (N, H, W) boolean masks into (N, W64) uint64 rows."""
    arr = np.asarray(masks, dtype=bool)
    flat = arr.reshape(arr.shape[0], -1)
    packed8 = np.packbits(flat, axis=1)
    pad = (-packed8.shape[1]) % 8
    if pad:
        packed8 = np.pad(packed8, ((0, 0), (0, pad)))
    return packed8.view(np.uint64)


def _pair_intersections_numpy(packed, pairs):
    packed8 = packed.view(np.uint8)
    out = np.empty(pairs.shape[0], dtype=np.int64)
    chunk = max(1, (1 << 24) // max(packed8.shape[1], 1))
    hw_popcount = getattr(np, "bitwise_count", None)
    for lo in range(0, pairs.shape[0], chunk):
        sel = pairs[lo : lo + chunk]
        both = packed8[sel[:, 0]] & packed8[sel[:, 1]]
        if hw_popcount is not None:
            out[lo : lo + chunk] = hw_popcount(both).sum(axis=1, dtype=np.int64)
        else:
            out[lo : lo + chunk] = _POPCOUNT8[both].sum(axis=1)
    return out


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _popcount64(x):
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + (
            (x >> np.uint64(2)) & np.uint64(0x3333333333333333)
        )
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)

    @numba.njit(cache=True, parallel=True)
    def _pair_intersections_numba(packed, pairs, out):
        for k in numba.prange(pairs.shape[0]):
            m = pairs[k, 0]
            n = pairs[k, 1]
            acc = np.uint64(0)
            for w in range(packed.shape[1]):
                acc += _popcount64(packed[m, w] & packed[n, w])
            out[k] = np.int64(acc)


def pair_intersections(packed, pairs):
    """Count intersecting set bits for each (m, n) row pair of ``packed``."""
    pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if HAVE_NUMBA:
        out = np.empty(pairs.shape[0], dtype=np.int64)
        _pair_intersections_numba(np.ascontiguousarray(packed), pairs, out)
        return out
    return _pair_intersections_numpy(packed, pairs)


# ---------------------------------------------------------------------------
# step-synchronous shortest-path relaxation
#
# dist[l, v] = min cost of an l-edge walk from the start node to v whose
# intermediate nodes are all flagged allowed (the start itself is exempt).
# Ties resolve to the smallest predecessor index, making the table
# independent of edge order and identical across backends.
# ---------------------------------------------------------------------------


def _dp_numpy(src, dst, cost, n_nodes, start, allowed, n_steps):
    inf = np.inf
    # Group edges by destination once (within a group, ascending source, so
    # the first minimal candidate has the smallest predecessor index).
    order = np.lexsort((src, dst))
    src_o = src[order]
    cost_o = cost[order]
    group_dst, group_start = np.unique(dst[order], return_index=True)
    group_sizes = np.diff(np.append(group_start, src_o.size))
    edge_pos = np.arange(src_o.size)

    dist = np.full((n_steps + 1, n_nodes), inf)
    parent = np.full((n_steps + 1, n_nodes), -1, dtype=np.int64)
    dist[0, start] = 0.0
    for step in range(1, n_steps + 1):
        prev = dist[step - 1].copy()
        if step > 1:
            prev[~allowed] = inf
        cand = prev[src_o] + cost_o
        mins = np.minimum.reduceat(cand, group_start)
        finite = np.isfinite(mins)
        if not finite.any():
            break
        hit = cand == np.repeat(mins, group_sizes)
        first = np.minimum.reduceat(np.where(hit, edge_pos, src_o.size), group_start)
        sel = group_dst[finite]
        dist[step, sel] = mins[finite]
        parent[step, sel] = src_o[first[finite]]
    return dist, parent


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _dp_numba(src, dst, cost, n_nodes, start, allowed, n_steps):
        inf = np.inf
        dist = np.full((n_steps + 1, n_nodes), inf)
        parent = np.full((n_steps + 1, n_nodes), -1, dtype=np.int64)
        dist[0, start] = 0.0
        for step in range(1, n_steps + 1):
            any_finite = False
            for e in range(src.shape[0]):
                s = src[e]
                base = dist[step - 1, s]
                if not np.isfinite(base):
                    continue
                if step > 1 and not allowed[s]:
                    continue
                c = base + cost[e]
                d = dst[e]
                if c < dist[step, d] or (c == dist[step, d] and s < parent[step, d]):
                    dist[step, d] = c
                    parent[step, d] = s
                    any_finite = True
                else:
                    any_finite = True
            if not any_finite:
                break
        return dist, parent


def walk_distances(src, dst, cost, n_nodes, start, allowed, n_steps):
    """Exact-length walk costs from ``start`` with restricted interior nodes.

    Returns ``(dist, parent)`` of shape (n_steps+1, n_nodes): minimal cost
    over walks of exactly ``l`` edges and the predecessor realizing it.
    """
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    allowed = np.ascontiguousarray(allowed, dtype=bool)
    if HAVE_NUMBA:
        return _dp_numba(src, dst, cost, int(n_nodes), int(start), allowed, int(n_steps))
    return _dp_numpy(src, dst, cost, int(n_nodes), int(start), allowed, int(n_steps))
