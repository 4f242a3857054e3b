"""Hot numeric kernels: exact grid traversal, visibility fields, gain maps.

Every kernel is defined as a plain ``*_py`` function and compiled with numba
under its public name (``traverse``, ``los_clearance``, ...).  With
``KCOVER_BACKEND=numpy`` the public names are the uncompiled functions.

Geometry conventions, shared by all kernels:

* Horizontal coordinates are in cell units; cell ``(i, j)`` covers the
  half-open box ``[j, j+1) x [i, i+1)`` (``i`` = row = y, ``j`` = col = x).
* Terrain is piecewise constant per cell; altitudes are absolute.
* Free space is strictly above the terrain, so a segment that touches an
  obstacle top exactly (zero clearance) counts as blocked.
* A segment crossing exactly through a lattice corner steps diagonally:
  the corner point belongs to the half-open cell it floors into, and the
  two cells sharing only that corner are not traversed.
"""

import math

import numpy as np

from .backend import njit, prange


def _traverse_py(H, W, ax, ay, bx, by, t0, t1, ci, cj):
    """Exact cell traversal of the horizontal segment (ax,ay) -> (bx,by).

    Writes per-cell parameter intervals [t0, t1] and cell indices into the
    caller-provided buffers (size >= H + W + 4) and returns the number of
    traversed cells.  Intervals are closed, consecutive and cover [0, 1];
    corner crossings produce a single diagonal step.
    """
    dx = bx - ax
    dy = by - ay

    txs = np.empty(W + 1)
    nx = 0
    if dx > 0.0:
        m = math.floor(ax) + 1.0
        while m < bx:
            t = (m - ax) / dx
            if 0.0 < t < 1.0:
                txs[nx] = t
                nx += 1
            m += 1.0
    elif dx < 0.0:
        m = math.ceil(ax) - 1.0
        while m > bx:
            t = (m - ax) / dx
            if 0.0 < t < 1.0:
                txs[nx] = t
                nx += 1
            m -= 1.0

    tys = np.empty(H + 1)
    ny = 0
    if dy > 0.0:
        m = math.floor(ay) + 1.0
        while m < by:
            t = (m - ay) / dy
            if 0.0 < t < 1.0:
                tys[ny] = t
                ny += 1
            m += 1.0
    elif dy < 0.0:
        m = math.ceil(ay) - 1.0
        while m > by:
            t = (m - ay) / dy
            if 0.0 < t < 1.0:
                tys[ny] = t
                ny += 1
            m -= 1.0

    # Merge the two ascending crossing lists; equal values collapse into one
    # break, which is exactly the diagonal corner step.
    breaks = np.empty(nx + ny + 2)
    breaks[0] = 0.0
    nb = 1
    i = 0
    j = 0
    while i < nx or j < ny:
        if j >= ny:
            v = txs[i]
            i += 1
        elif i >= nx:
            v = tys[j]
            j += 1
        elif txs[i] < tys[j]:
            v = txs[i]
            i += 1
        elif tys[j] < txs[i]:
            v = tys[j]
            j += 1
        else:
            v = txs[i]
            i += 1
            j += 1
        if v > breaks[nb - 1]:
            breaks[nb] = v
            nb += 1
    if breaks[nb - 1] < 1.0:
        breaks[nb] = 1.0
        nb += 1

    n = 0
    for s in range(nb - 1):
        ta = breaks[s]
        tb = breaks[s + 1]
        tm = 0.5 * (ta + tb)
        px = ax + dx * tm
        py = ay + dy * tm
        jj = int(math.floor(px))
        ii = int(math.floor(py))
        if jj < 0:
            jj = 0
        elif jj > W - 1:
            jj = W - 1
        if ii < 0:
            ii = 0
        elif ii > H - 1:
            ii = H - 1
        t0[n] = ta
        t1[n] = tb
        ci[n] = ii
        cj[n] = jj
        n += 1
    return n


traverse = njit(cache=True)(_traverse_py)


def _los_clearance_py(heights, ax, ay, az, bx, by, bz):
    """Minimum altitude clearance of the 3D segment a->b over traversed cells.

    The segment altitude is linear in the traversal parameter, so its minimum
    over each cell interval is attained at an interval endpoint.  Returns
    min over traversed cells of (segment altitude - cell terrain); the
    segment is line-of-sight-free iff the result is > 0.
    """
    H, W = heights.shape
    cap = H + W + 4
    t0 = np.empty(cap)
    t1 = np.empty(cap)
    ci = np.empty(cap, np.int64)
    cj = np.empty(cap, np.int64)
    n = traverse(H, W, ax, ay, bx, by, t0, t1, ci, cj)
    dz = bz - az
    best = 1.0e300
    for s in range(n):
        h = heights[ci[s], cj[s]]
        za = az + dz * t0[s]
        zb = az + dz * t1[s]
        zmin = za if za < zb else zb
        c = zmin - h
        if c < best:
            best = c
    return best


los_clearance = njit(cache=True)(_los_clearance_py)


def _sight_requirement_py(heights, sx, sy, z0, cx, cy, t0, t1, ci, cj):
    """Required altitude at (cx, cy) for sight from the sensor, before clamps.

    Walks the segment and maximizes the sight-line slope over all traversed
    cells, evaluated at both interval endpoints (exact for linear sight
    lines over piecewise-constant terrain).  The constraint at the target
    point itself is exactly the target cell's terrain height; callers apply
    it as an altitude clamp instead, which avoids a (h-z0)/R * R float
    roundtrip and keeps e.g. flat-terrain fields exactly zero.
    """
    H, W = heights.shape
    ddx = cx - sx
    ddy = cy - sy
    R = math.sqrt(ddx * ddx + ddy * ddy)
    if R == 0.0:
        return -1.0e300
    n = traverse(H, W, sx, sy, cx, cy, t0, t1, ci, cj)
    sig = -1.0e300
    for s in range(n):
        h = heights[ci[s], cj[s]]
        r0 = R * t0[s]
        if r0 > 0.0:
            e = (h - z0) / r0
            if e > sig:
                sig = e
        if s < n - 1:
            r1 = R * t1[s]
            e = (h - z0) / r1
            if e > sig:
                sig = e
    return z0 + sig * R


sight_requirement = njit(cache=True)(_sight_requirement_py)


def _field_oracle_py(heights, sx, sy, z0, z_ceil):
    """Ground-truth visibility field of a sensor at (sx, sy, z0).

    Walks sensor -> cell center for every cell, O(H*W*(H+W)).  Entry (i, j)
    is the critical altitude at the center of cell (i, j): altitudes
    strictly above it (up to z_ceil) are visible, altitudes at or below are
    not.  z_ceil doubles as the "nothing below the ceiling is visible"
    sentinel.
    """
    H, W = heights.shape
    out = np.empty((H, W))
    cap = H + W + 4
    t0 = np.empty(cap)
    t1 = np.empty(cap)
    ci = np.empty(cap, np.int64)
    cj = np.empty(cap, np.int64)
    for i in range(H):
        cy = i + 0.5
        for j in range(W):
            cx = j + 0.5
            g = sight_requirement(heights, sx, sy, z0, cx, cy, t0, t1, ci, cj)
            hc = heights[i, j]
            if g < hc:
                g = hc
            if g > z_ceil:
                g = z_ceil
            out[i, j] = g
    return out


field_oracle = njit(cache=True)(_field_oracle_py)


def _field_sweep_py(heights, sx, sy, z0, z_ceil):
    """Radial-sweep approximation of the visibility field, O(H*W).

    Casts one ray from the sensor to the center of every boundary cell
    (rays sharing an exact angle keep only the farthest target), walks each
    ray at cell-crossing granularity recording the running maximum of the
    required sight-line slope, then assigns every cell the profile of the
    ray whose angular sector contains the cell center, evaluated at the
    cell's radial distance.  Between rays this is an approximation; the
    per-cell error against field_oracle stays within a couple of percent of
    the ceiling height.
    """
    H, W = heights.shape
    out = np.empty((H, W))
    si = int(math.floor(sy))
    sj = int(math.floor(sx))

    nr_cap = 2 * (H + W)
    tx = np.empty(nr_cap)
    ty = np.empty(nr_cap)
    nr = 0
    for j in range(W):
        tx[nr] = j + 0.5
        ty[nr] = 0.5
        nr += 1
        tx[nr] = j + 0.5
        ty[nr] = H - 0.5
        nr += 1
    for i in range(1, H - 1):
        tx[nr] = 0.5
        ty[nr] = i + 0.5
        nr += 1
        tx[nr] = W - 0.5
        ty[nr] = i + 0.5
        nr += 1

    th = np.empty(nr)
    d2 = np.empty(nr)
    keep = np.empty(nr, np.int64)
    nk = 0
    for r in range(nr):
        ddx = tx[r] - sx
        ddy = ty[r] - sy
        if ddx == 0.0 and ddy == 0.0:
            continue
        th[nk] = math.atan2(ddy, ddx)
        d2[nk] = ddx * ddx + ddy * ddy
        keep[nk] = r
        nk += 1

    order = np.argsort(th[:nk])
    th_u = np.empty(nk)
    ux = np.empty(nk)
    uy = np.empty(nk)
    ud2 = np.empty(nk)
    nu = 0
    for q in range(nk):
        r = order[q]
        a = th[r]
        if nu > 0 and a == th_u[nu - 1]:
            if d2[r] > ud2[nu - 1]:
                ux[nu - 1] = tx[keep[r]]
                uy[nu - 1] = ty[keep[r]]
                ud2[nu - 1] = d2[r]
        else:
            th_u[nu] = a
            ux[nu] = tx[keep[r]]
            uy[nu] = ty[keep[r]]
            ud2[nu] = d2[r]
            nu += 1

    stride = H + W + 4
    seg_d0 = np.empty((nu, stride))
    seg_d1 = np.empty((nu, stride))
    seg_h = np.empty((nu, stride))
    sig_bef = np.empty((nu, stride))
    sig_tot = np.empty(nu)
    counts = np.empty(nu, np.int64)

    t0 = np.empty(stride)
    t1 = np.empty(stride)
    ci = np.empty(stride, np.int64)
    cj = np.empty(stride, np.int64)
    for r in range(nu):
        n = traverse(H, W, sx, sy, ux[r], uy[r], t0, t1, ci, cj)
        ddx = ux[r] - sx
        ddy = uy[r] - sy
        R = math.sqrt(ddx * ddx + ddy * ddy)
        run = -1.0e300
        for s in range(n):
            d0 = R * t0[s]
            d1 = R * t1[s]
            h = heights[ci[s], cj[s]]
            seg_d0[r, s] = d0
            seg_d1[r, s] = d1
            seg_h[r, s] = h
            sig_bef[r, s] = run
            full = (h - z0) / d1
            if d0 > 0.0:
                e0 = (h - z0) / d0
                if e0 > full:
                    full = e0
            if full > run:
                run = full
        sig_tot[r] = run
        counts[r] = n

    # Disagreement between a cell's two flanking rays marks a shadow
    # boundary the angular resolution cannot settle; those cells fall back
    # to an exact per-cell walk.  Smooth regions keep the O(1) ray lookup.
    refine_eps = 0.05 * z_ceil
    two_pi = 2.0 * math.pi
    for i in range(H):
        cy = i + 0.5
        for j in range(W):
            if i == si and j == sj:
                out[i, j] = heights[i, j]
                continue
            cx = j + 0.5
            ddx = cx - sx
            ddy = cy - sy
            d = math.sqrt(ddx * ddx + ddy * ddy)
            a = math.atan2(ddy, ddx)
            # first sorted angle >= a (manual binary search; wraps circularly)
            fl = 0
            fh = nu
            while fl < fh:
                mid = (fl + fh) >> 1
                if th_u[mid] < a:
                    fl = mid + 1
                else:
                    fh = mid
            lo = fl - 1 if fl > 0 else nu - 1
            hi = fl if fl < nu else 0
            dlo = a - th_u[lo]
            if dlo < 0.0:
                dlo += two_pi
            dhi = th_u[hi] - a
            if dhi < 0.0:
                dhi += two_pi

            v_lo = 0.0
            v_hi = 0.0
            for side in range(2):
                r = lo if side == 0 else hi
                n = counts[r]
                # first segment with exit distance >= d
                sl = 0
                sh = n
                while sl < sh:
                    mid = (sl + sh) >> 1
                    if seg_d1[r, mid] < d:
                        sl = mid + 1
                    else:
                        sh = mid
                # at-the-point constraint of the segment's own cell goes via
                # altitude space (see sight_requirement), not /d * d
                own_alt = -1.0e300
                if sl >= n:
                    sig = sig_tot[r]
                else:
                    h = seg_h[r, sl]
                    sig = sig_bef[r, sl]
                    d0 = seg_d0[r, sl]
                    if d0 > 0.0:
                        e0 = (h - z0) / d0
                        if e0 > sig:
                            sig = e0
                    own_alt = h
                v = z0 + sig * d
                if own_alt > v:
                    v = own_alt
                if side == 0:
                    v_lo = v
                else:
                    v_hi = v
            if abs(v_lo - v_hi) > refine_eps:
                g = sight_requirement(heights, sx, sy, z0, cx, cy, t0, t1, ci, cj)
            else:
                g = v_lo if dlo <= dhi else v_hi
            hc = heights[i, j]
            if g < hc:
                g = hc
            if g > z_ceil:
                g = z_ceil
            out[i, j] = g
    return out


field_sweep = njit(cache=True)(_field_sweep_py)


def _candidate_fields_py(heights, cand_i, cand_j, mount, z_ceil):
    """Sweep visibility field of a mounted sensor at every candidate cell.

    Fields depend on the terrain only, never on already-placed sensors, so
    a placement run computes them once and reuses them at every step.
    """
    H, W = heights.shape
    nc = cand_i.shape[0]
    out = np.empty((nc, H, W))
    for c in prange(nc):
        i = cand_i[c]
        j = cand_j[c]
        z0 = heights[i, j] + mount
        out[c] = field_sweep(heights, j + 0.5, i + 0.5, z0, z_ceil)
    return out


candidate_fields = njit(cache=True, parallel=True)(_candidate_fields_py)


def _gain_from_field_py(g, heights, ck, area):
    """Shared gain accumulation: see gain_values for the derivation."""
    H, W = heights.shape
    acc = 0.0
    for ii in range(H):
        for jj in range(W):
            gv = g[ii, jj]
            cv = ck[ii, jj]
            if gv < cv:
                f = heights[ii, jj]
                a = cv if cv >= f else f
                b = gv if gv >= f else f
                acc += a - b
    return acc * area


gain_from_field = njit(cache=True)(_gain_from_field_py)


def _nearest_sensor_distance_py(i, j, sens_i, sens_j, p):
    best = 1.0e300
    for s in range(sens_i.shape[0]):
        ddi = float(i - sens_i[s])
        ddj = float(j - sens_j[s])
        if p == 2.0:
            dd = math.sqrt(ddi * ddi + ddj * ddj)
        else:
            dd = (abs(ddi) ** p + abs(ddj) ** p) ** (1.0 / p)
        if dd < best:
            best = dd
    return best


nearest_sensor_distance = njit(cache=True)(_nearest_sensor_distance_py)


def _gain_values_py(
    heights, ck, cand_i, cand_j, sens_i, sens_j, mount, z_ceil, cell_size, p, weighted
):
    """Coverage gain of a new sensor at each candidate cell.

    Adding one sensor can raise a point's visibility order by at most one,
    so only the k-th smallest cumulative layer ``ck`` changes: per cell the
    order-capped visible volume grows by max(0, max(ck,f) - max(g,f)).
    Summing this row-major is cancellation-free, which keeps gain maps of
    consecutive steps bitwise comparable.

    With ``weighted`` set, multiplies by the l_p distance (in length units)
    to the nearest already-placed sensor.
    """
    nc = cand_i.shape[0]
    area = cell_size * cell_size
    out = np.empty(nc)
    for c in prange(nc):
        i = cand_i[c]
        j = cand_j[c]
        z0 = heights[i, j] + mount
        g = field_sweep(heights, j + 0.5, i + 0.5, z0, z_ceil)
        val = gain_from_field(g, heights, ck, area)
        if weighted:
            best = nearest_sensor_distance(i, j, sens_i, sens_j, p)
            val = best * cell_size * val
        out[c] = val
    return out


gain_values = njit(cache=True, parallel=True)(_gain_values_py)


def _gain_values_cached_py(
    fields, heights, ck, cand_i, cand_j, sens_i, sens_j, z_ceil, cell_size, p, weighted
):
    """gain_values against precomputed candidate fields (bitwise identical)."""
    nc = cand_i.shape[0]
    area = cell_size * cell_size
    out = np.empty(nc)
    for c in prange(nc):
        val = gain_from_field(fields[c], heights, ck, area)
        if weighted:
            best = nearest_sensor_distance(cand_i[c], cand_j[c], sens_i, sens_j, p)
            val = best * cell_size * val
        out[c] = val
    return out


gain_values_cached = njit(cache=True, parallel=True)(_gain_values_cached_py)


def warmup():
    """Trigger compilation of all kernels on a tiny instance."""
    h = np.zeros((2, 2))
    h[1, 1] = 0.5
    cap = 8
    t0 = np.empty(cap)
    t1 = np.empty(cap)
    ci = np.empty(cap, np.int64)
    cj = np.empty(cap, np.int64)
    traverse(2, 2, 0.5, 0.5, 1.5, 1.5, t0, t1, ci, cj)
    los_clearance(h, 0.5, 0.5, 0.3, 1.5, 0.5, 0.3)
    field_oracle(h, 0.5, 0.5, 0.1, 1.0)
    field_sweep(h, 0.5, 0.5, 0.1, 1.0)
    ck = np.full((2, 2), 1.0)
    ones = np.array([0], np.int64)
    none = np.empty(0, np.int64)
    gain_values(h, ck, ones, ones, none, none, 0.02, 1.0, 1.0, 2.0, False)
    flds = candidate_fields(h, ones, ones, 0.02, 1.0)
    gain_values_cached(flds, h, ck, ones, ones, ones, ones, 1.0, 1.0, 2.0, True)
