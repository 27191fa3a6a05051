"""Compiled inner loops: labelling, BFS, projections and random walks.

Occupancy arrays are passed flattened in C order together with their shape.
``wrap`` selects periodic neighbours (torus) instead of free boundary.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _strides(shape):
    d = shape.size
    st = np.empty(d, np.int64)
    s = 1
    for a in range(d - 1, -1, -1):
        st[a] = s
        s *= shape[a]
    return st


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def uf_label(occ, shape, wrap):
    """Connected components of the occupied sites.

    Returns (labels, n_components); labels are dense ids ordered by the first
    site of each component in row-major scan order, -1 on empty sites.
    """
    n = occ.size
    d = shape.size
    st = _strides(shape)
    parent = np.arange(n)
    for i in range(n):
        if not occ[i]:
            continue
        for a in range(d):
            c = (i // st[a]) % shape[a]
            if c > 0:
                j = i - st[a]
            elif wrap and shape[a] > 1:
                j = i + (shape[a] - 1) * st[a]
            else:
                continue
            if occ[j]:
                ri = _find(parent, i)
                rj = _find(parent, j)
                if ri != rj:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
    labels = np.full(n, -1, np.int64)
    rootid = np.full(n, -1, np.int64)
    nxt = 0
    for i in range(n):
        if occ[i]:
            r = _find(parent, i)
            if rootid[r] < 0:
                rootid[r] = nxt
                nxt += 1
            labels[i] = rootid[r]
    return labels, nxt


@njit(cache=True)
def component_projections(labels, ncomp, shape, signs):
    """Per-component max and min of eps.x for every sign vector eps
    (x = array index).  Returns (mx, mn) of shape (ncomp, n_signs)."""
    n = labels.size
    d = shape.size
    ns = signs.shape[0]
    st = _strides(shape)
    mx = np.full((ncomp, ns), -(1 << 62), np.int64)
    mn = np.full((ncomp, ns), 1 << 62, np.int64)
    coord = np.empty(d, np.int64)
    for i in range(n):
        c = labels[i]
        if c < 0:
            continue
        for a in range(d):
            coord[a] = (i // st[a]) % shape[a]
        for s in range(ns):
            p = 0
            for a in range(d):
                p += signs[s, a] * coord[a]
            if p > mx[c, s]:
                mx[c, s] = p
            if p < mn[c, s]:
                mn[c, s] = p
    return mx, mn


@njit(cache=True)
def component_axis_presence(labels, ncomp, shape):
    """presence[c, a, t] is True iff component c has a site with coordinate t
    along axis a.  Used for circular extents on the torus."""
    n = labels.size
    d = shape.size
    st = _strides(shape)
    m = 0
    for a in range(d):
        if shape[a] > m:
            m = shape[a]
    pres = np.zeros((ncomp, d, m), np.bool_)
    for i in range(n):
        c = labels[i]
        if c < 0:
            continue
        for a in range(d):
            pres[c, a, (i // st[a]) % shape[a]] = True
    return pres


@njit(cache=True)
def bfs(occ, shape, wrap, src, max_depth, target, dist, queue, parent):
    """Breadth-first search on occupied sites from flat index ``src``.

    ``dist`` must be -1 everywhere on entry; visited entries are written.
    Stops early when ``target`` (>= 0) is reached or depth ``max_depth``
    (>= 0) is exhausted.  Returns the number of visited sites; their indices
    are queue[:count], which the caller uses to reset ``dist``.
    """
    d = shape.size
    st = _strides(shape)
    head = 0
    tail = 0
    if not occ[src]:
        return 0
    dist[src] = 0
    parent[src] = -1
    queue[tail] = src
    tail += 1
    while head < tail:
        i = queue[head]
        head += 1
        if i == target:
            break
        di = dist[i]
        if max_depth >= 0 and di >= max_depth:
            continue
        for a in range(d):
            c = (i // st[a]) % shape[a]
            for sgn in (-1, 1):
                if sgn < 0:
                    if c > 0:
                        j = i - st[a]
                    elif wrap and shape[a] > 1:
                        j = i + (shape[a] - 1) * st[a]
                    else:
                        continue
                else:
                    if c < shape[a] - 1:
                        j = i + st[a]
                    elif wrap and shape[a] > 1:
                        j = i - (shape[a] - 1) * st[a]
                    else:
                        continue
                if occ[j] and dist[j] < 0:
                    dist[j] = di + 1
                    parent[j] = i
                    queue[tail] = j
                    tail += 1
    return tail


@njit(cache=True)
def bfs_to_set(occ, shape, src, targets):
    """Shortest path (box geometry) from ``src`` to any site with targets True.

    Returns the flat indices of the path, or an empty array if none exists.
    """
    n = occ.size
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    parent = np.empty(n, np.int64)
    d = shape.size
    st = _strides(shape)
    if not occ[src]:
        return np.empty(0, np.int64)
    dist[src] = 0
    parent[src] = -1
    queue[0] = src
    head = 0
    tail = 1
    hit = -1
    while head < tail:
        i = queue[head]
        head += 1
        if targets[i]:
            hit = i
            break
        for a in range(d):
            c = (i // st[a]) % shape[a]
            if c > 0:
                j = i - st[a]
                if occ[j] and dist[j] < 0:
                    dist[j] = dist[i] + 1
                    parent[j] = i
                    queue[tail] = j
                    tail += 1
            if c < shape[a] - 1:
                j = i + st[a]
                if occ[j] and dist[j] < 0:
                    dist[j] = dist[i] + 1
                    parent[j] = i
                    queue[tail] = j
                    tail += 1
    if hit < 0:
        return np.empty(0, np.int64)
    path = np.empty(dist[hit] + 1, np.int64)
    k = dist[hit]
    i = hit
    while i >= 0:
        path[k] = i
        k -= 1
        i = parent[i]
    return path


# ---------------------------------------------------------------- walks


@njit(cache=True)
def escape_walks(starts, trials, radius, kflat, side, koff, rng):
    """For each start x in K, count walks that reach |X|_inf >= radius
    before returning to K (time >= 1).  ``kflat`` is the flat indicator of K on the
    box [-koff, koff]^d of side ``side``, indexed by coordinate + koff."""
    m, d = starts.shape
    esc = np.zeros(m, np.int64)
    pos = np.empty(d, np.int64)
    for s in range(m):
        for t in range(trials):
            for a in range(d):
                pos[a] = starts[s, a]
            while True:
                r = int(rng.random() * (2 * d))
                a = r >> 1
                if r & 1:
                    pos[a] += 1
                else:
                    pos[a] -= 1
                # K membership
                inside = True
                for b in range(d):
                    q = pos[b] + koff
                    if q < 0 or q >= side:
                        inside = False
                        break
                if inside:
                    flat = 0
                    for b in range(d):
                        flat = flat * side + pos[b] + koff
                    if kflat[flat]:
                        break
                far = False
                for b in range(d):
                    if pos[b] >= radius or pos[b] <= -radius:
                        far = True
                        break
                if far:
                    esc[s] += 1
                    break
    return esc


@njit(cache=True)
def trace_walks(starts, radius, lo, shape, rng, out):
    """Run one forward walk from each start until |X|_inf >= radius, marking
    visited sites of the box lo + [0, shape) in the flat array ``out``.
    Walks are consumed in order so a prefix of starts gives a prefix trace."""
    m, d = starts.shape
    st = _strides(shape)
    pos = np.empty(d, np.int64)
    steps = 0
    for s in range(m):
        for a in range(d):
            pos[a] = starts[s, a]
        while True:
            inside = True
            flat = 0
            for b in range(d):
                q = pos[b] - lo[b]
                if q < 0 or q >= shape[b]:
                    inside = False
                    break
                flat += q * st[b]
            if inside:
                out[flat] = True
            far = False
            for b in range(d):
                if pos[b] >= radius or pos[b] <= -radius:
                    far = True
                    break
            if far:
                break
            r = int(rng.random() * (2 * d))
            a = r >> 1
            if r & 1:
                pos[a] += 1
            else:
                pos[a] -= 1
            steps += 1
    return steps


@njit(cache=True)
def torus_walk(N, d, steps, start, rng, visited):
    """Mark the trace of a walk of ``steps`` steps on (Z/NZ)^d."""
    st = np.empty(d, np.int64)
    s = 1
    for a in range(d - 1, -1, -1):
        st[a] = s
        s *= N
    pos = start.copy()
    flat = 0
    for a in range(d):
        flat += pos[a] * st[a]
    visited[flat] = True
    for _ in range(steps):
        r = int(rng.random() * (2 * d))
        a = r >> 1
        if r & 1:
            if pos[a] == N - 1:
                pos[a] = 0
                flat -= (N - 1) * st[a]
            else:
                pos[a] += 1
                flat += st[a]
        else:
            if pos[a] == 0:
                pos[a] = N - 1
                flat += (N - 1) * st[a]
            else:
                pos[a] -= 1
                flat -= st[a]
        visited[flat] = True


# ---------------------------------------------------------------- seed events


@njit(cache=True)
def _copy_box(src, shape, lo, bshape):
    """Copy the box lo + [0, bshape) of the flat C-order array ``src``."""
    d = shape.size
    st = _strides(shape)
    bst = _strides(bshape)
    n = 1
    for a in range(d):
        n *= bshape[a]
    out = np.empty(n, src.dtype)
    for q in range(n):
        flat = 0
        for a in range(d):
            flat += (lo[a] + (q // bst[a]) % bshape[a]) * st[a]
        out[q] = src[flat]
    return out


@njit(cache=True)
def seed_fields(occ, sL0, shape, L0, base, g_n, floor_, ceiling):
    """Complements of the seed events A and B on a block of grid points.

    Grid point g (0 <= g < g_n) has its box at array index base + L0 g.
    Returns flat (A_bar, B_bar) over g_n in C order.
    """
    d = shape.size
    st = _strides(shape)
    t_n = g_n + 1
    tst = _strides(t_n)
    ntiles = 1
    npts = 1
    for a in range(d):
        ntiles *= t_n[a]
        npts *= g_n[a]
    tile = np.full(d, L0, np.int64)
    vol = 1
    for a in range(d):
        vol *= L0
    maxq = 1
    if floor_ > 0:
        maxq = int(vol / floor_) + 1
    else:
        maxq = vol
    counts = np.zeros(ntiles, np.int64)
    nreps = np.zeros(ntiles, np.int64)
    reps = np.empty((ntiles, maxq), np.int64)
    lo = np.empty(d, np.int64)
    tst_local = _strides(tile)
    for t in range(ntiles):
        for a in range(d):
            lo[a] = base[a] + L0 * ((t // tst[a]) % t_n[a])
        sub = _copy_box(sL0, shape, lo, tile)
        labels, nc = uf_label(sub, tile, False)
        sizes = np.zeros(nc, np.int64)
        first = np.full(nc, -1, np.int64)
        cnt = 0
        for q in range(vol):
            c = labels[q]
            if c >= 0:
                cnt += 1
                sizes[c] += 1
                if first[c] < 0:
                    first[c] = q
        counts[t] = cnt
        k = 0
        for c in range(nc):
            if sizes[c] >= floor_ and k < maxq:
                q = first[c]
                flat = 0
                for a in range(d):
                    flat += (lo[a] + (q // tst_local[a]) % L0) * st[a]
                reps[t, k] = flat
                k += 1
        nreps[t] = k
    A_bar = np.ones(npts, np.bool_)
    B_bar = np.zeros(npts, np.bool_)
    gst = _strides(g_n)
    box2 = np.full(d, 2 * L0, np.int64)
    bst2 = _strides(box2)
    noff = 1 << d
    g = np.empty(d, np.int64)
    for p in range(npts):
        for a in range(d):
            g[a] = (p // gst[a]) % g_n[a]
        allreps = True
        for e in range(noff):
            t = 0
            for a in range(d):
                t += (g[a] + ((e >> a) & 1)) * tst[a]
            if counts[t] > ceiling:
                B_bar[p] = True
            if nreps[t] == 0:
                allreps = False
        if not allreps:
            continue
        for a in range(d):
            lo[a] = base[a] + L0 * g[a]
        sub = _copy_box(occ, shape, lo, box2)
        labels, nc = uf_label(sub, box2, False)
        ref = -2
        ok = True
        for e in range(noff):
            t = 0
            for a in range(d):
                t += (g[a] + ((e >> a) & 1)) * tst[a]
            for r in range(nreps[t]):
                flat = reps[t, r]
                q = 0
                for a in range(d):
                    q += ((flat // st[a]) % shape[a] - lo[a]) * bst2[a]
                lab = labels[q]
                if ref == -2:
                    ref = lab
                elif lab != ref:
                    ok = False
        if ok:
            A_bar[p] = False
    return A_bar, B_bar


@njit(cache=True)
def max_eccentricity(occ, shape, members, start, enough):
    """Largest graph distance (box geometry) between two member sites; a
    huge value if some pair is disconnected.  When twice the eccentricity of
    the member ``start`` is at most ``enough`` that upper bound is returned
    instead of the exact value."""
    n = occ.size
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    parent = np.empty(n, np.int64)
    nm = 0
    for i in range(n):
        if members[i]:
            nm += 1
    if nm == 0:
        return 0
    cnt = bfs(occ, shape, False, start, -1, -1, dist, queue, parent)
    ecc = 0
    seen = 0
    for q in range(cnt):
        j = queue[q]
        if members[j]:
            seen += 1
            if dist[j] > ecc:
                ecc = dist[j]
    for q in range(cnt):
        dist[queue[q]] = -1
    if seen < nm:
        return 1 << 62
    if 2 * ecc <= enough:
        return 2 * ecc
    best = 0
    for src in range(n):
        if not members[src]:
            continue
        cnt = bfs(occ, shape, False, src, -1, -1, dist, queue, parent)
        seen = 0
        for q in range(cnt):
            j = queue[q]
            if members[j]:
                seen += 1
                if dist[j] > best:
                    best = dist[j]
        for q in range(cnt):
            dist[queue[q]] = -1
        if seen < nm:
            return 1 << 62
    return best
