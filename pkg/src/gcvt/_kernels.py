"""Compiled graph kernels shared by the mesh and image pipelines.

All graphs are given in CSR form ``(indptr, indices, weights)``.  Labels are
generator indices; ties in distance are broken towards the lower label so
that every search is deterministic.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _heap_push(hd, hn, size, d, n):
    i = size
    hd[i] = d
    hn[i] = n
    while i > 0:
        p = (i - 1) >> 1
        if hd[p] <= hd[i]:
            break
        hd[p], hd[i] = hd[i], hd[p]
        hn[p], hn[i] = hn[i], hn[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(hd, hn, size):
    d = hd[0]
    n = hn[0]
    size -= 1
    hd[0] = hd[size]
    hn[0] = hn[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        r = l + 1
        if r < size and hd[r] < hd[l]:
            c = r
        if hd[i] <= hd[c]:
            break
        hd[c], hd[i] = hd[i], hd[c]
        hn[c], hn[i] = hn[i], hn[c]
        i = c
    return d, n, size


@njit(cache=True)
def dijkstra_labeled(indptr, indices, weights, n_nodes,
                     seed_nodes, seed_dist, seed_label, limit):
    """Multi-source Dijkstra with nearest-source labels.

    Seeded nodes get ``pred = -1 - label``.  Nodes beyond ``limit`` stay at
    ``inf`` with label ``-1``.
    """
    dist = np.full(n_nodes, np.inf)
    label = np.full(n_nodes, -1, dtype=np.int64)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    done = np.zeros(n_nodes, dtype=np.bool_)
    cap = indices.shape[0] + seed_nodes.shape[0] + 1
    hd = np.empty(cap)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    for s in range(seed_nodes.shape[0]):
        v = seed_nodes[s]
        d = seed_dist[s]
        lab = seed_label[s]
        if d < dist[v] or (d == dist[v] and lab < label[v]):
            dist[v] = d
            label[v] = lab
            pred[v] = -1 - lab
            size = _heap_push(hd, hn, size, d, v)
    while size > 0:
        d, u, size = _heap_pop(hd, hn, size)
        if done[u] or d > dist[u]:
            continue
        if d > limit:
            break
        done[u] = True
        lu = label[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if done[v]:
                continue
            nd = d + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                label[v] = lu
                pred[v] = u
                size = _heap_push(hd, hn, size, nd, v)
            elif nd == dist[v] and lu < label[v]:
                label[v] = lu
                pred[v] = u
    for v in range(n_nodes):
        if not done[v] and dist[v] > limit:
            dist[v] = np.inf
            label[v] = -1
            pred[v] = -1
    return dist, label, pred


@njit(cache=True)
def bucket_search(indptr, indices, weights, n_nodes, seed_nodes, seed_dist, seed_label,
                  mask, width):
    """Multi-source label-correcting search over a circular bucket queue.

    Seeds start at ``seed_dist``.  Entries are binned by ``floor(d / width)``;
    inside a bucket the order is arbitrary, and a node whose distance later
    improves is simply re-queued, so final distances are exact regardless of
    ``width``.  Only nodes with ``mask`` set are visited.
    """
    dist = np.full(n_nodes, np.inf)
    label = np.full(n_nodes, -1, dtype=np.int64)
    maxw = 0.0
    for k in range(weights.shape[0]):
        if weights[k] > maxw:
            maxw = weights[k]
    if width <= 0.0:
        width = 1.0
    # the ring must hold every pending distance at once: seeds span up to
    # max(seed_dist) and a relaxation adds at most maxw past the current bucket
    lo = np.inf
    hi = 0.0
    for s in range(seed_dist.shape[0]):
        lo = min(lo, seed_dist[s])
        hi = max(hi, seed_dist[s])
    if not lo < np.inf:
        lo = 0.0
    nb = int((maxw + hi - lo) / width) + 2
    head = np.full(nb, -1, dtype=np.int64)
    cap = max(16, 2 * n_nodes + seed_nodes.shape[0])
    e_node = np.empty(cap, dtype=np.int64)
    e_dist = np.empty(cap)
    e_next = np.empty(cap, dtype=np.int64)
    free = -1
    used = 0
    pending = 0
    cur = int(lo / width)
    for s in range(seed_nodes.shape[0]):
        v = seed_nodes[s]
        if not mask[v]:
            continue
        lab = seed_label[s]
        d0 = seed_dist[s]
        if d0 < dist[v] or (d0 == dist[v] and lab < label[v]):
            if free >= 0:
                slot = free
                free = e_next[slot]
            else:
                slot = used
                used += 1
            bi = int(d0 / width)
            e_node[slot] = v
            e_dist[slot] = d0
            e_next[slot] = head[bi % nb]
            head[bi % nb] = slot
            pending += 1
            dist[v] = d0
            label[v] = lab
    while pending > 0:
        b = cur % nb
        slot = head[b]
        if slot < 0:
            cur += 1
            continue
        head[b] = e_next[slot]
        e_next[slot] = free
        free = slot
        pending -= 1
        u = e_node[slot]
        d = e_dist[slot]
        if d > dist[u]:
            continue
        lu = label[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if not mask[v]:
                continue
            nd = d + weights[k]
            if nd < dist[v] or (nd == dist[v] and lu < label[v]):
                # label-only changes are re-queued too so the label propagates
                dist[v] = nd
                label[v] = lu
                if free >= 0:
                    slot2 = free
                    free = e_next[slot2]
                else:
                    if used >= cap:
                        ncap = cap * 2
                        t1 = np.empty(ncap, dtype=np.int64)
                        t2 = np.empty(ncap)
                        t3 = np.empty(ncap, dtype=np.int64)
                        t1[:cap] = e_node
                        t2[:cap] = e_dist
                        t3[:cap] = e_next
                        e_node, e_dist, e_next = t1, t2, t3
                        cap = ncap
                    slot2 = used
                    used += 1
                bi = int(nd / width)
                if bi < cur:
                    bi = cur
                bb = bi % nb
                e_node[slot2] = v
                e_dist[slot2] = nd
                e_next[slot2] = head[bb]
                head[bb] = slot2
                pending += 1
    return dist, label


@njit(cache=True)
def same_label_components(indptr, indices, labels):
    """Connected components of the subgraph keeping only equal-label arcs."""
    n = labels.shape[0]
    comp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    nc = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = nc
        top = 0
        stack[top] = s
        top += 1
        while top > 0:
            top -= 1
            u = stack[top]
            lu = labels[u]
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if comp[v] < 0 and labels[v] == lu:
                    comp[v] = nc
                    stack[top] = v
                    top += 1
        nc += 1
    return comp, nc


@njit(cache=True)
def windowed_assign(features, centers, center_pos, shape, half, labels, best):
    """Nearest-center assignment restricted to boxes around each center.

    ``features`` is ``(n, d)`` over a ``(T, H, W)`` lattice in C order,
    ``center_pos`` holds each center's lattice position ``(t, y, x)`` and
    ``half`` the per-axis half window.  ``best`` must hold the squared
    distance of every sample to its current center; a sample only moves to
    a strictly closer center.
    """
    T, H, W = shape[0], shape[1], shape[2]
    d = features.shape[1]
    for c in range(centers.shape[0]):
        t0 = max(0, int(np.floor(center_pos[c, 0] - half[0])))
        t1 = min(T - 1, int(np.ceil(center_pos[c, 0] + half[0])))
        y0 = max(0, int(np.floor(center_pos[c, 1] - half[1])))
        y1 = min(H - 1, int(np.ceil(center_pos[c, 1] + half[1])))
        x0 = max(0, int(np.floor(center_pos[c, 2] - half[2])))
        x1 = min(W - 1, int(np.ceil(center_pos[c, 2] + half[2])))
        for t in range(t0, t1 + 1):
            for y in range(y0, y1 + 1):
                base = (t * H + y) * W
                for x in range(x0, x1 + 1):
                    i = base + x
                    s = 0.0
                    for k in range(d):
                        diff = features[i, k] - centers[c, k]
                        s += diff * diff
                    if s < best[i] or (s == best[i] and c < labels[i]):
                        best[i] = s
                        labels[i] = c
    return labels, best


@njit(cache=True)
def sq_dist_to_assigned(features, centers, labels):
    n, d = features.shape
    out = np.empty(n)
    for i in range(n):
        c = labels[i]
        s = 0.0
        for k in range(d):
            diff = features[i, k] - centers[c, k]
            s += diff * diff
        out[i] = s
    return out


@njit(cache=True)
def unfold_source(pa, pb, pv, da, db, out):
    """Distance at ``pv`` from a point source seen through edge (a, b).

    The source is placed in the plane of (a, b, v) at distances ``da`` and
    ``db`` from ``a`` and ``b`` on the far side of the edge, and written to
    ``out``.  Returns inf when no such source exists or the straight ray to
    ``pv`` misses the edge.
    """
    n = pa.shape[0]
    c2 = 0.0
    for k in range(n):
        c2 += (pb[k] - pa[k]) ** 2
    c = np.sqrt(c2)
    if c == 0.0:
        return np.inf
    vx = 0.0
    for k in range(n):
        vx += (pv[k] - pa[k]) * (pb[k] - pa[k])
    vx /= c
    r2 = 0.0
    for k in range(n):
        r2 += (pv[k] - pa[k]) ** 2
    vy2 = r2 - vx * vx
    if vy2 <= 0.0:
        return np.inf
    vy = np.sqrt(vy2)
    x = (da * da - db * db + c2) / (2.0 * c)
    h2 = da * da - x * x
    if h2 < 0.0:
        return np.inf
    y = -np.sqrt(h2)
    t = -y / (vy - y)
    xi = x + t * (vx - x)
    if xi < 0.0 or xi > c:
        return np.inf
    for k in range(n):
        e1 = (pb[k] - pa[k]) / c
        e2 = (pv[k] - pa[k] - vx * e1) / vy
        out[k] = pa[k] + x * e1 + y * e2
    return np.sqrt((vx - x) ** 2 + (vy - y) ** 2)


@njit(cache=True)
def unfold_update(pa, pb, pv, da, db):
    tmp = np.empty(pa.shape[0])
    return unfold_source(pa, pb, pv, da, db, tmp)


@njit(cache=True)
def _ray_source(src, pos, v, u, dv):
    # source at distance dv from v on the ray from v through u
    L = 0.0
    for k in range(pos.shape[1]):
        L += (pos[u, k] - pos[v, k]) ** 2
    L = np.sqrt(L)
    for k in range(pos.shape[1]):
        src[v, k] = pos[v, k] + (pos[u, k] - pos[v, k]) / L * dv if L > 0 else pos[v, k]


@njit(cache=True)
def unfolding_march(pos, tris, vt_ptr, vt_idx, nb_ptr, nb_idx, nb_w,
                    init_d, init_label, gen_vertex):
    """Labeled front propagation with in-face unfolding updates.

    Vertices join the front when a neighbor settles.  Tentative values
    start at ``init_d`` / ``init_label`` (an upper bound such as graph
    distances) and are lowered by edge updates
    ``d(u) + |uv|`` and triangle updates through edges of settled
    same-label vertices.  When a vertex settles without any settled
    neighbor of its tentative label it takes the best update from its
    settled neighbors instead, so every label class stays edge-connected.

    Returns distances, labels, per-vertex virtual source points (the
    unfolded source position that realizes each distance; on flat regions
    the generator itself) and flags marking sources that were only placed
    on a ray through a neighbor.
    """
    n = pos.shape[0]
    dim = pos.shape[1]
    d = init_d.copy()
    label = init_label.copy()
    src = np.empty((n, dim))
    has_src = np.zeros(n, dtype=np.bool_)
    ray = np.zeros(n, dtype=np.bool_)
    tmp = np.empty(dim)
    done = np.zeros(n, dtype=np.bool_)
    queued = np.zeros(n, dtype=np.bool_)
    # every settle relaxes each incident edge once and each incident triangle twice
    cap = n + nb_idx.shape[0] + 2 * vt_idx.shape[0] + 16
    hd = np.empty(cap)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    for i in range(gen_vertex.shape[0]):
        v = gen_vertex[i]
        d[v] = 0.0
        label[v] = i
        for k in range(dim):
            src[v, k] = pos[v, k]
        has_src[v] = True
        if not queued[v]:
            queued[v] = True
            size = _heap_push(hd, hn, size, 0.0, v)
    while size > 0:
        dv, v, size = _heap_pop(hd, hn, size)
        if done[v] or dv > d[v]:
            continue
        is_gen = False
        for i in range(gen_vertex.shape[0]):
            if gen_vertex[i] == v:
                is_gen = True
        if not is_gen:
            ok = False
            for k in range(nb_ptr[v], nb_ptr[v + 1]):
                u = nb_idx[k]
                if done[u] and label[u] == label[v]:
                    ok = True
                    break
            if not ok:
                best = np.inf
                bl = -1
                bu = -1
                for k in range(nb_ptr[v], nb_ptr[v + 1]):
                    u = nb_idx[k]
                    if done[u]:
                        cand = d[u] + nb_w[k]
                        if cand < best or (cand == best and label[u] < bl):
                            best = cand
                            bl = label[u]
                            bu = u
                for k in range(vt_ptr[v], vt_ptr[v + 1]):
                    t = vt_idx[k]
                    a = -1
                    b = -1
                    for j in range(3):
                        w = tris[t, j]
                        if w != v:
                            if a < 0:
                                a = w
                            else:
                                b = w
                    if done[a] and done[b] and label[a] == label[b]:
                        cand = unfold_source(pos[a], pos[b], pos[v], d[a], d[b], tmp)
                        if cand < best or (cand == best and label[a] < bl):
                            best = cand
                            bl = label[a]
                            bu = -1
                            for kk in range(dim):
                                src[v, kk] = tmp[kk]
                d[v] = best
                label[v] = bl
                ray[v] = bu >= 0
                if bu >= 0:
                    _ray_source(src, pos, v, bu, best)
                has_src[v] = True
            elif not has_src[v]:
                # settled at its initial bound: aim at the nearest settled same-label neighbor
                bw = -1
                bc = np.inf
                for k in range(nb_ptr[v], nb_ptr[v + 1]):
                    u = nb_idx[k]
                    if done[u] and label[u] == label[v] and d[u] + nb_w[k] < bc:
                        bc = d[u] + nb_w[k]
                        bw = u
                _ray_source(src, pos, v, bw, d[v])
                ray[v] = True
                has_src[v] = True
        done[v] = True
        lv = label[v]
        # edge updates
        for k in range(nb_ptr[v], nb_ptr[v + 1]):
            u = nb_idx[k]
            if done[u]:
                continue
            cand = d[v] + nb_w[k]
            if cand < d[u] or (cand == d[u] and lv < label[u]):
                d[u] = cand
                label[u] = lv
                _ray_source(src, pos, u, v, cand)
                ray[u] = True
                has_src[u] = True
                queued[u] = True
                size = _heap_push(hd, hn, size, cand, u)
            elif not queued[u]:
                # enters the front at its initial upper bound
                queued[u] = True
                size = _heap_push(hd, hn, size, d[u], u)
        # triangle updates through edges (v, w) with w settled and same label
        for k in range(vt_ptr[v], vt_ptr[v + 1]):
            t = vt_idx[k]
            iv = 0
            while tris[t, iv] != v:
                iv += 1
            for j in range(3):
                if j == iv:
                    continue
                w = tris[t, j]
                if not done[w] or label[w] != lv:
                    continue
                u = tris[t, 3 - j - iv]
                if done[u]:
                    continue
                cand = unfold_source(pos[v], pos[w], pos[u], d[v], d[w], tmp)
                if cand < d[u] or (cand == d[u] and lv < label[u]):
                    d[u] = cand
                    label[u] = lv
                    for kk in range(dim):
                        src[u, kk] = tmp[kk]
                    ray[u] = False
                    has_src[u] = True
                    queued[u] = True
                    size = _heap_push(hd, hn, size, cand, u)
    return d, label, src, ray


@njit(cache=True)
def _dist(p, q):
    s = 0.0
    for k in range(p.shape[0]):
        s += (p[k] - q[k]) ** 2
    return np.sqrt(s)


@njit(cache=True)
def unfold_relax(pos, tris, vt_ptr, vt_idx, d, label, src, ray, max_updates, relabel):
    """Retry triangle updates until no distance decreases.

    Fixes vertices that settled before both endpoints of the edge their
    shortest ray crosses.  A corner owned by another label enters with its
    distance to the other corner's source.  With ``relabel`` a vertex may
    switch to the label of a shorter update, otherwise only same-label
    updates are used.  A ray-placed source (``ray``) is also replaced by a
    same-label unfolded source of equal distance.  Works in place and
    returns the number of updates.
    """
    n = pos.shape[0]
    tmp = np.empty(pos.shape[1])
    work = np.empty(n + 1, dtype=np.int64)
    inq = np.ones(n, dtype=np.bool_)
    for i in range(n):
        work[i] = i
    head = 0
    count = n
    cap = n + 1
    updates = 0
    while count > 0 and updates < max_updates:
        v = work[head]
        head = (head + 1) % cap
        count -= 1
        inq[v] = False
        if d[v] == 0.0:
            continue
        changed = False
        for k in range(vt_ptr[v], vt_ptr[v + 1]):
            t = vt_idx[k]
            a = -1
            b = -1
            for j in range(3):
                w = tris[t, j]
                if w != v:
                    if a < 0:
                        a = w
                    else:
                        b = w
            for side in range(2):
                lab = label[a] if side == 0 else label[b]
                if side == 1 and label[b] == label[a]:
                    continue
                if lab != label[v] and not relabel:
                    continue
                da = d[a]
                db = d[b]
                # a foreign corner is measured from the other corner's source
                if label[a] != lab:
                    da = _dist(pos[a], src[b])
                elif label[b] != lab:
                    db = _dist(pos[b], src[a])
                cand = unfold_source(pos[a], pos[b], pos[v], da, db, tmp)
                tie = ray[v] and lab == label[v] and cand <= d[v] * (1.0 + 1e-12)
                if cand < d[v] * (1.0 - 1e-13) or tie:
                    d[v] = cand
                    label[v] = lab
                    ray[v] = False
                    for kk in range(tmp.shape[0]):
                        src[v, kk] = tmp[kk]
                    changed = True
        if changed:
            updates += 1
            for k in range(vt_ptr[v], vt_ptr[v + 1]):
                t = vt_idx[k]
                for j in range(3):
                    w = tris[t, j]
                    if not inq[w]:
                        inq[w] = True
                        work[(head + count) % cap] = w
                        count += 1
    return updates
