"""Numba kernels for Dijkstra on an implicit wide-stencil grid graph.

Nodes are interior grid points of a rectangle, stored row-major with
``node = j * nx + i``. Edges are never materialised: the stencil offsets are
applied on the fly and edge weights are ``length * (phi[u] + phi[v]) / 2``.

Off-grid terminals (query points) are attached to every node inside a
Chebyshev box of half-width ``radius * h`` around them. Scratch arrays are
owned by the caller and are left in their pristine state (``dist = inf``,
``pos = -1``, ``mark = 0``) after every call, so repeated local queries only
pay for the nodes they touch.
"""

import numpy as np
from numba import njit

UNSEEN = -1
SETTLED = -2


def stencil_offsets(order):
    """Neighbour offsets ``(di, dj)`` for the 8- (order 1) or 16-neighbour (order 2) stencil."""
    if order == 1:
        base = [(1, 0), (1, 1)]
    elif order == 2:
        base = [(1, 0), (1, 1), (2, 1)]
    else:
        raise ValueError(f"stencil_order must be 1 or 2, got {order}")
    offs = set()
    for a, b in base:
        for sa in (1, -1):
            for sb in (1, -1):
                offs.add((sa * a, sb * b))
                offs.add((sb * b, sa * a))
    offs = sorted(offs)
    di = np.array([o[0] for o in offs], dtype=np.int64)
    dj = np.array([o[1] for o in offs], dtype=np.int64)
    return di, dj


def max_angular_gap(order):
    di, dj = stencil_offsets(order)
    ang = np.sort(np.arctan2(dj, di))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    return float(gaps.max())


@njit(cache=True)
def _less(dist, a, b):
    da = dist[a]
    db = dist[b]
    return da < db or (da == db and a < b)


@njit(cache=True)
def _sift_up(heap, pos, dist, k):
    node = heap[k]
    while k > 0:
        parent = (k - 1) >> 1
        other = heap[parent]
        if _less(dist, node, other):
            heap[k] = other
            pos[other] = k
            k = parent
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def _sift_down(heap, pos, dist, k, size):
    node = heap[k]
    while True:
        child = 2 * k + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _less(dist, heap[right], heap[child]):
            child = right
        other = heap[child]
        if _less(dist, other, node):
            heap[k] = other
            pos[other] = k
            k = child
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def terminal_entries(px, py, phi_p, x0, y0, h, nx, ny, radius, phi):
    """Nodes attached to the off-grid point (px, py) and their segment costs."""
    fi = (px - x0) / h - 1.0
    fj = (py - y0) / h - 1.0
    eps = 1e-9
    ri = np.floor(fi + 0.5)
    rj = np.floor(fj + 0.5)
    if abs(fi - ri) <= eps and abs(fj - rj) <= eps and 0 <= ri < nx and 0 <= rj < ny:
        # a terminal sitting on a node is that node
        nodes = np.empty(1, dtype=np.int64)
        costs = np.zeros(1, dtype=np.float64)
        nodes[0] = int(rj) * nx + int(ri)
        return nodes, costs
    i_lo = max(0, int(np.ceil(fi - radius - eps)))
    i_hi = min(nx - 1, int(np.floor(fi + radius + eps)))
    j_lo = max(0, int(np.ceil(fj - radius - eps)))
    j_hi = min(ny - 1, int(np.floor(fj + radius + eps)))
    cnt = max(0, i_hi - i_lo + 1) * max(0, j_hi - j_lo + 1)
    nodes = np.empty(cnt, dtype=np.int64)
    costs = np.empty(cnt, dtype=np.float64)
    k = 0
    for j in range(j_lo, j_hi + 1):
        for i in range(i_lo, i_hi + 1):
            node = j * nx + i
            dx = x0 + (i + 1) * h - px
            dy = y0 + (j + 1) * h - py
            nodes[k] = node
            costs[k] = np.sqrt(dx * dx + dy * dy) * 0.5 * (phi_p + phi[node])
            k += 1
    return nodes, costs


@njit(cache=True, nogil=True)
def run(nx, ny, h, phi, di, dj, src_nodes, src_costs,
        tgt_nodes, tgt_costs, tgt_owner, best, best_node,
        dist, pred, pos, heap, mark, touched):
    """Multi-source Dijkstra with optional early stop at off-grid sinks.

    ``best``/``best_node`` hold, per sink, the current upper bound and the
    node it was reached through (-1 for a direct source-sink segment); they
    are updated in place. With no sinks the whole grid is settled.
    Returns the number of touched nodes; the caller must call ``reset``.
    """
    n_off = di.shape[0]
    lens = np.empty(n_off)
    for k in range(n_off):
        lens[k] = h * np.sqrt(float(di[k] * di[k] + dj[k] * dj[k]))
    n_touched = 0
    size = 0
    for k in range(src_nodes.shape[0]):
        v = src_nodes[k]
        c = src_costs[k]
        if pos[v] == UNSEEN and dist[v] == np.inf:
            touched[n_touched] = v
            n_touched += 1
            dist[v] = c
            pred[v] = -1
            heap[size] = v
            size += 1
            _sift_up(heap, pos, dist, size - 1)
        elif c < dist[v]:
            dist[v] = c
            pred[v] = -1
            _sift_up(heap, pos, dist, pos[v])
    n_tgt = best.shape[0]
    for k in range(tgt_nodes.shape[0]):
        mark[tgt_nodes[k]] = 1
    # bound = max over sinks of their current best; stop once the frontier passes it
    while size > 0:
        u = heap[0]
        du = dist[u]
        if n_tgt > 0:
            bound = 0.0
            for t in range(n_tgt):
                if best[t] > bound:
                    bound = best[t]
            if du >= bound:
                break
        size -= 1
        if size > 0:
            last = heap[size]
            heap[0] = last
            pos[last] = 0
            _sift_down(heap, pos, dist, 0, size)
        pos[u] = SETTLED
        if mark[u] == 1:
            for k in range(tgt_nodes.shape[0]):
                if tgt_nodes[k] == u:
                    cand = du + tgt_costs[k]
                    t = tgt_owner[k]
                    if cand < best[t] or (cand == best[t] and best_node[t] >= 0 and u < best_node[t]):
                        best[t] = cand
                        best_node[t] = u
        ui = u % nx
        uj = u // nx
        pu = phi[u]
        for k in range(n_off):
            vi = ui + di[k]
            vj = uj + dj[k]
            if vi < 0 or vi >= nx or vj < 0 or vj >= ny:
                continue
            v = vj * nx + vi
            pv = pos[v]
            if pv == SETTLED:
                continue
            nd = du + lens[k] * 0.5 * (pu + phi[v])
            if pv == UNSEEN:
                touched[n_touched] = v
                n_touched += 1
                dist[v] = nd
                pred[v] = u
                heap[size] = v
                size += 1
                _sift_up(heap, pos, dist, size - 1)
            elif nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                _sift_up(heap, pos, dist, pv)
    for k in range(tgt_nodes.shape[0]):
        mark[tgt_nodes[k]] = 0
    return n_touched


@njit(cache=True)
def reset(dist, pos, touched, n_touched):
    for k in range(n_touched):
        v = touched[k]
        dist[v] = np.inf
        pos[v] = UNSEEN


@njit(cache=True)
def trace(pred, node, max_len):
    """Predecessor chain from ``node`` back to a source-attached node, source end first."""
    out = np.empty(max_len, dtype=np.int64)
    k = 0
    while node >= 0 and k < max_len:
        out[k] = node
        k += 1
        node = pred[node]
    return out[:k][::-1].copy()


@njit(cache=True)
def sink_values(field, nodes, costs, owner, n_sinks):
    """Evaluate ``min_v field[v] + cost(v, sink)`` for a batch of off-grid sinks."""
    out = np.full(n_sinks, np.inf)
    arg = np.full(n_sinks, -1, dtype=np.int64)
    for k in range(nodes.shape[0]):
        t = owner[k]
        c = field[nodes[k]] + costs[k]
        if c < out[t] or (c == out[t] and arg[t] >= 0 and nodes[k] < arg[t]):
            out[t] = c
            arg[t] = nodes[k]
    return out, arg


@njit(cache=True)
def batch_entries(pts, phi_pts, x0, y0, h, nx, ny, radius, phi):
    """Concatenated terminal entries for many points, tagged with the point index."""
    n = pts.shape[0]
    all_nodes = []
    all_costs = []
    total = 0
    for t in range(n):
        nodes, costs = terminal_entries(pts[t, 0], pts[t, 1], phi_pts[t], x0, y0, h, nx, ny, radius, phi)
        all_nodes.append(nodes)
        all_costs.append(costs)
        total += nodes.shape[0]
    out_nodes = np.empty(total, dtype=np.int64)
    out_costs = np.empty(total, dtype=np.float64)
    owner = np.empty(total, dtype=np.int64)
    k = 0
    for t in range(n):
        m = all_nodes[t].shape[0]
        out_nodes[k:k + m] = all_nodes[t]
        out_costs[k:k + m] = all_costs[t]
        owner[k:k + m] = t
        k += m
    return out_nodes, out_costs, owner


@njit(cache=True, nogil=True)
def pair_batch(xs, ys, phi_x, phi_y, direct, x0, y0, h, nx, ny, radius, phi, di, dj,
               dist, pred, pos, heap, mark, touched):
    """Point-to-point distances for independent pairs, each an early-stopped run.

    ``direct[p]`` is the cost of the straight x-y connection (inf if absent).
    """
    n = xs.shape[0]
    out = np.empty(n)
    for p in range(n):
        sn, sc = terminal_entries(xs[p, 0], xs[p, 1], phi_x[p], x0, y0, h, nx, ny, radius, phi)
        tn, tc = terminal_entries(ys[p, 0], ys[p, 1], phi_y[p], x0, y0, h, nx, ny, radius, phi)
        owner = np.zeros(tn.shape[0], dtype=np.int64)
        best = np.full(1, direct[p])
        best_node = np.full(1, -1, dtype=np.int64)
        nt = run(nx, ny, h, phi, di, dj, sn, sc, tn, tc, owner, best, best_node,
                 dist, pred, pos, heap, mark, touched)
        reset(dist, pos, touched, nt)
        out[p] = best[0]
    return out
