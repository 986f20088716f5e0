"""Grid shortest-path approximation of conformal (weighted Euclidean) distances.

The distance between two points of an open rectangle is the smaller of

* the cheapest path in a 16- (or 8-) neighbour grid graph whose edge weights are
  ``|e| * (phi(u) + phi(v)) / 2``, with the two query points attached to all
  nodes within two (one) grid steps by straight segments, and
* the cost of the straight segment itself, integrated by the trapezoid rule at
  spacing at most ``h / 2``.

The straight segment is admissible because the domain is convex; it removes the
stencil anisotropy along straight geodesics and makes
``w_min |x - y| <= d(x, y) <= w_max |x - y|`` hold exactly.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path

from . import _dijkstra as K
from .fields import ScalarField
from .geometry import Domain, DomainError, as_point, as_points, euclid
from .metric import Curve, RefinementPolicy, curve_length
from .sampling import sample_pairs


CACHE_BYTES = 512 * 2 ** 20


class ConstructionError(ValueError):
    """The solver cannot be built from the given domain, metric and grid step."""


class UnreachableError(RuntimeError):
    """A query terminal has no connection to the graph."""


@dataclass(frozen=True)
class ConformalMetric:
    """Weight ``phi`` with declared bounds ``w_min <= phi <= w_max``."""

    weight: ScalarField
    w_min: float
    w_max: float

    def __post_init__(self):
        if not (0 < self.w_min <= self.w_max and np.isfinite(self.w_max)):
            raise ValueError(f"need 0 < w_min <= w_max, got {self.w_min}, {self.w_max}")

    @classmethod
    def constant(cls, c: float) -> ConformalMetric:
        return cls(ScalarField.constant(c), float(c), float(c))

    @property
    def alpha(self) -> float:
        """Smallest alpha with ``alpha^-1 |x-y| <= d <= alpha |x-y|`` guaranteed by the bounds."""
        return max(self.w_max, 1.0 / self.w_min)

    def scaled(self, c: float) -> ConformalMetric:
        return ConformalMetric(self.weight.scaled(c), c * self.w_min, c * self.w_max)

    def __call__(self, pts) -> np.ndarray:
        return self.weight(pts)


@dataclass(frozen=True)
class ErrorModel:
    """Per-query error allowance of the grid solver.

    ``anisotropy`` is the worst relative overestimate of a straight run by
    stencil moves, ``1 / cos(gap / 2) - 1`` for the largest angular gap of the
    stencil. ``order`` is an empirical convergence order when one was measured.
    """

    anisotropy: float
    h: float
    radius: int
    w_max: float
    order: float | None = None

    def bound(self, x, y) -> float:
        return self.anisotropy * self.w_max * float(euclid(x, y)[0]) + 2 * self.radius * self.h * self.w_max


@dataclass
class _Scratch:
    dist: np.ndarray
    pred: np.ndarray
    pos: np.ndarray
    heap: np.ndarray
    mark: np.ndarray
    touched: np.ndarray


class DistanceSolver:
    """Immutable grid structure answering distance and geodesic queries.

    Queries share one set of scratch arrays guarded by a lock; full
    single-source fields are kept in a small LRU cache and only published
    once complete.
    """

    closed_domain = False

    def __init__(self, domain: Domain, metric: ConformalMetric, h: float,
                 stencil_order: int = 2, straight_shortcut: bool = True, cache_size: int | None = None):
        if not h > 0:
            raise ConstructionError(f"h must be positive, got {h}")
        if stencil_order not in (1, 2):
            raise ConstructionError(f"stencil_order must be 1 or 2, got {stencil_order}")
        w1, w2 = domain.widths
        if min(w1, w2) / h < 8 - 1e-9:
            raise ConstructionError(f"h={h:g} gives fewer than 8 cells per side on {domain.bounds}")
        self.domain = domain
        self.metric = metric
        self.h = float(h)
        self.stencil_order = stencil_order
        self.radius = stencil_order
        self.straight_shortcut = straight_shortcut
        self.nx = int(np.floor(w1 / h - 1e-9))
        self.ny = int(np.floor(w2 / h - 1e-9))
        self.x0 = domain.x1_lo
        self.y0 = domain.x2_lo
        self.di, self.dj = K.stencil_offsets(stencil_order)
        self.phi = self._sample_weight()
        lo, hi = float(self.phi.min()), float(self.phi.max())
        slack = 1e-12 * max(1.0, metric.w_max)
        if lo < metric.w_min - slack or hi > metric.w_max + slack:
            raise ConstructionError(
                f"weight samples [{lo:.6g}, {hi:.6g}] outside declared bounds [{metric.w_min}, {metric.w_max}]")
        if not lo > 0:
            raise ConstructionError("weight must be positive")
        gap = K.max_angular_gap(stencil_order)
        self.error_model = ErrorModel(1.0 / np.cos(gap / 2) - 1.0, self.h, self.radius, metric.w_max)
        self._scratch: _Scratch | None = None
        self._lock = threading.RLock()
        self._cache: OrderedDict = OrderedDict()
        if cache_size is None:
            # fields plus predecessors cost 12 bytes per node
            cache_size = int(np.clip(CACHE_BYTES // (12 * self.n_nodes), 2, 64))
        self._cache_size = cache_size

    def __repr__(self):
        return (f"DistanceSolver(h={self.h:g}, nodes={self.nx}x{self.ny}, "
                f"stencil={self.stencil_order}, weight={self.metric.weight.tag})")

    # grid ---------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def alpha(self) -> float:
        return self.metric.alpha

    def node_coords(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        i = nodes % self.nx
        j = nodes // self.nx
        return np.column_stack([self.x0 + (i + 1) * self.h, self.y0 + (j + 1) * self.h])

    def grid_axes(self):
        return (self.x0 + self.h * np.arange(1, self.nx + 1),
                self.y0 + self.h * np.arange(1, self.ny + 1))

    def _sample_weight(self) -> np.ndarray:
        g1, g2 = self.grid_axes()
        phi = np.empty(self.nx * self.ny)
        rows = max(1, 2_000_000 // self.nx)
        for j0 in range(0, self.ny, rows):
            j1 = min(self.ny, j0 + rows)
            X1, X2 = np.meshgrid(g1, g2[j0:j1])
            phi[j0 * self.nx:j1 * self.nx] = self.metric(np.column_stack([X1.ravel(), X2.ravel()]))
        return phi

    def edges(self):
        """All directed stencil edges ``(u, v, weight)``; meant for small grids."""
        us, vs, ws = [], [], []
        idx = np.arange(self.n_nodes)
        i, j = idx % self.nx, idx // self.nx
        for a, b in zip(self.di, self.dj):
            ok = (i + a >= 0) & (i + a < self.nx) & (j + b >= 0) & (j + b < self.ny)
            u = idx[ok]
            v = (j[ok] + b) * self.nx + i[ok] + a
            us.append(u)
            vs.append(v)
            ws.append(self.h * np.hypot(a, b) * 0.5 * (self.phi[u] + self.phi[v]))
        return np.concatenate(us), np.concatenate(vs), np.concatenate(ws)

    def is_node(self, pts) -> np.ndarray:
        p = as_points(pts)
        fi = (p[:, 0] - self.x0) / self.h - 1
        fj = (p[:, 1] - self.y0) / self.h - 1
        ri, rj = np.floor(fi + 0.5), np.floor(fj + 0.5)
        return ((np.abs(fi - ri) <= 1e-9) & (np.abs(fj - rj) <= 1e-9)
                & (ri >= 0) & (ri < self.nx) & (rj >= 0) & (rj < self.ny))

    def scaled(self, c: float) -> DistanceSolver:
        """Same grid with weight ``c * phi``."""
        return DistanceSolver(self.domain, self.metric.scaled(c), self.h, self.stencil_order,
                              self.straight_shortcut, self._cache_size)

    # scratch and caches --------------------------------------------------

    def _work(self) -> _Scratch:
        if self._scratch is None:
            n = self.n_nodes
            self._scratch = _Scratch(
                dist=np.full(n, np.inf), pred=np.full(n, -1, dtype=np.int32),
                pos=np.full(n, K.UNSEEN, dtype=np.int32), heap=np.empty(n, dtype=np.int32),
                mark=np.zeros(n, dtype=np.int8), touched=np.empty(n, dtype=np.int32))
        return self._scratch

    def release(self):
        """Drop scratch arrays and cached fields."""
        with self._lock:
            self._scratch = None
            self._cache.clear()

    def _check(self, pts, what="point") -> np.ndarray:
        return self.domain.check(pts, closed=False, what=what)

    def _entries(self, p):
        p = as_point(p)
        return K.terminal_entries(p.x1, p.x2, float(self.metric(p)[0]), self.x0, self.y0,
                                  self.h, self.nx, self.ny, self.radius, self.phi)

    def _batch_entries(self, pts):
        pts = as_points(pts)
        return K.batch_entries(pts, self.metric(pts), self.x0, self.y0, self.h,
                               self.nx, self.ny, self.radius, self.phi)

    def segment_costs(self, xs, ys) -> np.ndarray:
        """Trapezoid-rule cost of the straight segments ``xs[k] -> ys[k]``."""
        xs = as_points(xs)
        ys = as_points(ys)
        # canonical orientation keeps the result bitwise symmetric
        swap = (xs[:, 0] > ys[:, 0]) | ((xs[:, 0] == ys[:, 0]) & (xs[:, 1] > ys[:, 1]))
        a = np.where(swap[:, None], ys, xs)
        b = np.where(swap[:, None], xs, ys)
        length = euclid(a, b)
        out = np.zeros(len(length))
        m = np.maximum(1, np.ceil(length / (0.5 * self.h)).astype(np.int64))
        chunk_start = 0
        budget = 4_000_000
        while chunk_start < len(m):
            stop = chunk_start
            total = 0
            while stop < len(m) and (total + m[stop] + 1 <= budget or stop == chunk_start):
                total += m[stop] + 1
                stop += 1
            sl = slice(chunk_start, stop)
            mm = m[sl]
            counts = mm + 1
            owner = np.repeat(np.arange(len(mm)), counts)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            k = np.arange(counts.sum()) - np.repeat(starts, counts)
            s = k / np.repeat(mm, counts)
            pa, pb = a[sl][owner], b[sl][owner]
            vals = self.metric(pa + s[:, None] * (pb - pa))
            wts = np.where((k == 0) | (k == np.repeat(mm, counts)), 0.5, 1.0)
            sums = np.bincount(owner, weights=vals * wts, minlength=len(mm))
            out[sl] = length[sl] * sums / mm
            chunk_start = stop
        return out

    def _direct(self, xs, ys) -> np.ndarray:
        """Cost of the straight connection each pair may use without the graph."""
        xs = as_points(xs)
        ys = as_points(ys)
        if self.straight_shortcut:
            return self.segment_costs(xs, ys)
        out = np.full(xs.shape[0], np.inf)
        reach = self.radius * self.h * (1 + 1e-12)
        near = (np.abs(xs - ys) <= reach).all(axis=1) & ~(self.is_node(xs) & self.is_node(ys))
        if near.any():
            phx = self.metric(xs[near])
            phy = self.metric(ys[near])
            out[near] = euclid(xs[near], ys[near]) * 0.5 * (phx + phy)
        return out

    def distance_field(self, x):
        """Graph distances from ``x`` to every node, with predecessors; cached."""
        x = as_point(self._check(x)[0])
        key = (x.x1, x.x2)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
            w = self._work()
            sn, sc = self._entries(x)
            e = np.empty(0, dtype=np.int64)
            nt = K.run(self.nx, self.ny, self.h, self.phi, self.di, self.dj, sn, sc,
                       e, np.empty(0), e, np.empty(0), e,
                       w.dist, w.pred, w.pos, w.heap, w.mark, w.touched)
            field_ = w.dist.copy()
            pred = w.pred.copy()
            K.reset(w.dist, w.pos, w.touched, nt)
            field_.flags.writeable = False
            pred.flags.writeable = False
            entry = (field_, pred)
            if self._cache_size > 0:
                self._cache[key] = entry
                while len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
            return entry

    # queries --------------------------------------------------------------

    def distance(self, x, y) -> float:
        return float(self.pair_distances([as_point(x)], [as_point(y)])[0])

    def distances_from(self, x, ys) -> np.ndarray:
        """``d(x, y)`` for many ``y`` from one shortest-path field."""
        ys = self._check(ys)
        x = self._check(x)[0]
        fld, _ = self.distance_field(x)
        nodes, costs, owner = self._batch_entries(ys)
        vals, _ = K.sink_values(fld, nodes, costs, owner, ys.shape[0])
        direct = self._direct(np.repeat(x[None, :], ys.shape[0], axis=0), ys)
        out = np.minimum(vals, direct)
        if not np.all(np.isfinite(out)):
            raise UnreachableError("a target is not connected to the grid; refine h")
        return out

    def _run_cost(self, xs, ys) -> np.ndarray:
        """Rough node count settled by an early-stopped run from ``xs[k]`` to ``ys[k]``."""
        rho = self.metric.w_max / self.metric.w_min
        r = rho * euclid(xs, ys) / self.h + 2 * self.radius
        return np.minimum(np.pi * r * r, self.n_nodes)

    def pair_distances(self, xs, ys) -> np.ndarray:
        """Distances for many pairs.

        Pairs sharing a source use one full field when that is cheaper than
        separate early-stopped runs; results do not depend on the choice
        beyond floating-point summation order.
        """
        xs = self._check(xs)
        ys = self._check(ys)
        if xs.shape != ys.shape:
            raise ValueError("xs and ys must have the same shape")
        out = np.empty(xs.shape[0])
        keys, inverse = np.unique(xs, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        cost = self._run_cost(xs, ys)
        group_cost = np.bincount(inverse, weights=cost, minlength=len(keys))
        local = np.zeros(xs.shape[0], dtype=bool)
        for g, key in enumerate(keys):
            rows = np.nonzero(inverse == g)[0]
            if group_cost[g] > self.n_nodes or (float(key[0]), float(key[1])) in self._cache:
                out[rows] = self.distances_from(key, ys[rows])
            else:
                local[rows] = True
        if local.any():
            xl, yl = xs[local], ys[local]
            direct = self._direct(xl, yl)
            with self._lock:
                w = self._work()
                vals = K.pair_batch(xl, yl, self.metric(xl), self.metric(yl), direct,
                                    self.x0, self.y0, self.h, self.nx, self.ny, self.radius,
                                    self.phi, self.di, self.dj,
                                    w.dist, w.pred, w.pos, w.heap, w.mark, w.touched)
            out[local] = vals
        if not np.all(np.isfinite(out)):
            raise UnreachableError("a query pair is not connected through the grid; refine h")
        return out

    def geodesic(self, x, y, max_samples: int = 65) -> Curve:
        """Shortest path as a constant-speed polyline (parameter proportional to cost)."""
        pts = self._check([as_point(x), as_point(y)])
        x, y = pts[0], pts[1]
        if np.array_equal(x, y):
            return Curve.constant(x)
        direct = float(self._direct(x[None, :], y[None, :])[0])
        tn, tc = self._entries(y)
        owner = np.zeros(tn.shape[0], dtype=np.int64)
        key = (float(x[0]), float(x[1]))
        with self._lock:
            if key in self._cache:
                fld, pred = self._cache[key]
                vals, arg = K.sink_values(fld, tn, tc, owner, 1)
                best, node = float(vals[0]), int(arg[0])
                chain = K.trace(pred, node, self.n_nodes) if node >= 0 else None
                costs = fld[chain] if chain is not None else None
            else:
                w = self._work()
                sn, sc = self._entries(x)
                best_a = np.full(1, np.inf)
                node_a = np.full(1, -1, dtype=np.int64)
                nt = K.run(self.nx, self.ny, self.h, self.phi, self.di, self.dj, sn, sc,
                           tn, tc, owner, best_a, node_a,
                           w.dist, w.pred, w.pos, w.heap, w.mark, w.touched)
                best, node = float(best_a[0]), int(node_a[0])
                chain = K.trace(w.pred, node, self.n_nodes) if node >= 0 else None
                costs = w.dist[chain].copy() if chain is not None else None
                K.reset(w.dist, w.pos, w.touched, nt)
        if direct <= best:
            return self._segment_curve(x, y, max_samples)
        if not np.isfinite(best):
            raise UnreachableError("target not reachable; refine h")
        path = np.vstack([x[None, :], self.node_coords(chain), y[None, :]])
        cum = np.concatenate([[0.0], costs, [best]])
        keep = np.concatenate([[True], np.diff(cum) > 0])
        keep[-1] = True
        path, cum = path[keep], cum[keep]
        if cum.shape[0] >= 2 and cum[-2] == cum[-1]:
            path, cum = np.delete(path, -2, axis=0), np.delete(cum, -2)
        return Curve(cum / cum[-1], path)

    def _segment_curve(self, x, y, max_samples: int) -> Curve:
        n = int(min(max_samples, max(2, np.ceil(float(euclid(x, y)[0]) / self.h) + 1)))
        s = np.linspace(0.0, 1.0, n)
        pts = x[None, :] + s[:, None] * (y - x)[None, :]
        if n == 2:
            return Curve(s, pts)
        piece = self.segment_costs(pts[:-1], pts[1:])
        cum = np.concatenate([[0.0], np.cumsum(piece)])
        return Curve(cum / cum[-1], pts)

    def inf_convolution_values(self, centers, offsets, pts) -> np.ndarray:
        """``min_k offsets[k] + d(pts, centers[k])`` via one multi-source run."""
        centers = self._check(centers, what="lattice point")
        pts = self._check(pts)
        offsets = np.asarray(offsets, dtype=float)
        if centers.shape[0] == 0:
            raise ValueError("empty lattice")
        base = float(offsets.min())
        nodes, costs, owner = self._batch_entries(centers)
        src_costs = costs + (offsets - base)[owner]
        with self._lock:
            w = self._work()
            e = np.empty(0, dtype=np.int64)
            nt = K.run(self.nx, self.ny, self.h, self.phi, self.di, self.dj, nodes, src_costs,
                       e, np.empty(0), e, np.empty(0), e,
                       w.dist, w.pred, w.pos, w.heap, w.mark, w.touched)
            fld = w.dist.copy()
            K.reset(w.dist, w.pos, w.touched, nt)
        tn, tc, towner = self._batch_entries(pts)
        vals, _ = K.sink_values(fld, tn, tc, towner, pts.shape[0])
        vals = vals + base
        # straight or local connections from every centre; w_min |x - y| bounds
        # a connection's cost from below, so most of them need not be evaluated
        ci = np.repeat(np.arange(centers.shape[0]), pts.shape[0])
        pj = np.tile(np.arange(pts.shape[0]), centers.shape[0])
        lower = offsets[ci] + self.metric.w_min * euclid(centers[ci], pts[pj]) * (1 - 1e-12)
        cand = lower < vals[pj]
        ci, pj = ci[cand], pj[cand]
        out = vals.copy()
        if ci.size:
            direct = self._direct(centers[ci], pts[pj]) + offsets[ci]
            np.minimum.at(out, pj, direct)
        return out


def build_solver(domain: Domain, metric: ConformalMetric, h: float, stencil_order: int = 2,
                 **kw) -> DistanceSolver:
    return DistanceSolver(domain, metric, h, stencil_order, **kw)


@dataclass
class ExtensionResult:
    value: float
    converged: bool
    shifts: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def extend_closure(solver: DistanceSolver, x, y, levels: int = 12, tol: float = 1e-9) -> ExtensionResult:
    """Continuous extension of the distance to the closed rectangle.

    Boundary points are pushed inward by ``h / 2**m`` for ``m = 0..levels-1``;
    the last value is returned and the sequence is checked against the
    Cauchy modulus ``2 * alpha * sqrt(2) * shift``.
    """
    pts = solver.domain.check([as_point(x), as_point(y)], closed=True)
    if solver.domain.contains(pts).all():
        v = solver.distance(pts[0], pts[1])
        return ExtensionResult(v, True, [0.0], [v])
    alpha = solver.alpha
    shifts = [solver.h * 2.0 ** -m for m in range(levels)]
    values = []
    for s in shifts:
        q = solver.domain.clamp_inward(pts, s)
        values.append(solver.distance(q[0], q[1]))
    converged = True
    for k in range(1, len(values)):
        if abs(values[k] - values[k - 1]) > 2 * alpha * np.sqrt(2) * shifts[k - 1] + tol:
            converged = False
    return ExtensionResult(values[-1], converged, shifts, values)


@dataclass
class MembershipReport:
    alpha: float
    tol: float
    n_pairs: int
    max_violation: float
    max_relative_violation: float
    worst_pair: tuple | None
    length_gap: float
    length_gap_allowed: float
    length_pairs: int
    bounds_ok: bool
    length_ok: bool
    closure_shift: float = 0.0
    # sampled pairs and their distances, kept for follow-up audits
    xs: np.ndarray | None = field(default=None, repr=False)
    ys: np.ndarray | None = field(default=None, repr=False)
    distances: np.ndarray | None = field(default=None, repr=False)
    raw_distances: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.bounds_ok and self.length_ok

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("xs", "ys", "distances", "raw_distances")}
        d["worst_pair"] = [list(map(float, p)) for p in self.worst_pair] if self.worst_pair else None
        d["passed"] = self.passed
        return d


def sample_closure(solver: DistanceSolver, xs, ys, d):
    """Shortest-path metric of the grid augmented with the sample points.

    Vertices are the distinct points of ``xs`` and ``ys``. Each sampled pair is
    an edge of length ``d`` (its per-query value) and every pair of points is
    joined by its direct edge (the straight-segment cost in shortcut mode). The
    result is an exact metric on the sample, at most the per-query values, so
    triangle and equi-Lipschitz inequalities hold on sampled points without the
    stencil anisotropy. Returns ``(points, matrix, closed pair values)``.
    """
    xs, ys = as_points(xs), as_points(ys)
    pts, inv = np.unique(np.vstack([xs, ys]), axis=0, return_inverse=True)
    inv = inv.ravel()
    ix, iy = inv[:len(xs)], inv[len(xs):]
    m = len(pts)
    a, b = np.triu_indices(m, 1)
    W = np.full((m, m), np.inf)
    W[a, b] = solver._direct(pts[a], pts[b])
    off = ix != iy
    lo, hi = np.minimum(ix, iy)[off], np.maximum(ix, iy)[off]
    np.minimum.at(W, (lo, hi), np.asarray(d, dtype=float)[off])
    W = np.minimum(W, W.T)
    # dense input: inf marks a missing edge
    M = shortest_path(W, method="FW", directed=False)
    return pts, M, M[ix, iy]


def validate_membership(solver: DistanceSolver, alpha: float, pair_samples: int = 512, tol: float = 1e-6,
                        seed: int = 0, length_pairs: int = 64,
                        policy: RefinementPolicy | None = None, ratio: int = 8,
                        closure: bool = True) -> MembershipReport:
    """Sampled audit of ``solver`` as a member of the class with constant ``alpha``.

    Checks ``alpha^-1 |x-y| <= d(x,y) <= alpha |x-y|`` (relative tolerance
    ``tol``) on low-discrepancy pairs and the length property
    ``|d(x,y) - L_d(geodesic)| <= 2 * grid error`` on the first ``length_pairs``.
    Pairs come from ``ratio``-times more targets than sources, so each source
    costs one shortest-path field. With ``closure`` the reported distances are
    the :func:`sample_closure` values; bounds are checked on both those and
    the per-query values, the length property on the per-query values that
    the traced geodesics realize.
    """
    if not alpha > 1:
        raise ValueError("alpha must be > 1")
    xs, ys = sample_pairs(solver.domain, pair_samples, seed=seed, ratio=ratio)
    D = euclid(xs, ys)
    d = np.empty(len(xs))
    policy = policy or RefinementPolicy(stop_tol=1e-6, max_levels=3)
    m = min(length_pairs, len(xs))
    gap = 0.0
    allowed_min = np.inf
    length_ok = True
    _, first, inverse = np.unique(xs, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # one source at a time, so geodesics are traced while its field is cached
    for g in np.argsort(first):
        rows = np.nonzero(inverse == g)[0]
        d[rows] = solver.pair_distances(xs[rows], ys[rows])
        for i in rows[rows < m]:
            geo = solver.geodesic(xs[i], ys[i])
            L = curve_length(solver, geo, policy).value
            allowed = 2 * solver.error_model.bound(xs[i], ys[i])
            gap = max(gap, abs(d[i] - L))
            allowed_min = min(allowed_min, allowed)
            if abs(d[i] - L) > allowed:
                length_ok = False
    closed = sample_closure(solver, xs, ys, d)[2] if closure and len(xs) else d
    lo_d, hi_d = np.minimum(d, closed), np.maximum(d, closed)
    viol = np.maximum.reduce([hi_d - alpha * D, D / alpha - lo_d, np.zeros_like(d)])
    rel = viol / np.maximum(D, 1e-300)
    k = int(np.argmax(rel)) if len(rel) else 0
    worst = (tuple(xs[k]), tuple(ys[k])) if len(rel) and viol[k] > 0 else None
    max_rel = float(rel.max()) if len(rel) else 0.0
    return MembershipReport(
        alpha=alpha, tol=tol, n_pairs=len(xs), max_violation=float(viol.max()) if len(viol) else 0.0,
        max_relative_violation=max_rel, worst_pair=worst, length_gap=float(gap),
        length_gap_allowed=float(allowed_min) if m else 0.0, length_pairs=m,
        bounds_ok=max_rel <= tol, length_ok=length_ok,
        closure_shift=float(np.max(d - closed)) if len(d) else 0.0,
        xs=xs, ys=ys, distances=closed, raw_distances=d)


def equi_lipschitz_violation(xs, ys, d, alpha: float, n_quads: int = 1024, seed: int = 0) -> tuple[float, int]:
    """Largest ``|d(x,y) - d(x',y')| - alpha (|x-x'| + |y-y'|)`` over sampled pairs of sampled pairs.

    Returns the violation (negative when the bound holds with room) and the
    number of quadruples checked.
    """
    xs, ys, d = as_points(xs), as_points(ys), np.asarray(d, dtype=float)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(d), n_quads)
    j = (i + rng.integers(1, len(d), n_quads)) % len(d)
    lhs = np.abs(d[i] - d[j])
    rhs = alpha * (euclid(xs[i], xs[j]) + euclid(ys[i], ys[j]))
    return float(np.max(lhs - rhs)), n_quads


def grid_convergence(domain: Domain, metric: ConformalMetric, hs, x, y, stencil_order: int = 2):
    """Distances ``d_h(x, y)`` for each ``h`` and the empirical order from successive changes."""
    vals = []
    for h in hs:
        s = DistanceSolver(domain, metric, h, stencil_order, cache_size=0)
        vals.append(s.distance(x, y))
        s.release()
    vals = np.array(vals)
    diffs = np.abs(np.diff(vals))
    orders = []
    for k in range(1, len(diffs)):
        if diffs[k] > 0 and diffs[k - 1] > 0:
            orders.append(float(np.log2(diffs[k - 1] / diffs[k])))
    return vals, diffs, orders
