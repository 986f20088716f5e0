"""Curves, distance oracles and the partition-supremum length functional.

A distance oracle is anything with a ``distance(x, y)`` method and an
optional ``domain``. Oracles may also provide a vectorised
``pair_distances(xs, ys)`` and a ``geodesic(x, y)``; the helpers below fall
back to loops or straight segments when they do not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .geometry import Domain, as_point, as_points, euclid

NEG_CLAMP = 1e-12


@runtime_checkable
class DistanceOracle(Protocol):
    domain: Domain | None

    def distance(self, x, y) -> float: ...


def pair_distances(d, xs, ys) -> np.ndarray:
    """Distances ``d(xs[k], ys[k])`` for every k, batched when the oracle allows."""
    xs = as_points(xs)
    ys = as_points(ys)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same shape")
    if hasattr(d, "pair_distances"):
        return np.asarray(d.pair_distances(xs, ys), dtype=float)
    return np.array([d.distance(x, y) for x, y in zip(xs, ys)], dtype=float)


def oracle_geodesic(d, x, y) -> Curve:
    if hasattr(d, "geodesic"):
        return d.geodesic(x, y)
    return Curve.segment(x, y)


class EuclideanOracle:
    """``scale * |x - y|``, optionally restricted to a domain."""

    def __init__(self, scale: float = 1.0, domain: Domain | None = None):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)
        self.domain = domain

    def distance(self, x, y) -> float:
        return float(self.pair_distances(x, y)[0])

    def pair_distances(self, xs, ys) -> np.ndarray:
        if self.domain is not None:
            self.domain.check(xs, closed=True)
            self.domain.check(ys, closed=True)
        return self.scale * euclid(xs, ys)

    def geodesic(self, x, y) -> Curve:
        return Curve.segment(x, y)

    def __repr__(self):
        return f"EuclideanOracle(scale={self.scale})"


class FunctionOracle:
    """Wrap a plain ``f(x, y) -> float``."""

    def __init__(self, fn, domain: Domain | None = None):
        self.fn = fn
        self.domain = domain

    def distance(self, x, y) -> float:
        if self.domain is not None:
            self.domain.check([x, y], closed=True)
        return float(self.fn(as_point(x), as_point(y)))


@dataclass(frozen=True, eq=False)
class Curve:
    """Polyline on [0, 1], linear in the parameter between samples."""

    t: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).ravel()
        p = as_points(self.points).copy()
        if t.shape[0] != p.shape[0]:
            raise ValueError("t and points must have the same length")
        if t.shape[0] < 2:
            raise ValueError("a curve needs at least 2 samples")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("curve parameters must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise ValueError("curve parameters must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("curve points must be finite")
        t.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", p)

    @classmethod
    def polyline(cls, points, t=None) -> Curve:
        """Polyline through ``points``; uniform parameters unless ``t`` is given."""
        p = as_points(points)
        if t is None:
            t = np.linspace(0.0, 1.0, p.shape[0])
        return cls(t, p)

    @classmethod
    def segment(cls, x, y) -> Curve:
        return cls(np.array([0.0, 1.0]), np.array([as_point(x), as_point(y)]))

    @classmethod
    def constant(cls, p) -> Curve:
        return cls.segment(p, p)

    @classmethod
    def from_function(cls, fn, n: int) -> Curve:
        t = np.linspace(0.0, 1.0, n)
        return cls(t, np.array([as_point(fn(s)) for s in t]))

    def __len__(self):
        return self.t.shape[0]

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x1 = np.interp(s, self.t, self.points[:, 0])
        x2 = np.interp(s, self.t, self.points[:, 1])
        return np.stack([x1, x2], axis=-1)

    @property
    def start(self):
        return as_point(self.points[0])

    @property
    def end(self):
        return as_point(self.points[-1])

    def restrict(self, a: float, b: float) -> Curve:
        """``s -> gamma(a + s (b - a))`` as a curve on [0, 1]."""
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"need 0 <= a < b <= 1, got {a}, {b}")
        inner = (self.t > a) & (self.t < b)
        t = np.concatenate([[a], self.t[inner], [b]])
        p = self(t)
        return Curve((t - a) / (b - a), p)

    def euclidean_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))

    def lipschitz_constant(self) -> float:
        """Euclidean Lipschitz constant in the parameter (max segment speed)."""
        seg = np.hypot(*np.diff(self.points, axis=0).T)
        return float(np.max(seg / np.diff(self.t)))

    def refined(self, per_segment: int) -> np.ndarray:
        """Parameters of the partition splitting every sample interval into ``per_segment`` parts."""
        frac = np.arange(per_segment) / per_segment
        t = (self.t[:-1, None] + np.diff(self.t)[:, None] * frac[None, :]).ravel()
        return np.concatenate([t, [1.0]])

    def to_json(self) -> str:
        rows = [[float(t), float(p[0]), float(p[1])] for t, p in zip(self.t, self.points)]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> Curve:
        rows = np.asarray(json.loads(text), dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise ValueError("curve JSON must be a list of [t, x1, x2] triples")
        return cls(rows[:, 0], rows[:, 1:])


@dataclass(frozen=True)
class RefinementPolicy:
    """Dyadic refinement of a curve's own sample grid.

    Level ``L`` splits every sample interval into ``initial_partition_size * 2**L``
    equal parameter steps. Refinement stops once the increment between two
    successive levels drops below ``stop_tol`` (and at least ``min_levels``
    refinements were made) or after ``max_levels`` levels.
    """

    initial_partition_size: int = 1
    stop_tol: float = 1e-4
    max_levels: int = 12
    min_levels: int = 0

    def __post_init__(self):
        if self.initial_partition_size < 1:
            raise ValueError("initial_partition_size must be >= 1")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be > 0")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.min_levels < 0:
            raise ValueError("min_levels must be >= 0")


@dataclass
class LengthResult:
    value: float
    converged: bool
    levels: int
    history: list[float] = field(default_factory=list)
    # chord values of the finest evaluated partition, with its parameters
    partition: np.ndarray | None = field(default=None, repr=False)
    chords: np.ndarray | None = field(default=None, repr=False)

    def __float__(self):
        return float(self.value)


def partition_sum(d, gamma: Curve, t) -> float:
    p = gamma(np.asarray(t, dtype=float))
    return float(np.sum(pair_distances(d, p[:-1], p[1:])))


def _check_on_domain(d, gamma: Curve):
    dom = getattr(d, "domain", None)
    if dom is not None:
        dom.check(gamma.points, closed=getattr(d, "closed_domain", False), what="curve point")


def curve_length(d, gamma: Curve, policy: RefinementPolicy | None = None) -> LengthResult:
    """Supremum of partition sums over dyadic refinements of the sample grid."""
    policy = policy or RefinementPolicy()
    _check_on_domain(d, gamma)
    history = []
    best = -np.inf
    t_best = chords_best = None
    converged = False
    for level in range(policy.max_levels):
        t = gamma.refined(policy.initial_partition_size * 2 ** level)
        p = gamma(t)
        chords = pair_distances(d, p[:-1], p[1:])
        s = float(np.sum(chords))
        history.append(s)
        if s >= best:
            increment = s - best
            best = s
            t_best, chords_best = t, chords
        else:
            increment = 0.0
        if level >= max(1, policy.min_levels) and increment < policy.stop_tol:
            converged = True
            break
    return LengthResult(best, converged, len(history), history, t_best, chords_best)


def constant_speed_reparam(gamma: Curve, d, policy: RefinementPolicy | None = None) -> Curve:
    """Same points and image, parameters proportional to the length travelled.

    Cumulative lengths at the original samples come from the finest partition
    evaluated by :func:`curve_length`; zero-length stretches are collapsed.
    """
    res = curve_length(d, gamma, policy)
    total = res.value
    if total <= 0:
        return Curve.constant(gamma.start)
    cum = np.concatenate([[0.0], np.cumsum(res.chords)])
    at_samples = np.interp(gamma.t, res.partition, cum)
    s = at_samples / at_samples[-1]
    keep = np.concatenate([[True], np.diff(s) > 0])
    keep[-1] = True
    s, pts = s[keep], gamma.points[keep]
    if s.shape[0] >= 2 and s[-2] == 1.0:
        s, pts = np.delete(s, -2), np.delete(pts, -2, axis=0)
    return Curve(s, pts)


def lattice_pairs(m: int, max_pairs: int = 4096) -> tuple[int, np.ndarray]:
    """Dyadic parameter lattice ``k / 2**m`` with at most ``max_pairs`` ordered pairs."""
    while (2 ** m + 1) * 2 ** m // 2 > max_pairs:
        m -= 1
    return m, np.linspace(0.0, 1.0, 2 ** m + 1)


def geodesic_defect(gamma: Curve, d, policy: RefinementPolicy | None = None, lattice_level: int = 6) -> float:
    """Largest sampled ``L_d(gamma|[t, s]) - d(gamma_t, gamma_s)``; a lower bound on the true defect."""
    _check_on_domain(d, gamma)
    _, grid = lattice_pairs(lattice_level)
    piece = np.array([curve_length(d, gamma.restrict(a, b), policy).value
                      for a, b in zip(grid[:-1], grid[1:])])
    cum = np.concatenate([[0.0], np.cumsum(piece)])
    i, j = np.triu_indices(grid.shape[0], k=1)
    pts = gamma(grid)
    chord = pair_distances(d, pts[i], pts[j])
    defect = float(np.max(cum[j] - cum[i] - chord))
    if defect < NEG_CLAMP:
        return 0.0
    return defect
