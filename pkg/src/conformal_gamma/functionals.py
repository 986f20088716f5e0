"""Energy J_d on atomic measures, the Lipschitz indicator F_d, inf-convolution and McShane gaps."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField
from .geometry import Domain, as_points
from .metric import pair_distances
from .sampling import lattice_neighbor_pairs, sample_pairs


class DiscreteMeasure:
    """Finite nonnegative atomic measure on pairs of points.

    ``xs[k], ys[k]`` is the k-th atom and ``w[k] >= 0`` its weight.
    """

    def __init__(self, xs=None, ys=None, w=None):
        if xs is None:
            xs, ys, w = np.empty((0, 2)), np.empty((0, 2)), np.empty(0)
        self.xs = as_points(xs).copy() if len(xs) else np.empty((0, 2))
        self.ys = as_points(ys).copy() if len(ys) else np.empty((0, 2))
        self.w = np.asarray(w, dtype=float).ravel().copy()
        if not (self.xs.shape == self.ys.shape and self.xs.shape[0] == self.w.shape[0]):
            raise ValueError("atoms and weights must have matching lengths")
        if np.any(self.w < 0) or not np.all(np.isfinite(self.w)):
            raise ValueError("measure weights must be finite and nonnegative")
        for a in (self.xs, self.ys, self.w):
            a.flags.writeable = False

    @classmethod
    def dirac(cls, x, y, weight: float = 1.0) -> DiscreteMeasure:
        return cls(as_points(x), as_points(y), [weight])

    def __len__(self):
        return self.w.shape[0]

    def __repr__(self):
        return f"DiscreteMeasure({len(self)} atoms, mass={self.mass:g})"

    @property
    def mass(self) -> float:
        return float(self.w.sum())

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure(np.vstack([self.xs, other.xs]), np.vstack([self.ys, other.ys]),
                               np.concatenate([self.w, other.w]))

    def scaled(self, c: float) -> DiscreteMeasure:
        return DiscreteMeasure(self.xs, self.ys, c * self.w)

    def check(self, domain: Domain | None, closed: bool = False):
        if domain is not None and len(self):
            domain.check(self.xs, closed=closed, what="atom")
            domain.check(self.ys, closed=closed, what="atom")

    def to_json(self) -> str:
        """Rows ``[x.x1, x.x2, y.x1, y.x2, w]``."""
        rows = [[float(a[0]), float(a[1]), float(b[0]), float(b[1]), float(w)]
                for a, b, w in zip(self.xs, self.ys, self.w)]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> DiscreteMeasure:
        rows = json.loads(text)
        if not rows:
            return cls()
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 5:
            raise ValueError("measure JSON must be a list of [x1, x2, y1, y2, w] rows")
        return cls(arr[:, 0:2], arr[:, 2:4], arr[:, 4])


def eval_J(d, mu: DiscreteMeasure) -> float:
    """``sum_k w_k d(x_k, y_k)``."""
    if len(mu) == 0:
        return 0.0
    mu.check(getattr(d, "domain", None), closed=getattr(d, "closed_domain", False))
    return float(np.dot(mu.w, pair_distances(d, mu.xs, mu.ys)))


def default_pairs(domain: Domain, points_per_side: int = 17, far_pairs: int = 256, seed: int = 0,
                  margin: float | None = None):
    """Lattice-neighbour pairs of a shrunken copy of ``domain`` plus low-discrepancy far pairs."""
    if margin is None:
        margin = 0.5 * min(domain.widths) / points_per_side
    inner = domain.shrink(margin)
    nx, ny = lattice_neighbor_pairs(points_per_side, inner)
    fx, fy = sample_pairs(domain, far_pairs, seed=seed)
    return np.vstack([nx, fx]), np.vstack([ny, fy])


@dataclass
class LipschitzEstimate:
    value: float
    witness: tuple | None
    n_pairs: int

    def __float__(self):
        return float(self.value)


def lipschitz_constant(u: ScalarField, d, pairs) -> LipschitzEstimate:
    """Sampled lower bound ``max |u(x) - u(y)| / d(x, y)`` with the pair attaining it.

    The witness is oriented so that ``u(x) - u(y) > 0``.
    """
    xs, ys = (as_points(p) for p in pairs)
    if xs.shape[0] == 0:
        raise ValueError("empty pair set")
    dist = pair_distances(d, xs, ys)
    if np.any(dist <= 0):
        raise ValueError("pairs must be distinct points with positive distance")
    both = u(np.vstack([xs, ys]))
    diff = both[:xs.shape[0]] - both[xs.shape[0]:]
    ratio = np.abs(diff) / dist
    k = int(np.argmax(ratio))
    val = float(ratio[k])
    if val == 0:
        return LipschitzEstimate(0.0, None, xs.shape[0])
    a, b = (xs[k], ys[k]) if diff[k] > 0 else (ys[k], xs[k])
    return LipschitzEstimate(val, (tuple(map(float, a)), tuple(map(float, b))), xs.shape[0])


@dataclass
class FResult:
    value: float
    lipschitz: float
    tol: float
    witness: tuple | None = None
    n_pairs: int = 0

    @property
    def finite(self) -> bool:
        return self.value == 0.0

    def to_dict(self) -> dict:
        return {"value": "inf" if np.isinf(self.value) else self.value, "lipschitz": self.lipschitz,
                "tol": self.tol, "witness": [list(p) for p in self.witness] if self.witness else None,
                "n_pairs": self.n_pairs}


def eval_F(d, u: ScalarField, pairs, tol: float = 1e-9) -> FResult:
    """0 when the sampled Lipschitz constant is at most ``1 + tol``, otherwise inf with a witness pair."""
    est = lipschitz_constant(u, d, pairs)
    if est.value <= 1 + tol:
        return FResult(0.0, est.value, tol, None, est.n_pairs)
    return FResult(np.inf, est.value, tol, est.witness, est.n_pairs)


class InfConvolution(ScalarField):
    """``x -> min_k u(y_k) + d(x, y_k)`` over a finite lattice ``y_k``."""

    def __init__(self, d, lattice, offsets, tag: str = "inf-convolution"):
        self.d = d
        self.lattice = lattice
        self.offsets = np.asarray(offsets, dtype=float)
        super().__init__(self._eval, tag=tag)

    def _eval(self, p):
        if hasattr(self.d, "inf_convolution_values"):
            return self.d.inf_convolution_values(self.lattice, self.offsets, p)
        m, n = self.lattice.shape[0], p.shape[0]
        dist = pair_distances(self.d, np.repeat(self.lattice, n, axis=0), np.tile(p, (m, 1)))
        return np.min(self.offsets[:, None] + dist.reshape(m, n), axis=0)


def inf_convolution(u: ScalarField, d, lattice) -> InfConvolution:
    """Lattice inf-convolution of ``u`` with the distance ``d``."""
    lattice = as_points(lattice)
    if lattice.shape[0] == 0:
        raise ValueError("empty lattice")
    return InfConvolution(d, lattice.copy(), u(lattice), tag=f"infconv({u.tag})")


def mcshane_gap(d, x, y, generators) -> float:
    """``d(x, y) - max_g |d(x, g) - d(y, g)|`` over the generator points ``g``."""
    g = as_points(generators)
    if g.shape[0] == 0:
        raise ValueError("generators must be nonempty")
    x = as_points(x)
    y = as_points(y)
    n = g.shape[0]
    # generator-major pairs so each d(g, .) is computed the same way whatever the set size
    src = np.repeat(g, 2, axis=0)
    tgt = np.tile(np.vstack([x, y]), (n, 1))
    vals = pair_distances(d, src, tgt).reshape(n, 2)
    best = float(np.max(np.abs(vals[:, 0] - vals[:, 1])))
    dxy = float(pair_distances(d, x, y)[0])
    return dxy - best
