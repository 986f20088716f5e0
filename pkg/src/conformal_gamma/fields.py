"""Real-valued fields on planar domains: closed-form or grid-sampled."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import as_points


class ScalarField:
    """Vectorised ``Point -> real``.

    ``fn`` receives an ``(n, 2)`` array and returns ``n`` values. ``tag`` is a
    short human-readable description carried into reports.
    """

    def __init__(self, fn, tag: str = "field"):
        self._fn = fn
        self.tag = tag

    def __call__(self, pts) -> np.ndarray:
        p = as_points(pts)
        out = np.asarray(self._fn(p), dtype=float)
        if out.shape == ():
            out = np.full(p.shape[0], float(out))
        return out

    def value(self, p) -> float:
        return float(self(p)[0])

    def __repr__(self):
        return f"ScalarField({self.tag})"

    @classmethod
    def constant(cls, c: float) -> ScalarField:
        c = float(c)
        return cls(lambda p: np.full(p.shape[0], c), tag=f"constant {c:g}")

    @classmethod
    def coordinate(cls, axis: int, scale: float = 1.0) -> ScalarField:
        return cls(lambda p: scale * p[:, axis], tag=f"{scale:g}*x{axis + 1}")

    def scaled(self, c: float) -> ScalarField:
        return ScalarField(lambda p: c * self(p), tag=f"{c:g}*({self.tag})")

    def plus(self, c: float) -> ScalarField:
        return ScalarField(lambda p: self(p) + c, tag=f"({self.tag})+{c:g}")


def distance_to(d, y0, tag: str | None = None) -> ScalarField:
    """``x -> d(x, y0)``; uses the oracle's batched field evaluation when it has one."""
    y0 = np.asarray(y0, dtype=float)
    if hasattr(d, "distances_from"):
        fn = lambda p: d.distances_from(y0, p)  # noqa: E731
    else:
        from .metric import pair_distances
        fn = lambda p: pair_distances(d, np.repeat(y0[None, :], p.shape[0], axis=0), p)  # noqa: E731
    return ScalarField(fn, tag=tag or f"d(.,({y0[0]:g},{y0[1]:g}))")


class GridField(ScalarField):
    """Samples on a tensor grid with bilinear interpolation.

    Points outside the sampled box take the value of the nearest edge.
    """

    def __init__(self, x1, x2, values, tag: str = "grid"):
        self.x1 = np.asarray(x1, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.x1.size, self.x2.size):
            raise ValueError(f"values must have shape {(self.x1.size, self.x2.size)}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid field values must be finite")
        self._interp = RegularGridInterpolator((self.x1, self.x2), self.values, method="linear")
        super().__init__(self._eval, tag=tag)

    def _eval(self, p):
        q = np.column_stack([np.clip(p[:, 0], self.x1[0], self.x1[-1]),
                             np.clip(p[:, 1], self.x2[0], self.x2[-1])])
        return self._interp(q)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    @classmethod
    def sample(cls, field: ScalarField, x1, x2, tag: str | None = None) -> GridField:
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        vals = field(np.column_stack([X1.ravel(), X2.ravel()])).reshape(X1.shape)
        return cls(x1, x2, vals, tag=tag or field.tag)

    @classmethod
    def read_csv(cls, path) -> GridField:
        """Rows ``x1, x2, value`` covering a full tensor grid; ``#`` lines and a header row are skipped."""
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in rec[:3]])
                except ValueError:
                    if rows:
                        raise
                    continue
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"{path}: expected rows of x1, x2, value")
        x1 = np.unique(arr[:, 0])
        x2 = np.unique(arr[:, 1])
        if x1.size * x2.size != arr.shape[0]:
            raise ValueError(f"{path}: samples do not form a full tensor grid")
        vals = np.empty((x1.size, x2.size))
        vals[np.searchsorted(x1, arr[:, 0]), np.searchsorted(x2, arr[:, 1])] = arr[:, 2]
        return cls(x1, x2, vals, tag=f"grid:{Path(path).name}")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "value"])
            for i, a in enumerate(self.x1):
                for j, b in enumerate(self.x2):
                    w.writerow([repr(float(a)), repr(float(b)), repr(float(self.values[i, j]))])
