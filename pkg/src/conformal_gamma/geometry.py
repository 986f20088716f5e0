"""Points and axis-aligned rectangular domains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DomainError(ValueError):
    """A point lies outside the set an operation is defined on."""


class Point(NamedTuple):
    x1: float
    x2: float


def as_point(p) -> Point:
    x1, x2 = (float(v) for v in p)
    if not (np.isfinite(x1) and np.isfinite(x2)):
        raise ValueError(f"non-finite point {p!r}")
    return Point(x1, x2)


def as_points(pts) -> np.ndarray:
    """Coerce a point or a sequence of points to a float array of shape (n, 2)."""
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class Domain:
    """Open rectangle ``(x1_lo, x1_hi) x (x2_lo, x2_hi)``; its closure is used where noted."""

    x1_lo: float = 0.0
    x1_hi: float = 1.0
    x2_lo: float = 0.0
    x2_hi: float = 1.0

    def __post_init__(self):
        vals = (self.x1_lo, self.x1_hi, self.x2_lo, self.x2_hi)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("domain bounds must be finite")
        if not (self.x1_lo < self.x1_hi and self.x2_lo < self.x2_hi):
            raise ValueError(f"degenerate rectangle {vals}")

    @classmethod
    def unit_square(cls) -> Domain:
        return cls(0.0, 1.0, 0.0, 1.0)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x1_lo, self.x1_hi, self.x2_lo, self.x2_hi)

    @property
    def widths(self) -> tuple[float, float]:
        return (self.x1_hi - self.x1_lo, self.x2_hi - self.x2_lo)

    @property
    def diameter(self) -> float:
        return float(np.hypot(*self.widths))

    def contains(self, pts, closed: bool = False) -> np.ndarray:
        """Boolean mask of points inside the open (or closed) rectangle."""
        p = as_points(pts)
        if closed:
            return ((p[:, 0] >= self.x1_lo) & (p[:, 0] <= self.x1_hi)
                    & (p[:, 1] >= self.x2_lo) & (p[:, 1] <= self.x2_hi))
        return ((p[:, 0] > self.x1_lo) & (p[:, 0] < self.x1_hi)
                & (p[:, 1] > self.x2_lo) & (p[:, 1] < self.x2_hi))

    def check(self, pts, closed: bool = False, what: str = "point") -> np.ndarray:
        p = as_points(pts)
        inside = self.contains(p, closed=closed)
        if not inside.all():
            bad = p[~inside][0]
            kind = "closed" if closed else "open"
            raise DomainError(f"{what} ({bad[0]:.6g}, {bad[1]:.6g}) is outside the {kind} domain {self.bounds}")
        return p

    def shrink(self, margin: float) -> Domain:
        return Domain(self.x1_lo + margin, self.x1_hi - margin, self.x2_lo + margin, self.x2_hi - margin)

    def clamp_inward(self, pts, shift: float) -> np.ndarray:
        """Move points of the closed rectangle to distance >= ``shift`` from the boundary."""
        p = as_points(pts).copy()
        p[:, 0] = np.clip(p[:, 0], self.x1_lo + shift, self.x1_hi - shift)
        p[:, 1] = np.clip(p[:, 1], self.x2_lo + shift, self.x2_hi - shift)
        return p

    def from_unit(self, u) -> np.ndarray:
        """Affine image of points of [0, 1]^2."""
        u = as_points(u)
        w1, w2 = self.widths
        return np.column_stack([self.x1_lo + w1 * u[:, 0], self.x2_lo + w2 * u[:, 1]])

    def lattice(self, step: float) -> np.ndarray:
        """Points ``lo + k * step`` of the closed rectangle, row-major in (x2, x1)."""
        if step <= 0:
            raise ValueError("lattice step must be positive")
        eps = 1e-9 * step
        g1 = self.x1_lo + step * np.arange(int(np.floor((self.x1_hi - self.x1_lo + eps) / step)) + 1)
        g2 = self.x2_lo + step * np.arange(int(np.floor((self.x2_hi - self.x2_lo + eps) / step)) + 1)
        X1, X2 = np.meshgrid(g1, g2)
        return np.column_stack([X1.ravel(), X2.ravel()])

    def to_json(self) -> list[float]:
        return list(self.bounds)

    @classmethod
    def from_json(cls, data) -> Domain:
        return cls(*(float(v) for v in data))


def euclid(x, y) -> np.ndarray:
    x = as_points(x)
    y = as_points(y)
    return np.hypot(x[:, 0] - y[:, 0], x[:, 1] - y[:, 1])
