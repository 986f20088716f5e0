"""Deterministic low-discrepancy samples of points and point pairs.

Pair samples have product structure (a few sources, many targets) so that a
grid solver can answer them with one shortest-path field per source. The
enumeration order is fixed for the infinite index grid, so the sample of
size ``n`` is always a prefix of the sample of size ``n + 1``.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .geometry import Domain

_UNIT_EPS = 1e-6


def halton(n: int, seed: int = 0, skip: int = 0) -> np.ndarray:
    """``n`` scrambled Halton points of the open unit square, shape (n, 2)."""
    if n <= 0:
        return np.empty((0, 2))
    eng = qmc.Halton(d=2, scramble=True, seed=seed)
    if skip:
        eng.fast_forward(skip)
    return np.clip(eng.random(n), _UNIT_EPS, 1 - _UNIT_EPS)


def points_in(rect: Domain, n: int, seed: int = 0, skip: int = 0) -> np.ndarray:
    return rect.from_unit(halton(n, seed=seed, skip=skip))


def pair_indices(n: int, ratio: int = 4) -> np.ndarray:
    """First ``n`` (source, target) index pairs in shell order ``max(ratio*i, j)``.

    Shell ``s`` adds every pair with ``max(ratio * i, j) == s``; within a shell
    pairs are ordered by source then target.
    """
    if n <= 0:
        return np.empty((0, 2), dtype=np.int64)
    out = []
    s = 0
    while len(out) < n:
        for i in range(s // ratio + 1):
            for j in range(s + 1):
                if max(ratio * i, j) == s:
                    out.append((i, j))
        s += 1
    return np.array(out[:n], dtype=np.int64)


def sample_pairs(rect: Domain, n: int, seed: int = 0, ratio: int = 4):
    """``n`` low-discrepancy pairs of points of ``rect`` as arrays ``(xs, ys)``."""
    idx = pair_indices(n, ratio)
    if n == 0:
        return np.empty((0, 2)), np.empty((0, 2))
    n_src = int(idx[:, 0].max()) + 1
    n_tgt = int(idx[:, 1].max()) + 1
    src = points_in(rect, n_src, seed=seed)
    tgt = points_in(rect, n_tgt, seed=seed + 7919)
    return src[idx[:, 0]], tgt[idx[:, 1]]


def lattice_neighbor_pairs(points_per_side: int, rect: Domain):
    """All horizontally, vertically and diagonally adjacent pairs of a square lattice on ``rect``."""
    m = points_per_side
    if m < 2:
        raise ValueError("need at least 2 lattice points per side")
    g1 = np.linspace(rect.x1_lo, rect.x1_hi, m)
    g2 = np.linspace(rect.x2_lo, rect.x2_hi, m)
    xs, ys = [], []
    for j in range(m):
        for i in range(m):
            for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
                a, b = i + di, j + dj
                if 0 <= a < m and 0 <= b < m:
                    xs.append((g1[i], g2[j]))
                    ys.append((g1[a], g2[b]))
    return np.array(xs), np.array(ys)
