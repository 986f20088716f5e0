"""The family phi_n on the unit square whose distances converge to a non-length limit.

phi_n equals 2 above height 2**-n and 1 below 2**-(n+1). Between a = (1/16, 1/8)
and b = (15/16, 1/8) the reference weight 2 gives distance 7/4, while every
d_n stays below 11/8 because paths can run through the cheap strip. The
limit of d_n(a, b) is predicted by a one-dimensional refraction problem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .fields import ScalarField
from .geometry import Domain
from .metric import Curve, RefinementPolicy, curve_length
from .solver import ConformalMetric, DistanceSolver

A = (1 / 16, 1 / 8)
B = (15 / 16, 1 / 8)
REFERENCE = 7 / 4
UPPER_BOUND = 11 / 8
LIMIT_CLOSED_FORM = 7 / 8 + np.sqrt(3) / 4


class ResolutionError(ValueError):
    """The low-weight strip of the largest requested n is not resolved by the grid."""


def psi(s):
    """Quintic smoothstep ramp: 1 for s <= 1, 2 for s >= 2, increasing in between."""
    u = np.clip(np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 + u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def phi_profile(n: int, p) -> np.ndarray:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    p = np.atleast_2d(np.asarray(p, dtype=float))
    return psi(2.0 ** (n + 1) * p[:, 1])


def counterexample_metric(n: int) -> ConformalMetric:
    return ConformalMetric(ScalarField(lambda p: phi_profile(n, p), tag=f"phi_{n}"), 1.0, 2.0)


def staircase_curve(n: int) -> Curve:
    """a -> (1/16, 2^-(n+1)) -> (15/16, 2^-(n+1)) -> b, one piece per parameter third."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    low = 2.0 ** -(n + 1)
    pts = np.array([A, (A[0], low), (B[0], low), B])
    return Curve(np.array([0.0, 1 / 3, 2 / 3, 1.0]), pts)


def max_resolved_n(h: float, cells: int = 4) -> int:
    """Largest n whose strip height 2^-(n+1) spans at least ``cells`` grid steps."""
    return int(np.floor(-np.log2(cells * h) - 1 + 1e-12))


def check_resolution(n_values, h: float, cells: int = 4):
    n_max = max(n_values)
    if 2.0 ** -(n_max + 1) < cells * h * (1 - 1e-12):
        raise ResolutionError(
            f"strip height 2^-{n_max + 1} is below {cells} grid steps at h={h:g}; "
            f"use n <= {max_resolved_n(h, cells)} or a finer h")


@dataclass
class RefractionOracle:
    s_opt: float
    value: float
    s_closed_form: float
    value_closed_form: float


def refraction_objective(s):
    return 4.0 * np.sqrt(np.asarray(s) ** 2 + 1 / 64) + 7 / 8 - 2.0 * np.asarray(s)


def refraction_oracle() -> RefractionOracle:
    """Limit of d_n(a, b): descend to the bottom edge, run along it, climb back.

    Leaving a with horizontal offset s costs 2 sqrt(s^2 + 1/64) per leg at
    weight 2 and the bottom run costs 7/8 - 2s at weight 1.
    """
    res = minimize_scalar(refraction_objective, bounds=(0.0, 7 / 16), method="bounded",
                          options={"xatol": 1e-12})
    s_cf = 1 / (8 * np.sqrt(3))
    return RefractionOracle(float(res.x), float(res.fun), s_cf, float(refraction_objective(s_cf)))


def aitken_limit(values) -> float | None:
    """Aitken delta-squared estimate from the last three values, or None when not applicable."""
    if len(values) < 3:
        return None
    x0, x1, x2 = values[-3:]
    denom = x2 - 2 * x1 + x0
    if denom == 0 or (x2 - x1) * (x1 - x0) <= 0:
        return None
    return float(x2 - (x2 - x1) ** 2 / denom)


@dataclass
class CounterexampleReport:
    n_values: list
    h: float
    stencil: int
    tol: float
    distances: list
    reference: float | None
    limit_estimate: float
    proxy_value: float
    oracle: float
    cross_check: float | None = None
    checks: dict = field(default_factory=dict)
    geodesics: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def rows(self):
        return [(n, v, v <= UPPER_BOUND + self.tol) for n, v in zip(self.n_values, self.distances)]

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values), "h": self.h, "stencil": self.stencil, "tol": self.tol,
            "distances": [float(v) for v in self.distances], "reference": self.reference,
            "limit_estimate": self.limit_estimate, "proxy_value": self.proxy_value,
            "oracle": self.oracle, "cross_check": self.cross_check,
            "checks": dict(self.checks), "passed": self.passed,
        }


def run_counterexample(n_values=range(2, 10), h: float = 2.0 ** -12, tol: float = 7e-3,
                       stencil_order: int = 2, mono_tol: float = 1e-3, reference: bool = True,
                       cross_check_h: float | None = None, keep_geodesics: bool = False,
                       limit_tol: float | None = None, threads: int = 1) -> CounterexampleReport:
    """Tabulate d_n(a, b) on one shared grid and check the counterexample's claims.

    Checks: monotone in n within ``mono_tol``, each value at most 11/8 + tol,
    reference 7/4 within 1% (weight 2), and the extrapolated limit within
    ``limit_tol`` (default ``tol``) of the proxy value at the largest n.
    """
    n_values = sorted(int(n) for n in n_values)
    if not n_values or n_values[0] < 2:
        raise ValueError("n_values must be integers >= 2")
    check_resolution(n_values, h)
    dom = Domain.unit_square()

    def one(n):
        s = DistanceSolver(dom, counterexample_metric(n), h, stencil_order, cache_size=0)
        v = s.distance(A, B)
        g = s.geodesic(A, B) if keep_geodesics else None
        s.release()
        return v, g

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, n_values))
    else:
        results = [one(n) for n in n_values]
    values = [v for v, _ in results]
    geos = {n: g for n, (_, g) in zip(n_values, results) if g is not None}
    ref = None
    if reference:
        s = DistanceSolver(dom, ConformalMetric.constant(2.0), h, stencil_order, cache_size=0)
        ref = s.distance(A, B)
        s.release()
    cross = None
    if cross_check_h is not None:
        check_resolution(n_values, cross_check_h)
        s = DistanceSolver(dom, counterexample_metric(n_values[-1]), cross_check_h, stencil_order, cache_size=0)
        cross = s.distance(A, B)
        s.release()
    proxy = values[-1]
    est = aitken_limit(values)
    limit = proxy if est is None else est
    checks = {
        "monotone": bool(np.all(np.diff(values) >= -mono_tol)),
        "upper_bound": bool(all(v <= UPPER_BOUND + tol for v in values)),
        "limit_vs_proxy": bool(abs(limit - proxy) <= (tol if limit_tol is None else limit_tol)),
    }
    if reference:
        checks["reference"] = bool(abs(ref - REFERENCE) <= 0.01 * REFERENCE)
    if cross is not None:
        checks["cross_check"] = bool(abs(cross - proxy) <= 0.005 * proxy)
    return CounterexampleReport(n_values, h, stencil_order, tol, values, ref, limit, proxy,
                                refraction_oracle().value, cross, checks, geos)


@dataclass
class NotLengthReport:
    lengths: list
    labels: list
    min_length: float
    proxy_distance: float
    gap: float
    tol: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"lengths": [float(v) for v in self.lengths], "labels": list(self.labels),
                "min_length": self.min_length, "proxy_distance": self.proxy_distance,
                "gap": self.gap, "tol": self.tol, "checks": dict(self.checks), "passed": self.passed}


def default_candidates(N: int):
    """Straight segment a -> b and the staircases sigma^k for 2 <= k < N."""
    curves = [Curve.segment(A, B)]
    labels = ["segment"]
    for k in range(2, N):
        curves.append(staircase_curve(k))
        labels.append(f"staircase_{k}")
    return curves, labels


def verify_not_length(d_proxy, candidate_curves, policy: RefinementPolicy | None = None,
                      labels=None, tol: float = 0.02, dist_tol: float = 7e-3) -> NotLengthReport:
    """Length of each candidate a -> b curve under the proxy versus the proxy distance d(a, b).

    A length distance would have some curve of length close to d(a, b); here
    every candidate stays near 7/4 while d(a, b) is below 11/8.
    """
    policy = policy or RefinementPolicy(stop_tol=1e-4, min_levels=4, max_levels=12)
    lengths = [curve_length(d_proxy, g, policy).value for g in candidate_curves]
    labels = list(labels) if labels is not None else [f"curve_{k}" for k in range(len(lengths))]
    dab = float(d_proxy.distance(A, B))
    m = float(min(lengths))
    checks = {
        "candidates": len(lengths) >= 3,
        "min_length": m >= REFERENCE - tol,
        "proxy_distance": dab <= UPPER_BOUND + dist_tol,
        "gap": m - dab >= REFERENCE - UPPER_BOUND - 2 * tol,
    }
    return NotLengthReport(lengths, labels, m, dab, m - dab, tol, checks)
