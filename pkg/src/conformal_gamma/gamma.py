"""Sequential checks of Gamma-convergence for the functionals L, J and F.

Each check runs along a finite metric sequence ``d_n`` against a limit
candidate and reports liminf and limsup margins. A margin is the amount by
which the corresponding inequality is violated, so 0 means satisfied. The
recovery sequences are built with the same devices as in the equivalence
proof: piecewise geodesic interpolation of curves, localized measures and
lattice inf-convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import DiscreteMeasure, default_pairs, eval_F, eval_J, inf_convolution
from .geometry import Domain, as_points, euclid
from .metric import Curve, RefinementPolicy, curve_length, oracle_geodesic, pair_distances
from .sampling import lattice_neighbor_pairs, sample_pairs
from .solver import validate_membership


@dataclass
class MetricSequence:
    """Distances ``d_n`` indexed by ``indices`` (defaults to 0, 1, ...)."""

    entries: list
    alpha: float
    indices: list | None = None

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a metric sequence needs at least one entry")
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if self.indices is None:
            self.indices = list(range(len(self.entries)))
        if len(self.indices) != len(self.entries):
            raise ValueError("indices and entries must have the same length")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(zip(self.indices, self.entries))

    @classmethod
    def constant(cls, d, alpha: float, length: int = 3) -> MetricSequence:
        return cls([d] * length, alpha)

    def validate(self, pair_samples: int = 64, tol: float = 1e-6, length_pairs: int = 4):
        """Membership reports of the solver entries (oracles without a grid are skipped)."""
        out = {}
        for n, d in self:
            if hasattr(d, "error_model"):
                out[n] = validate_membership(d, self.alpha, pair_samples, tol, length_pairs=length_pairs)
        return out


@dataclass(frozen=True)
class CompactExhaustion:
    """``K_j`` = the domain shrunk by ``2**-j``, for ``j >= first``."""

    domain: Domain

    @property
    def first(self) -> int:
        j = 0
        while 2.0 ** -j >= 0.5 * min(self.domain.widths):
            j += 1
        return j

    def __call__(self, j: int) -> Domain:
        if j < self.first:
            raise ValueError(f"K_{j} is empty; first index is {self.first}")
        return self.domain.shrink(2.0 ** -j)

    def index_containing(self, pts) -> int:
        """Smallest ``j`` with every point in ``K_j``."""
        p = as_points(pts)
        self.domain.check(p)
        j = self.first
        while not self(j).contains(p, closed=True).all():
            j += 1
        return j

    def lattice(self, j: int, step: float) -> np.ndarray:
        return self(j).lattice(step)


def _gap_pairs(K: Domain, samples: int, seed: int, lattice_side: int):
    xs, ys = sample_pairs(K, samples, seed=seed)
    lx, ly = lattice_neighbor_pairs(lattice_side, K)
    return np.vstack([xs, lx]), np.vstack([ys, ly])


def sup_gap_on_compact(d1, d2, K, samples: int = 256, j: int | None = None, seed: int = 0,
                       lattice_side: int = 9) -> float:
    """Sampled ``max |d1 - d2|`` over pairs of the compact set ``K``.

    ``K`` is a closed rectangle, or a :class:`CompactExhaustion` with index
    ``j``; in that case the sample is the union over ``K_i``, ``i <= j``, so
    the result is non-decreasing in ``j``. Pairs are a low-discrepancy
    sample (a prefix in ``samples``) plus all lattice-neighbour pairs.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(K, CompactExhaustion):
        if j is None:
            raise ValueError("an exhaustion needs an index j")
        rects = [K(i) for i in range(K.first, j + 1)]
    else:
        rects = [K]
    gap = 0.0
    for rect in rects:
        xs, ys = _gap_pairs(rect, samples, seed, lattice_side)
        diff = np.abs(pair_distances(d1, xs, ys) - pair_distances(d2, xs, ys))
        gap = max(gap, float(diff.max()))
    return gap


def default_r(gap: float, cap: int = 64) -> int:
    """``floor(1 / sqrt(gap))`` capped, so that ``r * gap -> 0`` as ``gap -> 0``."""
    if gap <= 0:
        return cap
    return int(max(1, min(cap, np.floor(1.0 / np.sqrt(gap)))))


def recovery_curve(gamma: Curve, solver, r: int) -> Curve:
    """Join ``gamma(i/r)``, ``i = 0..r``, by geodesics of ``solver`` on consecutive ``[(i-1)/r, i/r]``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    knots = gamma(np.linspace(0.0, 1.0, r + 1))
    ts, ps = [np.array([0.0])], [knots[:1]]
    for i in range(r):
        a, b = knots[i], knots[i + 1]
        piece = Curve.segment(a, b) if np.array_equal(a, b) else oracle_geodesic(solver, a, b)
        t = (i + piece.t[1:]) / r
        t[-1] = (i + 1) / r
        ts.append(t)
        pts = piece.points[1:].copy()
        pts[-1] = b
        ps.append(pts)
    t = np.concatenate(ts)
    t[-1] = 1.0
    return Curve(t, np.vstack(ps))


def recovery_bound(gamma: Curve, alpha: float, r: int) -> float:
    """``(lambda + alpha * L_D(gamma)) / r`` with ``lambda`` the Euclidean Lipschitz constant."""
    return (gamma.lipschitz_constant() + alpha * gamma.euclidean_length()) / r


def sup_distance(c1: Curve, c2: Curve) -> float:
    """``max_t |c1(t) - c2(t)|``, exact for polylines (attained at a breakpoint)."""
    t = np.union1d(c1.t, c2.t)
    return float(euclid(c1(t), c2(t)).max())


def _jittered(gamma: Curve, amount: float, domain: Domain | None) -> Curve:
    if amount == 0:
        return gamma
    t = gamma.refined(4)
    p = gamma(t)
    bump = np.sin(np.pi * t)  # vanishes at the endpoints
    q = p + amount * np.column_stack([bump, bump])
    if domain is not None:
        q = domain.clamp_inward(q, 1e-9)
    return Curve(t, q)


@dataclass
class GammaReport:
    functional: str
    tol: float
    items: list = field(default_factory=list)

    @property
    def max_margin(self) -> float:
        m = [v for it in self.items for k, v in it.items() if k.endswith("margin")]
        return float(max(m)) if m else 0.0

    @property
    def passed(self) -> bool:
        return all(it.get("passed", True) for it in self.items)

    def to_dict(self) -> dict:
        return {"functional": self.functional, "tol": self.tol, "items": self.items,
                "max_margin": self.max_margin, "passed": self.passed}


def _compact_for(seq: MetricSequence, limit, pts):
    dom = getattr(limit, "domain", None) or getattr(seq.entries[0], "domain", None)
    if dom is None:
        raise ValueError("a domain is needed to choose the compact set")
    ex = CompactExhaustion(dom)
    return ex, ex.index_containing(pts)


def gamma_L_check(seq: MetricSequence, limit, test_curves, r_schedule=None, tol: float = 1e-3,
                  policy: RefinementPolicy | None = None, jitter: float = 0.0, gap_samples: int = 128,
                  grid_tol: float = 0.0) -> GammaReport:
    """Liminf and limsup inequalities for the length functional along ``seq``.

    Liminf: the approaching curves (``gamma`` itself, or jittered by
    ``jitter * 2**-k``) must not have length far below ``L_limit(gamma)``.
    Limsup: the piecewise-geodesic recovery curves ``gamma^n`` satisfy
    ``L_{d_n}(gamma^n) <= L_limit(gamma) + r_n * gap_n``; the proof-chain value
    ``sum_i d_n(gamma((i-1)/r), gamma(i/r))`` and the measured length are both reported.
    """
    policy = policy or RefinementPolicy(stop_tol=1e-6, max_levels=8)
    report = GammaReport("L", tol)
    for ci, gamma in enumerate(test_curves):
        ex, j = _compact_for(seq, limit, gamma.points)
        K = ex(j)
        L_lim_dyadic = curve_length(limit, gamma, policy).value
        rows = []
        for k, (n, d) in enumerate(seq):
            gap = sup_gap_on_compact(d, limit, K, gap_samples)
            r = int(r_schedule[k]) if r_schedule is not None else default_r(gap)
            knots = gamma(np.linspace(0.0, 1.0, r + 1))
            L_lim = max(L_lim_dyadic, float(np.sum(pair_distances(limit, knots[:-1], knots[1:]))))
            approach = _jittered(gamma, jitter * 2.0 ** -k, getattr(d, "domain", None))
            L_inf = curve_length(d, approach, policy).value
            chain = float(np.sum(pair_distances(d, knots[:-1], knots[1:])))
            rec = recovery_curve(gamma, d, r)
            L_rec = curve_length(d, rec, policy).value
            rows.append({"n": n, "r": r, "sup_gap": gap, "L_limit": L_lim, "L_approach": L_inf,
                         "L_recovery_chain": chain, "L_recovery_measured": L_rec,
                         "sup_distance": sup_distance(gamma, rec),
                         "distance_bound": recovery_bound(gamma, seq.alpha, r),
                         "chain_ok": bool(L_lim >= L_rec - r * gap - tol - grid_tol)})
        last = rows[-1]
        liminf_margin = max(0.0, last["L_limit"] - last["L_approach"])
        limsup_margin = max(0.0, last["L_recovery_chain"] - last["L_limit"])
        report.items.append({
            "curve": ci, "rows": rows, "liminf_margin": liminf_margin, "limsup_margin": limsup_margin,
            "passed": bool(liminf_margin <= tol and limsup_margin <= tol and all(r["chain_ok"] for r in rows)),
        })
    return report


@dataclass(frozen=True)
class PairBall:
    """Pairs ``(x, y)`` with ``|x - xbar| <= r`` and ``|y - ybar| <= r``."""

    xbar: tuple
    ybar: tuple
    r: float

    def contains(self, xs, ys) -> np.ndarray:
        return ((euclid(xs, np.asarray(self.xbar)[None, :]) <= self.r)
                & (euclid(ys, np.asarray(self.ybar)[None, :]) <= self.r))

    def cutoff(self):
        """``eta`` equal to 1 on the half-radius ball, 0 outside the ball, linear in between."""
        xb, yb, r = np.asarray(self.xbar), np.asarray(self.ybar), self.r

        def eta(xs, ys):
            rho = np.maximum(euclid(xs, xb[None, :]), euclid(ys, yb[None, :]))
            return np.clip(2.0 - 2.0 * rho / r, 0.0, 1.0)
        return eta


class DegenerateLocalization(ValueError):
    """The cutoff vanishes on every atom."""


def localized_measure(mu: DiscreteMeasure, eta, K) -> DiscreteMeasure:
    """``lambda^-1 eta mu`` with ``lambda = sum_k eta(atom_k) w_k``; atoms with ``eta = 0`` are dropped."""
    if len(mu) == 0:
        raise DegenerateLocalization("empty measure")
    e = np.asarray(eta(mu.xs, mu.ys), dtype=float)
    if np.any(e < 0) or np.any(e > 1):
        raise ValueError("cutoff must take values in [0, 1]")
    inside = K.contains(mu.xs, mu.ys)
    if np.any((e > 0) & ~inside):
        raise ValueError("cutoff must vanish outside K")
    lam = float(np.dot(e, mu.w))
    if lam <= 0:
        raise DegenerateLocalization("cutoff vanishes on the support of the measure")
    keep = (e > 0) & (mu.w > 0)
    return DiscreteMeasure(mu.xs[keep], mu.ys[keep], (e * mu.w)[keep] / lam)


def approaching_measure(x, y, k: int, spread: float, n_extra: int = 4, seed: int = 0) -> DiscreteMeasure:
    """``delta_(x,y)`` plus small atoms at distance ``spread * 2**-k``; weak* to the Dirac as ``k`` grows."""
    rng = np.random.default_rng(seed)
    off = rng.uniform(-1.0, 1.0, size=(n_extra, 4)) * spread * 2.0 ** -k
    xs = np.vstack([as_points(x), as_points(x) + off[:, :2]])
    ys = np.vstack([as_points(y), as_points(y) + off[:, 2:]])
    w = np.concatenate([[1.0], np.full(n_extra, 2.0 ** -k / n_extra)])
    return DiscreteMeasure(xs, ys, w)


def gamma_J_check(seq: MetricSequence, limit, atom_pairs, tol: float = 1e-3, radius: float | None = None,
                  spread: float = 0.0, seed: int = 0) -> GammaReport:
    """Dirac tests of ``J_{d_n} -> J_limit``.

    For each pair, ``J_{d_n}(delta) = d_n(x, y)`` is tabulated; the liminf margin
    is ``J_limit(delta) - d_N(x, y)`` and the limsup margin ``d_N(x, y) -
    J_limit(delta)`` at the last index. With ``radius``, each ``d_n`` is also
    tested on a localized approaching measure against the ``2 alpha r`` estimate.
    """
    report = GammaReport("J", tol)
    for pi, (x, y) in enumerate(atom_pairs):
        delta = DiscreteMeasure.dirac(x, y)
        J_lim = eval_J(limit, delta)
        vals, local = [], []
        for k, (n, d) in enumerate(seq):
            vals.append(eval_J(d, delta))
            if radius is not None:
                ball = PairBall(tuple(map(float, x)), tuple(map(float, y)), radius)
                mu = approaching_measure(x, y, k, spread if spread else radius, seed=seed)
                # keep only atoms the cutoff can see, so the localization is well defined
                nu = localized_measure(mu, ball.cutoff(), ball)
                dev = abs(eval_J(d, nu) - vals[-1])
                local.append({"n": n, "deviation": dev, "bound": 2 * seq.alpha * radius,
                              "ok": bool(dev <= 2 * seq.alpha * radius + tol), "mass": nu.mass})
        liminf_margin = max(0.0, J_lim - vals[-1])
        limsup_margin = max(0.0, vals[-1] - J_lim)
        item = {"pair": [list(map(float, x)), list(map(float, y))], "J_limit": J_lim,
                "J_n": dict(zip(map(str, seq.indices), vals)),
                "liminf_margin": liminf_margin, "limsup_margin": limsup_margin}
        if local:
            item["localized"] = local
        item["passed"] = bool(liminf_margin <= tol and limsup_margin <= tol and all(r["ok"] for r in local))
        report.items.append(item)
    return report


def gamma_F_check(seq: MetricSequence, limit, test_functions, exhaustion: CompactExhaustion,
                  levels=None, tol: float = 1e-6, lattice_step: float = 1 / 8, eval_pairs=None,
                  gap_samples: int = 128) -> GammaReport:
    """Liminf and recovery checks for the indicator ``F`` of 1-Lipschitz functions.

    Liminf: if ``u`` is sampled as not 1-Lipschitz for the limit, a witness pair
    ``(x, y)`` with ``u(x) - u(y) > d(x, y)`` is searched, and ``nbar`` is the
    first index from which ``u(x) - u(y) > d_n(x, y)`` for all later entries.
    Limsup: for 1-Lipschitz ``u``, ``u_{n,i}`` is the inf-convolution of ``u``
    with ``d_n`` over the lattice of ``K_i``; ``n_i`` is the first index from
    which ``sup_{K_i} |u - u_{n,i}| <= 1/i`` and the diagonal sequence is
    ``u_n = u_{n,i}`` for ``n_i <= n < n_{i+1}``.
    """
    dom = exhaustion.domain
    levels = list(levels) if levels is not None else [exhaustion.first, exhaustion.first + 1]
    if eval_pairs is None:
        eval_pairs = default_pairs(dom, points_per_side=9, far_pairs=64)
    report = GammaReport("F", tol)
    for fi, u in enumerate(test_functions):
        lim_F = eval_F(limit, u, eval_pairs, tol)
        item = {"function": u.tag, "F_limit": "inf" if not lim_F.finite else 0.0,
                "lipschitz_limit": lim_F.lipschitz}
        if not lim_F.finite:
            x, y = (np.asarray(p)[None, :] for p in lim_F.witness)
            du = float(u(x)[0] - u(y)[0])
            viol = [bool(du > (1 + tol) * float(pair_distances(d, x, y)[0])) for _, d in seq]
            nbar = None
            for k in range(len(viol)):
                if all(viol[k:]):
                    nbar = seq.indices[k]
                    break
            item.update({"witness": [list(map(float, x[0])), list(map(float, y[0]))],
                         "violations": viol, "nbar": nbar, "liminf_margin": 0.0 if nbar is not None else np.inf,
                         "limsup_margin": 0.0, "passed": nbar is not None})
            report.items.append(item)
            continue
        table = []
        errs = np.zeros((len(levels), len(seq)))
        for a, i in enumerate(levels):
            lat = exhaustion.lattice(i, lattice_step)
            uK = u(lat)
            for k, (n, d) in enumerate(seq):
                un = inf_convolution(u, d, lat)
                err = float(np.max(np.abs(uK - un(lat))))
                gap = sup_gap_on_compact(d, limit, exhaustion(i), gap_samples)
                Fn = eval_F(d, un, lattice_pairs_of(lat, lattice_step), 2 * lattice_step * seq.alpha)
                errs[a, k] = err
                table.append({"i": i, "n": n, "sup_error": err, "sup_gap": gap,
                              "bound_ok": bool(err <= gap + tol), "F_n": 0.0 if Fn.finite else "inf",
                              "lipschitz_n": Fn.lipschitz})
        n_sel = {}
        for a, i in enumerate(levels):
            ok = errs[a] <= 1.0 / i
            n_sel[i] = next((seq.indices[k] for k in range(len(seq)) if ok[k:].all()), None)
        # diagonal sequence margins on every level
        diag = []
        for k, n in enumerate(seq.indices):
            chosen = [a for a, i in enumerate(levels) if n_sel[i] is not None and
                      seq.indices.index(n_sel[i]) <= k]
            a = chosen[-1] if chosen else 0
            diag.append(float(errs[a, k]))
        limsup_margin = diag[-1]
        item.update({"table": table, "n_i": {str(i): v for i, v in n_sel.items()}, "diagonal_error": diag,
                     "liminf_margin": 0.0, "limsup_margin": limsup_margin,
                     "passed": bool(all(r["bound_ok"] and r["F_n"] == 0.0 for r in table)
                                    and all(v is not None for v in n_sel.values()))})
        report.items.append(item)
    return report


def lattice_pairs_of(lat: np.ndarray, step: float):
    """Neighbour pairs (axis and diagonal) of a lattice produced by :meth:`Domain.lattice`."""
    lat = as_points(lat)
    idx = np.rint((lat - lat.min(axis=0)) / step).astype(np.int64)
    key = {(int(i), int(j)): k for k, (i, j) in enumerate(idx)}
    xs, ys = [], []
    for (i, j), k in key.items():
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            m = key.get((i + di, j + dj))
            if m is not None:
                xs.append(lat[k])
                ys.append(lat[m])
    if not xs:
        raise ValueError("lattice has no neighbour pairs")
    return np.array(xs), np.array(ys)

