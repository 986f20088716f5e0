"""One test per acceptance criterion, at the stated grid steps and tolerances.

The expensive pieces (the h = 2^-12 counterexample table, the membership
reports and the h = 2^-10 sequence) are module fixtures shared between
criteria. Each test records a verdict line printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from conformal_gamma import (CompactExhaustion, Curve, DistanceSolver, Domain, EuclideanOracle, MetricSequence,
                             distance_to, gamma_F_check, gamma_J_check, gamma_L_check, mcshane_gap,
                             run_counterexample, validate_membership, verify_not_length)
from conformal_gamma.cli import main
from conformal_gamma.counterexample import A, B, counterexample_metric, default_candidates, refraction_oracle
from conformal_gamma.sampling import points_in
from conformal_gamma.solver import equi_lipschitz_violation

from conftest import record

pytestmark = pytest.mark.slow

H = 2.0 ** -12
N_VALUES = list(range(2, 10))
H_SEQ = 2.0 ** -10
SEQ_N = [2, 3, 4, 5, 6]
PROXY_N = 7


@pytest.fixture(scope="module")
def square():
    return Domain.unit_square()


@pytest.fixture(scope="module")
def ce_report():
    t = time.time()
    rep = run_counterexample(N_VALUES, h=H, tol=7e-3, mono_tol=1e-3, cross_check_h=H / 2)
    rep.elapsed = time.time() - t
    return rep


@pytest.fixture(scope="module")
def membership_reports(square):
    out = {}
    for n in N_VALUES:
        s = DistanceSolver(square, counterexample_metric(n), H)
        out[n] = validate_membership(s, 2.0, pair_samples=512, tol=1e-6, seed=n, length_pairs=64)
        s.release()
        del s
    return out


@pytest.fixture(scope="module")
def sequence(square):
    seq = MetricSequence([DistanceSolver(square, counterexample_metric(n), H_SEQ) for n in SEQ_N], 2.0, SEQ_N)
    proxy = DistanceSolver(square, counterexample_metric(PROXY_N), H_SEQ)
    return seq, proxy


def test_c01_counterexample_reproduction(ce_report):
    r = ce_report
    vals = np.array(r.distances)
    ok = (bool(np.all(np.diff(vals) >= -1e-3)) and bool(np.all(vals <= 1.375 + 0.007))
          and 1.7325 <= r.reference <= 1.7675)
    record(1, "counterexample reproduction", ok,
           f"d_n(a,b) = {np.round(vals, 5).tolist()}, reference {r.reference:.5f}, "
           f"{r.elapsed / len(N_VALUES):.1f} s per n")
    assert ok


def test_c02_limit_value(ce_report):
    oracle = refraction_oracle().value
    d9 = ce_report.proxy_value
    rel = abs(d9 - oracle) / oracle
    cross_rel = abs(ce_report.cross_check - d9) / d9
    ok = rel <= 0.015 and cross_rel <= 0.005
    record(2, "limit value", ok,
           f"d_9 = {d9:.5f} vs oracle {oracle:.5f} ({100 * rel:.2f}%), "
           f"h/2 run {ce_report.cross_check:.5f} ({100 * cross_rel:.3f}%)")
    assert ok


def test_c03_not_length_certificate(square):
    d9 = DistanceSolver(square, counterexample_metric(9), H)
    curves, labels = default_candidates(9)
    rep = verify_not_length(d9, curves, labels=labels, tol=0.02, dist_tol=7e-3)
    d9.release()
    ok = rep.passed and len(curves) >= 3 and rep.gap >= 0.34
    record(3, "not-a-length-distance certificate", ok,
           f"{len(curves)} curves, min length {rep.min_length:.5f}, proxy distance {rep.proxy_distance:.5f}, "
           f"gap {rep.gap:.5f}")
    assert ok


def test_c04_class_membership(membership_reports):
    rows = []
    ok = True
    for n, rep in membership_reports.items():
        ok &= rep.n_pairs == 512 and rep.length_pairs == 64 and rep.passed
        rows.append(f"n={n}: rel {rep.max_relative_violation:.1e}, gap {rep.length_gap:.1e}, "
                    f"closure shift {rep.closure_shift:.1e}")
    record(4, "class membership", ok, "; ".join(rows))
    assert ok


def test_c05_equi_lipschitz(membership_reports):
    worst, worst_raw = -np.inf, -np.inf
    for n, rep in membership_reports.items():
        viol, nq = equi_lipschitz_violation(rep.xs, rep.ys, rep.distances, 2.0, n_quads=1024, seed=n)
        raw, _ = equi_lipschitz_violation(rep.xs, rep.ys, rep.raw_distances, 2.0, n_quads=1024, seed=n)
        assert nq == 1024
        worst, worst_raw = max(worst, viol), max(worst_raw, raw)
    ok = worst <= 1e-6
    record(5, "equi-Lipschitz", ok,
           f"max excess over 2(|x-x'| + |y-y'|) is {worst:.3e} on 1024 quadruples per n "
           f"(per-query values before the sample closure: {worst_raw:.3e})")
    assert ok


def test_c06_recovery_curve_bound(sequence):
    seq, proxy = sequence
    rep = gamma_L_check(seq, proxy, [Curve.segment(A, B)])
    rows = rep.items[0]["rows"]
    chain = all(r["chain_ok"] for r in rows)
    dist = all(r["sup_distance"] <= r["distance_bound"] + 2 * H_SEQ for r in rows)
    ok = chain and dist
    record(6, "recovery-curve bound", ok,
           "r_n = " + str([r["r"] for r in rows]) + ", slack "
           + str([round(r["L_limit"] - r["L_recovery_chain"] + r["r"] * r["sup_gap"], 4) for r in rows]))
    assert ok


def test_c07_inf_convolution(sequence):
    seq, proxy = sequence
    sub = MetricSequence(seq.entries[1:], seq.alpha, seq.indices[1:])
    u = distance_to(proxy, (0.5, 0.25))
    step = 1 / 16
    rep = gamma_F_check(sub, proxy, [u], CompactExhaustion(proxy.domain), levels=[2, 3], lattice_step=step)
    table = rep.items[0]["table"]
    ok = all(r["bound_ok"] for r in table) and all(r["F_n"] == 0.0 for r in table)
    worst = max(r["sup_error"] - r["sup_gap"] for r in table)
    record(7, "inf-convolution", ok,
           f"{len(table)} (i, n) cells, max sup_error - sup_gap = {worst:.2e}, every F_n = 0 at tol {4 * step}")
    assert ok


def test_c08_mcshane(square):
    s = DistanceSolver(square, counterexample_metric(6), 2.0 ** -9)
    rng = np.random.default_rng(8)
    pool = points_in(square.shrink(0.01), 4000, seed=8)
    worst_target, worst_growth = 0.0, -np.inf
    for trial in range(100):
        idx = rng.choice(len(pool), size=10, replace=False)
        x, y, G = pool[idx[0]], pool[idx[1]], pool[idx[2:]]
        worst_target = max(worst_target, abs(mcshane_gap(s, x, y, np.vstack([G[:2], y]))))
        gaps = [mcshane_gap(s, x, y, G[:k]) for k in (1, 2, 4, 8)]
        worst_growth = max(worst_growth, float(np.max(np.diff(gaps))))
    s.release()
    ok = worst_target <= 1e-9 and worst_growth <= 0.0
    record(8, "McShane representation", ok,
           f"target-generator gap {worst_target:.1e}, max increase under growth {worst_growth:.1e} over 100 trials")
    assert ok


def test_c09_degenerate_gamma(square):
    margins = {}
    solvers = {"euclid": EuclideanOracle(domain=square),
               "phi_4": DistanceSolver(square, counterexample_metric(4), 2.0 ** -8)}
    for name, d in solvers.items():
        seq = MetricSequence.constant(d, 2.0)
        x, y = (0.2, 0.3), (0.7, 0.6)
        u = distance_to(d, (0.3, 0.4))
        reps = [gamma_L_check(seq, d, [Curve.segment(x, y), Curve.segment(A, B)]),
                gamma_J_check(seq, d, [(x, y), (A, B)], radius=0.05),
                gamma_F_check(seq, d, [u, u.scaled(2.0)], CompactExhaustion(square))]
        margins[name] = max(r.max_margin for r in reps)
        assert all(r.passed for r in reps)
    ok = max(margins.values()) <= 1e-9
    record(9, "degenerate gamma checks", ok, ", ".join(f"{k} max margin {v:.1e}" for k, v in margins.items()))
    assert ok


def test_c10_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["counterexample", "--seed", "0", "--out-dir", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".json")})
    ok = set(outs[0]) == {"counterexample.csv", "counterexample.json"} and outs[0] == outs[1]
    record(10, "determinism", ok, f"{len(outs[0])} files byte-identical across two default runs")
    assert ok
