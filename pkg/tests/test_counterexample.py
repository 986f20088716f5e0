import numpy as np
import pytest

from conformal_gamma import (DistanceSolver, Domain, curve_length, phi_profile, psi, refraction_oracle,
                             run_counterexample, staircase_curve, verify_not_length)
from conformal_gamma.counterexample import (A, B, LIMIT_CLOSED_FORM, REFERENCE, UPPER_BOUND, ResolutionError,
                                            aitken_limit, check_resolution, counterexample_metric,
                                            default_candidates, max_resolved_n)
from conformal_gamma.metric import RefinementPolicy

# frozen from the closed form 7/8 + sqrt(3)/4 of the refraction problem
REFRACTION_VALUE = 1.3080127018922194
REFRACTION_OFFSET = 0.07216878364870323


def test_psi_ramp():
    s = np.linspace(0, 3, 301)
    v = psi(s)
    assert np.all(v[s <= 1] == 1.0) and np.all(v[s >= 2] == 2.0)
    assert np.all(np.diff(v) >= 0)
    assert psi(1.5) == pytest.approx(1.5)


def test_phi_profile_levels():
    for n in (2, 5, 9):
        pts = np.array([[0.5, 2.0 ** -(n + 1)], [0.5, 2.0 ** -n], [0.5, 0.9], [0.3, 1e-6]])
        assert np.array_equal(phi_profile(n, pts), [1.0, 2.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        phi_profile(1, [(0.5, 0.5)])


def test_profiles_increase_in_n():
    p = np.column_stack([np.full(200, 0.5), np.linspace(1e-4, 0.5, 200)])
    for n in range(2, 8):
        assert np.all(phi_profile(n + 1, p) >= phi_profile(n, p))


def test_staircase_geometry():
    for n in (2, 4, 8):
        g = staircase_curve(n)
        assert np.allclose(g.start, A) and np.allclose(g.end, B)
        assert g.euclidean_length() == pytest.approx(2 * (1 / 8 - 2.0 ** -(n + 1)) + 7 / 8)
    with pytest.raises(ValueError):
        staircase_curve(1)
    curves, labels = default_candidates(6)
    assert labels == ["segment", "staircase_2", "staircase_3", "staircase_4", "staircase_5"]


def test_refraction_oracle_frozen():
    o = refraction_oracle()
    assert o.value == pytest.approx(REFRACTION_VALUE, abs=1e-12)
    assert o.s_opt == pytest.approx(REFRACTION_OFFSET, abs=1e-7)
    assert o.value_closed_form == pytest.approx(LIMIT_CLOSED_FORM, abs=1e-15)
    assert REFERENCE - UPPER_BOUND == 3 / 8
    assert o.value < UPPER_BOUND


def test_resolution_guard():
    assert max_resolved_n(2.0 ** -12) == 9
    assert max_resolved_n(2.0 ** -10) == 7
    check_resolution([2, 9], 2.0 ** -12)
    with pytest.raises(ResolutionError, match="n <= 7"):
        check_resolution([2, 8], 2.0 ** -10)
    with pytest.raises(ResolutionError):
        run_counterexample([2, 8], h=2.0 ** -9)


def test_aitken():
    seq = [2 - 0.5 ** k for k in range(1, 6)]
    assert aitken_limit(seq) == pytest.approx(2.0)
    assert aitken_limit([1.0, 2.0]) is None
    assert aitken_limit([1.0, 2.0, 3.0]) is None


def test_small_run():
    rep = run_counterexample(range(2, 7), h=2.0 ** -9, tol=0.02)
    assert rep.checks["monotone"] and rep.checks["upper_bound"] and rep.checks["reference"]
    assert rep.distances[0] == pytest.approx(7 / 8, rel=0.01)
    assert all(v <= UPPER_BOUND for v in rep.distances)
    assert rep.to_dict()["passed"] == rep.passed
    assert [r[0] for r in rep.rows()] == [2, 3, 4, 5, 6]


def test_distance_below_bound_and_staircase_lengths():
    s = DistanceSolver(Domain.unit_square(), counterexample_metric(5), 2.0 ** -9)
    d = s.distance(A, B)
    assert d <= UPPER_BOUND
    pol = RefinementPolicy(stop_tol=1e-4, min_levels=3, max_levels=8)
    for k in (2, 3):
        assert curve_length(s, staircase_curve(k), pol).value >= REFERENCE - 0.02
    s.release()


def test_verify_not_length_small():
    s = DistanceSolver(Domain.unit_square(), counterexample_metric(6), 2.0 ** -9)
    curves, labels = default_candidates(5)
    rep = verify_not_length(s, curves, RefinementPolicy(stop_tol=1e-4, min_levels=3, max_levels=8), labels,
                            dist_tol=0.02)
    assert rep.passed, rep.to_dict()
    assert rep.gap >= 3 / 8 - 0.04
    s.release()
