import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conformal_gamma import (DiscreteMeasure, EuclideanOracle, ScalarField, distance_to, eval_F, eval_J,
                             inf_convolution, lipschitz_constant, mcshane_gap)
from conformal_gamma.functionals import default_pairs
from conformal_gamma.geometry import DomainError
from conformal_gamma.sampling import points_in

E = EuclideanOracle()
coord = st.floats(0.01, 0.99)


def test_J_dirac_and_sum(square):
    mu = DiscreteMeasure.dirac((0.1, 0.2), (0.4, 0.6), 2.0)
    assert eval_J(E, mu) == pytest.approx(1.0)
    nu = DiscreteMeasure([(0.1, 0.1), (0.5, 0.5)], [(0.1, 0.4), (0.5, 0.5)], [1.0, 7.0])
    assert eval_J(E, nu) == pytest.approx(0.3)
    assert eval_J(E, mu + nu) == pytest.approx(1.3)
    assert eval_J(E, DiscreteMeasure()) == 0.0


def test_J_reference_weight(flat2_128):
    from conformal_gamma.counterexample import A, B
    assert eval_J(flat2_128, DiscreteMeasure.dirac(A, B, 0.5)) == pytest.approx(7 / 8, rel=0.01)


def test_measure_validation(flat64):
    with pytest.raises(ValueError):
        DiscreteMeasure([(0.1, 0.1)], [(0.2, 0.2)], [-1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([(0.1, 0.1)], [(0.2, 0.2)], [1.0, 2.0])
    with pytest.raises(DomainError):
        eval_J(flat64, DiscreteMeasure.dirac((0.0, 0.5), (0.5, 0.5)))


def test_measure_json_roundtrip():
    mu = DiscreteMeasure([(0.1, 0.2), (0.3, 0.4)], [(0.5, 0.6), (0.7, 0.8)], [1.5, 0.25])
    back = DiscreteMeasure.from_json(mu.to_json())
    assert np.array_equal(back.xs, mu.xs) and np.array_equal(back.ys, mu.ys) and np.array_equal(back.w, mu.w)
    assert DiscreteMeasure.from_json("[]").mass == 0.0
    with pytest.raises(ValueError):
        DiscreteMeasure.from_json("[[1, 2, 3]]")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coord, coord, coord, coord, st.floats(0, 5)), min_size=1, max_size=6),
       st.lists(st.tuples(coord, coord, coord, coord, st.floats(0, 5)), min_size=1, max_size=6),
       st.floats(0, 10))
def test_J_additive_and_homogeneous(a, b, c):
    ma = DiscreteMeasure.from_json(str([list(r) for r in a]))
    mb = DiscreteMeasure.from_json(str([list(r) for r in b]))
    assert eval_J(E, ma + mb) == pytest.approx(eval_J(E, ma) + eval_J(E, mb), rel=1e-12, abs=1e-12)
    assert eval_J(E, ma.scaled(c)) == pytest.approx(c * eval_J(E, ma), rel=1e-12, abs=1e-12)


def test_J_continuous_in_atoms(wave128):
    x, y = np.array([0.3, 0.3]), np.array([0.7, 0.6])
    base = eval_J(wave128, DiscreteMeasure.dirac(x, y))
    for eps in (1e-2, 1e-3):
        moved = eval_J(wave128, DiscreteMeasure.dirac(x + eps, y - eps))
        # d is 2-Lipschitz in each argument against Euclid, up to the solver error bound
        allowed = 2 * 2 * np.sqrt(2) * eps + 2 * wave128.error_model.bound(x, y)
        assert abs(moved - base) <= allowed


def test_lipschitz_of_coordinate(square):
    pairs = default_pairs(square)
    est = lipschitz_constant(ScalarField.coordinate(0), E, pairs)
    assert est.value == pytest.approx(1.0, abs=1e-12)
    a, b = est.witness
    assert a[0] > b[0]


def test_lipschitz_of_distance_function(wave128, square):
    # 1-Lipschitz up to the triangle slack of mixing segment and graph values
    z = (0.5, 0.5)
    u = distance_to(wave128, z)
    xs, ys = default_pairs(square, points_per_side=9, far_pairs=64)
    lhs = np.abs(u(xs) - u(ys))
    slack = np.array([wave128.error_model.bound(x, z) + wave128.error_model.bound(y, z) for x, y in zip(xs, ys)])
    assert np.all(lhs <= wave128.pair_distances(xs, ys) + slack)
    assert lipschitz_constant(ScalarField.constant(3.0), wave128, default_pairs(square, 5, 8)).value == 0.0


def test_F_indicator(square):
    pairs = default_pairs(square)
    ok = eval_F(E, ScalarField.coordinate(0), pairs)
    assert ok.finite and ok.value == 0.0
    bad = eval_F(E, ScalarField.coordinate(0, 2.0), pairs)
    assert not bad.finite and bad.value == np.inf
    a, b = bad.witness
    assert 2 * (a[0] - b[0]) > np.hypot(a[0] - b[0], a[1] - b[1])
    d = bad.to_dict()
    assert d["value"] == "inf"


def test_F_scaled_by_alpha_passes(phi4_128, square):
    # |u(x) - u(y)| <= alpha |x - y| <= alpha d(x, y) for u = alpha x1 / alpha
    u = ScalarField.coordinate(0, 1.0)
    assert eval_F(phi4_128, u, default_pairs(square, 9, 64)).finite


def test_inf_convolution_matches_u_on_lattice(wave128, square):
    lat = square.shrink(0.1).lattice(0.2)
    u = ScalarField(lambda p: 0.2 * p[:, 0] + 0.1 * p[:, 1])
    ic = inf_convolution(u, wave128, lat)
    assert np.allclose(ic(lat), u(lat), atol=1e-12)
    P = points_in(square, 30, seed=3)
    assert np.all(ic(P) <= np.min(u(lat)[:, None] + np.array([wave128.distances_from(g, P) for g in lat]),
                                 axis=0) + 1e-12)


def test_inf_convolution_of_zero_is_distance_to_set(square):
    lat = square.shrink(0.25).lattice(0.25)
    ic = inf_convolution(ScalarField.constant(0.0), E, lat)
    P = points_in(square, 50, seed=1)
    want = np.min(np.hypot(P[:, None, 0] - lat[None, :, 0], P[:, None, 1] - lat[None, :, 1]), axis=1)
    assert np.allclose(ic(P), want)
    assert lipschitz_constant(ic, E, default_pairs(square, 9, 64)).value <= 1 + 1e-12


def test_inf_convolution_generic_oracle_path(square):
    from conformal_gamma.metric import FunctionOracle
    F = FunctionOracle(lambda x, y: float(np.hypot(*(np.asarray(x) - np.asarray(y)))))
    lat = square.shrink(0.25).lattice(0.25)
    P = points_in(square, 10, seed=2)
    a = inf_convolution(ScalarField.coordinate(1), F, lat)(P)
    b = inf_convolution(ScalarField.coordinate(1), E, lat)(P)
    assert np.allclose(a, b)


def test_mcshane_generator_endpoint(wave128):
    x, y = (0.2, 0.3), (0.7, 0.8)
    assert abs(mcshane_gap(wave128, x, y, [x, (0.5, 0.5)])) <= 1e-9
    assert mcshane_gap(wave128, x, y, [(0.5, 0.1)]) >= -1e-9


def test_mcshane_nested_monotone(wave128, square):
    G = points_in(square, 12, seed=4)
    x, y = (0.15, 0.6), (0.8, 0.35)
    gaps = [mcshane_gap(wave128, x, y, G[:k]) for k in range(1, 13)]
    assert np.all(np.diff(gaps) <= 1e-12)
    with pytest.raises(ValueError):
        mcshane_gap(wave128, x, y, np.empty((0, 2)))
