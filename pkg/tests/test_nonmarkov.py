import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmmetrology.dynamics import ControlPulse, propagate
from nmmetrology.errors import GridMismatchError
from nmmetrology.model import (
    InitialStateParam,
    ModelParams,
    amplitudes_from_param,
    density_batch,
)
from nmmetrology.nonmarkov import (
    _deduplicate,
    _pair_eval,
    blp_measure,
    distance_curve,
    distance_from_amplitudes,
    positive_increments,
    positive_sigma_integral,
    refined_blp,
    sigma,
    sigma_exact,
    state_grid,
    trace_distance,
)
from oracles import trace_norm_distance


def _family(seed, n):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return c * rng.uniform(0, 1, (n, 1)) / np.linalg.norm(c, axis=1, keepdims=True)


@given(st.integers(0, 10 ** 6))
def test_distance_closed_form_matches_trace_norm(seed):
    c1, c2 = _family(seed, 3), _family(seed + 1, 3)
    fast = distance_from_amplitudes(c1, c2)
    for k in range(3):
        r1, r2 = density_batch(c1[k:k + 1])[0], density_batch(c2[k:k + 1])[0]
        assert fast[k] == pytest.approx(trace_norm_distance(r1, r2), abs=1e-12)
        assert trace_distance(r1, r2) == pytest.approx(fast[k], abs=1e-12)


@given(st.integers(0, 10 ** 6))
def test_distance_bounds_and_symmetry(seed):
    c1, c2 = _family(seed, 5), _family(seed + 7, 5)
    d = distance_from_amplitudes(c1, c2)
    assert np.all(d >= 0) and np.all(d <= 1 + 1e-12)
    assert np.allclose(d, distance_from_amplitudes(c2, c1))
    assert np.allclose(distance_from_amplitudes(c1, c1), 0.0)


def test_revival_sums():
    assert positive_increments(np.array([0.5, 0.3, 0.4, 0.2, 0.6])) == pytest.approx(0.5)
    t = np.linspace(0, 2 * np.pi, 4001)
    assert positive_sigma_integral(t, np.cos(t)) == pytest.approx(2.0, abs=1e-6)
    assert positive_sigma_integral(t, -np.ones_like(t)) == 0.0


def test_sigma_exact_matches_gradient(strong_model):
    pair = (InitialStateParam(-0.9, np.pi / 4), InitialStateParam(0.9, np.pi))
    a, b = (propagate(strong_model, amplitudes_from_param(p), grid_points=4000) for p in pair)
    numeric = sigma(a, b)
    exact = sigma_exact(strong_model, ControlPulse.zero(strong_model.horizon), pair, a.times)
    # central differences smear the jumps of sigma at the kinks of D
    err = np.abs(numeric - exact)[1:-1]
    assert np.quantile(err, 0.98) < 1e-3 * np.abs(exact).max()
    assert sigma(a, b, 100) == pytest.approx(numeric[100])


def test_grid_mismatch():
    m = ModelParams()
    x = amplitudes_from_param(InitialStateParam(0.0))
    with pytest.raises(GridMismatchError):
        distance_curve(propagate(m, x, grid_points=10), propagate(m, x, grid_points=11))


def test_state_grid():
    grid = state_grid(21)
    assert len(grid) == 441
    # phi is meaningless on the two separable rows
    assert len(_deduplicate(grid)) == 441 - 2 * 20
    with pytest.raises(ValueError):
        state_grid(1)


def test_weak_coupling_is_markovian():
    res = blp_measure(ModelParams(rabi=0.1))
    assert res.value < 1e-3
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_strong_coupling_value(strong_model):
    res = blp_measure(strong_model)
    assert res.value == pytest.approx(3.5196, abs=1e-3)
    assert res.distance.shape == res.times.shape == res.sigma_curve.shape


def test_refined_routes_agree(strong_model):
    res = blp_measure(strong_model)
    increments, integral = refined_blp(strong_model, None, res.best_pair)
    assert increments == pytest.approx(integral, abs=1e-6)
    # the grid sum misses revival minima that fall between samples
    assert res.value <= increments
    assert increments == pytest.approx(res.value, rel=3e-3)


def test_value_is_increment_sum_of_stored_pair(strong_model):
    res = blp_measure(strong_model)
    assert positive_increments(res.distance) == pytest.approx(res.value, abs=1e-8)
    a, b = res.best_pair
    assert refined_blp(strong_model, None, (b, a)) == pytest.approx(
        refined_blp(strong_model, None, (a, b)), abs=1e-12)


def test_pair_grid_resolution_adequate(strong_model):
    coarse = blp_measure(strong_model, resolution=21).value
    fine = blp_measure(strong_model, resolution=41).value
    assert abs(fine - coarse) < 0.05 * coarse


def test_bright_dark_pair_stays_orthogonal():
    # the dark state is frozen and the bright one never leaves span{bright, |00>}
    m = ModelParams(rabi=5.0)
    pair = (InitialStateParam(-5 / 13, np.pi), InitialStateParam(5 / 13, 0.0))
    t = np.linspace(0, 2, 2001)
    dist, sig, _ = _pair_eval(m, ControlPulse.zero(2.0), pair, t)
    assert np.allclose(dist, 1.0, atol=1e-12)
    assert np.max(np.abs(sig)) < 1e-9


def test_revivals_for_bright_product_pair(sweep_model):
    pair = (InitialStateParam(5 / 13, 0.0), InitialStateParam(1.0, 0.0))
    t = np.linspace(0, 2, 2001)
    assert np.any(sigma_exact(sweep_model, ControlPulse.zero(2.0), pair, t) > 1e-3)
