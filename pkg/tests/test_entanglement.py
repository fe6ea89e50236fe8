import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmmetrology.dynamics import propagate
from nmmetrology.entanglement import concurrence_closed, concurrence_wootters
from nmmetrology.errors import NegativeEigenvalueError
from nmmetrology.model import (
    InitialStateParam,
    ModelParams,
    ProbeAmplitudes,
    amplitudes_from_param,
    density_batch,
)
from oracles import concurrence_from_definition


def test_bell_and_product_states():
    bell = ProbeAmplitudes(1 / np.sqrt(2), 1 / np.sqrt(2))
    assert concurrence_closed(bell) == pytest.approx(1.0)
    assert concurrence_wootters(density_batch(np.array([[1, 0]]))[0]) == pytest.approx(0.0)
    werner = 0.7 * np.outer([0, 1, 1, 0], [0, 1, 1, 0]) / 2 + 0.3 * np.eye(4) / 4
    # Werner-type state: C = max(0, (3p - 1) / 2)
    assert concurrence_wootters(werner) == pytest.approx(0.55)


@given(st.floats(-1.0, 1.0), st.floats(0.0, np.pi))
def test_initial_concurrence(s, phi):
    x = amplitudes_from_param(InitialStateParam(s, phi))
    assert concurrence_closed(x) == pytest.approx(np.sqrt(1 - s ** 2), abs=1e-12)


@given(st.integers(0, 10 ** 6))
def test_wootters_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    c *= rng.uniform(0, 1, (4, 1)) / np.linalg.norm(c, axis=1, keepdims=True)
    closed = concurrence_closed(c)
    for rho, ref in zip(density_batch(c), closed):
        assert concurrence_wootters(rho) == pytest.approx(ref, abs=1e-8)


def test_wootters_matches_definition(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    assert concurrence_wootters(rho) == pytest.approx(concurrence_from_definition(rho), abs=1e-8)


def test_trajectory_concurrence(strong_model):
    traj = propagate(strong_model, amplitudes_from_param(InitialStateParam(0.0)), grid_points=100)
    closed = concurrence_closed(traj.c)
    woot = np.array([concurrence_wootters(r) for r in traj.rhos()])
    assert np.max(np.abs(closed - woot)) < 1e-8
    assert np.all(closed <= 1.0 + 1e-12)


def test_rejects_non_state():
    with pytest.raises(NegativeEigenvalueError):
        concurrence_wootters(np.diag([1.2, -0.2, 0, 0]))
