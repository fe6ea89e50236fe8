import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from nmmetrology.dynamics import propagate
from nmmetrology.errors import InvalidPovmError, NegativeEigenvalueError, NonHermitianError
from nmmetrology.metrology import (
    DegenerateOutcomeWarning,
    FisherCurve,
    Povm,
    classical_fisher,
    population_povm,
    qfi,
    qfi_batch,
    qfi_curve,
    qfi_from_amplitudes,
    qfi_time,
    spectral_decomposition,
    total_qfi,
)
from nmmetrology.model import (
    InitialStateParam,
    ModelParams,
    amplitudes_from_param,
    density_batch,
    density_derivative_batch,
    subradiant_state,
)
from nmmetrology.speedlimits import bures_fidelity
from oracles import qfi_from_fidelity


def _random_family(seed, n=1):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    c *= rng.uniform(0.05, 0.95, (n, 1)) / np.linalg.norm(c, axis=1, keepdims=True)
    dc = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return c, dc


def test_pure_qubit_rotation():
    theta = 0.7
    psi = np.array([np.cos(theta / 2), np.sin(theta / 2)])
    dpsi = 0.5 * np.array([-np.sin(theta / 2), np.cos(theta / 2)])
    rho = np.outer(psi, psi)
    drho = np.outer(dpsi, psi) + np.outer(psi, dpsi)
    assert qfi(rho, drho) == pytest.approx(1.0)


def test_diagonal_reduces_to_classical():
    p = np.array([0.2, 0.3, 0.5])
    dp = np.array([0.1, -0.4, 0.3])
    assert qfi(np.diag(p), np.diag(dp)) == pytest.approx(np.sum(dp ** 2 / p))


@given(st.integers(0, 10 ** 6))
def test_closed_form_matches_spectral(seed):
    c, dc = _random_family(seed, 4)
    spectral = qfi_batch(density_batch(c), density_derivative_batch(c, dc))
    assert np.allclose(spectral, qfi_from_amplitudes(c, dc), rtol=1e-9, atol=1e-10)


@given(st.integers(0, 10 ** 6))
def test_unitary_invariance_and_sign(seed):
    c, dc = _random_family(seed)
    rho, drho = density_batch(c)[0], density_derivative_batch(c, dc)[0]
    u = unitary_group.rvs(4, random_state=seed)
    f = qfi(rho, drho)
    assert f >= 0.0
    assert qfi(u @ rho @ u.conj().T, u @ drho @ u.conj().T) == pytest.approx(f, rel=1e-8)


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6))
def test_classical_fisher_below_qfi(seed):
    c, dc = _random_family(seed)
    rho, drho = density_batch(c)[0], density_derivative_batch(c, dc)[0]
    rng = np.random.default_rng(seed)
    u = unitary_group.rvs(4, random_state=seed)
    weights = rng.uniform(0, 1, 4)
    effects = [w * np.outer(u[:, k], u[:, k].conj()) for k, w in enumerate(weights)]
    rest = np.eye(4) - sum(effects)
    povm = Povm(tuple(effects) + (rest,))
    assert classical_fisher(rho, drho, povm) <= qfi(rho, drho) + 1e-9


def test_initial_phase_information():
    m = ModelParams()
    for s in (-0.6, 0.0, 0.3):
        traj = propagate(m, amplitudes_from_param(InitialStateParam(s, 0.4)),
                         grid_points=20, sensitivities={"phi"})
        assert qfi_curve(traj, "phi").values[0] == pytest.approx(1 - s ** 2)


def test_subradiant_carries_no_information():
    m = ModelParams()
    traj = propagate(m, subradiant_state(m), grid_points=100, sensitivities={"R", "lambda"})
    for tag in ("t", "R", "lambda"):
        assert total_qfi(qfi_curve(traj, tag)) < 1e-20


def test_qfi_matches_fidelity_oracle(strong_model):
    p = InitialStateParam(0.2, 0.9)
    x = amplitudes_from_param(p)
    traj = propagate(strong_model, x, grid_points=200, sensitivities={"R", "lambda"})
    h = 1e-4
    for tag, field in (("R", "rabi"), ("lambda", "lam")):
        value = getattr(strong_model, field)
        up = propagate(strong_model.replace(**{field: value + h}), x, grid_points=200)
        down = propagate(strong_model.replace(**{field: value - h}), x, grid_points=200)
        f = qfi_curve(traj, tag).values
        for i in (13, 77, 150, 199):
            oracle = qfi_from_fidelity(bures_fidelity(down.rho(i), up.rho(i)), h)
            assert abs(f[i] - oracle) < 1e-3 * max(f[i], 1.0)


def test_qfi_time_point():
    m = ModelParams()
    traj = propagate(m, amplitudes_from_param(InitialStateParam(0.0, 0.0)), grid_points=50)
    assert qfi_time(traj, 20) == pytest.approx(qfi_curve(traj, "t").values[20])


def test_total_qfi():
    t = np.linspace(0, 2, 11)
    assert total_qfi(FisherCurve(t, np.full(11, 3.0), "t")) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        total_qfi(FisherCurve(t[:0], t[:0], "t"))


def test_spectral_decomposition_descending():
    dec = spectral_decomposition(np.diag([0.1, 0.6, 0.3]))
    assert list(dec.eigenvalues) == pytest.approx([0.6, 0.3, 0.1])


def test_input_checks():
    rho = np.diag([0.5, 0.5])
    with pytest.raises(NonHermitianError):
        qfi(rho, np.array([[0, 1], [0, 0]]))
    with pytest.raises(NegativeEigenvalueError):
        qfi(np.diag([1.1, -0.1]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        qfi_curve(propagate(ModelParams(), amplitudes_from_param(InitialStateParam(0)),
                            grid_points=5), "omega")


def test_povm_validation():
    with pytest.raises(InvalidPovmError):
        Povm((np.eye(2) * 0.5,))
    with pytest.raises(InvalidPovmError):
        Povm((np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])))
    povm = population_povm()
    assert len(povm.effects) == 3
    assert np.allclose(sum(povm.effects), np.eye(4))


def test_degenerate_outcome_warns():
    povm = Povm((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    rho = np.diag([1.0, 0.0])
    drho = np.diag([-0.1, 0.1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = classical_fisher(rho, drho, povm)
    assert value == pytest.approx(0.01)
    assert any(issubclass(w.category, DegenerateOutcomeWarning) for w in caught)
