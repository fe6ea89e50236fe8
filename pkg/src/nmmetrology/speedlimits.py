"""Bures geometry and the two quantum speed limit times."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlPulse, Trajectory, propagate, time_derivative_rho
from .errors import NegativeEigenvalueError
from .metrology import cumulative_open_start, qfi_curve
from .model import InitialStateParam, ModelParams, amplitudes_from_param

DEFAULT_TARGET_ANGLE = np.pi / 4
# QSL searches run on a trajectory this many times longer than the horizon.
QSL_HORIZON_FACTOR = 10.0

_SQRT_CUTOFF = 1e-14


@dataclass(frozen=True)
class QslResult:
    """``tau`` is ``inf`` when the target is not reached (``saturated``)."""

    tau: float
    target_angle: float
    traveled: float
    threshold: float

    @property
    def saturated(self) -> bool:
        return not np.isfinite(self.tau)


def _psd_root(rho):
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-9:
        raise NegativeEigenvalueError(f"state has eigenvalue {w.min():.3g}")
    keep = w > _SQRT_CUTOFF
    return v[:, keep] * np.sqrt(w[keep])


def bures_fidelity(rho0: np.ndarray, rho1: np.ndarray) -> float:
    """Root fidelity Tr sqrt(sqrt(rho0) rho1 sqrt(rho0)).

    Evaluated as the nuclear norm of X0^dag X1 with rho_i = X_i X_i^dag built
    from the non-null eigenpairs, which avoids taking square roots of
    round-off eigenvalues in the null space.
    """
    x0 = _psd_root(np.asarray(rho0, dtype=complex))
    x1 = _psd_root(np.asarray(rho1, dtype=complex))
    if x0.shape[1] == 0 or x1.shape[1] == 0:
        return 0.0
    sv = np.linalg.svd(x0.conj().T @ x1, compute_uv=False)
    return float(min(np.sum(sv), 1.0))


def bures_angle(rho0: np.ndarray, rho1: np.ndarray) -> float:
    return float(np.arccos(np.clip(bures_fidelity(rho0, rho1), 0.0, 1.0)))


def _cumulative(times, speed):
    steps = 0.5 * (speed[1:] + speed[:-1]) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(steps)])


def _crossing(times, length, threshold):
    hit = np.nonzero(length >= threshold)[0]
    if len(hit) == 0:
        return np.inf
    i = hit[0]
    if i == 0:
        return float(times[0])
    t0, t1 = times[i - 1], times[i]
    l0, l1 = length[i - 1], length[i]
    return float(t0 + (threshold - l0) / (l1 - l0) * (t1 - t0))


def fisher_speed(traj: Trajectory) -> np.ndarray:
    return np.sqrt(qfi_curve(traj, "t").values / 4.0)


def opnorm_speed(traj: Trajectory) -> np.ndarray:
    eig = np.linalg.eigvalsh(time_derivative_rho(traj))
    return np.max(np.abs(eig), axis=-1)


def fisher_length(traj: Trajectory) -> np.ndarray:
    """Accumulated path length int_0^t sqrt(F_t / 4) dt' on the grid."""
    return cumulative_open_start(traj.times, fisher_speed(traj))


def opnorm_length(traj: Trajectory) -> np.ndarray:
    return _cumulative(traj.times, opnorm_speed(traj))


def tau_fisher(traj: Trajectory, target_angle: float = DEFAULT_TARGET_ANGLE) -> QslResult:
    if not 0.0 < target_angle <= np.pi / 2:
        raise ValueError("target_angle must lie in (0, pi/2]")
    length = fisher_length(traj)
    return QslResult(_crossing(traj.times, length, target_angle), target_angle,
                     float(length[-1]), target_angle)


def tau_opnorm(traj: Trajectory, target_angle: float = DEFAULT_TARGET_ANGLE) -> QslResult:
    if not 0.0 < target_angle <= np.pi / 2:
        raise ValueError("target_angle must lie in (0, pi/2]")
    threshold = float(np.sin(target_angle) ** 2)
    length = opnorm_length(traj)
    return QslResult(_crossing(traj.times, length, threshold), target_angle,
                     float(length[-1]), threshold)


def qsl_trajectory(m: ModelParams, p: InitialStateParam, grid_points: int = 20000,
                   horizon_factor: float = QSL_HORIZON_FACTOR) -> Trajectory:
    """Uncontrolled long-horizon trajectory used for saturation decisions."""
    long = m.replace(horizon=m.horizon * horizon_factor)
    return propagate(long, amplitudes_from_param(p), ControlPulse.zero(long.horizon),
                     grid_points=grid_points)


def qsl_point(m: ModelParams, p: InitialStateParam, target_angle: float = DEFAULT_TARGET_ANGLE,
              grid_points: int = 20000, horizon_factor: float = QSL_HORIZON_FACTOR):
    traj = qsl_trajectory(m, p, grid_points, horizon_factor)
    return tau_fisher(traj, target_angle), tau_opnorm(traj, target_angle)


def qsl_map(m: ModelParams, s_values, phi_values, target_angle: float = DEFAULT_TARGET_ANGLE,
            grid_points: int = 20000, horizon_factor: float = QSL_HORIZON_FACTOR):
    """tau_op for every (s, phi) cell; rows follow ``s_values``."""
    return [[qsl_point(m, InitialStateParam(s, phi), target_angle, grid_points,
                       horizon_factor)[1]
             for phi in phi_values] for s in s_values]
