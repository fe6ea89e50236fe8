"""Quantum and classical Fisher information on probe trajectories."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, parameter_derivative_rho
from .errors import InvalidPovmError, NegativeEigenvalueError, NonHermitianError

EIG_CUTOFF = 1e-12
PROB_CUTOFF = 1e-12
HERMITIAN_TOL = 1e-10
NEGATIVE_TOL = 1e-9

FISHER_TAGS = ("t", "R", "lambda", "phi")


class DegenerateOutcomeWarning(RuntimeWarning):
    """A POVM outcome with vanishing probability has a non-vanishing derivative."""


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns


@dataclass(frozen=True)
class Povm:
    effects: tuple

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        if not effects:
            raise InvalidPovmError("empty POVM")
        dim = effects[0].shape[0]
        for e in effects:
            if e.shape != (dim, dim) or not np.allclose(e, e.conj().T, atol=1e-10):
                raise InvalidPovmError("effects must be square Hermitian matrices")
            if np.linalg.eigvalsh(e).min() < -1e-10:
                raise InvalidPovmError("effects must be positive semidefinite")
        if not np.allclose(sum(effects), np.eye(dim), atol=1e-10):
            raise InvalidPovmError("effects do not sum to the identity")

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.array([np.real(np.trace(e @ rho)) for e in self.effects])


@dataclass
class FisherCurve:
    times: np.ndarray
    values: np.ndarray
    tag: str


def spectral_decomposition(rho: np.ndarray) -> SpectralDecomposition:
    w, v = np.linalg.eigh(rho)
    return SpectralDecomposition(w[::-1], v[:, ::-1])


def _check_hermitian(m, name):
    if np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) > HERMITIAN_TOL:
        raise NonHermitianError(f"{name} is not Hermitian")


def qfi(rho: np.ndarray, drho: np.ndarray) -> float:
    return float(qfi_batch(np.asarray(rho)[None], np.asarray(drho)[None])[0])


def qfi_batch(rho: np.ndarray, drho: np.ndarray) -> np.ndarray:
    """QFI for stacks of (rho, d rho) in the eigenbasis of rho.

    Uses F = sum_{n,m} 2 |<n|d rho|m>|^2 / (w_n + w_m), pairs with
    w_n + w_m <= EIG_CUTOFF dropped. The diagonal terms are the classical
    part (d w_n)^2 / w_n and the off-diagonal ones reproduce the
    eigenvector-derivative term, since <n|d rho|m> = (w_m - w_n) <n|d m>.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    _check_hermitian(rho, "rho")
    _check_hermitian(drho, "drho")
    w, v = np.linalg.eigh(rho)
    if w.min() < -NEGATIVE_TOL:
        raise NegativeEigenvalueError(f"rho has eigenvalue {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    d = np.conj(np.swapaxes(v, -1, -2)) @ drho @ v
    denom = w[..., :, None] + w[..., None, :]
    keep = denom > EIG_CUTOFF
    terms = np.where(keep, 2.0 * np.abs(d) ** 2 / np.where(keep, denom, 1.0), 0.0)
    return np.sum(terms, axis=(-1, -2))


def qfi_from_amplitudes(c: np.ndarray, dc: np.ndarray) -> np.ndarray:
    """Closed-form QFI for the rank-2 family rho = |v><v| (+) (1 - |v|^2)|00><00|.

    With w = |v|^2 and p0 = 1 - w,
    F = (dw)^2 / w + 4 (|dv|^2 - |<v|dv>|^2 / w) + (dw)^2 / p0.
    """
    c = np.asarray(c, dtype=complex)
    dc = np.asarray(dc, dtype=complex)
    w = np.sum(np.abs(c) ** 2, axis=-1)
    p0 = 1.0 - w
    overlap = np.sum(np.conj(c) * dc, axis=-1)
    dw = 2.0 * np.real(overlap)
    safe_w = np.where(w > EIG_CUTOFF, w, 1.0)
    safe_p0 = np.where(p0 > EIG_CUTOFF, p0, 1.0)
    pop = np.where(w > EIG_CUTOFF, dw ** 2 / safe_w, 0.0)
    coh = np.where(w > EIG_CUTOFF,
                   4.0 * (np.sum(np.abs(dc) ** 2, axis=-1) - np.abs(overlap) ** 2 / safe_w), 0.0)
    ground = np.where(p0 > EIG_CUTOFF, dw ** 2 / safe_p0, 0.0)
    return pop + np.maximum(coh, 0.0) + ground


def _clamp_curve(values: np.ndarray, tag: str) -> np.ndarray:
    if values.min() < -1e-9:
        raise NegativeEigenvalueError(f"QFI for {tag!r} went negative ({values.min():.3g})")
    return np.clip(values, 0.0, None)


def qfi_curve(traj: Trajectory, tag: str) -> FisherCurve:
    """F_tag(t) on the trajectory grid; needs the matching sensitivity unless tag == "t"."""
    if tag not in FISHER_TAGS:
        raise ValueError(f"unknown tag {tag!r}")
    drho = parameter_derivative_rho(traj, tag)
    values = qfi_batch(traj.rhos(), drho)
    return FisherCurve(traj.times, _clamp_curve(values, tag), tag)


def qfi_time(traj: Trajectory, index: int) -> float:
    rho = traj.rho(index)
    drho = parameter_derivative_rho(traj, "t")[index]
    return qfi(rho, drho)


def cumulative_open_start(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Running trapezoid integral that uses the right limit of ``values`` at t0.

    A pure initial state with zero velocity has F_t(0) = 0 while F_t(0+) > 0,
    the usual jump of the QFI where the rank of rho changes. The first cell
    therefore takes its left value from a linear extrapolation of the next
    two samples, which is still second order for smooth curves.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValueError("empty curve")
    if len(values) < 3:
        steps = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
    else:
        h1, h2 = times[1] - times[0], times[2] - times[1]
        start = max(values[1] + (values[1] - values[2]) * h1 / h2, 0.0)
        steps = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
        steps[0] = 0.5 * (start + values[1]) * h1
    return np.concatenate([[0.0], np.cumsum(steps)])


def total_qfi(curve: FisherCurve) -> float:
    return float(max(cumulative_open_start(curve.times, curve.values)[-1], 0.0))


def classical_fisher(rho: np.ndarray, drho: np.ndarray, povm: Povm) -> float:
    p = povm.probabilities(rho)
    dp = povm.probabilities(drho)
    total = 0.0
    for px, dpx in zip(p, dp):
        if px < PROB_CUTOFF:
            if abs(dpx) >= np.sqrt(PROB_CUTOFF):
                warnings.warn(f"outcome with p={px:.3g} has dp={dpx:.3g}; term dropped",
                              DegenerateOutcomeWarning, stacklevel=2)
            continue
        total += dpx ** 2 / px
    return float(total)


def classical_fisher_curve(traj: Trajectory, tag: str, povm: Povm) -> FisherCurve:
    rhos = traj.rhos()
    drhos = parameter_derivative_rho(traj, tag)
    values = np.array([classical_fisher(r, d, povm) for r, d in zip(rhos, drhos)])
    return FisherCurve(traj.times, values, tag)


def population_povm() -> Povm:
    """Three-outcome measurement: weighted projectors on |10>, |01> and the rest."""
    weight = np.sqrt(2.0) / (1.0 + np.sqrt(2.0))
    e1 = np.zeros((4, 4), dtype=complex)
    e2 = np.zeros((4, 4), dtype=complex)
    e1[1, 1] = weight
    e2[2, 2] = weight
    return Povm((e1, e2, np.eye(4) - e1 - e2))
