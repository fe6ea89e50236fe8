"""Two-qubit probe in the single-excitation sector of a common Lorentzian bath.

Density matrices use the ordered basis {|11>, |10>, |01>, |00>} throughout the
package. Only the central 2x2 block (|10>, |01>) and the |00> population are
ever populated by the reduced dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExcitationOverflowError

BASIS = ("11", "10", "01", "00")

# Overflow / clamp tolerance on the excitation |C1|^2 + |C2|^2.
EXCITATION_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Physical constants for one experiment.

    ``omega0`` is carried for completeness only; it drops out of the reduced
    equations of motion. ``rabi = 0`` is accepted as the decoupled limit.
    """

    a1: float = 0.4
    a2: float = 0.6
    rabi: float = 5.0
    lam: float = 1.0
    omega0: float = 0.0
    horizon: float = 2.0

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError(f"couplings must be positive, got a1={self.a1}, a2={self.a2}")
        if self.rabi < 0:
            raise ValueError(f"rabi must be non-negative, got {self.rabi}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def a_t(self) -> float:
        return float(np.hypot(self.a1, self.a2))

    def coupling_matrix(self) -> np.ndarray:
        """Real symmetric K with C'' + (lam - i eps) C' + K C = 0."""
        g = (self.rabi / self.a_t) ** 2
        return g * np.array([[self.a1 ** 2, self.a1 * self.a2],
                             [self.a1 * self.a2, self.a2 ** 2]])

    def replace(self, **changes) -> "ModelParams":
        fields = dict(a1=self.a1, a2=self.a2, rabi=self.rabi, lam=self.lam,
                      omega0=self.omega0, horizon=self.horizon)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class InitialStateParam:
    """Initial separability ``s`` in [-1, 1] and phase ``phi`` in [0, pi]."""

    s: float
    phi: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.s <= 1.0:
            raise ValueError(f"s must lie in [-1, 1], got {self.s}")
        if not 0.0 <= self.phi <= np.pi:
            raise ValueError(f"phi must lie in [0, pi], got {self.phi}")


@dataclass(frozen=True)
class ProbeAmplitudes:
    c1: complex
    c2: complex
    c1dot: complex = 0j
    c2dot: complex = 0j

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=complex)

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.c1dot, self.c2dot], dtype=complex)

    @property
    def excitation(self) -> float:
        return float(abs(self.c1) ** 2 + abs(self.c2) ** 2)


def amplitudes_from_param(p: InitialStateParam) -> ProbeAmplitudes:
    c1 = np.sqrt((1.0 - p.s) / 2.0)
    c2 = np.sqrt((1.0 + p.s) / 2.0) * np.exp(1j * p.phi)
    return ProbeAmplitudes(complex(c1), complex(c2))


def param_from_amplitudes(a: ProbeAmplitudes) -> InitialStateParam:
    """Inverse of :func:`amplitudes_from_param` up to a global phase.

    The global phase is fixed by making ``c1`` real and non-negative; the
    relative phase is then folded into [0, pi] by complex conjugation, which
    is the reflection the parametrization cannot represent.
    """
    norm = a.excitation
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"amplitudes must be normalized, |C|^2 = {norm}")
    s = float(np.clip(abs(a.c2) ** 2 - abs(a.c1) ** 2, -1.0, 1.0))
    if abs(a.c1) == 0.0 or abs(a.c2) == 0.0:
        return InitialStateParam(s, 0.0)
    phi = abs(float(np.angle(a.c2 * np.conj(a.c1))))
    return InitialStateParam(s, phi)


def subradiant_state(m: ModelParams) -> ProbeAmplitudes:
    return ProbeAmplitudes(complex(m.a2 / m.a_t), complex(-m.a1 / m.a_t))


def superradiant_state(m: ModelParams) -> ProbeAmplitudes:
    return ProbeAmplitudes(complex(m.a1 / m.a_t), complex(m.a2 / m.a_t))


def special_params(m: ModelParams) -> tuple[InitialStateParam, InitialStateParam]:
    """(sub-radiant, super-radiant) locations in the (s, phi) plane."""
    s_star = (m.a2 ** 2 - m.a1 ** 2) / m.a_t ** 2
    return InitialStateParam(-s_star, np.pi), InitialStateParam(s_star, 0.0)


def density_from_amplitudes(a: ProbeAmplitudes) -> np.ndarray:
    return density_batch(np.array([[a.c1, a.c2]], dtype=complex))[0]


def density_batch(c: np.ndarray) -> np.ndarray:
    """Stack of 4x4 density matrices from amplitudes of shape (..., 2)."""
    c = np.asarray(c, dtype=complex)
    w = np.sum(np.abs(c) ** 2, axis=-1)
    if np.any(w > 1.0 + EXCITATION_TOL):
        raise ExcitationOverflowError(f"excitation {w.max():.12g} exceeds 1")
    p0 = 1.0 - w
    p0 = np.where(np.abs(p0) < EXCITATION_TOL, np.maximum(p0, 0.0), p0)
    rho = np.zeros(c.shape[:-1] + (4, 4), dtype=complex)
    rho[..., 1:3, 1:3] = c[..., :, None] * np.conj(c[..., None, :])
    rho[..., 3, 3] = np.clip(p0, 0.0, 1.0)
    return rho


def density_derivative_batch(c: np.ndarray, dc: np.ndarray) -> np.ndarray:
    """Product-rule derivative of :func:`density_batch` given dC of the same shape."""
    c = np.asarray(c, dtype=complex)
    dc = np.asarray(dc, dtype=complex)
    drho = np.zeros(c.shape[:-1] + (4, 4), dtype=complex)
    block = dc[..., :, None] * np.conj(c[..., None, :])
    drho[..., 1:3, 1:3] = block + np.conj(np.swapaxes(block, -1, -2))
    drho[..., 3, 3] = -2.0 * np.real(np.sum(np.conj(c) * dc, axis=-1))
    return drho
