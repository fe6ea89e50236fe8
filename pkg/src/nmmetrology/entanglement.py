"""Concurrence of the two-qubit probe."""
from __future__ import annotations

import numpy as np

from .errors import NegativeEigenvalueError
from .model import ProbeAmplitudes

_SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence_closed(a: ProbeAmplitudes | np.ndarray) -> float | np.ndarray:
    """2 |C1 C2^*|, valid for the single-excitation family only.

    Accepts a :class:`ProbeAmplitudes` or an array of amplitudes shaped (..., 2).
    """
    if isinstance(a, ProbeAmplitudes):
        return float(2.0 * abs(a.c1 * np.conj(a.c2)))
    c = np.asarray(a)
    return 2.0 * np.abs(c[..., 0] * np.conj(c[..., 1]))


def concurrence_wootters(rho: np.ndarray) -> float:
    """General two-qubit concurrence; complex conjugation in the computational basis.

    With rho = X X^dag the Wootters numbers (square roots of the eigenvalues
    of rho rho~) are the singular values of X^dag (sy x sy) X^*, which avoids
    square roots of round-off eigenvalues.
    """
    rho = np.asarray(rho, dtype=complex)
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-9:
        raise NegativeEigenvalueError("rho is not positive semidefinite")
    x = v * np.sqrt(np.clip(w, 0.0, None))
    mu = np.zeros(4)
    sv = np.linalg.svd(x.conj().T @ _SIGMA_YY @ x.conj(), compute_uv=False)
    mu[:len(sv)] = np.sort(sv)[::-1]
    return float(max(0.0, mu[0] - mu[1] - mu[2] - mu[3]))
