"""Reduced dynamics of the probe amplitudes under a piecewise-constant field.

The amplitudes obey

    C'' + (lam - i eps(t)) C' + K C = 0,    K = (R/a_t)^2 [[a1^2, a1 a2], [a1 a2, a2^2]]

with C'(0) = 0. Written first-order in y = (C1, C2, C1', C2') the system is
y' = A(eps) y, linear with coefficients that are constant on every control
segment. Parameter sensitivities s = dy/dtheta obey s' = A s + (dA/dtheta) y
with s(0) = 0, and the phase sensitivity is the propagation of dy(0)/dphi
through the same linear map.

Two integrators are provided. ``"expm"`` applies the exact segment propagator
exp(A h); ``"rk45"`` runs scipy's adaptive Dormand-Prince pair segment by
segment so no step straddles a discontinuity of the field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import (
    ExcitationOverflowError,
    GridMismatchError,
    IntegrationError,
    MissingSensitivityError,
)
from .model import (
    ModelParams,
    ProbeAmplitudes,
    density_batch,
    density_derivative_batch,
)

PARAM_TAGS = ("R", "lambda")
SENSITIVITY_TAGS = PARAM_TAGS + ("phi",)

RTOL = 1e-9
ATOL = 1e-12
DEFAULT_GRID_POINTS = 2000

# Excitation above 1 + OVERFLOW_TOL means the integrator is broken.
OVERFLOW_TOL = 1e-6


@dataclass(frozen=True)
class ControlPulse:
    """Piecewise-constant eps(t): ``amplitudes[k]`` on [k T/K, (k+1) T/K)."""

    amplitudes: tuple
    horizon: float
    eps_max: float = np.inf

    def __post_init__(self):
        amps = tuple(float(e) for e in np.atleast_1d(self.amplitudes))
        object.__setattr__(self, "amplitudes", amps)
        if len(amps) < 1:
            raise ValueError("a pulse needs at least one segment")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if any(abs(e) > self.eps_max for e in amps):
            raise ValueError(f"pulse amplitude exceeds eps_max={self.eps_max}")

    @classmethod
    def zero(cls, horizon: float, segments: int = 1, eps_max: float = np.inf) -> "ControlPulse":
        return cls((0.0,) * segments, horizon, eps_max)

    @property
    def segments(self) -> int:
        return len(self.amplitudes)

    @property
    def width(self) -> float:
        return self.horizon / self.segments

    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.segments + 1)

    def segment_index(self, t: float) -> int:
        k = int(np.floor(t / self.width))
        return min(max(k, 0), self.segments - 1)

    def __call__(self, t: float) -> float:
        return self.amplitudes[self.segment_index(t)]


@dataclass
class Trajectory:
    """Sampled solution. ``c`` and ``cdot`` have shape (len(times), 2).

    ``sens`` maps a tag in {"R", "lambda", "phi"} to a pair of arrays
    (dC/dtheta, dC'/dtheta), each shaped like ``c``.
    """

    times: np.ndarray
    c: np.ndarray
    cdot: np.ndarray
    params: ModelParams
    pulse: ControlPulse
    sens: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> ProbeAmplitudes:
        return ProbeAmplitudes(complex(self.c[i, 0]), complex(self.c[i, 1]),
                               complex(self.cdot[i, 0]), complex(self.cdot[i, 1]))

    @property
    def excitation(self) -> np.ndarray:
        return np.sum(np.abs(self.c) ** 2, axis=1)

    def rhos(self) -> np.ndarray:
        return density_batch(self.c)

    def rho(self, i: int) -> np.ndarray:
        return density_batch(self.c[i:i + 1])[0]


def _generator(m: ModelParams, eps: float) -> np.ndarray:
    a = np.zeros((4, 4), dtype=complex)
    a[0:2, 2:4] = np.eye(2)
    a[2:4, 0:2] = -m.coupling_matrix()
    a[2:4, 2:4] = -(m.lam - 1j * eps) * np.eye(2)
    return a


def _generator_derivative(m: ModelParams, tag: str) -> np.ndarray:
    da = np.zeros((4, 4), dtype=complex)
    if tag == "R":
        # K scales as R^2, so dK/dR = 2 R / a_t^2 * [[a1^2, ...]]
        g = 2.0 * m.rabi / m.a_t ** 2
        da[2:4, 0:2] = -g * np.array([[m.a1 ** 2, m.a1 * m.a2],
                                      [m.a1 * m.a2, m.a2 ** 2]])
    elif tag == "lambda":
        da[2:4, 2:4] = -np.eye(2)
    else:
        raise ValueError(f"unknown parameter tag {tag!r}")
    return da


def augmented_generator(m: ModelParams, eps: float, tags: tuple) -> np.ndarray:
    """Block lower-triangular generator for (y, dy/dtheta_1, ...)."""
    n = 4 * (1 + len(tags))
    a = _generator(m, eps)
    big = np.zeros((n, n), dtype=complex)
    for j in range(1 + len(tags)):
        big[4 * j:4 * j + 4, 4 * j:4 * j + 4] = a
    for j, tag in enumerate(tags, start=1):
        big[4 * j:4 * j + 4, 0:4] = _generator_derivative(m, tag)
    return big


def _initial_vector(x0: ProbeAmplitudes, tags: tuple, with_phi: bool) -> np.ndarray:
    """Columns: augmented state, plus the phase-derivative column if requested."""
    n = 4 * (1 + len(tags))
    y0 = np.zeros((n, 2 if with_phi else 1), dtype=complex)
    y0[0:4, 0] = [x0.c1, x0.c2, x0.c1dot, x0.c2dot]
    if with_phi:
        # d/dphi of (sqrt((1-s)/2), sqrt((1+s)/2) e^{i phi}) is (0, i C2)
        y0[0:4, 1] = [0.0, 1j * x0.c2, 0.0, 1j * x0.c2dot]
    return y0


def _segment_plan(pulse: ControlPulse, times: np.ndarray):
    """Yield (k, t_start, t_end, idx) with idx the sample indices in segment k."""
    edges = pulse.edges()
    seg = np.minimum(np.floor(times / pulse.width).astype(int), pulse.segments - 1)
    seg = np.maximum(seg, 0)
    for k in range(pulse.segments):
        idx = np.nonzero(seg == k)[0]
        yield k, edges[k], edges[k + 1], idx


def _evolve_expm(gens, pulse, times, y0):
    out = np.empty((len(times),) + y0.shape, dtype=complex)
    y = y0.copy()
    cache: dict = {}

    def step(k, h):
        if h == 0.0:
            return None
        key = (k, round(h / pulse.width, 12))
        if key not in cache:
            cache[key] = expm(gens[k] * h)
        return cache[key]

    for k, t0, t1, idx in _segment_plan(pulse, times):
        t = t0
        for i in idx:
            p = step(k, times[i] - t)
            if p is not None:
                y = p @ y
            out[i] = y
            t = times[i]
        p = step(k, t1 - t)
        if p is not None:
            y = p @ y
    return out


def _evolve_rk45(gens, pulse, times, y0, rtol, atol):
    shape = y0.shape
    out = np.empty((len(times),) + shape, dtype=complex)
    y = y0.reshape(-1).copy()
    for k, t0, t1, idx in _segment_plan(pulse, times):
        g = gens[k]

        def rhs(_t, v, g=g):
            return (g @ v.reshape(shape)).reshape(-1)

        t_eval = times[idx]
        if len(idx) == 0 or t_eval[-1] < t1:
            t_eval = np.append(t_eval, t1)
        sol = solve_ivp(rhs, (t0, t1), y, method="RK45", t_eval=t_eval,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegrationError(f"segment {k}: {sol.message}")
        for j, i in enumerate(idx):
            out[i] = sol.y[:, j].reshape(shape)
        y = sol.y[:, -1]
    return out


def sample(m: ModelParams, x0: ProbeAmplitudes, pulse: ControlPulse,
           times: np.ndarray, sensitivities: Iterable[str] = (),
           method: str = "expm", rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Solve on an arbitrary increasing grid inside [0, T] starting at t = 0."""
    if abs(pulse.horizon - m.horizon) > 1e-12 * m.horizon:
        raise ValueError(f"pulse horizon {pulse.horizon} != model horizon {m.horizon}")
    if x0.excitation > 1.0 + 1e-9:
        raise ExcitationOverflowError(f"initial excitation {x0.excitation} exceeds 1")
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0) or times[-1] > m.horizon * (1 + 1e-12):
        raise ValueError("times must start at 0, increase strictly and stay within the horizon")
    requested = set(sensitivities)
    unknown = requested - set(SENSITIVITY_TAGS)
    if unknown:
        raise ValueError(f"unknown sensitivity tags {sorted(unknown)}")
    tags = tuple(t for t in PARAM_TAGS if t in requested)
    with_phi = "phi" in requested

    gens = [augmented_generator(m, eps, tags) for eps in pulse.amplitudes]
    y0 = _initial_vector(x0, tags, with_phi)
    if method == "expm":
        ys = _evolve_expm(gens, pulse, times, y0)
    elif method == "rk45":
        ys = _evolve_rk45(gens, pulse, times, y0, rtol, atol)
    else:
        raise ValueError(f"unknown method {method!r}")
    ys[0] = y0

    c = ys[:, 0:2, 0]
    excitation = np.sum(np.abs(c) ** 2, axis=1)
    if excitation.max() > 1.0 + OVERFLOW_TOL:
        raise ExcitationOverflowError(
            f"excitation reached {excitation.max():.10g}; integrator failure")
    sens = {}
    for j, tag in enumerate(tags, start=1):
        sens[tag] = (ys[:, 4 * j:4 * j + 2, 0], ys[:, 4 * j + 2:4 * j + 4, 0])
    if with_phi:
        sens["phi"] = (ys[:, 0:2, 1], ys[:, 2:4, 1])
    return Trajectory(times, c, ys[:, 2:4, 0], m, pulse, sens)


def uniform_grid(horizon: float, grid_points: int) -> np.ndarray:
    """``grid_points + 1`` equally spaced samples including both endpoints."""
    if grid_points < 1:
        raise ValueError("grid_points must be positive")
    return np.linspace(0.0, horizon, grid_points + 1)


def propagate(m: ModelParams, x0: ProbeAmplitudes, pulse: ControlPulse | None = None,
              grid_points: int = DEFAULT_GRID_POINTS, sensitivities: Iterable[str] = (),
              method: str = "expm", rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    if pulse is None:
        pulse = ControlPulse.zero(m.horizon)
    return sample(m, x0, pulse, uniform_grid(m.horizon, grid_points), sensitivities,
                  method=method, rtol=rtol, atol=atol)


@lru_cache(maxsize=64)
def _split_generator(m: ModelParams, tags: tuple):
    """(A0, B) with augmented_generator(m, eps, tags) = A0 + 1j * eps * B."""
    a0 = augmented_generator(m, 0.0, tags)
    b = (augmented_generator(m, 1.0, tags) - a0) / 1j
    a0.setflags(write=False)
    b.setflags(write=False)
    return a0, b


def final_state(m: ModelParams, x0: ProbeAmplitudes, pulse: ControlPulse,
                sensitivities: Iterable[str] = ()):
    """(C, dC_by_tag) at t = T only; the cheap path used inside optimizers."""
    requested = set(sensitivities)
    tags = tuple(t for t in PARAM_TAGS if t in requested)
    with_phi = "phi" in requested
    y = _initial_vector(x0, tags, with_phi)
    a0, b = _split_generator(m, tags)
    eps = np.asarray(pulse.amplitudes)
    steps = expm((a0[None] + 1j * eps[:, None, None] * b[None]) * pulse.width)
    for p in steps:
        y = p @ y
    sens = {tag: y[4 * j:4 * j + 2, 0] for j, tag in enumerate(tags, start=1)}
    if with_phi:
        sens["phi"] = y[0:2, 1]
    return y[0:2, 0], sens


def propagator(m: ModelParams, pulse: ControlPulse | None = None,
               grid_points: int = DEFAULT_GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Linear map C(0) -> (C(t), C'(t)) on the uniform grid.

    Returns arrays U, V of shape (N+1, 2, 2) with C(t) = U(t) C(0) and
    C'(t) = V(t) C(0), valid for every initial condition with C'(0) = 0.
    """
    if pulse is None:
        pulse = ControlPulse.zero(m.horizon)
    times = uniform_grid(m.horizon, grid_points)
    gens = [_generator(m, eps) for eps in pulse.amplitudes]
    y0 = np.zeros((4, 2), dtype=complex)
    y0[0, 0] = y0[1, 1] = 1.0
    ys = _evolve_expm(gens, pulse, times, y0)
    return ys[:, 0:2, :], ys[:, 2:4, :]


def phase_sensitivity(traj_plus: Trajectory, traj_minus: Trajectory, dphi: float):
    """Central difference of two phase-shifted trajectories.

    The exact path is ``propagate(..., sensitivities={"phi"})``; this helper
    exists as its finite-difference cross-check.
    """
    if dphi <= 0:
        raise ValueError("dphi must be positive")
    if traj_plus.times.shape != traj_minus.times.shape or not np.array_equal(
            traj_plus.times, traj_minus.times):
        raise GridMismatchError("trajectories do not share a time grid")
    if traj_plus.params != traj_minus.params:
        raise GridMismatchError("trajectories do not share model parameters")
    dc = (traj_plus.c - traj_minus.c) / (2.0 * dphi)
    dcdot = (traj_plus.cdot - traj_minus.cdot) / (2.0 * dphi)
    return dc, dcdot


def time_derivative_rho(traj: Trajectory, index: int | None = None) -> np.ndarray:
    """d rho / dt by the product rule; all grid points when ``index`` is None."""
    if index is None:
        return density_derivative_batch(traj.c, traj.cdot)
    return density_derivative_batch(traj.c[index:index + 1], traj.cdot[index:index + 1])[0]


def parameter_derivative_rho(traj: Trajectory, tag: str) -> np.ndarray:
    if tag == "t":
        return time_derivative_rho(traj)
    if tag not in traj.sens:
        raise MissingSensitivityError(f"trajectory carries no {tag!r} sensitivity")
    return density_derivative_batch(traj.c, traj.sens[tag][0])
