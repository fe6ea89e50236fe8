"""Piecewise-constant pulse optimization of terminal QFI or concurrence."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import ControlPulse, final_state
from .entanglement import concurrence_closed
from .metrology import qfi_from_amplitudes
from .model import InitialStateParam, ModelParams, amplitudes_from_param

OBJECTIVES = ("qfi_R_at_T", "qfi_lambda_at_T", "concurrence_at_T")
OBJECTIVE_TAG = {"qfi_R_at_T": "R", "qfi_lambda_at_T": "lambda"}

DEFAULT_SEGMENTS = 8
DEFAULT_RESTARTS = 20
DEFAULT_MAXFEV = 3000


@dataclass(frozen=True)
class ControlProblem:
    model: ModelParams
    x0: InitialStateParam
    objective: str = "qfi_lambda_at_T"
    segments: int = DEFAULT_SEGMENTS
    eps_max: float | None = None  # defaults to 20 * lambda
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    maxfev: int = DEFAULT_MAXFEV

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.segments < 1 or self.restarts < 1:
            raise ValueError("segments and restarts must be positive")
        if self.eps_max is None:
            object.__setattr__(self, "eps_max", 20.0 * self.model.lam)
        if self.eps_max < 0:
            raise ValueError("eps_max must be non-negative")

    def pulse(self, amplitudes) -> ControlPulse:
        return ControlPulse(tuple(amplitudes), self.model.horizon, self.eps_max)


@dataclass
class ControlSolution:
    pulse: ControlPulse
    objective_value: float
    baseline: float
    history: list = field(default_factory=list)
    restarts_log: list = field(default_factory=list)
    converged: bool = True

    @property
    def best_so_far(self) -> list:
        return list(np.maximum.accumulate([self.baseline] + self.restarts_log))


def evaluate_objective(problem: ControlProblem, pulse: ControlPulse) -> float:
    x0 = amplitudes_from_param(problem.x0)
    tag = OBJECTIVE_TAG.get(problem.objective)
    c, sens = final_state(problem.model, x0, pulse, (tag,) if tag else ())
    if tag is None:
        return float(concurrence_closed(c))
    return float(qfi_from_amplitudes(c, sens[tag]))


def _run_restart(problem: ControlProblem, start: np.ndarray):
    bound = problem.eps_max
    history = []
    best = [-np.inf]

    def loss(x):
        value = evaluate_objective(problem, problem.pulse(np.clip(x, -bound, bound)))
        best[0] = max(best[0], value)
        return -value

    def record(_xk):
        history.append(best[0])

    res = minimize(loss, start, method="Nelder-Mead",
                   bounds=[(-bound, bound)] * problem.segments, callback=record,
                   options={"maxfev": problem.maxfev, "xatol": 1e-6, "fatol": 1e-12,
                            "adaptive": problem.segments > 4})
    x = np.clip(res.x, -bound, bound)
    return x, -float(res.fun), history, bool(res.success)


def restart_points(problem: ControlProblem) -> list[np.ndarray]:
    """Initial pulses, one independent stream per restart so order never matters."""
    streams = np.random.SeedSequence(problem.seed).spawn(problem.restarts)
    return [np.random.default_rng(s).uniform(-problem.eps_max, problem.eps_max,
                                             problem.segments) for s in streams]


def optimize(problem: ControlProblem, workers: int = 1) -> ControlSolution:
    """Best of ``restarts`` bounded simplex searches; the zero pulse is the floor."""
    starts = restart_points(problem)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_restart, [problem] * len(starts), starts))
    else:
        runs = [_run_restart(problem, s) for s in starts]

    zero = problem.pulse(np.zeros(problem.segments))
    baseline = evaluate_objective(problem, zero)
    best_x, best_val = np.zeros(problem.segments), baseline
    history, log = [], []
    converged = True
    for x, val, hist, ok in runs:
        log.append(val)
        history.extend(hist)
        converged &= ok
        if val > best_val:
            best_x, best_val = x, val
    pulse = problem.pulse(best_x)
    # report a fresh evaluation, never a value cached inside the optimizer
    value = evaluate_objective(problem, pulse)
    return ControlSolution(pulse, value, baseline, history, log, converged)
