"""Full-size experiments assembled from the physics modules. No file I/O here."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .control import ControlProblem, OBJECTIVE_TAG, optimize
from .dynamics import ControlPulse, propagate
from .entanglement import concurrence_closed
from .flows import incoming_flow, overlap_fraction
from .metrology import (
    FISHER_TAGS,
    classical_fisher_curve,
    population_povm,
    qfi_curve,
    total_qfi,
)
from .model import InitialStateParam, ModelParams, amplitudes_from_param, special_params
from .nonmarkov import DEFAULT_RESOLUTION, blp_measure
from .speedlimits import QSL_HORIZON_FACTOR, qsl_point


def s_axis(m: ModelParams, n: int) -> np.ndarray:
    """n points on [-1, 1] with the nearest nodes moved onto the sub/super-radiant s."""
    s = np.linspace(-1.0, 1.0, n)
    for p in special_params(m):
        s[np.argmin(np.abs(s - p.s))] = p.s
    return s


def phi_axis(n: int) -> np.ndarray:
    return np.linspace(0.0, np.pi, n)


def _map(fn, items, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _fisher_cell(args):
    m, s, phi, tags, grid_points = args
    sens = {t for t in tags if t != "t"}
    traj = propagate(m, amplitudes_from_param(InitialStateParam(s, phi)),
                     grid_points=grid_points, sensitivities=sens)
    return [(s, phi, tag, total_qfi(qfi_curve(traj, tag))) for tag in tags]


def fisher_sweep(m: ModelParams, s_values, phi_values, tags=FISHER_TAGS,
                 grid_points: int = 2000, workers: int = 1) -> list[tuple]:
    """Rows (s, phi, tag, total QFI) over the (s, phi) grid, uncontrolled."""
    cells = [(m, float(s), float(phi), tuple(tags), grid_points)
             for s in s_values for phi in phi_values]
    return [row for rows in _map(_fisher_cell, cells, workers) for row in rows]


def _qsl_cell(args):
    m, s, phi, target, grid_points, factor = args
    f, op = qsl_point(m, InitialStateParam(s, phi), target, grid_points, factor)
    return s, phi, f, op


def qsl_sweep(m: ModelParams, s_values, phi_values, target_angle: float = np.pi / 4,
              grid_points: int = 20000, horizon_factor: float = QSL_HORIZON_FACTOR,
              workers: int = 1) -> list[tuple]:
    """Rows (s, phi, fisher QslResult, opnorm QslResult)."""
    cells = [(m, float(s), float(phi), target_angle, grid_points, horizon_factor)
             for s in s_values for phi in phi_values]
    return _map(_qsl_cell, cells, workers)


@dataclass
class OptimizeRow:
    s: float
    phi: float
    f_T_uncontrolled: float
    f_max_uncontrolled: float
    f_tot_uncontrolled: float
    f_T_optimized: float
    pulse: ControlPulse


def _objective_curve(traj, objective):
    tag = OBJECTIVE_TAG.get(objective)
    if tag is None:
        return concurrence_closed(traj.c)
    return qfi_curve(traj, tag).values


def _optimize_cell(args):
    m, s, phi, objective, segments, eps_max, restarts, seed, grid_points, maxfev = args
    p = InitialStateParam(s, phi)
    tag = OBJECTIVE_TAG.get(objective)
    traj = propagate(m, amplitudes_from_param(p), grid_points=grid_points,
                     sensitivities={tag} if tag else ())
    curve = _objective_curve(traj, objective)
    problem = ControlProblem(m, p, objective, segments, eps_max, restarts, seed, maxfev)
    sol = optimize(problem)
    return OptimizeRow(s, phi, float(curve[-1]), float(curve.max()),
                       float(np.trapezoid(curve, traj.times)), sol.objective_value, sol.pulse)


def optimize_sweep(m: ModelParams, s_values, phi_values, objective: str = "qfi_lambda_at_T",
                   segments: int = 8, eps_max: float | None = None, restarts: int = 20,
                   seed: int = 0, grid_points: int = 2000, maxfev: int = 3000,
                   workers: int = 1) -> list[OptimizeRow]:
    cells = [(m, float(s), float(phi), objective, segments, eps_max, restarts, seed,
              grid_points, maxfev) for phi in phi_values for s in s_values]
    return _map(_optimize_cell, cells, workers)


@dataclass
class FlowScenario:
    name: str
    pulse: ControlPulse
    times: np.ndarray
    curves: dict
    intervals: dict
    overlaps: dict = field(default_factory=dict)
    blp_value: float = 0.0
    blp_pair: tuple = ()
    objective_value: float | None = None


def flow_scenario(name: str, m: ModelParams, p: InitialStateParam, pulse: ControlPulse,
                  tags=("lambda",), povm_tag: str | None = "lambda",
                  grid_points: int = 2000, blp_resolution: int = DEFAULT_RESOLUTION,
                  objective_value: float | None = None) -> FlowScenario:
    """Curves F_tag, G_tag, D and C on one trajectory, their incoming flows and overlaps."""
    sens = {t for t in tags if t != "t"}
    if povm_tag and povm_tag != "t":
        sens.add(povm_tag)
    traj = propagate(m, amplitudes_from_param(p), pulse, grid_points=grid_points,
                     sensitivities=sens)
    blp = blp_measure(m, pulse, blp_resolution, grid_points)
    curves = {f"F_{t}": qfi_curve(traj, t).values for t in tags}
    if povm_tag:
        curves[f"G_{povm_tag}"] = classical_fisher_curve(traj, povm_tag, population_povm()).values
    curves["D"] = blp.distance
    curves["C"] = concurrence_closed(traj.c)
    intervals = {k: incoming_flow(traj.times, v, source_tag=k) for k, v in curves.items()}
    overlaps = {}
    for a, b in combinations(curves, 2):
        overlaps[(a, b)] = overlap_fraction(intervals[a], intervals[b])
        overlaps[(b, a)] = overlap_fraction(intervals[b], intervals[a])
    return FlowScenario(name, pulse, traj.times, curves, intervals, overlaps,
                        blp.value, blp.best_pair, objective_value)


def flows_control(m: ModelParams, p: InitialStateParam, objective: str = "qfi_lambda_at_T",
                  segments: int = 8, eps_max: float | None = None, restarts: int = 20,
                  seed: int = 0, grid_points: int = 2000, maxfev: int = 3000,
                  blp_resolution: int = DEFAULT_RESOLUTION) -> list[FlowScenario]:
    """No control, control maximizing F(T), control maximizing C(T)."""
    qfi_objective = objective if objective in OBJECTIVE_TAG else "qfi_lambda_at_T"
    tag = OBJECTIVE_TAG[qfi_objective]
    out = [flow_scenario("none", m, p, ControlPulse.zero(m.horizon, segments),
                         (tag,), tag, grid_points, blp_resolution)]
    for name, obj in (("qfi", qfi_objective), ("concurrence", "concurrence_at_T")):
        sol = optimize(ControlProblem(m, p, obj, segments, eps_max, restarts, seed, maxfev))
        out.append(flow_scenario(name, m, p, sol.pulse, (tag,), tag, grid_points,
                                 blp_resolution, sol.objective_value))
    return out


def flows_uncontrolled(m: ModelParams, p: InitialStateParam, grid_points: int = 2000,
                       blp_resolution: int = DEFAULT_RESOLUTION) -> list[FlowScenario]:
    return [flow_scenario("none", m, p, ControlPulse.zero(m.horizon),
                          ("R", "phi", "lambda"), "lambda", grid_points, blp_resolution)]
