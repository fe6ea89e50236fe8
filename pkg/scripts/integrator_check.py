"""Compare the exact segment propagator with adaptive RK45 on random pulses."""
import numpy as np

from nmmetrology.dynamics import ControlPulse, propagate
from nmmetrology.model import InitialStateParam, ModelParams, amplitudes_from_param

rng = np.random.default_rng(0)
m = ModelParams(rabi=10.0)
worst = {"c": 0.0, "R": 0.0, "lambda": 0.0, "phi": 0.0}
for _ in range(10):
    p = InitialStateParam(rng.uniform(-1, 1), rng.uniform(0, np.pi))
    pulse = ControlPulse(rng.uniform(-20, 20, 8), m.horizon)
    x = amplitudes_from_param(p)
    a = propagate(m, x, pulse, sensitivities={"R", "lambda", "phi"})
    b = propagate(m, x, pulse, sensitivities={"R", "lambda", "phi"}, method="rk45")
    worst["c"] = max(worst["c"], np.abs(a.c - b.c).max())
    for tag in ("R", "lambda", "phi"):
        worst[tag] = max(worst[tag], np.abs(a.sens[tag][0] - b.sens[tag][0]).max())
for k, v in worst.items():
    print(f"max |expm - rk45| for {k}: {v:.2e}")
