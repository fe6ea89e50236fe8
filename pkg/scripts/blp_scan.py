"""N_BLP against the coupling R at fixed lambda, plus the refined two-route check."""
import argparse

import numpy as np

from nmmetrology.model import ModelParams
from nmmetrology.nonmarkov import blp_measure, refined_blp

ap = argparse.ArgumentParser()
ap.add_argument("--lam", type=float, default=1.0)
ap.add_argument("--horizon", type=float, default=2.0)
ap.add_argument("--resolution", type=int, default=21)
args = ap.parse_args()

print("R,n_blp,refined_increments,refined_integral")
for rabi in np.geomspace(0.1, 20.0, 12):
    m = ModelParams(rabi=float(rabi), lam=args.lam, horizon=args.horizon)
    res = blp_measure(m, resolution=args.resolution)
    inc, integral = refined_blp(m, None, res.best_pair) if res.value > 0 else (0.0, 0.0)
    print(f"{rabi:.4g},{res.value:.6g},{inc:.6g},{integral:.6g}")
