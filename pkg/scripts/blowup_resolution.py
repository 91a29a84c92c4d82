"""Halt time of the sine blow-up run against resolution and advection scheme."""
import os

from vacflow import experiments as ex
from vacflow.config import load

CFG = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "configs", "blowup.cfg")

print("N,scheme,halt_reason,halt_t,predicted")
for N in (512, 1024, 2048):
    for scheme in ("central_filtered", "upwind1"):
        cfg = load(CFG, [f"grid.N={N}", f"solver.advection_scheme={scheme}"])
        res = ex.simulate(cfg)
        h = res.trajectory.halt
        print(f"{N},{scheme},{h.reason if h else 'none'},{h.t if h else float('nan'):.4f},"
              f"{ex.predicted_singular_time(res.setup):.4f}", flush=True)
