"""Threshold Lambda of the comparison ODE across the decay exponent b, with the blow-up time just above it."""
import numpy as np

from vacflow import odebound

print("b,Lambda,J_inf,blowup_time_at_1.01_Lambda")
for b in np.linspace(1.6, 3.0, 8):
    spec = odebound.OdeSpec(a=2, b=float(b), C1=1, C2=0.5, D1=0, D2=-2)
    th = odebound.threshold_lambda(spec)
    tb = odebound.blowup_time(spec.with_(Z0=1.01 * th.lam))
    print(f"{b:.3f},{th.lam:.10g},{th.J_inf:.10g},{tb:.6g}")
