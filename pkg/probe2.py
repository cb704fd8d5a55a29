"""Scratch probe: smoothing slopes at N=96/128 for the singular profiles."""
import time
import numpy as np
import morreyflow as mf
from morreyflow import profiles

tg = np.geomspace(1e-3, 1e-1, 9)
for N in [96, 128]:
    t0 = time.time()
    geom = mf.TorusGeometry(n=3, L=4.0, N=N)
    ctx = mf.MorreyContext(geom)
    f_sing = profiles.singular(geom, gamma=1.0)
    fit = mf.smoothing_exponent(f_sing, 2, np.inf, 2.0, tg, ctx)
    print(f"N={N} singular g=1 (2,2)->inf: slope={fit.fitted_exponent:.4f} target=-0.5 off={abs(fit.fitted_exponent+0.5)/0.5*100:.1f}%")
    fit2 = mf.smoothing_exponent(f_sing, 2, 2, 2.0, tg, ctx)
    print(f"N={N} singular g=1 case ii: slope={fit2.fitted_exponent:.4f} (want |.|<=0.05)")
    f_half = profiles.singular(geom, gamma=0.5)
    fit3 = mf.smoothing_exponent(f_half, 2, np.inf, 1.0, tg, ctx)
    print(f"N={N} singular g=0.5 (2,1)->inf: slope={fit3.fitted_exponent:.4f} target=-0.25 off={abs(fit3.fitted_exponent+0.25)/0.25*100:.1f}%")
    f_spike = profiles.spike(geom)
    fit4 = mf.smoothing_exponent(f_spike, 1, np.inf, 3.0, tg, ctx)
    print(f"N={N} spike (1,3): slope={fit4.fitted_exponent:.4f} target=-1.5 off={abs(fit4.fitted_exponent+1.5)/1.5*100:.1f}%  [{time.time()-t0:.1f}s]")
