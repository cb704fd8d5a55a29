"""Scratch probe: spectral ringing, smoothing slopes, gaussian constants."""
import numpy as np
import morreyflow as mf
from morreyflow import profiles

print("=== 1. spectral ringing: min of heat-evolved one-hot (relative to sup) ===")
for n, N in [(2, 64), (2, 128), (3, 32)]:
    geom = mf.TorusGeometry(n=n, L=4.0, N=N)
    prop = mf.SpectralPropagator(geom)
    onehot = np.zeros(geom.shape); onehot[(0,)*n] = 1.0
    h2 = geom.h**2
    worst = []
    for t in [0.1*h2, 0.5*h2, h2, 2*h2, 3*h2, 4*h2, 6*h2, 10*h2, 0.01, 0.1, 1.0]:
        out = prop.propagate_values(onehot, t)
        ratio = out.min() / out.max()
        worst.append((t/h2, ratio))
    print(f" n={n} N={N}: ", [(f"{a:.1f}h2", f"{b:.1e}") for a, b in worst])

print("=== 2. smoothing slopes on T3 N=64 ===")
geom = mf.TorusGeometry(n=3, L=4.0, N=64)
ctx = mf.MorreyContext(geom)
print("radii:", ctx.radii, "V:", ctx.volume_constant)
tg = np.geomspace(1e-3, 1e-1, 9)
f_spike = profiles.spike(geom)
fit = mf.smoothing_exponent(f_spike, 1, np.inf, 3.0, tg, ctx)
print(f" spike (s1=1,lam=3) slope={fit.fitted_exponent:.4f} target={fit.target_exponent} resid={fit.residual:.3f} C={fit.constant_hat:.3f}")
f_sing = profiles.singular(geom, gamma=1.0)
fit = mf.smoothing_exponent(f_sing, 2, np.inf, 2.0, tg, ctx)
print(f" singular g=1 (s1=2,lam=2) slope={fit.fitted_exponent:.4f} target={fit.target_exponent} resid={fit.residual:.3f} C={fit.constant_hat:.3f}")
fit = mf.smoothing_exponent(f_sing, 2, 2, 2.0, tg, ctx)
print(f" singular g=1 case ii (2,2)->(2,2): slope={fit.fitted_exponent:.4f} target=0 C={fit.constant_hat:.3f}")
f_half = profiles.singular(geom, gamma=0.5)
fit = mf.smoothing_exponent(f_half, 2, np.inf, 1.0, tg, ctx)
print(f" singular g=0.5 (q'=2,lam'=1) slope={fit.fitted_exponent:.4f} target={fit.target_exponent}")

print("=== 3. gradient slopes T3 N=64 ===")
rep = mf.gradient_estimate_check(f_spike, 1, np.inf, tg)
print(f" spike q=1 r=inf: slope={rep['lq_data'].fitted_exponent:.4f} target={rep['lq_data'].target_exponent}")
fb = profiles.bubble(geom, 1.0, 0.5)
rep = mf.gradient_estimate_check(fb, 2, 2, np.geomspace(1e-3, 1, 7))
print(f" bubble q=r=2: C_w1q={rep['w1q_data'].constant_hat:.6f} (want <= 1.01)")

print("=== 4. gaussian bounds T2 N=128 + doubling ===")
rng = np.random.default_rng(0)
tgrid = np.geomspace(1e-3, 1.0, 7)
for N in [128, 256]:
    g2 = mf.TorusGeometry(n=2, L=4.0, N=N)
    pts = rng.integers(0, N, size=(300, 2, 2))
    pts = np.concatenate([pts, np.zeros((20, 2, 2), dtype=int)])  # include x=y
    res = mf.fit_gaussian_bounds(g2, tgrid, pts)
    print(f" N={N}: C_u={res['C_u_hat']:.4f} C_l={res['C_l_hat']:.4f}  (4pi)^(n/2)={(4*np.pi)**1:.3f}")
