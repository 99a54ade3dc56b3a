# %% [markdown]
# # Characteristic curves and the interaction functional
#
# Seed curves on the max and min bands of a smooth solution, check that they
# reproduce the band mass and never cross, then follow the interaction
# functional between a fast and a slow curve.

# %%
import numpy as np

from kinlaw import goursat, lagrangian, viscous
from kinlaw.systems import get_chart

chart = get_chart("decoupled")
fam = goursat.family_for_chart(chart, 65)
sol = viscous.exact_decoupled_solution(
    chart, {"rule": "sine", "amp": [0.5, 0.3]}, 256, 0.25, 128)
band = lagrangian.BandSpec.from_solution(sol)
print(band)

# %%
bmax = lagrangian.seed_bundle(sol, fam, band, 1024, kind="max")
bmin = lagrangian.seed_bundle(sol, fam, band, 1024, kind="min")
for n in (0, sol.nt // 2, sol.nt - 1):
    err = lagrangian.reconstruction_error(sol, fam, bmax, n)
    print(f"t = {sol.t[n]:.3f}  box reconstruction error {err:.4f}")
rep = lagrangian.crossing_check(bmax, bmin, period=sol.period)
print(f"crossings {rep.n_violations} of {rep.n_pairs} pairs")

# %%
gamma, sigma = lagrangian.distinguished_curves(sol, fam, band)
led = lagrangian.q_functional(sol, fam, gamma, sigma, band)
print(f"Q from {led.q_values[0]:.4e} to {led.q_values[-1]:.4e}")
print(f"largest increment {led.increments().max():.2e}, "
      f"outflow {led.f_out.sum():.4e}, inflow {led.f_in.sum():.1e}")
print(f"ledger balance {np.abs(led.increments() + led.f_out - led.f_in).max():.2e}")
