# %% [markdown]
# # Jump set and mean oscillation
#
# Locate the shock from the entropy dissipation and check that the mean
# oscillation decays off the shock but stays on a plateau across it.

# %%
import numpy as np

from kinlaw import diagnostics, goursat, kinetic, viscous
from kinlaw.systems import get_chart

nx = 512
cfg = {"chart": {"id": "decoupled"}, "nx": nx, "T": 0.4,
       "epsilon": 0.5 / nx, "snapshots": int(0.4 * nx),
       "initial": {"rule": "two_jump", "left": [0.8, 0.0],
                   "right": [-0.4, 0.0], "positions": [0.25, 0.75]}}
sol, _ = viscous.simulate(cfg)
fam = goursat.family_for_chart(get_chart("decoupled"), 32)
nu = kinetic.nu_sup(sol, kinetic.entropy_bank(fam, 8), (2, 2))

# %%
radii = sol.dx * np.array([2, 4, 8])
ratio = diagnostics.jump_set(nu, radii=radii).ratio
mask = diagnostics.jump_set(nu, radii=radii,
                            theta=0.99 * diagnostics.ridge_level(ratio))
# rows near the ends of the window see truncated disks and widen slightly
widths = mask.row_widths()
print(f"flagged cells {mask.area_cells}, median row width "
      f"{int(np.median(widths[widths > 0]))}")

# %%
vradii = sol.dx * np.array([8, 16, 32])
n = sol.nt // 2
shock = int(np.argmax(mask.mask[n - mask.t_offset]))
for label, m in (("on shock", shock), ("off shock", (shock + nx // 4) % nx)):
    prof = diagnostics.vmo_profile(sol, (n, m), vradii)
    print(f"{label:9s} oscillation {np.round(prof.oscillation, 4)} "
          f"decays {prof.decays()}")
print(f"half-disk plateau {diagnostics.half_disk_plateau(1.2):.4f}")
