# %% [markdown]
# # Cut entropy families
#
# Build the tables of the family of cut entropies on the local strip for the
# two bundled systems and look at the strip constants.

# %%
import numpy as np

from kinlaw import goursat
from kinlaw.systems import get_chart

for name in ("decoupled", "p-system"):
    chart = get_chart(name)
    fam = goursat.family_for_chart(chart, 33)
    print(f"{name:10s} strip half-width {fam.r_bar:.4f}  constant c {fam.c:.4f}"
          f"  cut levels {fam.xi.size}")

# %% [markdown]
# The decoupled chart has a closed form for every table.  Compare the
# tabulated kinetic speed with the level itself on a few states.

# %%
chart = get_chart("decoupled")
fam = goursat.family_for_chart(chart, 33)
w = np.array([0.1, 0.4, 0.7])
z = np.zeros(3)
xi = np.array([0.0, 0.2, 0.5])
lam, clamped = goursat.kinetic_speed(fam, xi, w, z)
print("kinetic speed", lam, "clamped", clamped)

# %% [markdown]
# A superposition of cut entropies with weights equal to the level gives
# back the quadratic entropy, up to a discretisation error that shrinks as
# the grid is refined.

# %%
for n in (17, 33, 65):
    fam_n = goursat.family_for_chart(chart, n)
    g = fam_n.grid
    ww, zz = np.meshgrid(g.w, g.z, indexing="ij")
    exact = 0.5 * (ww**2 - g.w[0] ** 2) + 0.5 * (zz**2 - g.z[0] ** 2)
    rec = goursat.reconstruct_entropy(fam_n, fam_n.xi, fam_n.zeta)
    print(f"n = {n:3d}  max error {np.abs(rec.eta - exact).max():.4e}")
