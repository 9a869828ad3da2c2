# %% [markdown]
# How close to divergence-free are the laminates?
# ================================================
#
# Each laminate is exactly divergence-free inside every region it refines, but
# the regions themselves have edges.  The error lives on those edges, and it
# shrinks in a negative norm as the scales separate.

# %%
import numpy as np

from divlam import InstanceParams, LaminateSchedule, build_instance, hierarchical_laminate, rasterize
from divlam.fieldlab import convergence_table, divergence_spectral, hminus1_norm, l2_norm, leray_project

inst = build_instance(InstanceParams((0.5, 0.5, 0.5)))

# %%
rows = convergence_table(inst, [2, 4, 8], depth=1, grid=(64, 64, 64), base_period=1.0)
for r in rows:
    print(r["ratio"], round(r["hminus1_div"], 4), round(r["l2_projection_gap"], 4), r["residual_fraction"])

# %% [markdown]
# At ratio 8 the finest layer is 1/64 wide, one cell on this grid, and the
# number goes up instead of down: cell-centre sampling cannot see the layers.
# Doubling the grid resolves them again.

# %%
for r in (2, 4, 8):
    f = rasterize(hierarchical_laminate(LaminateSchedule(inst, 1, r, 1.0)), (128, 128, 128))
    print(r, round(hminus1_norm(divergence_spectral(f)), 4))

# %% [markdown]
# The projection onto divergence-free fields moves the field by exactly the
# negative norm of its divergence, as long as nothing sits on the Nyquist
# planes.

# %%
f = rasterize(hierarchical_laminate(LaminateSchedule(inst, 1, 2, 1.0)), (64, 64, 64))
P = leray_project(f)
print(l2_norm(P - f.raster, 3), hminus1_norm(divergence_spectral(f)))
print(np.abs(divergence_spectral(P)).max())
