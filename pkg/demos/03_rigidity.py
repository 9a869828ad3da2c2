# %% [markdown]
# When there is nothing to find
# =============================
#
# Brute force on tiny periodic grids, and a structural test that rules out
# exact solutions altogether.

# %%
import numpy as np

from divlam import InstanceParams, build_instance, enumerate_exact, verify_hyperplane_hypothesis
from divlam.rigidity import gradient_equivalence_2d

# %% [markdown]
# Two matrices whose difference is invertible: only the constant fields.

# %%
print(enumerate_exact([np.zeros((2, 2)), np.eye(2)], (4, 4)).count)

# %% [markdown]
# A rank-one difference allows stripes along the kernel direction.

# %%
res = enumerate_exact([np.zeros((2, 2)), np.diag([1.0, 0.0])], (4, 4))
print(res.count)
print(res.solutions[5])

# %% [markdown]
# The three matrices of the lamination chain: constants only, even though
# approximate solutions exist.

# %%
inst = build_instance(InstanceParams((0.5, 0.5, 0.5)))
print(enumerate_exact(inst.K, (2, 2, 2)).count)
system = verify_hyperplane_hypothesis(inst.K)
print(system.normals, system.rigid)

# %% [markdown]
# In two dimensions a divergence-free field turned by a quarter turn is
# curl-free.

# %%
B = np.random.default_rng(1).standard_normal((5, 5, 2, 2))
print(gradient_equivalence_2d(B).holds)
