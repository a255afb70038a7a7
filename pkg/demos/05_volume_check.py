# # Checking volume preservation numerically
#
# The determinant of the Jacobian of one step is estimated with central
# differences. Exact flows of divergence-free pieces preserve volume, so the
# splitting step should give a determinant of one up to the difference error.

# %%
import numpy as np

from vpsplit import RkOptions, build_cubic_stokes, build_scheme, jacobian_det, rk45

f = build_cubic_stokes()
split = build_scheme(f, 2)
rng = np.random.default_rng(1)
points = [rng.uniform(-0.6, 0.6, size=3) for _ in range(10)]

# %%
dets = [jacobian_det(split.step, x, 0.01) for x in points]
print("split2, h=0.01: max |det - 1| =", max(abs(d - 1) for d in dets))

# %% [markdown]
# One rk45 step of size h = 1 at the default tolerance, for comparison.

# %%
def rk_step(x, h):
    return rk45(f, x, h, RkOptions(), record=False).final


dets = [jacobian_det(rk_step, x, 1.0) for x in points]
print("rk45, h=1: max |det - 1| =", max(abs(d - 1) for d in dets))
