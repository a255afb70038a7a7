# # A long run of the quadratic Stokes flow
#
# Starting inside the unit ball, the second-order splitting method keeps the
# trajectory bounded for hundreds of time units with a fixed step. The
# adaptive Dormand-Prince reference at its default tolerance does not.

# %%
import time

import numpy as np

from vpsplit import Rk45, RkOptions, build_quadratic_stokes, build_scheme, run

f = build_quadratic_stokes(0.1)
x0 = [0.0, 0.0, 0.96]

# %%
t0 = time.perf_counter()
tr = run(build_scheme(f, 2), x0, h=0.01, T=500.0)
print(f"split2: {tr.status}, {tr.steps} steps in {time.perf_counter() - t0:.2f} s")
print("largest |x| over the run:", tr.max_norm())

# %% [markdown]
# The same problem with rk45 at RelTol 1e-3. Its steps are accepted on local
# error alone and volume is not preserved, so the orbit drifts.

# %%
ref = run(Rk45(f, RkOptions(rel_tol=1e-3, abs_tol=1e-6)), x0, h=0.01, T=500.0)
print(f"rk45: {ref.status} ({ref.reason}), reached t = {ref.t_final:.1f}")
norms = np.linalg.norm(ref.states, axis=1)
print("largest |x| before stopping:", norms.max())

# %% [markdown]
# Tighter tolerances postpone the drift at the cost of many more steps.

# %%
for tol in (1e-4, 1e-6):
    r = run(Rk45(f, RkOptions(rel_tol=tol, abs_tol=tol * 1e-3)), x0, h=0.01, T=500.0)
    print(f"rel_tol={tol:g}: {r.status}, {r.steps} steps, max |x| = {r.max_norm():.4f}")
