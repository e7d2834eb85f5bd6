# %% [markdown]
# # Linear defect modes
#
# A single-site potential of strength V0 on the lattice binds exactly one
# state.  For V0 > 0 it sits below the band [0, 4d] and decays with a
# positive ratio; for V0 < 0 it sits above the band and alternates in sign.

# %%
import numpy as np

from deltadnls import ModelParams, defect_mode, eigensolve_check
from deltadnls.modes import bound_state_energy, green_function

for v0 in (0.5, 1.5, 3.0, -1.5):
    m = defect_mode(ModelParams(dim=1, v0=v0))
    print(f"V0={v0:5.2f}  eta={m.eta:+.6f}  omega={m.omega:+.6f}  staggered={m.staggering}")

# %% [markdown]
# In one dimension the exponential profile is an exact eigenvector, so the
# shifted inverse iteration on a finite box agrees to round-off.

# %%
for v0 in (0.5, -3.0):
    res = eigensolve_check(ModelParams(dim=1, v0=v0), 60)
    print(f"d=1 V0={v0:+.1f}: box eigenvalue {res.omega_num:+.12f}, mismatch {res.mismatch:.2e}")

# %% [markdown]
# In two dimensions the product ansatz is not an eigenvector.  The true bound
# state solves |V0| g(omega) = 1 with g the on-site lattice Green function.
# Weak defects bind exponentially weakly, far below what a box of radius 30
# can resolve.

# %%
for v0 in (3.0, 1.5, 0.5):
    closed = defect_mode(ModelParams(dim=2, v0=v0)).omega
    exact = bound_state_energy(v0, 2)
    print(f"d=2 V0={v0}: ansatz {closed:+.6f}, Green function {exact:+.6e}")

omega = np.linspace(-3, -0.05, 5)
print("g(omega), d=2:", np.round([green_function(w, 2) for w in omega], 6))
