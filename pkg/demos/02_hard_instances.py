"""The hard-instance family and its non-stationarity budgets.

One arm is flat at 1/2; the other adds a grid of tents with random signs,
peak 1/(4M) on an M-grid with M = ceil((n/3e)^(1/(2+d))).  Any policy must
localize the sign of every cell to play well, which costs n^((1+d)/(2+d))
regret, yet the functions look almost identical: that is what makes the
family a scaling benchmark.  Concatenating independent draws produces
global shifts; spacing them by Delta = ceil((T/V)^((2+d)/(3+d))) keeps the
total-variation surrogate under a budget V.
"""

import numpy as np

from driftbandit.environments import (
    global_shift_count,
    lipschitz_check,
    make_global_shift_env,
    make_stationary_hard,
    make_tv_budget_env,
    tv_upper_bound,
)

rng = np.random.default_rng(0)

env = make_stationary_hard(4096, d=1, seed=7)
M = env.meta["M"]
print(f"stationary hard instance, n=4096, d=1: M={M} cells, peak gap {1/(4*M):.4f}")
print(f"  sampled Lipschitz ratio over 1e4 pairs: {lipschitz_check(env, 10**4, rng):.4f}")

xs = np.linspace(0, 1, 9)[:, None]
vals = env.phases[0].arms[1].eval(xs)
print("  f(x) on a coarse grid:", np.round(vals, 4))

shifted = make_global_shift_env(4096, L=3, d=1, seed=7)
print(f"\nglobal-shift concatenation: {len(shifted.phases)} phases, "
      f"global shifts = {global_shift_count(shifted)}")
print(f"  tv surrogate: {tv_upper_bound(shifted, 512):.4f}")

for V in (0.05, 0.5, 2.0):
    env_v = make_tv_budget_env(4096, V, d=1, seed=7)
    print(f"tv budget V={V}: {len(env_v.phases)} phase(s), "
          f"surrogate {tv_upper_bound(env_v, 512):.4f} <= {V}")
