"""Dyadic bins and time-matched levels.

The context space [0,1]^d is covered at level m by 2^(m*d) half-open cells
of side 2^-m.  A window of n rounds with K arms "affords" the finest level
whose side still dominates (K/n)^(1/(2+d)): finer bins would cost more in
per-bin sample noise than they save in bias.
"""

from driftbandit.grid import ancestors, bin_of, level_for, parent

x = (0.3, 0.7)
print(f"context {x}:")
for m in range(5):
    print(f"  level {m}: bin {bin_of(x, m).coords} (side {2.0**-m})")

b = bin_of(x, 4)
print("ancestor chain of the level-4 bin:",
      " -> ".join(str(a.coords) for a in ancestors(b)))
assert parent(b) == ancestors(b)[1]

print("\nlevel matched to a window of n rounds (K=2):")
for d in (0, 1, 2):
    ns = [1, 8, 64, 512, 4096, 32768]
    print(f"  d={d}: " + ", ".join(f"n={n}: m={level_for(n, 2, d)}" for n in ns))

# within one episode the policy walks down the levels on a fixed timetable:
# level m occupies rounds ceil(K 2^((m-1)(2+d))) .. ceil(K 2^(m(2+d))) - 1
K, d = 2, 1
print(f"\nblock timetable for K={K}, d={d} (offsets from the episode start):")
t = 1
for m in range(0, 5):
    lo = t
    hi = K * 2 ** (m * (2 + d))
    print(f"  level {m}: rounds {lo}..{hi}")
    t = hi + 1
