"""Randomized small environments shared by detector tests and acceptance."""

from fractions import Fraction

import numpy as np

from driftbandit.environments import (
    Environment,
    Phase,
    RewardFunction,
    make_flip_env,
    make_global_shift_env,
    make_local_shift_env,
)
from driftbandit.grid import BinId


def constant_env(T, K=2, d=1, values=None, noise="noiseless"):
    """Environment with one phase of constant arm means (defaults all 1/2)."""
    if values is None:
        values = [Fraction(1, 2)] * K
    arms = tuple(RewardFunction(base=Fraction(v)) for v in values)
    return Environment(T=T, K=K, d=d, phases=(Phase(1, arms),), noise=noise)


def random_construction(seed: int, T: int = 256):
    """A random piecewise-stationary environment plus a context sequence.

    Mixes severe best-arm flips, region-confined flips, and hard-instance
    concatenations so detected shift counts span 0 .. L+1.
    """
    rng = np.random.default_rng([0xC0DE, seed])
    kind = rng.integers(3)
    if kind == 0:
        n_phases = int(rng.integers(1, 6))
        K = int(rng.integers(2, 4))
        arms = [int(rng.integers(K))]
        while len(arms) < n_phases:
            nxt = int(rng.integers(K))
            arms.append(nxt)
        gaps = rng.uniform(0.25, 0.95, size=n_phases).round(3).tolist()
        env = make_flip_env(T, int(rng.integers(1, 3)), arms, gaps, K=K)
    elif kind == 1:
        m = int(rng.integers(1, 3))
        coords = tuple(int(rng.integers(1 << m)) for _ in range(1))
        env = make_local_shift_env(T, BinId(m, coords), int(rng.integers(0, 4)), 1, seed)
    else:
        env = make_global_shift_env(T, int(rng.integers(0, 4)), 1, seed)
    contexts = rng.random((T, env.d))
    return env, contexts
