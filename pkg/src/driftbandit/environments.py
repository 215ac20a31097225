"""Piecewise-stationary Lipschitz contextual bandit environments.

An environment is a horizon T, K arms, and an ordered list of phases; each
phase assigns every arm a mean-reward function on [0,1]^d built from a
constant base plus "bump" perturbations.  A bump lives on one cell of a
regular M-grid and is a tent rising from 0 on the cell boundary to its
signed amplitude at the cell center, so supports are disjoint and every
function is continuous with sup-norm slope amplitude/(half-width).

Includes the hard-instance generators used for scaling experiments: a
stationary two-arm instance whose optimal arm alternates sign on a grid of
resolution M = ceil((n/3e)^(1/(2+d))), its concatenation into globally
shifting environments, a total-variation-budgeted variant, and a
region-confined flip environment for locality experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import BinId

__all__ = [
    "Bump",
    "RewardFunction",
    "Phase",
    "Environment",
    "RoundSample",
    "eval_mean",
    "true_gap",
    "sample_round",
    "realize_run",
    "means_matrix",
    "gap_table",
    "make_stationary_hard",
    "make_global_shift_env",
    "make_tv_budget_env",
    "make_local_shift_env",
    "make_flip_env",
    "global_shift_count",
    "tv_upper_bound",
    "lipschitz_check",
    "hard_instance_grid_size",
]

C_PHI = Fraction(1, 4)


@dataclass(frozen=True)
class Bump:
    """Signed tent on one cell of a regular grid with `scale` cells per side.

    The support is the closed cell [cell/scale, (cell+1)/scale]^d; the value
    is sign * amplitude * (1 - dist/h) with h = 1/(2*scale) the cell
    half-width and dist the sup-norm distance to the cell center.  It
    vanishes on the cell boundary, so bumps on distinct cells never
    interact and the Lipschitz constant of one bump is
    amplitude * 2 * scale.
    """

    scale: int
    cell: tuple[int, ...]
    sign: int
    amplitude: Fraction

    def __post_init__(self) -> None:
        if self.scale < 1:
            raise ValueError("bump scale must be >= 1")
        if self.sign not in (-1, 1):
            raise ValueError("bump sign must be +1 or -1")
        if self.amplitude <= 0:
            raise ValueError("bump amplitude must be positive")
        if self.amplitude * 2 * self.scale > 1:
            raise ValueError("bump slope amplitude * 2 * scale exceeds 1")
        if any(not (0 <= c < self.scale) for c in self.cell):
            raise ValueError("bump cell outside grid")

    @property
    def slope(self) -> Fraction:
        return self.amplitude * 2 * self.scale

    def support_box(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return tuple(
            (Fraction(c, self.scale), Fraction(c + 1, self.scale)) for c in self.cell
        )


def _boxes_overlap(a, b) -> bool:
    return all(lo1 < hi2 and lo2 < hi1 for (lo1, hi1), (lo2, hi2) in zip(a, b))


@dataclass(frozen=True)
class RewardFunction:
    """Constant base plus disjointly supported bumps; values must stay in [0,1]."""

    base: Fraction
    bumps: tuple[Bump, ...] = ()
    _compiled: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not (0 <= self.base <= 1):
            raise ValueError("base must lie in [0,1]")
        boxes = [b.support_box() for b in self.bumps]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if _boxes_overlap(boxes[i], boxes[j]):
                    raise ValueError("bump supports overlap")
        peak_hi = self.base + max((b.amplitude for b in self.bumps if b.sign > 0), default=0)
        peak_lo = self.base - max((b.amplitude for b in self.bumps if b.sign < 0), default=0)
        if peak_hi > 1 or peak_lo < 0:
            raise ValueError("reward function leaves [0,1]")

    def _grids(self, d: int) -> list[tuple[int, np.ndarray]]:
        """Per-scale dense grids of signed amplitudes (0 on cells with no bump)."""
        key = ("grids", d)
        if key not in self._compiled:
            by_scale: dict[int, np.ndarray] = {}
            for b in self.bumps:
                if len(b.cell) != d:
                    raise ValueError("bump dimension mismatch")
                w = by_scale.setdefault(b.scale, np.zeros((b.scale,) * d))
                w[b.cell] = b.sign * float(b.amplitude)
            self._compiled[key] = sorted(by_scale.items())
        return self._compiled[key]

    def eval(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at an (n, d) array of contexts."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n, d = xs.shape
        out = np.full(n, float(self.base))
        for scale, w in self._grids(d):
            u = xs * scale
            j = np.clip(np.floor(u).astype(np.int64), 0, scale - 1)
            frac = u - j
            tent = 1.0 - 2.0 * np.max(np.abs(frac - 0.5), axis=1)
            out += w[tuple(j.T)] * np.maximum(tent, 0.0)
        return out

    def eval_one(self, x: Sequence[float]) -> float:
        return float(self.eval(np.asarray(x, dtype=float)[None, :])[0])

    def structural_key(self):
        """Hashable identity used for exact function-equality checks."""
        return (self.base, tuple(sorted((b.scale, b.cell, b.sign, b.amplitude) for b in self.bumps)))


@dataclass(frozen=True)
class Phase:
    start: int  # first round of the phase, 1-based
    arms: tuple[RewardFunction, ...]


@dataclass(frozen=True)
class Environment:
    T: int
    K: int
    d: int
    phases: tuple[Phase, ...]
    noise: str = "bernoulli"  # bernoulli | noiseless
    context_kind: str = "uniform"  # uniform | fixed
    fixed_contexts: np.ndarray | None = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.T < 1 or self.K < 1 or self.d < 0:
            raise ValueError("need T >= 1, K >= 1, d >= 0")
        if not self.phases or self.phases[0].start != 1:
            raise ValueError("phases must start at round 1")
        starts = [p.start for p in self.phases]
        if any(s2 <= s1 for s1, s2 in zip(starts, starts[1:])) or starts[-1] > self.T:
            raise ValueError("phase starts must be strictly increasing and <= T")
        if any(len(p.arms) != self.K for p in self.phases):
            raise ValueError("every phase needs exactly K arm functions")
        if self.noise not in ("bernoulli", "noiseless"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.context_kind == "fixed":
            if self.fixed_contexts is None or len(self.fixed_contexts) < self.T:
                raise ValueError("fixed context model needs >= T stored contexts")
        elif self.context_kind != "uniform":
            raise ValueError(f"unknown context model {self.context_kind!r}")

    def phase_index(self, t: int) -> int:
        if not (1 <= t <= self.T):
            raise ValueError(f"round {t} outside [1, {self.T}]")
        idx = 0
        for i, p in enumerate(self.phases):
            if p.start <= t:
                idx = i
            else:
                break
        return idx

    def arms_at(self, t: int) -> tuple[RewardFunction, ...]:
        return self.phases[self.phase_index(t)].arms

    def phase_bounds(self) -> list[tuple[int, int]]:
        """(first, last) round of each phase, 1-based inclusive."""
        starts = [p.start for p in self.phases] + [self.T + 1]
        return [(starts[i], starts[i + 1] - 1) for i in range(len(self.phases))]


@dataclass(frozen=True)
class RoundSample:
    context: np.ndarray
    rewards: np.ndarray
    means: np.ndarray


def eval_mean(env: Environment, t: int, a: int, x: Sequence[float]) -> float:
    """Mean reward of arm a (0-based) at round t and context x."""
    if not (0 <= a < env.K):
        raise ValueError(f"arm {a} outside [0, {env.K})")
    return env.arms_at(t)[a].eval_one(x)


def true_gap(env: Environment, t: int, a: int, x: Sequence[float]) -> float:
    """Shortfall of arm a against the best arm at (t, x); 0 for any best arm."""
    vals = [eval_mean(env, t, b, x) for b in range(env.K)]
    return max(vals) - vals[a]


def sample_round(env: Environment, t: int, rng: np.random.Generator) -> RoundSample:
    """Draw one (context, reward vector) pair for round t from the env stream."""
    if env.context_kind == "uniform":
        x = rng.random(env.d)
    else:
        x = np.asarray(env.fixed_contexts[t - 1], dtype=float)
    means = np.array([f.eval_one(x) for f in env.arms_at(t)])
    if env.noise == "noiseless":
        rewards = means.copy()
    else:
        rewards = (rng.random(env.K) < means).astype(float)
    return RoundSample(context=x, rewards=rewards, means=means)


def realize_run(env: Environment, rng: np.random.Generator, T: int | None = None):
    """Draw a full run worth of contexts and rewards at once.

    Returns (contexts (T,d), means (T,K), rewards (T,K)).  The context block
    is drawn first and the reward uniforms second, so fixing the stream seed
    fixes both; policies sharing the stream see common random numbers.
    """
    T = env.T if T is None else T
    if env.context_kind == "uniform":
        contexts = rng.random((T, env.d))
    else:
        contexts = np.asarray(env.fixed_contexts[:T], dtype=float).reshape(T, max(env.d, 1))[:, : env.d]
        contexts = contexts.reshape(T, env.d)
    means = means_matrix(env, contexts)
    if env.noise == "noiseless":
        rewards = means.copy()
    else:
        rewards = (rng.random((T, env.K)) < means).astype(float)
    return contexts, means, rewards


def means_matrix(env: Environment, contexts: np.ndarray) -> np.ndarray:
    """(T, K) matrix of true means along a context sequence."""
    contexts = np.asarray(contexts, dtype=float).reshape(len(contexts), env.d)
    T = len(contexts)
    out = np.empty((T, env.K))
    for (first, last) in env.phase_bounds():
        first = max(first, 1)
        last = min(last, T)
        if first > last:
            continue
        sl = slice(first - 1, last)
        for a, f in enumerate(env.arms_at(first)):
            out[sl, a] = f.eval(contexts[sl])
    return out


def gap_table(env: Environment, contexts: np.ndarray) -> np.ndarray:
    """(T, K) worst gaps delta_t(a) at the experienced contexts."""
    means = means_matrix(env, contexts)
    return means.max(axis=1, keepdims=True) - means


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def hard_instance_grid_size(n: int, d: int) -> int:
    """Grid resolution M = ceil((n / 3e)^(1/(2+d))) of the hard instance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    M = max(1, math.ceil((n / (3 * math.e)) ** (1.0 / (2 + d))))
    # guard the ceiling against float error just below an integer boundary
    while (M - 1) >= 1 and (M - 1) ** (2 + d) * 3 * math.e >= n:
        M -= 1
    return max(1, M)


def _hard_arm_pair(n: int, d: int, rng: np.random.Generator) -> tuple[RewardFunction, RewardFunction]:
    M = hard_instance_grid_size(n, d)
    amp = C_PHI / M
    signs = rng.integers(0, 2, size=M**d) * 2 - 1
    bumps = []
    for flat, s in enumerate(signs):
        cell = []
        rest = flat
        for _ in range(d):
            cell.append(rest % M)
            rest //= M
        bumps.append(Bump(scale=M, cell=tuple(cell), sign=int(s), amplitude=amp))
    flat_arm = RewardFunction(base=Fraction(1, 2))
    bumpy_arm = RewardFunction(base=Fraction(1, 2), bumps=tuple(bumps))
    return flat_arm, bumpy_arm


def make_stationary_hard(n: int, d: int, seed: int) -> Environment:
    """Two-arm stationary instance: one flat arm at 1/2, one arm 1/2 +- bumps.

    The bump grid has M = ceil((n/3e)^(1/(2+d))) cells per side, each holding
    a tent of peak 1/(4M) whose sign is an independent fair coin drawn from
    `seed`.  Best arm alternates cell by cell; gaps have magnitude at most
    1/(4M) and at least 1/(8M) on the central half of every cell.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x5EED, seed & 0xFFFFFFFF, n, d]))
    flat_arm, bumpy_arm = _hard_arm_pair(n, d, rng)
    return Environment(
        T=n,
        K=2,
        d=d,
        phases=(Phase(start=1, arms=(flat_arm, bumpy_arm)),),
        meta={"kind": "stationary_hard", "seed": seed, "M": hard_instance_grid_size(n, d)},
    )


def _near_equal_starts(T: int, parts: int) -> list[int]:
    """Starts of `parts` consecutive blocks covering [1,T]; remainder goes earliest."""
    base, rem = divmod(T, parts)
    starts, s = [], 1
    for i in range(parts):
        starts.append(s)
        s += base + (1 if i < rem else 0)
    return starts


def make_global_shift_env(T: int, L: int, d: int, seed: int) -> Environment:
    """Concatenation of L+1 independent stationary hard instances."""
    if not (0 <= L < T):
        raise ValueError("need 0 <= L < T")
    starts = _near_equal_starts(T, L + 1)
    bounds = starts + [T + 1]
    rng = np.random.default_rng(np.random.SeedSequence([0x5EED, seed & 0xFFFFFFFF, T, L, d]))
    phases = []
    for i, s in enumerate(starts):
        phase_len = bounds[i + 1] - s
        phases.append(Phase(start=s, arms=_hard_arm_pair(phase_len, d, rng)))
    return Environment(
        T=T, K=2, d=d, phases=tuple(phases),
        meta={"kind": "global_shift", "seed": seed, "L": L},
    )


def make_tv_budget_env(
    T: int, V: float, d: int, seed: int, grid_resolution: int | None = None
) -> Environment:
    """Piecewise-stationary hard instances whose total-variation surrogate is <= V.

    Below the budget floor 2*T^(-1/(2+d)) a single stationary phase is
    returned (surrogate 0).  Otherwise the phase length target is
    Delta = ceil((T/V)^((2+d)/(3+d))) and the phase count rho*T/Delta is
    reduced by halving rho in (0,1] until tv_upper_bound comes in under V
    at both the construction resolution and its refinement.
    """
    if V <= 0 or V > T:
        raise ValueError("need 0 < V <= T")
    if grid_resolution is None:
        grid_resolution = 512 if d <= 1 else (128 if d == 2 else 32)
    meta = {"kind": "tv_budget", "seed": seed, "V": V}
    if V < 2.0 * T ** (-1.0 / (2 + d)):
        env = make_stationary_hard(T, d, seed)
        return replace(env, meta={**meta, "L": 0, "rho": 0.0})
    delta = math.ceil((T / V) ** ((2 + d) / (3 + d)))
    rho = 1.0
    while True:
        parts = max(1, int(rho * T / delta))
        env = make_global_shift_env(T, parts - 1, d, seed)
        env = replace(env, meta={**meta, "L": parts - 1, "rho": rho, "Delta": delta})
        if parts == 1:
            return env
        if (
            tv_upper_bound(env, grid_resolution) <= V
            and tv_upper_bound(env, 2 * grid_resolution) <= V
        ):
            return env
        rho /= 2.0


def make_local_shift_env(
    T: int,
    region: BinId,
    flips: int,
    d: int,
    seed: int,
    avoid_region: bool = False,
) -> Environment:
    """Best-arm flips confined to one dyadic region of the context space.

    Arm 0 is flat at 1/2; arm 1 carries a single tent filling `region` whose
    sign alternates across flips+1 phases, so every best-arm change happens
    strictly inside the region.  With avoid_region the context model becomes
    a fixed sequence drawn uniformly from the complement of the region, so
    the changes are never experienced.
    """
    if len(region.coords) != d:
        raise ValueError("region dimension must match d")
    if avoid_region and region.m == 0:
        raise ValueError("cannot avoid the root bin: complement is empty")
    if flips < 0 or flips >= T:
        raise ValueError("need 0 <= flips < T")
    amp = Fraction(1, 2 ** (region.m + 1))  # slope exactly 1 inside the region
    starts = _near_equal_starts(T, flips + 1)
    flat_arm = RewardFunction(base=Fraction(1, 2))
    phases = []
    for i, s in enumerate(starts):
        sign = 1 if i % 2 == 0 else -1
        bump = Bump(scale=1 << region.m, cell=region.coords, sign=sign, amplitude=amp)
        phases.append(Phase(start=s, arms=(flat_arm, RewardFunction(Fraction(1, 2), (bump,)))))
    fixed = None
    kind = "uniform"
    if avoid_region:
        rng = np.random.default_rng(np.random.SeedSequence([0x10CA1, seed & 0xFFFFFFFF, T, region.m]))
        kind = "fixed"
        pts = []
        while len(pts) < T:
            cand = rng.random((2 * T + 16, d))
            inside = np.ones(len(cand), dtype=bool)
            for i, c in enumerate(region.coords):
                lo, hi = c * region.side, (c + 1) * region.side
                inside &= (cand[:, i] >= lo) & (cand[:, i] < hi)
            pts.extend(cand[~inside])
        fixed = np.asarray(pts[:T])
    return Environment(
        T=T, K=2, d=d, phases=tuple(phases), context_kind=kind, fixed_contexts=fixed,
        meta={"kind": "local_shift", "seed": seed, "flips": flips,
              "region": {"m": region.m, "coords": list(region.coords)},
              "avoid_region": avoid_region},
    )


def make_flip_env(
    T: int,
    d: int,
    best_arms: Sequence[int],
    gaps: Sequence[float] | float = 0.6,
    K: int = 2,
    noise: str = "bernoulli",
) -> Environment:
    """Constant-function phases with a prescribed best arm and gap per phase.

    Phase p gives its best arm mean (1+gap_p)/2 and all others (1-gap_p)/2;
    the functions are constants, hence trivially Lipschitz.  Used for severe
    best-arm-change scenarios where detection should be easy.
    """
    if isinstance(gaps, (int, float)):
        gaps = [float(gaps)] * len(best_arms)
    if len(gaps) != len(best_arms):
        raise ValueError("gaps and best_arms must have equal length")
    starts = _near_equal_starts(T, len(best_arms))
    phases = []
    for s, best, g in zip(starts, best_arms, gaps):
        if not (0 <= best < K):
            raise ValueError("best arm index out of range")
        if not (0 < g <= 1):
            raise ValueError("need gap in (0, 1]")
        hi = Fraction(1, 1) / 2 + Fraction(g).limit_denominator(10**6) / 2
        lo = Fraction(1, 1) / 2 - Fraction(g).limit_denominator(10**6) / 2
        arms = tuple(
            RewardFunction(base=hi if a == best else lo) for a in range(K)
        )
        phases.append(Phase(start=s, arms=arms))
    return Environment(T=T, K=K, d=d, phases=tuple(phases), noise=noise,
                       meta={"kind": "flip", "best_arms": list(best_arms), "gaps": list(map(float, gaps))})


# ---------------------------------------------------------------------------
# Measurements
# ---------------------------------------------------------------------------


def global_shift_count(env: Environment) -> int:
    """Number of phase boundaries where any arm's function changes anywhere.

    Decided on the symbolic bump representation, not by sampling.
    """
    count = 0
    for prev, cur in zip(env.phases, env.phases[1:]):
        keys_prev = [f.structural_key() for f in prev.arms]
        keys_cur = [f.structural_key() for f in cur.arms]
        if keys_prev != keys_cur:
            count += 1
    return count


def tv_upper_bound(env: Environment, grid_resolution: int = 512) -> float:
    """Sum over rounds of integral min(1, sum_a |f_t^a - f_{t-1}^a|) d(uniform).

    Midpoint quadrature on a regular grid with `grid_resolution` points per
    dimension.  For product-Bernoulli rewards this upper-bounds the
    total variation between consecutive joint context/reward distributions;
    only phase boundaries contribute.
    """
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be >= 1")
    if env.d == 0:
        pts = np.zeros((1, 0))
    else:
        axis = (np.arange(grid_resolution) + 0.5) / grid_resolution
        mesh = np.meshgrid(*([axis] * env.d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    total = 0.0
    for prev, cur in zip(env.phases, env.phases[1:]):
        diff = np.zeros(len(pts))
        for f_prev, f_cur in zip(prev.arms, cur.arms):
            if f_prev.structural_key() == f_cur.structural_key():
                continue
            diff += np.abs(f_cur.eval(pts) - f_prev.eval(pts))
        total += float(np.minimum(diff, 1.0).mean())
    return total


def lipschitz_check(env: Environment, pairs: int, rng: np.random.Generator) -> float:
    """Max sampled ratio |f(x)-f(x')| / ||x-x'||_inf over random (t, a, x, x')."""
    worst = 0.0
    ts = rng.integers(1, env.T + 1, size=pairs)
    arms = rng.integers(0, env.K, size=pairs)
    xs = rng.random((pairs, env.d))
    ys = rng.random((pairs, env.d))
    for t, a, x, y in zip(ts, arms, xs, ys):
        denom = float(np.max(np.abs(x - y))) if env.d else 0.0
        if denom == 0.0:
            continue
        f = env.arms_at(int(t))[int(a)]
        worst = max(worst, abs(f.eval_one(x) - f.eval_one(y)) / denom)
    return worst
