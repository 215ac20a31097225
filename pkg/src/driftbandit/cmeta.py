"""Episodic meta-elimination policy with randomized replay scheduling.

The run is organized in episodes.  Each episode starts a master base
algorithm that adaptively refines its context discretization with elapsed
time, plays uniformly over per-bin candidate arm sets, evicts arms whose
estimated interval gaps clear the eviction rule, and randomly interrupts
itself with shorter fresh "replay" instances whose schedule is Bernoulli
with probability (1/m)^(1/(2+d)) * (1/(s - t_ell))^((1+d)/(2+d)) for a
replay of duration m at round s.  Arms evicted anywhere are also dropped
from episode-level master sets; when a master set empties at the bin of the
current context, the whole replay stack unwinds and a new episode begins.

Replay draws are realized lazily as a pure integer hash of
(seed, episode, m, s), so the schedule costs no memory and is reproducible
without storing tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import Environment, realize_run
from .estimators import LogBook, scan_triggers
from .grid import BinId, context_grid_coords, level_for

__all__ = [
    "ReplaySchedule",
    "BaseAlgState",
    "MasterState",
    "RunLog",
    "RunStream",
    "replay_probability",
    "expected_replay_overhead",
    "active_arm_set",
    "run_cmeta",
    "replay_lengths",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replay_lengths(T: int) -> list[int]:
    """Replay durations {2, 4, ..., 2^ceil(ln T)} available to the scheduler."""
    if T < 2:
        raise ValueError("need T >= 2")
    top = math.ceil(math.log(T))
    return [1 << k for k in range(1, max(top, 1) + 1)]


def replay_probability(m: int, s: int, t_ell: int, d: int) -> float:
    """Scheduling probability of a duration-m replay at round s of an episode."""
    if s <= t_ell:
        raise ValueError("need s > t_ell")
    if m < 2 or (m & (m - 1)) != 0:
        raise ValueError("m must be a power of two >= 2")
    p = (1.0 / m) ** (1.0 / (2 + d)) * (1.0 / (s - t_ell)) ** ((1 + d) / (2 + d))
    return min(1.0, max(0.0, p))


def expected_replay_overhead(T: int, d: int) -> float:
    """Deterministic value of the scheduled-replay cost sum.

    sum_t sum_m (1/m)^(1/(2+d)) (1/t)^((1+d)/(2+d)) m^((1+d)/(2+d)) over the
    available replay durations and the schedule offsets t = 1..T-1 (an
    episode starting at round 1 can schedule at rounds 2..T); the sum is
    separable in t and m.
    """
    ms = np.array(replay_lengths(T), dtype=float)
    ts = np.arange(1, T, dtype=float)
    beta = (1 + d) / (2 + d)
    return float(np.sum(ms ** (d / (2 + d))) * np.sum(ts**-beta))


class ReplaySchedule:
    """Lazy Bernoulli replay schedule for one episode.

    draw(m, s) is a pure function of (seed, episode, m, s): the uniform
    variate is a 64-bit hash mixed from those four integers.
    """

    def __init__(self, seed: int, episode: int, t_ell: int, T: int, d: int):
        self.seed = seed
        self.episode = episode
        self.t_ell = t_ell
        self.T = T
        self.d = d
        self.lengths = replay_lengths(T)
        self._inv_m = [(1.0 / m) ** (1.0 / (2 + d)) for m in self.lengths]
        self._beta = (1 + d) / (2 + d)
        self._base = _splitmix64(_splitmix64(seed & _MASK64) ^ ((episode * 0xD1B54A32D192ED03) & _MASK64))

    def prob(self, m: int, s: int) -> float:
        delta = s - self.t_ell
        if delta <= 0:
            raise ValueError("need s > t_ell")
        k = m.bit_length() - 1
        if not (1 <= k <= len(self.lengths)) or (1 << k) != m:
            raise ValueError(f"duration {m} not in the schedule")
        return min(1.0, self._inv_m[k - 1] * delta**-self._beta)

    def _uniform(self, k: int, s: int) -> float:
        h = _splitmix64(
            (self._base ^ ((s * 0x9E6C63D0876A9EC5) & _MASK64) ^ ((k * 0xABCD0357A89BD421) & _MASK64))
            & _MASK64
        )
        return h / 18446744073709551616.0

    def draw(self, m: int, s: int) -> bool:
        return self._uniform(m.bit_length() - 1, s) < self.prob(m, s)

    def fired(self, s: int) -> list[int]:
        """All durations whose draw succeeded at round s (ascending)."""
        delta = s - self.t_ell
        if delta <= 0:
            return []
        q = delta**-self._beta
        out = []
        for k, (m, c) in enumerate(zip(self.lengths, self._inv_m), start=1):
            if self._uniform(k, s) < min(1.0, c * q):
                out.append(m)
        return out


@dataclass
class BaseAlgState:
    """Local state of one base algorithm: window and sparse per-bin arm sets."""

    t_start: int
    m0: int
    depth: int = 0
    arm_sets: dict = field(default_factory=dict)  # (m, coords) -> bitmask


@dataclass
class MasterState:
    """Episode-level state: index, start round, sparse master arm sets."""

    episode: int
    t_ell: int
    master_sets: dict = field(default_factory=dict)
    episode_over: bool = False


def active_arm_set(base: BaseAlgState, master: MasterState, b: BinId, K: int) -> int:
    """Candidate bitmask at bin b: intersection over materialized ancestors.

    Refines stored entries in place (base and master alike) so that stored
    child sets never exceed stored ancestor sets; the mask returned is the
    base algorithm's set, which is what gets played.
    """
    full = (1 << K) - 1
    eff = full
    eff_master = full
    for m in range(0, b.m + 1):
        shift = b.m - m
        key = (m, tuple(c >> shift for c in b.coords))
        v = base.arm_sets.get(key)
        if v is not None:
            eff &= v
            if eff != v:
                base.arm_sets[key] = eff
        w = master.master_sets.get(key)
        if w is not None:
            eff_master &= w
            if eff_master != w:
                master.master_sets[key] = eff_master
    return eff


@dataclass
class RunStream:
    """One realized run's worth of environment randomness, shared by policies."""

    contexts: np.ndarray  # (T, d)
    means: np.ndarray  # (T, K)
    rewards: np.ndarray  # (T, K)

    @property
    def T(self) -> int:
        return len(self.contexts)

    @property
    def K(self) -> int:
        return self.means.shape[1]

    @property
    def d(self) -> int:
        return self.contexts.shape[1]

    @classmethod
    def from_env(cls, env: Environment, rng_env: np.random.Generator, T: int | None = None):
        contexts, means, rewards = realize_run(env, rng_env, T)
        return cls(contexts=contexts, means=means, rewards=rewards)

    def gaps(self) -> np.ndarray:
        return self.means.max(axis=1, keepdims=True) - self.means


@dataclass
class RunLog:
    """Complete per-round trace of a policy run plus episode/replay bookkeeping."""

    policy: str
    T: int
    K: int
    d: int
    contexts: np.ndarray
    grid: np.ndarray  # integer coords at level m_grid
    m_grid: int
    episode: np.ndarray  # (T,) int
    level: np.ndarray  # (T,) int
    depth: np.ndarray  # (T,) int
    candidates: np.ndarray  # (T,) bitmask int
    n_active: np.ndarray  # (T,) int
    arm: np.ndarray  # (T,) int
    reward: np.ndarray  # (T,) float
    gap: np.ndarray  # (T,) true instantaneous gap of the played arm
    episode_starts: list[int]
    episode_end_reasons: list[str]
    replay_activations: list[tuple[int, int, int]]  # (round, duration, depth)
    scheduled_fires: list[tuple[int, int]]  # every (round, m) with Z=1
    eviction_events: list[dict]
    restart_evidence: list[dict]

    def bin_at(self, t: int, m: int) -> BinId:
        shift = self.m_grid - m
        return BinId(m, tuple(int(c) >> shift for c in self.grid[t - 1]))

    def n_episodes(self) -> int:
        return len(self.episode_starts)


class _RunCtx:
    __slots__ = (
        "T", "K", "d", "C0", "mode", "rewards", "gaps", "gtuples", "u",
        "level_of", "m_grid", "m_levels", "logbook", "schedule", "sched_seed",
        "replays_on", "restart_on", "floor_singleton", "full", "mask_bits",
        "master", "t", "t_ell", "episode", "episode_over", "log",
    )


def _bits(mask: int, K: int) -> tuple[int, ...]:
    return tuple(a for a in range(K) if (mask >> a) & 1)


def _base_alg(ctx: _RunCtx, t_start: int, m0: int, depth: int) -> None:
    arm_sets: dict = {}
    t_end = t_start + m0
    log = ctx.log
    K = ctx.K
    full = ctx.full
    while ctx.t <= t_end and ctx.t <= ctx.T and not ctx.episode_over:
        t = ctx.t
        g = ctx.gtuples[t - 1]
        m = ctx.level_of[t - t_start + 1]
        # effective candidate sets along the ancestor chain, refined in place
        chain_keys = []
        eff = full
        eff_master = full
        for mm in range(m + 1):
            shift = ctx.m_grid - mm
            key = (mm, tuple(c >> shift for c in g))
            chain_keys.append(key)
            v = arm_sets.get(key)
            if v is not None:
                eff &= v
                if eff != v:
                    arm_sets[key] = eff
            if ctx.restart_on:
                w = ctx.master.get(key)
                if w is not None:
                    eff_master &= w
                    if eff_master != w:
                        ctx.master[key] = eff_master
        arms = ctx.mask_bits.get(eff)
        if arms is None:
            arms = _bits(eff, K)
            ctx.mask_bits[eff] = arms
        assert arms, "candidate set empty at play time"
        pick = arms[int(ctx.u[t - 1] * len(arms))]
        y = ctx.rewards[t - 1, pick]
        i = t - 1
        log.episode[i] = ctx.episode
        log.level[i] = m
        log.depth[i] = depth
        log.candidates[i] = eff
        log.n_active[i] = len(arms)
        log.arm[i] = pick
        log.reward[i] = y
        log.gap[i] = ctx.gaps[i, pick]
        ctx.logbook.append_raw(t, g, pick, float(y), eff, len(arms))
        ctx.t += 1
        tnew = ctx.t
        if ctx.replays_on and tnew <= ctx.T:
            fired = ctx.schedule.fired(tnew)
            if fired:
                for mf in fired:
                    log.scheduled_fires.append((tnew, mf))
                mstar = fired[-1]
                log.replay_activations.append((tnew, mstar, depth + 1))
                _base_alg(ctx, tnew, mstar, depth + 1)
                if ctx.episode_over:
                    return
        # evict in the bin just experienced, against base and master windows
        triggers = scan_triggers(
            ctx.logbook, ctx.t, g, ctx.t_ell if ctx.restart_on else t_start,
            ctx.mode, ctx.C0, K, ctx.T,
        )
        if ctx.restart_on and t_start > ctx.t_ell:
            triggers += scan_triggers(
                ctx.logbook, ctx.t, g, t_start, "window_only", ctx.C0, K, ctx.T
            )
        if triggers:
            key_m = chain_keys[m]
            base_removed = 0
            master_removed = 0
            for (a, s1, s2, lev) in triggers:
                bit = 1 << a
                if s1 >= t_start and (eff & bit):
                    base_removed |= bit
                    log.eviction_events.append(
                        {"t": t, "set": "base", "level": m, "coords": key_m[1],
                         "arm": a, "s1": s1, "s2": s2, "scan_level": lev}
                    )
                if ctx.restart_on and (eff_master & bit):
                    master_removed |= bit
                    log.eviction_events.append(
                        {"t": t, "set": "master", "level": m, "coords": key_m[1],
                         "arm": a, "s1": s1, "s2": s2, "scan_level": lev}
                    )
            if base_removed:
                new_base = eff & ~base_removed
                if new_base == 0 and ctx.floor_singleton:
                    keep = _least_implicated(ctx, triggers, eff, g)
                    new_base = 1 << keep
                if new_base != eff:
                    arm_sets[key_m] = new_base
            if master_removed:
                new_master = eff_master & ~master_removed
                ctx.master[key_m] = new_master
                if new_master == 0:
                    log.restart_evidence.append(
                        {"episode": ctx.episode, "t": t, "level": m,
                         "coords": key_m[1],
                         "triggers": [
                             {"arm": a, "s1": s1, "s2": s2, "scan_level": lev}
                             for (a, s1, s2, lev) in triggers
                         ]}
                    )
                    ctx.episode_over = True
                    return
    return


def _least_implicated(ctx: _RunCtx, triggers, mask: int, g: tuple[int, ...]) -> int:
    """Arm to retain when eviction would empty a set: smallest trigger margin."""
    from .estimators import eviction_threshold

    best_arm, best_margin = None, None
    for a in _bits(mask, ctx.K):
        margin = None
        for (arm, s1, s2, lev) in triggers:
            if arm != a:
                continue
            lg = ctx.logbook.log_at(lev, ctx.logbook.coords_at(g, lev))
            if lg is None:
                continue
            thr = eviction_threshold(lg.n_in(s1, s2), 2.0**-lev, ctx.K, ctx.T, ctx.C0)
            mg = lg.max_rival_gap_sum(s1, s2, a) - thr
            margin = mg if margin is None else max(margin, mg)
        if margin is None:
            return a  # not actually triggered; keep it
        if best_margin is None or margin < best_margin:
            best_arm, best_margin = a, margin
    return best_arm if best_arm is not None else 0


def run_cmeta(
    stream: RunStream | Environment,
    algo_seed: int,
    *,
    C0: float = 1.0,
    eviction_mode: str = "dyadic",
    replay_mode: str = "scheduled",
    restart: str = "master",
    floor_singleton: bool = False,
    env_rng: np.random.Generator | None = None,
    policy_name: str = "cmeta",
) -> RunLog:
    """Run the full episodic policy on a realized stream and return its trace.

    `stream` is either a RunStream (preferred: lets several policies share
    the same contexts and rewards) or an Environment, in which case
    `env_rng` must supply the environment randomness.  `algo_seed` drives
    both the uniform arm picks and the replay schedule and is independent
    of the environment stream.  `replay_mode="off"` disables replays
    (used for block-structure checks); `restart="off"` with
    `floor_singleton=True` yields the non-restarting eliminator.
    """
    if isinstance(stream, Environment):
        if env_rng is None:
            raise ValueError("pass env_rng when handing an Environment directly")
        stream = RunStream.from_env(stream, env_rng)
    if eviction_mode not in ("dyadic", "exact"):
        raise ValueError(f"unknown eviction mode {eviction_mode!r}")
    if replay_mode not in ("scheduled", "off"):
        raise ValueError(f"unknown replay mode {replay_mode!r}")
    if restart not in ("master", "off"):
        raise ValueError(f"unknown restart mode {restart!r}")

    T, K, d = stream.T, stream.K, stream.d
    if T < 1:
        raise ValueError("need T >= 1")
    ctx = _RunCtx()
    ctx.T, ctx.K, ctx.d, ctx.C0, ctx.mode = T, K, d, C0, eviction_mode
    ctx.rewards = stream.rewards
    ctx.gaps = stream.gaps()
    ctx.m_levels = level_for(max(T, 1), K, d) if T >= 1 else 0
    ctx.m_grid = max(ctx.m_levels + 1, 1)
    grid = context_grid_coords(stream.contexts, ctx.m_grid)
    ctx.gtuples = [tuple(int(c) for c in row) for row in grid]
    ctx.level_of = _level_table(T, K, d)
    ctx.replays_on = replay_mode == "scheduled" and T >= 2
    ctx.restart_on = restart == "master"
    ctx.floor_singleton = floor_singleton
    ctx.full = (1 << K) - 1
    ctx.mask_bits = {ctx.full: tuple(range(K))}
    ctx.sched_seed = algo_seed

    pick_rng = np.random.default_rng(np.random.SeedSequence([0xA9043, algo_seed & 0xFFFFFFFF]))
    ctx.u = pick_rng.random(T)

    log = RunLog(
        policy=policy_name, T=T, K=K, d=d,
        contexts=stream.contexts, grid=grid, m_grid=ctx.m_grid,
        episode=np.zeros(T, dtype=np.int32), level=np.zeros(T, dtype=np.int16),
        depth=np.zeros(T, dtype=np.int16), candidates=np.zeros(T, dtype=np.int64),
        n_active=np.zeros(T, dtype=np.int16), arm=np.zeros(T, dtype=np.int16),
        reward=np.zeros(T), gap=np.zeros(T),
        episode_starts=[], episode_end_reasons=[],
        replay_activations=[], scheduled_fires=[], eviction_events=[],
        restart_evidence=[],
    )
    ctx.log = log
    ctx.logbook = LogBook(K, d, ctx.m_levels, ctx.m_grid)

    ctx.t = 1
    episode = 0
    while ctx.t <= T:
        ctx.episode = episode
        ctx.t_ell = ctx.t
        ctx.master = {}
        ctx.episode_over = False
        ctx.schedule = ReplaySchedule(algo_seed, episode, ctx.t_ell, T, d) if ctx.replays_on else None
        log.episode_starts.append(ctx.t_ell)
        _base_alg(ctx, ctx.t_ell, T + 1 - ctx.t_ell, depth=0)
        log.episode_end_reasons.append("restart" if ctx.episode_over else "horizon")
        episode += 1
        if not ctx.episode_over:
            break
    return log


def _level_table(T: int, K: int, d: int) -> np.ndarray:
    """level_of[n] = level_for(n, K, d) for n = 1..T+1 (index 0 unused)."""
    out = np.zeros(T + 2, dtype=np.int16)
    m = 0
    step = 2 + d
    for n in range(1, T + 2):
        while (K << (m * step)) < n:
            m += 1
        out[n] = m
    return out
