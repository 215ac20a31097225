"""Comparator policies sharing the meta-eliminator's trace format.

run_stationary_se is the elimination engine with replays disabled and the
restart criterion ignored (candidate sets floor at a singleton), i.e. what
the episodic policy degenerates to when it never re-explores.
run_oracle_restart is the analysis device that knows the detected shift
times: within each phase it uses the level matched to the phase length and
plays uniformly over the arms that have not yet incurred significant regret
(on true gaps) in the current bin.  run_uniform_random ignores everything.
"""

from __future__ import annotations

import numpy as np

from .cmeta import RunLog, RunStream, run_cmeta
from .detector import SigShiftReport, _dyadic_intervals, oracle_level
from .grid import context_grid_coords

__all__ = ["run_stationary_se", "run_uniform_random", "run_oracle_restart"]


def run_stationary_se(
    stream: RunStream,
    algo_seed: int,
    *,
    C0: float = 1.0,
    eviction_mode: str = "dyadic",
) -> RunLog:
    """Single-episode binned successive elimination (no replays, no restarts)."""
    return run_cmeta(
        stream,
        algo_seed,
        C0=C0,
        eviction_mode=eviction_mode,
        replay_mode="off",
        restart="off",
        floor_singleton=True,
        policy_name="stationary_se",
    )


def run_uniform_random(stream: RunStream, algo_seed: int) -> RunLog:
    """Uniform arm each round; the schema-identical null comparator."""
    T, K, d = stream.T, stream.K, stream.d
    rng = np.random.default_rng(np.random.SeedSequence([0xA9043, algo_seed & 0xFFFFFFFF]))
    arms = (rng.random(T) * K).astype(np.int16)
    gaps = stream.gaps()
    m_grid = 1
    grid = context_grid_coords(stream.contexts, m_grid)
    full = (1 << K) - 1
    return RunLog(
        policy="uniform_random", T=T, K=K, d=d,
        contexts=stream.contexts, grid=grid, m_grid=m_grid,
        episode=np.zeros(T, dtype=np.int32), level=np.zeros(T, dtype=np.int16),
        depth=np.zeros(T, dtype=np.int16),
        candidates=np.full(T, full, dtype=np.int64),
        n_active=np.full(T, K, dtype=np.int16), arm=arms,
        reward=stream.rewards[np.arange(T), arms],
        gap=gaps[np.arange(T), arms],
        episode_starts=[1], episode_end_reasons=["horizon"],
        replay_activations=[], scheduled_fires=[], eviction_events=[],
        restart_evidence=[],
    )


def _phase_trigger_ends(gaps, g, m_grid, m, tau, t_end, K, family):
    """coords -> per-arm earliest s2 of a significant-regret interval in [tau, t_end].

    Works on true gaps at the single level m with the strict form of the
    significance test; used by the oracle's good-arm bookkeeping.
    """
    r = 2.0**-m
    shift = m_grid - m
    groups: dict[tuple[int, ...], list[int]] = {}
    for offset, row in enumerate(g[tau - 1 : t_end]):
        groups.setdefault(tuple(int(c) >> shift for c in row), []).append(tau + offset)
    out = {}
    for coords, rounds in groups.items():
        R = np.asarray(rounds)
        cols = gaps[R - 1]
        P = np.vstack([np.zeros(K), np.cumsum(cols, axis=0)])
        ends = [None] * K
        if family == "exact":
            for j in range(len(R)):
                ns = np.arange(j + 1, 0, -1)
                rhs = np.sqrt(K * ns) + r * ns
                done = True
                for a in range(K):
                    if ends[a] is not None:
                        continue
                    done = False
                    if bool(np.any(P[j + 1, a] - P[: j + 1, a] > rhs)):
                        ends[a] = int(R[j])
                if done:
                    break
        elif family == "dyadic":
            iv = _dyadic_intervals(tau, t_end)
            i0 = np.searchsorted(R, iv[:, 0], side="left")
            j0 = np.searchsorted(R, iv[:, 1], side="right")
            n = j0 - i0
            live = n >= 1
            rhs = np.sqrt(K * n[live]) + r * n[live]
            for a in range(K):
                lhs = P[j0[live], a] - P[i0[live], a]
                hit = lhs > rhs
                if hit.any():
                    ends[a] = int(iv[live][hit][:, 1].min())
        else:
            raise ValueError(f"unknown interval family {family!r}")
        out[coords] = ends
    return out


def run_oracle_restart(
    stream: RunStream,
    report: SigShiftReport,
    algo_seed: int,
    *,
    exact_up_to: int = 4096,
) -> RunLog:
    """Restarting oracle: knows shift times, plays uniformly over safe arms.

    Within phase [tau_i, tau_{i+1}) the bin level is matched to the phase
    length; an arm leaves the good set of a bin once some sub-interval of
    [tau_i, t) gives it significant regret there on true gaps.  Interval
    search is exhaustive for horizons up to `exact_up_to`, dyadic beyond.
    The good set can only empty after the phase ends; if it empties early
    that is surfaced as an error, not repaired.
    """
    T, K, d = stream.T, stream.K, stream.d
    if report.T != T or report.K != K:
        raise ValueError("report was computed for a different run shape")
    gaps = stream.gaps()
    family = "exact" if T <= exact_up_to else "dyadic"
    starts = report.phase_starts() + [T + 1]
    rng = np.random.default_rng(np.random.SeedSequence([0xA9043, algo_seed & 0xFFFFFFFF]))
    u = rng.random(T)
    m_levels = max((oracle_level(s, e, K, d) for s, e in zip(starts, starts[1:]) if e > s), default=0)
    m_grid = max(m_levels, 1)
    grid = context_grid_coords(stream.contexts, m_grid)
    full = (1 << K) - 1

    log = RunLog(
        policy="oracle_restart", T=T, K=K, d=d,
        contexts=stream.contexts, grid=grid, m_grid=m_grid,
        episode=np.zeros(T, dtype=np.int32), level=np.zeros(T, dtype=np.int16),
        depth=np.zeros(T, dtype=np.int16), candidates=np.zeros(T, dtype=np.int64),
        n_active=np.zeros(T, dtype=np.int16), arm=np.zeros(T, dtype=np.int16),
        reward=np.zeros(T), gap=np.zeros(T),
        episode_starts=[], episode_end_reasons=[],
        replay_activations=[], scheduled_fires=[], eviction_events=[],
        restart_evidence=[],
    )
    for p, (tau, tau_next) in enumerate(zip(starts, starts[1:])):
        if tau > T:
            break
        log.episode_starts.append(tau)
        log.episode_end_reasons.append("oracle_shift" if tau_next <= T else "horizon")
        m = oracle_level(tau, tau_next, K, d)
        ends = _phase_trigger_ends(gaps, grid, m_grid, m, tau, tau_next - 1, K, family)
        shift = m_grid - m
        for t in range(tau, tau_next):
            i = t - 1
            coords = tuple(int(c) >> shift for c in grid[i])
            bin_ends = ends.get(coords)
            mask = 0
            for a in range(K):
                e = None if bin_ends is None else bin_ends[a]
                if e is None or e > t - 1:
                    mask |= 1 << a
            if mask == 0:
                raise RuntimeError(
                    f"oracle good set emptied at round {t} before phase end {tau_next}"
                )
            arms = [a for a in range(K) if (mask >> a) & 1]
            pick = arms[int(u[i] * len(arms))]
            log.episode[i] = p
            log.level[i] = m
            log.candidates[i] = mask
            log.n_active[i] = len(arms)
            log.arm[i] = pick
            log.reward[i] = stream.rewards[i, pick]
            log.gap[i] = gaps[i, pick]
    return log
