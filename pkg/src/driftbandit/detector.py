"""Post-hoc detection of experienced significant shifts from true gaps.

An arm incurs significant regret in bin B on a round interval I when its
in-bin cumulative true gap clears sqrt(K * n_B(I)) + r(B) * n_B(I)
(strictly; empty-bin intervals never witness anything).  An arm is unsafe
at a context x on I if some bin containing x carries significant regret on
I.  Shift i+1 is the earliest round t > tau_i at which every arm is unsafe
at the currently experienced context on some interval inside [tau_i, t]
("current" binding; an alternative "any" binding lets each arm use a
possibly different experienced context of the phase).

Two axes of search restriction are supported: the level set checked per
interval (exact: all levels up to the cap; critical: the three levels
around the one matched to the interval length) and the interval family
(all sub-intervals, or dyadic lengths at dyadic offsets from the phase
start).  Restricting either axis can only delay detections, so restricted
counts never exceed the exhaustive reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import Environment
from .grid import BinId, context_grid_coords, level_for

__all__ = [
    "SigShiftReport",
    "significant_regret",
    "is_unsafe",
    "compute_shifts",
    "oracle_level",
    "detector_level_cap",
    "worst_case_shift_count",
]


@dataclass
class SigShiftReport:
    """Detected shift rounds, their per-arm witnesses, and the search settings."""

    T: int
    K: int
    d: int
    mode: str
    interval_family: str
    context_binding: str
    shift_times: list[int] = field(default_factory=list)
    witnesses: list[dict] = field(default_factory=list)  # per shift: arm -> (BinId, (s1, s2))

    @property
    def count(self) -> int:
        return len(self.shift_times)

    def phase_starts(self) -> list[int]:
        return [1] + list(self.shift_times)


def detector_level_cap(T: int, K: int, d: int) -> int:
    """Finest level the detector ever checks: level_for(T) + 1."""
    return level_for(T, K, d) + 1


def significant_regret(
    gaps: np.ndarray, contexts: np.ndarray, b: BinId, interval: tuple[int, int], a: int
) -> bool:
    """Exact significant-regret check for arm a in bin b on [s1, s2].

    Strict inequality: with no in-bin round both sides are zero and the
    check fails, so only actually experienced bins can witness unsafety.
    """
    s1, s2 = interval
    T, K = gaps.shape
    if not (1 <= s1 <= s2 <= T):
        raise ValueError("interval outside [1, T]")
    xs = np.asarray(contexts, dtype=float).reshape(T, -1)[s1 - 1 : s2]
    scale = 1 << b.m
    cells = np.clip(np.floor(xs * scale).astype(np.int64), 0, scale - 1)
    inside = np.all(cells == np.asarray(b.coords), axis=1)
    n = int(inside.sum())
    lhs = float(gaps[s1 - 1 : s2, a][inside].sum())
    return lhs > math.sqrt(K * n) + b.side * n


def _critical_band(length: int, K: int, d: int, m_cap: int) -> range:
    m_i = level_for(length, K, d)
    return range(max(0, m_i - 1), min(m_cap, m_i + 1) + 1)


def is_unsafe(
    gaps: np.ndarray,
    contexts: np.ndarray,
    x,
    interval: tuple[int, int],
    a: int,
    mode: str = "exact",
) -> bool:
    """Whether some bin containing x carries significant regret for arm a on I."""
    T, K = gaps.shape
    d = np.asarray(contexts).reshape(T, -1).shape[1]
    m_cap = detector_level_cap(T, K, d)
    s1, s2 = interval
    if mode == "exact":
        levels = range(0, m_cap + 1)
    elif mode == "critical":
        levels = _critical_band(s2 - s1 + 1, K, d, m_cap)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for m in levels:
        scale = 1 << m
        coords = tuple(min(int(xi * scale), scale - 1) for xi in np.atleast_1d(x))
        if significant_regret(gaps, contexts, BinId(m, coords), interval, a):
            return True
    return False


def oracle_level(tau_i: int, tau_next: int, K: int, d: int) -> int:
    """Level used by the restarting oracle over the phase [tau_i, tau_next)."""
    if tau_next <= tau_i:
        raise ValueError("need tau_next > tau_i")
    return level_for(tau_next - tau_i, K, d)


# ---------------------------------------------------------------------------
# Trigger tables: earliest round at which each (arm, level, bin) has a
# triggering interval fully inside [tau, that round].
# ---------------------------------------------------------------------------


def _dyadic_intervals(tau: int, T: int) -> np.ndarray:
    """(n, 2) array of [s1, s2] with dyadic lengths at dyadic offsets from tau."""
    out = []
    span = T - tau + 1
    p = 0
    while (1 << p) <= span:
        length = 1 << p
        s1 = np.arange(tau, T - length + 2, length)
        out.append(np.stack([s1, s1 + length - 1], axis=1))
        p += 1
    return np.concatenate(out, axis=0) if out else np.empty((0, 2), dtype=int)


def _bin_visits(g: np.ndarray, m: int, m_grid: int, tau: int, T: int):
    """Group rounds tau..T by their level-m bin: coords -> sorted round array."""
    shift = m_grid - m
    rows = g[tau - 1 : T] >> shift
    groups: dict[tuple[int, ...], list[int]] = {}
    for offset, row in enumerate(rows):
        groups.setdefault(tuple(int(c) for c in row), []).append(tau + offset)
    return groups


def _phase_tables(gaps, g, m_grid, tau, T, K, d, mode, family):
    """(m, coords) -> per-arm (earliest_avail, s1, s2) trigger records."""
    m_cap = detector_level_cap(T, K, d)
    tables: dict[tuple[int, tuple[int, ...]], list] = {}
    step = 2 + d
    if family == "dyadic":
        iv = _dyadic_intervals(tau, T)
        if len(iv) == 0:
            return tables
        lengths = iv[:, 1] - iv[:, 0] + 1
        m_of_len = np.array([level_for(int(n), K, d) for n in lengths])
        for m in range(0, m_cap + 1):
            if mode == "critical":
                ok = np.abs(m_of_len - m) <= 1
            else:
                ok = np.ones(len(iv), dtype=bool)
            if not ok.any():
                continue
            sel = iv[ok]
            r = 2.0**-m
            for coords, rounds in _bin_visits(g, m, m_grid, tau, T).items():
                R = np.asarray(rounds)
                i0 = np.searchsorted(R, sel[:, 0], side="left")
                j0 = np.searchsorted(R, sel[:, 1], side="right")
                n = j0 - i0
                live = n >= 1
                if not live.any():
                    continue
                recs = tables.setdefault((m, coords), [None] * K)
                cols = gaps[R - 1]  # (V, K)
                P = np.vstack([np.zeros(K), np.cumsum(cols, axis=0)])
                rhs = np.sqrt(K * n[live]) + r * n[live]
                s1s, s2s = sel[live, 0], sel[live, 1]
                il, jl = i0[live], j0[live]
                for a in range(K):
                    lhs = P[jl, a] - P[il, a]
                    hit = lhs > rhs
                    if hit.any():
                        idx = np.flatnonzero(hit)
                        pick = idx[np.argmin(s2s[idx])]
                        rec = (int(s2s[pick]), int(s1s[pick]), int(s2s[pick]))
                        if recs[a] is None or rec[0] < recs[a][0]:
                            recs[a] = rec
        return tables

    if family != "all":
        raise ValueError(f"unknown interval family {family!r}")

    for m in range(0, m_cap + 1):
        r = 2.0**-m
        if mode == "critical":
            lo = (K << ((m - 2) * step)) + 1 if m >= 2 else 1
            hi = K << ((m + 1) * step)
        for coords, rounds in _bin_visits(g, m, m_grid, tau, T).items():
            R = np.asarray(rounds)
            V = len(R)
            cols = gaps[R - 1]
            P = np.vstack([np.zeros(K), np.cumsum(cols, axis=0)])
            recs = tables.setdefault((m, coords), [None] * K)
            prev_round = np.concatenate([[tau - 1], R[:-1]])  # R[i-1] (or tau-1)
            next_round = np.concatenate([R[1:], [T + 1]])  # R[j+1] (or T+1)
            for j in range(V):
                ns = np.arange(j + 1, 0, -1)
                rhs = np.sqrt(K * ns) + r * ns
                s1_min = prev_round[: j + 1] + 1  # earliest legal s1 per i
                l0 = int(R[j]) - R[: j + 1] + 1  # minimal length per i
                if mode == "critical":
                    lmax = min(T, int(next_round[j]) - 1) - s1_min + 1
                    feas = (l0 <= hi) & (lmax >= lo)
                    need = s1_min + lo - 1  # s2 needed if we must lengthen
                    avail = np.where(l0 >= lo, int(R[j]), np.maximum(int(R[j]), need))
                    l_wit = np.maximum(l0, lo)
                else:
                    feas = np.ones(j + 1, dtype=bool)
                    avail = np.full(j + 1, int(R[j]))
                    l_wit = l0
                done = True
                for a in range(K):
                    cur = recs[a][0] if recs[a] is not None else None
                    if cur is not None and cur <= int(R[j]):
                        continue
                    done = False
                    lhs = P[j + 1, a] - P[: j + 1, a]
                    hit = (lhs > rhs) & feas
                    if hit.any():
                        idx = np.flatnonzero(hit)
                        pick = idx[np.argmin(avail[idx])]
                        av = int(avail[pick])
                        rec = (av, av - int(l_wit[pick]) + 1, av)
                        if recs[a] is None or rec[0] < recs[a][0]:
                            recs[a] = rec
                if done:
                    break
    return tables


def compute_shifts(
    gaps: np.ndarray,
    contexts: np.ndarray,
    T: int | None = None,
    K: int | None = None,
    d: int | None = None,
    mode: str = "exact",
    interval_family: str = "all",
    context_binding: str = "current",
) -> SigShiftReport:
    """Recursive scan for experienced significant shifts over [1, T].

    Pure function of (gaps, contexts, settings).  `context_binding`
    "current" demands every arm be unsafe at the single context X_t;
    "any" lets each arm become unsafe at its own experienced context of
    the phase.
    """
    gaps = np.asarray(gaps, dtype=float)
    contexts = np.asarray(contexts, dtype=float).reshape(len(gaps), -1)
    T = T or len(gaps)
    K = K or gaps.shape[1]
    d = d if d is not None else contexts.shape[1]
    if mode not in ("exact", "critical"):
        raise ValueError(f"unknown mode {mode!r}")
    if context_binding not in ("current", "any"):
        raise ValueError(f"unknown context binding {context_binding!r}")
    m_cap = detector_level_cap(T, K, d)
    m_grid = max(m_cap, 1)
    g = context_grid_coords(contexts, m_grid)
    report = SigShiftReport(
        T=T, K=K, d=d, mode=mode, interval_family=interval_family,
        context_binding=context_binding,
    )
    tau = 1
    while tau < T:
        tables = _phase_tables(gaps, g, m_grid, tau, T, K, d, mode, interval_family)
        shift_t, shift_wit = _scan_phase(tables, g, m_grid, m_cap, tau, T, K, context_binding)
        if shift_t is None:
            break
        report.shift_times.append(shift_t)
        report.witnesses.append(shift_wit)
        tau = shift_t
    return report


def _scan_phase(tables, g, m_grid, m_cap, tau, T, K, binding):
    runmin = [None] * K  # for binding == "any": best (avail, witness) so far
    for t in range(tau + 1, T + 1):
        row = g[t - 1]
        wit_t = [None] * K
        for m in range(m_cap + 1):
            shift = m_grid - m
            key = (m, tuple(int(c) >> shift for c in row))
            recs = tables.get(key)
            if recs is None:
                continue
            for a in range(K):
                rec = recs[a]
                if rec is not None and (wit_t[a] is None or rec[0] < wit_t[a][0]):
                    wit_t[a] = (rec[0], BinId(m, key[1]), (rec[1], rec[2]))
        if binding == "any":
            for a in range(K):
                if wit_t[a] is not None and (runmin[a] is None or wit_t[a][0] < runmin[a][0]):
                    runmin[a] = wit_t[a]
            effective = runmin
        else:
            effective = wit_t
        if all(w is not None and w[0] <= t for w in effective):
            return t, {a: (w[1], w[2]) for a, w in enumerate(effective)}
    return None, None


def worst_case_shift_count(
    env: Environment, grid_resolution: int | None = None
) -> int:
    """Count of worst-case shifts, quantifying over a context grid.

    A worst-case shift closes the earliest interval (tau, t] on which some
    single grid context x has, for every arm, a round s with gap at least
    (K / (t - tau))^(1/(2+d)).  The existential over all of [0,1]^d is
    approximated by the grid, which makes this a lower bound on the exact
    count; reported as a cross-check only.
    """
    T, K, d = env.T, env.K, env.d
    if grid_resolution is None:
        grid_resolution = 1 << detector_level_cap(T, K, d)
        grid_resolution = min(grid_resolution, 256 if d <= 1 else 64)
    if d == 0:
        pts = np.zeros((1, 0))
    else:
        axis = (np.arange(grid_resolution) + 0.5) / grid_resolution
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    bounds = env.phase_bounds()
    phase_gaps = []
    for (first, _last) in bounds:
        means = np.stack([f.eval(pts) for f in env.arms_at(first)], axis=1)  # (n, K)
        phase_gaps.append(means.max(axis=1, keepdims=True) - means)
    count = 0
    tau = 1
    while tau < T:
        running = np.zeros_like(phase_gaps[0])
        best_t = None
        for p, (first, last) in enumerate(bounds):
            lo, hi = max(first, tau), min(last, T)
            if hi < lo:
                continue
            running = np.maximum(running, phase_gaps[p])
            floor = running.min(axis=1)  # weakest arm's best gap so far, per x
            pos = floor[floor > 0]
            if len(pos) == 0:
                continue
            need = np.ceil(K / np.power(floor[floor > 0], 2 + d)).astype(int)
            t_cand = np.maximum(lo, tau + need)
            t_cand = t_cand[t_cand <= hi]
            if len(t_cand):
                cand = int(t_cand.min())
                if best_t is None or cand < best_t:
                    best_t = cand
        if best_t is None:
            break
        count += 1
        tau = best_t
    return count
