"""Importance-weighted local gap estimation over bins and round intervals.

Each play is logged as an event carrying the candidate set it was drawn
from.  The per-event estimate of the relative gap (a_prime over a) is

    |A_s| * (Y_s * 1{played=a_prime} - Y_s * 1{played=a}) * 1{a in A_s}

restricted to events whose context fell in the bin under consideration.
Interval aggregates of these estimates feed the eviction rule: an arm is
evicted on [s1, s2] once some rival's aggregate estimated advantage exceeds

    sqrt(C0 * K * ln(T) * max(n_B, K * ln(T))) + r * n_B

with n_B the in-bin count on the interval and r the side of the bin at the
level matched to the interval length.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .grid import BinId, bin_of, level_for

__all__ = [
    "PlayEvent",
    "BinEventLog",
    "LogBook",
    "iw_gap",
    "interval_gap_sum",
    "interval_gap_sum_bruteforce",
    "eviction_threshold",
    "eviction_test",
    "eviction_scan",
    "scan_intervals",
    "scan_triggers",
]


@dataclass(frozen=True)
class PlayEvent:
    """One logged round restricted to some bin: round, context, play, reward, candidates."""

    t: int
    x: tuple[float, ...]
    arm_played: int
    reward: float
    candidate_set: int  # bitmask over K arms
    candidate_count: int

    def __post_init__(self) -> None:
        if not (self.candidate_set >> self.arm_played) & 1:
            raise ValueError("played arm not in candidate set")
        if self.candidate_count != bin(self.candidate_set).count("1"):
            raise ValueError("candidate_count inconsistent with bitmask")
        if not (0.0 <= self.reward <= 1.0):
            raise ValueError("reward outside [0,1]")


def iw_gap(e: PlayEvent, a_prime: int, a: int, K: int) -> float:
    """Single-event importance-weighted estimate of the (a_prime, a) gap."""
    if not (0 <= a < K and 0 <= a_prime < K):
        raise ValueError("arm index out of range")
    if not (e.candidate_set >> a) & 1:
        return 0.0
    if a_prime == a:
        return 0.0
    if e.arm_played == a_prime:
        return e.candidate_count * e.reward
    if e.arm_played == a:
        return -e.candidate_count * e.reward
    return 0.0


class BinEventLog:
    """Append-only per-bin event log with prefix sums for interval queries.

    For each played arm c it keeps the cumulative sums of
    |A| * y * 1{a in A} per potential evictee a, so any interval aggregate
    of the estimator reduces to four prefix lookups.  Single writer during a
    run; reads are safe afterwards.
    """

    __slots__ = ("bin", "K", "all_ts", "events", "_ts_by_played", "_cum")

    def __init__(self, b: BinId, K: int, keep_events: bool = True):
        self.bin = b
        self.K = K
        self.all_ts: list[int] = []
        self.events: list[PlayEvent] | None = [] if keep_events else None
        self._ts_by_played = [[] for _ in range(K)]
        self._cum = [[[0.0] for _ in range(K)] for _ in range(K)]

    def append(self, e: PlayEvent) -> None:
        if self.all_ts and e.t <= self.all_ts[-1]:
            raise ValueError("events must arrive in strictly increasing rounds")
        if self.events is not None:
            self.events.append(e)
        self.append_raw(e.t, e.arm_played, e.reward, e.candidate_set, e.candidate_count)

    def append_raw(self, t: int, played: int, reward: float, mask: int, count: int) -> None:
        self.all_ts.append(t)
        self._ts_by_played[played].append(t)
        cum_c = self._cum[played]
        inc = count * reward
        for a in range(self.K):
            col = cum_c[a]
            col.append(col[-1] + (inc if (mask >> a) & 1 else 0.0))

    def n_in(self, s1: int, s2: int) -> int:
        """n_B([s1,s2]): number of logged (in-bin) rounds in the interval."""
        return bisect_right(self.all_ts, s2) - bisect_left(self.all_ts, s1)

    def _sumq(self, c: int, a: int, s1: int, s2: int) -> float:
        ts = self._ts_by_played[c]
        i = bisect_left(ts, s1)
        j = bisect_right(ts, s2)
        col = self._cum[c][a]
        return col[j] - col[i]

    def gap_sum(self, s1: int, s2: int, a_prime: int, a: int) -> float:
        if a_prime == a:
            return 0.0
        return self._sumq(a_prime, a, s1, s2) - self._sumq(a, a, s1, s2)

    def max_rival_gap_sum(self, s1: int, s2: int, a: int) -> float:
        """max over a_prime of the interval gap sum against arm a."""
        own = self._sumq(a, a, s1, s2)
        best = 0.0  # a_prime == a contributes 0
        for c in range(self.K):
            if c == a:
                continue
            v = self._sumq(c, a, s1, s2) - own
            if v > best:
                best = v
        return best


def interval_gap_sum(log: BinEventLog, s1: int, s2: int, a_prime: int, a: int) -> float:
    """Aggregate estimator over logged events with s1 <= t <= s2 (empty -> 0)."""
    if s1 > s2:
        return 0.0
    return log.gap_sum(s1, s2, a_prime, a)


def interval_gap_sum_bruteforce(log: BinEventLog, s1: int, s2: int, a_prime: int, a: int) -> float:
    """Reference per-event summation; defines correctness of the prefix path."""
    if log.events is None:
        raise ValueError("log was built without retained events")
    return sum(iw_gap(e, a_prime, a, log.K) for e in log.events if s1 <= e.t <= s2)


def eviction_threshold(n_B: int, r: float, K: int, T: float, C0: float) -> float:
    """sqrt(C0 * K * ln(T) * max(n_B, K ln T)) + r * n_B."""
    if n_B < 0:
        raise ValueError("n_B must be >= 0")
    if T < 2:
        raise ValueError("need T >= 2")
    klogt = K * math.log(T)
    return math.sqrt(C0 * klogt * max(n_B, klogt)) + r * n_B


def eviction_test(
    log: BinEventLog, s1: int, s2: int, a: int, C0: float, K: int, T: float
) -> bool:
    """Eviction rule for arm a on [s1, s2] in the log's bin.

    The log must be at the level matched to the interval length, i.e.
    level_for(s2 - s1, K, d).
    """
    d = len(log.bin.coords)
    want = level_for(s2 - s1, K, d)
    if log.bin.m != want:
        raise ValueError(f"log bin level {log.bin.m} != level_for(s2-s1) = {want}")
    n = log.n_in(s1, s2)
    thr = eviction_threshold(n, log.bin.side, K, T, C0)
    return log.max_rival_gap_sum(s1, s2, a) > thr


class LogBook:
    """Per-level maps of bin coordinate tuple -> BinEventLog.

    Every event is filed at all levels 0..m_levels under the bin containing
    its context, so later interval queries can aggregate at whichever level
    the interval length calls for.  Contexts are carried as integer grid
    coordinates at level m_grid (>= m_levels).
    """

    def __init__(self, K: int, d: int, m_levels: int, m_grid: int, keep_events: bool = False):
        if m_grid < m_levels:
            raise ValueError("m_grid must be >= m_levels")
        self.K = K
        self.d = d
        self.m_levels = m_levels
        self.m_grid = m_grid
        self.keep_events = keep_events
        self.by_level: list[dict[tuple[int, ...], BinEventLog]] = [
            {} for _ in range(m_levels + 1)
        ]

    def coords_at(self, g: tuple[int, ...], m: int) -> tuple[int, ...]:
        shift = self.m_grid - m
        return tuple(c >> shift for c in g)

    def append(self, e: PlayEvent, g: tuple[int, ...]) -> None:
        for m in range(self.m_levels + 1):
            self._log_for(m, self.coords_at(g, m)).append(e)

    def append_raw(self, t: int, g: tuple[int, ...], played: int, reward: float,
                   mask: int, count: int) -> None:
        for m in range(self.m_levels + 1):
            self._log_for(m, self.coords_at(g, m)).append_raw(t, played, reward, mask, count)

    def _log_for(self, m: int, coords: tuple[int, ...]) -> BinEventLog:
        level = self.by_level[m]
        log = level.get(coords)
        if log is None:
            log = BinEventLog(BinId(m, coords), self.K, keep_events=self.keep_events)
            level[coords] = log
        return log

    def log_at(self, m: int, coords: tuple[int, ...]) -> BinEventLog | None:
        if m > self.m_levels:
            return None
        return self.by_level[m].get(coords)


def scan_intervals(t: int, window_start: int, mode: str) -> list[tuple[int, int]]:
    """Candidate intervals [s1, s2] inside [window_start, t) for the scan.

    dyadic: [t - 2^j, t - 1] for j = 1..floor(log2(t - window_start)), plus
    the full window [window_start, t - 1].  exact: every s1 < s2 in the
    window.  window_only: just the full window.
    """
    if window_start >= t:
        return []
    out: list[tuple[int, int]] = []
    span = t - window_start
    if mode == "dyadic":
        j = 1
        while (1 << j) <= span:
            out.append((t - (1 << j), t - 1))
            j += 1
        full = (window_start, t - 1)
        if full[0] < full[1] and full not in out:
            out.append(full)
    elif mode == "exact":
        for s1 in range(window_start, t - 1):
            for s2 in range(s1 + 1, t):
                out.append((s1, s2))
    elif mode == "window_only":
        if window_start < t - 1:
            out.append((window_start, t - 1))
    else:
        raise ValueError(f"unknown scan mode {mode!r}")
    return out


def scan_triggers(
    logbook: LogBook,
    t: int,
    g: tuple[int, ...],
    window_start: int,
    mode: str,
    C0: float,
    K: int,
    T: float,
    arms: tuple[int, ...] | None = None,
) -> list[tuple[int, int, int, int]]:
    """All (arm, s1, s2, level) eviction triggers for the bins containing g.

    For each candidate interval the bin checked is the one at
    level_for(s2 - s1) containing the current context.
    """
    if arms is None:
        arms = tuple(range(K))
    triggers = []
    lnT = math.log(T)
    klogt = K * lnT
    for s1, s2 in scan_intervals(t, window_start, mode):
        m = level_for(s2 - s1, K, logbook.d)
        if m > logbook.m_levels:
            m = logbook.m_levels
        log = logbook.log_at(m, logbook.coords_at(g, m))
        if log is None:
            continue
        n = log.n_in(s1, s2)
        if n == 0 or K * n <= math.sqrt(C0 * klogt * max(n, klogt)):
            continue  # no arm can clear the threshold
        thr = math.sqrt(C0 * klogt * max(n, klogt)) + (2.0 ** -m) * n
        for a in arms:
            if log.max_rival_gap_sum(s1, s2, a) > thr:
                triggers.append((a, s1, s2, m))
    return triggers


def eviction_scan(
    logbook: LogBook,
    t: int,
    x,
    window_start: int,
    mode: str,
    C0: float,
    K: int,
    T: float,
) -> set[int]:
    """Arms with at least one triggering interval in [window_start, t)."""
    g = tuple(bin_of(x, logbook.m_grid).coords)
    return {a for a, *_ in scan_triggers(logbook, t, g, window_start, mode, C0, K, T)}
