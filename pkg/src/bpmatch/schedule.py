"""Asynchronous update schedules.

A schedule is a sequence of sets E(1), E(2), ... of directed edges; at step t
exactly the edges in E(t) recompute their message from the state at t-1 and
all others carry over.  A schedule has a redundancy when some directed edge
(i -> j) is re-updated although none of its feeding edges (l -> i), l a
neighbor of i other than j, was updated since (i -> j)'s previous update
(updates in the same step as that previous update count as feeding, because
their values are visible to the later recomputation; updates in the same
step as the re-update are not).

u(t) is the minimum, over directed edges, of how many updates the edge
received through step t; certified asynchronous stopping triggers once u(t)
exceeds a bound supplied by the LP certificate.
"""

from __future__ import annotations

import random as _random
from dataclasses import dataclass
from itertools import islice

from .graph import Graph, PERFECT, GraphError
from .engine import (MessageInit, MessageState, StopPolicy, RunResult,
                     init_messages, extract_estimate, detect_period, _round,
                     _check_reduced)


class ScheduleError(GraphError):
    pass


class ScheduleExhausted(ScheduleError):
    pass


class RedundantScheduleError(ScheduleError):
    def __init__(self, violation):
        self.violation = violation
        super().__init__(f"redundant update of {violation.edge} at step {violation.t} "
                         f"(previous update at step {violation.t_prev}, no feeding update between)")


@dataclass(frozen=True)
class ScheduleViolation:
    edge: tuple
    t_prev: int
    t: int


@dataclass(frozen=True)
class CoverageStats:
    t: int
    counts: dict
    u: int


class Schedule:
    """Sequence of directed-edge update sets, materialized or generated.

    Generated kinds are infinite and redundancy-free by construction;
    materialized kinds (files, explicit lists) are finite and untrusted.
    """

    def __init__(self, kind, *, sets=None, factory=None, seed=None, trusted=False):
        if (sets is None) == (factory is None):
            raise ScheduleError("exactly one of sets/factory required")
        self.kind = kind
        self.seed = seed
        self.trusted = trusted
        self._sets = None if sets is None else [frozenset(s) for s in sets]
        self._factory = factory

    @property
    def finite(self):
        return self._sets is not None

    def __len__(self):
        if self._sets is None:
            raise ScheduleError(f"{self.kind} schedule is unbounded")
        return len(self._sets)

    def __iter__(self):
        if self._sets is not None:
            return iter(self._sets)
        return self._factory()

    def prefix(self, horizon: int) -> list:
        """E(1)..E(horizon); shorter if a materialized schedule ends first."""
        return list(islice(iter(self), horizon))

    def describe(self):
        if self.seed is not None:
            return f"{self.kind}(seed={self.seed})"
        return self.kind


# -- generators ----------------------------------------------------------------

def _reupdatable(g: Graph):
    """Directed edges that can be updated more than once without redundancy:
    largest set in which every edge has a feeding edge also in the set."""
    alive = set(g.directed_edges())
    while True:
        dead = {(i, j) for (i, j) in alive
                if not any((l, i) in alive for l in g.neighbors(i) if l != j)}
        if not dead:
            return alive
        alive -= dead


def _boundary_ok(g: Graph, prev_seq, next_seq):
    # prev_seq/next_seq: lists of single directed edges forming two cycles.
    prev_pos = {e: k for k, e in enumerate(prev_seq)}
    next_pos = {e: k for k, e in enumerate(next_seq)}
    for e, q in next_pos.items():
        if e not in prev_pos:
            continue
        i, j = e
        feeders = {(l, i) for l in g.neighbors(i) if l != j}
        p = prev_pos[e]
        window = set(prev_seq[p:]) | set(next_seq[:q])
        if not (feeders & window):
            return False
    return True


def make_schedule(g: Graph, kind: str, seed=None, sets=None) -> Schedule:
    """Build a schedule.

    sync: every directed edge at every step.
    roundrobin: single edges cycling in a fixed global order.
    random: one seeded random single-edge permutation per cycle; cycle
        boundaries are resampled (or the previous order reused) so the
        result is redundancy-free by construction.
    explicit: the given list of update sets, verbatim (untrusted).
    """
    dirs = g.directed_edges()
    if kind == "sync":
        full = frozenset(dirs)

        def factory():
            while True:
                yield full
        return Schedule("sync", factory=factory, trusted=True)

    if kind == "roundrobin":
        repeat = sorted(_reupdatable(g))
        once = [e for e in dirs if e not in set(repeat)]

        def factory():
            for e in once:
                yield frozenset((e,))
            while repeat:
                for e in repeat:
                    yield frozenset((e,))
        return Schedule("roundrobin", factory=factory, trusted=True)

    if kind == "random":
        if seed is None:
            raise ScheduleError("random schedules need a seed")
        repeat = sorted(_reupdatable(g))
        once = [e for e in dirs if e not in set(repeat)]

        def factory():
            rng = _random.Random(seed)
            for e in sorted(once, key=lambda _: rng.random()):
                yield frozenset((e,))
            prev = None
            while repeat:
                if prev is None:
                    cycle = repeat[:]
                    rng.shuffle(cycle)
                else:
                    cycle = None
                    for _ in range(100):
                        cand = repeat[:]
                        rng.shuffle(cand)
                        if _boundary_ok(g, prev, cand):
                            cycle = cand
                            break
                    if cycle is None:
                        cycle = prev[:]  # repeating the same order is always safe
                for e in cycle:
                    yield frozenset((e,))
                prev = cycle
        return Schedule("random", factory=factory, seed=seed, trusted=True)

    if kind == "explicit":
        if sets is None:
            raise ScheduleError("explicit schedules need update sets")
        known = set(dirs)
        out = []
        for t, s in enumerate(sets, start=1):
            s = frozenset(tuple(e) for e in s)
            foreign = [e for e in s if e not in known]
            if foreign:
                raise ScheduleError(f"step {t}: {foreign[0]} is not a directed edge of the graph")
            out.append(s)
        return Schedule("explicit", sets=out, trusted=False)

    raise ScheduleError(f"unknown schedule kind {kind!r}")


def parse_schedule(text: str, g: Graph) -> Schedule:
    """One line per step: whitespace-separated tokens "i>j"; an empty line is
    an empty update set; lines starting with '#' are skipped."""
    sets = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("#"):
            continue
        if not stripped:
            sets.append(frozenset())
            continue
        step = set()
        for tok in stripped.split():
            if ">" not in tok:
                raise ScheduleError(f"line {lineno}: expected 'i>j', got {tok!r}")
            a, _, b = tok.partition(">")
            try:
                e = (int(a), int(b))
            except ValueError:
                raise ScheduleError(f"line {lineno}: bad directed edge {tok!r}") from None
            step.add(e)
        sets.append(frozenset(step))
    return make_schedule(g, "explicit", sets=sets)


def serialize_schedule(sets) -> str:
    lines = []
    for s in sets:
        lines.append(" ".join(f"{i}>{j}" for (i, j) in sorted(s)))
    return "\n".join(lines) + "\n"


# -- validation and coverage -----------------------------------------------------

class _RedundancyTracker:
    def __init__(self, g: Graph):
        self.g = g
        self.last = {}

    def step(self, t, updates):
        """Return the first violation caused by applying E(t), else None."""
        for e in sorted(updates):
            i, j = e
            prev = self.last.get(e)
            if prev is None:
                continue
            ok = any(self.last.get((l, i), -1) >= prev
                     for l in self.g.neighbors(i) if l != j)
            if not ok:
                return ScheduleViolation(e, prev, t)
        for e in updates:
            self.last[e] = t
        return None


def validate_schedule(g: Graph, sched: Schedule, horizon: int):
    """Check the first `horizon` steps for redundancies; None means ok."""
    tracker = _RedundancyTracker(g)
    for t, updates in enumerate(sched.prefix(horizon), start=1):
        violation = tracker.step(t, updates)
        if violation is not None:
            return violation
    return None


def coverage(g: Graph, sched: Schedule, t: int) -> CoverageStats:
    counts = {e: 0 for e in g.directed_edges()}
    steps = 0
    for updates in sched.prefix(t):
        steps += 1
        for e in updates:
            counts[e] += 1
    u = min(counts.values(), default=0)
    return CoverageStats(t, counts, u)


# -- asynchronous rounds ---------------------------------------------------------

def async_round(g: Graph, s: MessageState, updates, mode: str = PERFECT) -> MessageState:
    """Update only the given directed edges from the state at t-1; everything
    else carries over unchanged."""
    updates = frozenset(updates)
    known = set(g.directed_edges())
    foreign = [e for e in updates if e not in known]
    if foreign:
        raise ScheduleError(f"{foreign[0]} is not a directed edge of the graph")
    if mode == PERFECT and updates:
        _check_reduced(g)
    return _round(g, s, mode, updates=sorted(updates))


def run_async(g: Graph, sched: Schedule, init: MessageInit | None = None,
              stop: StopPolicy | None = None, mode: str = PERFECT,
              check_redundancy: bool = True, keep_trace: bool = False,
              max_steps: int = 200_000) -> RunResult:
    """Drive message passing along a schedule.

    Untrusted schedules are checked for redundancies as they are consumed
    unless check_redundancy is False (the run is then uncertified).  A
    coverage stop triggers at the first step t with u(t) > stop.threshold.
    Raises ScheduleExhausted when a finite schedule ends before the stop
    condition is met.
    """
    if mode == PERFECT and g.m > 0:
        _check_reduced(g)
    stop = stop or StopPolicy.coverage(0)
    state = init_messages(g, init)
    est = extract_estimate(g, state, mode)
    history = [est.edges]
    trace = [state] if keep_trace else None
    tracker = _RedundancyTracker(g) if (check_redundancy and not sched.trusted) else None
    counts = {e: 0 for e in g.directed_edges()}
    last_change = 0
    window_size = stop.window_size if stop.kind == "window" and stop.window_size else max(g.n, 1)

    def covered():
        # a graph with no directed edges is vacuously covered
        return not counts or min(counts.values()) > stop.threshold

    t = 0
    stop_met = stop.kind == "coverage" and covered()
    it = iter(sched)
    while not stop_met:
        if stop.kind in ("budget", "certified") and t >= stop.iterations:
            break
        if stop.kind == "window":
            if t - last_change >= window_size:
                stop_met = True
                break
            limit = stop.limit if stop.limit is not None else max(100, 20 * window_size)
            if t >= limit:
                break
        if t >= max_steps:
            raise ScheduleExhausted(f"stop condition not met within {max_steps} steps")
        try:
            updates = next(it)
        except StopIteration:
            raise ScheduleExhausted(
                f"schedule ended after {t} steps before the stop condition was met") from None
        t += 1
        if tracker is not None:
            violation = tracker.step(t, updates)
            if violation is not None:
                raise RedundantScheduleError(violation)
        state = _round(g, state, mode, updates=sorted(updates))
        for e in updates:
            counts[e] += 1
        est = extract_estimate(g, state, mode)
        if est.edges != history[-1]:
            last_change = t
        history.append(est.edges)
        if keep_trace:
            trace.append(state)
        if stop.kind == "coverage":
            stop_met = covered()

    stable_for = t - last_change
    if stop.kind == "window":
        converged = stable_for >= window_size
    elif stop.kind == "coverage":
        converged = stop_met
    else:
        converged = stable_for >= window_size
    period = None
    if not converged:
        period = detect_period(history, max(window_size, 2))
    cov = CoverageStats(t, counts, min(counts.values(), default=0))
    return RunResult(mode=mode, estimate=est, iterations=t, stabilized_at=last_change,
                     stable_for=stable_for, converged=converged, period=period,
                     history=history, stop=stop, trace=trace, coverage=cov,
                     schedule_kind=sched.describe())
