"""b-scaling with release dates and on identical parallel machines.

With release dates every job carries a rank, the round it will be probed in
next. A freshly released job has rank minus infinity. Whenever a probe ends,
the released unfinished job of minimum (rank, index) is probed with budget
``w_j * b**rank``. Probes are never interrupted. Catching a fresh job up to
the current ranks takes infinitely many tiny probes, which are charged as one
analytic block.

On ``m`` machines the single machine probe sequence (unit weights, rounds of
the surviving jobs in index order) is list scheduled: each probe starts on
the first machine that becomes free. Once at most ``m`` jobs remain, probes
are no longer aborted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .core import (
    CompletionReport,
    Instance,
    InstanceError,
    Job,
    ceil_log,
    floor_log,
    objective_of,
    validate,
)
from .killrestart import AnalyticBlock, ProbeSchedule, Segment, covers
from .preemptive import mean_busy_times, pwspt, rr_parallel, wsetf

__all__ = [
    "simulate_bscaling_release",
    "simulate_bscaling_parallel",
    "TransformedPair",
    "transform_round_smith",
    "round_parallel",
    "inflate",
    "release_chain",
    "parallel_chain",
]

INF = math.inf


def _check_b(b):
    if not (b > 1 and math.isfinite(b)):
        raise ValueError("b must be a finite number greater than 1")


def _close(a: float, b: float) -> bool:
    return a <= b + 1e-10 * abs(b)


def simulate_bscaling_release(instance: Instance, b: float) -> tuple[ProbeSchedule, CompletionReport]:
    """b-scaling on one machine with release dates.

    Events at equal times are handled as: probe end, then releases, then the
    next decision.
    """
    _check_b(b)
    if instance.machines != 1:
        raise InstanceError("single machine only")
    jobs = instance.jobs
    finish_round = {j.index: ceil_log(j.smith, b) for j in jobs}
    pending = sorted(jobs, key=lambda j: (j.r, j.index))
    rank: dict[int, float] = {}
    blocks: list[AnalyticBlock] = []
    segs: list[Segment] = []
    comp: dict[int, float] = {}
    t = 0.0
    while pending or rank:
        while pending and _close(pending[0].r, t):
            rank[pending.pop(0).index] = -INF
        if not rank:
            t = pending[0].r
            continue
        fresh = sorted(j for j, q in rank.items() if q == -INF)
        if fresh:
            t = _catch_up(jobs, b, fresh, rank, finish_round, t,
                          pending[0].r if pending else INF, blocks, segs)
            continue
        j = min(rank, key=lambda k: (rank[k], k))
        job = jobs[j - 1]
        budget = job.w * b ** rank[j]
        done = covers(budget, job.p)
        dur = job.p if done else budget
        segs.append(Segment(0, t, j, budget, dur, done))
        t += dur
        if done:
            comp[j] = t
            del rank[j]
        else:
            rank[j] += 1
    sched = ProbeSchedule(tuple(blocks), tuple(segs))
    return sched, CompletionReport(comp, objective_of(instance, comp))


def _catch_up(jobs, b, fresh, rank, finish_round, t, next_release, blocks, segs) -> float:
    """Advance fresh jobs through the rounds below the lowest finite rank.

    Stops early at the probe running when the next release occurs. Returns
    the new time.
    """
    finite = [q for q in rank.values() if q != -INF]
    target = min(finite + [finish_round[j] for j in fresh])
    W = math.fsum(jobs[j - 1].w for j in fresh)
    end = t + b ** target / (b - 1) * W
    if not next_release < end - 1e-10 * end:
        blocks.append(AnalyticBlock(0, t, end, {
            j: jobs[j - 1].w * b ** target / (b - 1) for j in fresh}))
        for j in fresh:
            rank[j] = target
        return end
    # the release falls inside round q: largest q whose round starts before it
    tol = 1e-10 * next_release
    x = (next_release - t) * (b - 1) / W
    q = min(floor_log(x, b), target - 1)
    while t + b ** q / (b - 1) * W >= next_release - tol and q > -1075:
        q -= 1
    start = t + b ** q / (b - 1) * W
    blocks.append(AnalyticBlock(0, t, start, {
        j: jobs[j - 1].w * b ** q / (b - 1) for j in fresh}))
    clock = start
    for pos, j in enumerate(fresh):
        budget = jobs[j - 1].w * b ** q
        segs.append(Segment(0, clock, j, budget, budget, False))
        clock += budget
        rank[j] = q + 1
        if clock >= next_release - tol:
            for k in fresh[pos + 1:]:
                rank[k] = q
            break
    return clock


@dataclass(frozen=True)
class TransformedPair:
    """An instance together with its rounded counterpart.

    ``replay`` is the original probe sequence run on the rounded instance,
    shifted only where longer completing probes force it.
    """

    original: Instance
    rounded: Instance
    replay: ProbeSchedule


def transform_round_smith(instance: Instance, b: float) -> TransformedPair:
    """Round Smith ratios up to powers of ``b`` and delay releases to probe ends.

    Each rounded job gets ``p' = w * b**ceil(log_b(p / w))``. A job released
    while the probe ``pi`` was running (``pi`` being the last probe started
    before the release) is released in the rounded instance when the
    replayed copy of ``pi`` ends, or at its own release date if that is
    later.
    """
    _check_b(b)
    sched, _ = simulate_bscaling_release(instance, b)
    items = sorted([(blk.start, 0, blk) for blk in sched.blocks]
                   + [(s.start, 1, s) for s in sched.segments], key=lambda x: (x[0], x[1]))
    new_start = []
    clock = 0.0
    new_blocks, new_segs = [], []
    for start, kind, item in items:
        s2 = max(clock, start)
        if kind == 0:
            dur = item.end - item.start
            new_blocks.append(AnalyticBlock(item.machine, s2, s2 + dur, dict(item.elapsed)))
        else:
            # a completing probe now lasts its whole budget
            dur = item.budget
            new_segs.append(Segment(item.machine, s2, item.job, item.budget, dur, item.completed))
        new_start.append((start, s2 + dur))
        clock = s2 + dur
    jobs = []
    for job in instance.jobs:
        p2 = job.w * b ** ceil_log(job.smith, b)
        r2 = job.r
        if job.r > 0:
            before = [end2 for start, end2 in new_start if start < job.r]
            if before:
                r2 = max(job.r, before[-1])
        jobs.append(Job(job.index, p2, job.w, r2))
    rounded = validate(jobs, instance.machines)
    return TransformedPair(instance, rounded, ProbeSchedule(tuple(new_blocks), tuple(new_segs)))


def _is_power(x: float, b: float) -> bool:
    return ceil_log(x, b) == floor_log(x, b)


def round_parallel(instance: Instance, b: float) -> Instance:
    """Round processing times up to powers of ``b`` (unit weights)."""
    _check_b(b)
    return validate([(b ** ceil_log(j.p, b), j.w, j.r) for j in instance.jobs], instance.machines)


def inflate(rounded: Instance, b: float, mode: Literal["single", "parallel"] = "single",
            nonpreempted: frozenset[int] | None = None) -> Instance:
    """Inflate a rounded instance to the comparison instance.

    ``single``: ``p'' = b/(b-1) * p'``. ``parallel``: a job of size ``b**q``
    becomes ``sum_{i<=q} b**i``, except that jobs above the largest round of
    an aborted job only get the rounds up to that round plus their own
    length. The non-aborted jobs are taken from a parallel run unless given.
    """
    _check_b(b)
    for j in rounded.jobs:
        if not _is_power(j.smith, b):
            raise ValueError("input must have power-of-b Smith ratios")
    if mode == "single":
        return validate([(b / (b - 1) * j.p, j.w, j.r) for j in rounded.jobs], rounded.machines)
    if mode != "parallel":
        raise ValueError("mode must be 'single' or 'parallel'")
    if nonpreempted is None:
        sched, _ = simulate_bscaling_parallel(rounded, b)
        nonpreempted = sched.nonpreempted
    q = {j.index: ceil_log(j.p, b) for j in rounded.jobs}
    aborted = [q[j] for j in q if j not in nonpreempted]
    q_max = max(aborted) if aborted else None
    out = []
    for j in rounded.jobs:
        if q_max is None:
            p2 = j.p
        elif q[j.index] <= q_max:
            p2 = b ** (q[j.index] + 1) / (b - 1)
        else:
            p2 = b ** (q_max + 1) / (b - 1) + j.p
        out.append((p2, j.w, j.r))
    return validate(out, rounded.machines)


def _prefix_loads(n: int, m: int, b: float, q0: int):
    """Machine loads and per-job time from all rounds below ``q0``.

    Position ``n*q + k`` of the probe sequence lands on machine
    ``(n*q + k) mod m``; the pattern repeats every ``m / gcd(n, m)`` rounds,
    so each load is a finite sum times a geometric factor.
    """
    period = m // math.gcd(n, m)
    factor = 1 / (1 - b ** (-period))
    loads = [0.0] * m
    per_job = [dict() for _ in range(m)]
    for d in range(1, period + 1):
        q = q0 - d
        amount = b ** q * factor
        for k in range(n):
            i = (n * q + k) % m
            loads[i] += amount
            per_job[i][k + 1] = per_job[i].get(k + 1, 0.0) + amount
    return loads, per_job


def simulate_bscaling_parallel(instance: Instance, b: float,
                               m: int | None = None) -> tuple[ProbeSchedule, CompletionReport]:
    """b-scaling list scheduled on identical machines (unit weights, no releases)."""
    _check_b(b)
    m = instance.machines if m is None else m
    if m < 1:
        raise InstanceError("machine count must be a positive integer")
    if not instance.unit_weights or instance.has_release_dates:
        raise InstanceError("parallel b-scaling needs unit weights and no release dates")
    jobs = instance.jobs
    n = instance.n
    if n <= m:
        segs = tuple(Segment(j.index - 1, 0.0, j.index, INF, j.p, True) for j in jobs)
        comp = {j.index: j.p for j in jobs}
        sched = ProbeSchedule((), segs, m, frozenset(comp))
        return sched, CompletionReport(comp, objective_of(instance, comp))

    q0 = min(ceil_log(j.p, b) for j in jobs) - 1
    while any(covers(b ** q0, j.p) for j in jobs):
        q0 -= 1
    loads, per_job = _prefix_loads(n, m, b, q0)
    blocks = tuple(AnalyticBlock(i, 0.0, loads[i], per_job[i]) for i in range(m))

    free_at = list(loads)
    running: list[tuple | None] = [None] * m
    busy: set[int] = set()
    alive = set(range(1, n + 1))
    seq = [q0, 0]                      # round and position in the index order
    noabort = False
    nonpreempted: frozenset[int] = frozenset()
    segs: list[Segment] = []
    comp: dict[int, float] = {}

    def next_probe():
        while True:
            if seq[1] == n:
                seq[0] += 1
                seq[1] = 0
            j = seq[1] + 1
            seq[1] += 1
            if j in alive:
                return seq[0], j

    while True:
        t = min(free_at)
        if t == INF:
            break
        now = [i for i in range(m) if free_at[i] <= t + 1e-12 * t]
        for i in now:
            if running[i] is None:
                continue
            j, start, budget, done = running[i]
            job = jobs[j - 1]
            segs.append(Segment(i, start, j, budget, job.p if done else budget, done))
            running[i] = None
            busy.discard(j)
            if done:
                comp[j] = free_at[i]
                alive.discard(j)
        if not noabort and len(alive) <= m:
            noabort = True
            nonpreempted = frozenset(alive)
            for i in range(m):
                if running[i] is not None and i not in now:
                    j, start, budget, done = running[i]
                    running[i] = (j, start, INF, True)
                    free_at[i] = start + jobs[j - 1].p
        for i in now:
            if noabort:
                # remaining jobs in the order they would be probed next
                waiting = sorted(alive - busy, key=lambda j: (j <= seq[1], j))
                if not waiting:
                    free_at[i] = INF
                    continue
                j = waiting[0]
                budget, done = INF, True
            else:
                q, j = next_probe()
                if j in busy:
                    raise RuntimeError("a job was probed on two machines at once")
                budget = b ** q
                done = covers(budget, jobs[j - 1].p)
            running[i] = (j, t, budget, done)
            busy.add(j)
            free_at[i] = t + (jobs[j - 1].p if done else budget)
    sched = ProbeSchedule(blocks, tuple(sorted(segs, key=lambda s: (s.start, s.machine))),
                          m, nonpreempted)
    return sched, CompletionReport(comp, objective_of(instance, comp))


def release_chain(instance: Instance, b: float) -> dict[str, float]:
    """The four quantities compared when bounding b-scaling with release dates.

    Returns the strategy's cost on the instance, on its rounded version, the
    WSETF cost of the inflated version and twice the weighted PWSPT mean busy
    time of the inflated version; each should not exceed the next.
    """
    _, rep = simulate_bscaling_release(instance, b)
    pair = transform_round_smith(instance, b)
    _, rep2 = simulate_bscaling_release(pair.rounded, b)
    inflated = inflate(pair.rounded, b, "single")
    wc = wsetf(inflated).report(inflated).objective
    M = mean_busy_times(pwspt(inflated), inflated)
    busy = 2 * math.fsum(inflated.job(j).w * v for j, v in M.items())
    return {"alg": rep.objective, "alg_rounded": rep2.objective,
            "wsetf_inflated": wc, "busy_bound": busy}


def parallel_chain(instance: Instance, b: float) -> dict[str, float]:
    """Costs along the parallel argument: the strategy, its rounded run and
    round robin on the inflated instance plus the non-aborted lengths."""
    _, rep = simulate_bscaling_parallel(instance, b)
    rounded = round_parallel(instance, b)
    sched2, rep2 = simulate_bscaling_parallel(rounded, b)
    inflated = inflate(rounded, b, "parallel", sched2.nonpreempted)
    rr = rr_parallel(inflated).report(inflated).objective
    extra = math.fsum(j.p for j in rounded.jobs if j.index not in sched2.nonpreempted)
    return {"alg": rep.objective, "alg_rounded": rep2.objective,
            "rr_inflated_plus": rr + extra}
