"""Preemptive single machine and parallel schedules with release dates.

All schedules are piecewise constant rate profiles: between consecutive
breakpoints every job is processed at a fixed rate.
"""

from __future__ import annotations

from dataclasses import dataclass


from .core import CompletionReport, Instance, InstanceError, objective_of

__all__ = [
    "RateSchedule",
    "wsetf",
    "pwspt",
    "rr_parallel",
    "elapsed",
    "eta",
    "mean_busy_times",
    "mean_busy_times_by_integration",
    "busy_intervals",
    "integral_eta_over",
    "recompute_rate_objective",
]


@dataclass(frozen=True)
class RateSchedule:
    breakpoints: tuple[float, ...]
    rates: tuple[dict[int, float], ...]
    completions: dict[int, float]

    def report(self, instance: Instance) -> CompletionReport:
        return CompletionReport(dict(self.completions), objective_of(instance, self.completions))

    def intervals(self):
        for a, b, rate in zip(self.breakpoints, self.breakpoints[1:], self.rates):
            yield a, b, rate


def _tol(x: float) -> float:
    return 1e-12 * (1 + abs(x))


class _Builder:
    def __init__(self, instance: Instance):
        self.instance = instance
        self.done = [0.0] * instance.n
        self.breaks = [0.0]
        self.rates: list[dict[int, float]] = []
        self.comp: dict[int, float] = {}

    def advance(self, t0: float, t1: float, rate: dict[int, float]):
        if t1 <= t0:
            return
        if self.breaks[-1] != t0:
            self.breaks.append(t0)
            self.rates.append({})
        for j, v in rate.items():
            self.done[j - 1] += v * (t1 - t0)
        if self.rates and self.rates[-1] == rate:
            self.breaks[-1] = t1
        else:
            self.breaks.append(t1)
            self.rates.append(dict(rate))

    def finish(self) -> RateSchedule:
        return RateSchedule(tuple(self.breaks), tuple(self.rates), self.comp)


def _releases(instance: Instance):
    return sorted(instance.jobs, key=lambda j: (j.r, j.index))


def wsetf(instance: Instance) -> RateSchedule:
    """Weighted shortest elapsed time first.

    Among the released unfinished jobs, those with minimum elapsed time per
    unit weight share the machine in proportion to their weights.
    """
    if instance.machines != 1:
        raise InstanceError("single machine only")
    jobs = instance.jobs
    pending = _releases(instance)
    B = _Builder(instance)
    active: list[int] = []
    t = 0.0
    while pending or active:
        while pending and pending[0].r <= t:
            active.append(pending.pop(0).index)
        if not active:
            t = pending[0].r
            continue
        ratio = {j: B.done[j - 1] / jobs[j - 1].w for j in active}
        low = min(ratio.values())
        group = [j for j in active if ratio[j] <= low + _tol(low)]
        others = [ratio[j] for j in active if j not in group]
        W = sum(jobs[j - 1].w for j in group)
        # time until the first member finishes, the group meets the next
        # ratio, or a job arrives
        dt_done = min(W * (jobs[j - 1].smith - low) for j in group)
        dt = dt_done
        if others:
            dt = min(dt, W * (min(others) - low))
        if pending:
            dt = min(dt, pending[0].r - t)
        dt = max(dt, 0.0)
        B.advance(t, t + dt, {j: jobs[j - 1].w / W for j in group})
        t += dt
        level = low + dt / W
        for j in group:
            job = jobs[j - 1]
            if job.smith <= level + _tol(level):
                B.done[j - 1] = job.p
                B.comp[j] = t
                active.remove(j)
            else:
                B.done[j - 1] = job.w * level
        # jobs the group has caught up with join it
        for j in active:
            if j not in group and ratio[j] <= level + _tol(level):
                B.done[j - 1] = jobs[j - 1].w * level
    return B.finish()


def pwspt(instance: Instance) -> RateSchedule:
    """Preemptive WSPT: always run the available job of smallest Smith ratio."""
    if instance.machines != 1:
        raise InstanceError("single machine only")
    jobs = instance.jobs
    pending = _releases(instance)
    B = _Builder(instance)
    active: list[int] = []
    t = 0.0
    while pending or active:
        while pending and pending[0].r <= t:
            active.append(pending.pop(0).index)
        if not active:
            t = pending[0].r
            continue
        j = min(active, key=lambda k: (jobs[k - 1].smith, k))
        left = jobs[j - 1].p - B.done[j - 1]
        dt = left
        if pending:
            dt = min(dt, pending[0].r - t)
        B.advance(t, t + dt, {j: 1.0})
        t += dt
        if dt == left:
            B.done[j - 1] = jobs[j - 1].p
            B.comp[j] = t
            active.remove(j)
    return B.finish()


def _water_fill(weights: dict[int, float], capacity: float) -> dict[int, float]:
    """Share ``capacity`` in proportion to weights, capping each rate at 1."""
    rates = {}
    left = dict(weights)
    cap = capacity
    while left:
        W = sum(left.values())
        capped = [j for j, w in left.items() if cap * w / W >= 1]
        if not capped:
            rates.update({j: cap * w / W for j, w in left.items()})
            break
        for j in capped:
            rates[j] = 1.0
            cap -= 1
            del left[j]
    return rates


def rr_parallel(instance: Instance) -> RateSchedule:
    """Weighted round robin on identical machines.

    The machines are shared among released unfinished jobs in proportion to
    their weights, with no job running faster than one machine. With unit
    weights every job gets rate ``min(1, m / |U|)``.
    """
    jobs = instance.jobs
    m = instance.machines
    pending = _releases(instance)
    B = _Builder(instance)
    active: list[int] = []
    t = 0.0
    while pending or active:
        while pending and pending[0].r <= t:
            active.append(pending.pop(0).index)
        if not active:
            t = pending[0].r
            continue
        rate = _water_fill({j: jobs[j - 1].w for j in active}, m)
        dt = min((jobs[j - 1].p - B.done[j - 1]) / rate[j] for j in active)
        if pending:
            dt = min(dt, pending[0].r - t)
        B.advance(t, t + dt, rate)
        t += dt
        for j in list(active):
            job = jobs[j - 1]
            if job.p - B.done[j - 1] <= 1e-12 * job.p:
                B.done[j - 1] = job.p
                B.comp[j] = t
                active.remove(j)
    return B.finish()


def elapsed(schedule: RateSchedule, job: int, t: float) -> float:
    """Processing time received by ``job`` up to time ``t``."""
    if job not in schedule.completions:
        raise KeyError(f"unknown job {job}")
    total = 0.0
    for a, b, rate in schedule.intervals():
        if a >= t:
            break
        total += rate.get(job, 0.0) * (min(b, t) - a)
    return total


def eta(schedule: RateSchedule, instance: Instance, job: int, t: float) -> float:
    """Fraction of ``job`` processed by time ``t``."""
    return elapsed(schedule, job, t) / instance.job(job).p


def mean_busy_times(schedule: RateSchedule, instance: Instance) -> dict[int, float]:
    """Normalized mean busy time ``(1/p_j) * integral of t * rate_j(t) dt``."""
    acc = {j.index: 0.0 for j in instance.jobs}
    for a, b, rate in schedule.intervals():
        for j, v in rate.items():
            acc[j] += v * (b * b - a * a) / 2
    return {j: acc[j] / instance.job(j).p for j in acc}


def mean_busy_times_by_integration(schedule: RateSchedule, instance: Instance) -> dict[int, float]:
    """Mean busy time as the integral of the unprocessed fraction ``1 - eta``."""
    out = {}
    for job in instance.jobs:
        j, p = job.index, job.p
        y = 0.0
        total = 0.0
        for a, b, rate in schedule.intervals():
            if y >= p:
                break
            v = rate.get(j, 0.0)
            y1 = y + v * (b - a)
            # trapezoid rule is exact for the linear piece
            total += (b - a) * (1 - (y + y1) / (2 * p))
            y = y1
        out[j] = total
    return out


def busy_intervals(schedule: RateSchedule, job: int) -> list[tuple[float, float]]:
    return [(a, b) for a, b, rate in schedule.intervals() if rate.get(job, 0.0) > 0]


def integral_eta_over(schedule: RateSchedule, instance: Instance, j: int, k: int) -> float:
    """Integral of ``eta_j`` over the times at which job ``k`` is processed."""
    p = instance.job(j).p
    y = 0.0
    total = 0.0
    for a, b, rate in schedule.intervals():
        v = rate.get(j, 0.0)
        y1 = y + v * (b - a)
        if rate.get(k, 0.0) > 0:
            total += (b - a) * (y + y1) / (2 * p)
        y = y1
    return total


def recompute_rate_objective(schedule: RateSchedule, instance: Instance) -> float:
    """Objective from completion times rebuilt by integrating the rates."""
    comp = {}
    for job in instance.jobs:
        y = 0.0
        for a, b, rate in schedule.intervals():
            v = rate.get(job.index, 0.0)
            if v > 0 and a < job.r - 1e-9 * (1 + job.r):
                raise AssertionError("processing before release")
            if v > 0 and y + v * (b - a) >= job.p * (1 - 1e-12):
                comp[job.index] = a + (job.p - y) / v
                break
            y += v * (b - a)
        else:
            raise AssertionError(f"job {job.index} never completes")
    for a, b, rate in schedule.intervals():
        if sum(rate.values()) > instance.machines * (1 + 1e-9):
            raise AssertionError("machine capacity exceeded")
    return objective_of(instance, comp)
