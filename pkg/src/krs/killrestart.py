"""Geometric kill-and-restart strategies on a single machine.

A b-scaling strategy works in rounds. In round ``q`` every unfinished job is
probed, in a fixed order, with budget ``w_j * b**(q + xi)``. A probe whose
budget covers the processing time completes the job; otherwise the job is
killed when the budget runs out and loses all progress. Rounds go back to
minus infinity; the infinitely many failing early rounds are charged as one
analytic prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    EDGE,
    CompletionReport,
    GroupedInstance,
    Instance,
    InstanceError,
    ceil_log,
    floor_log,
    objective_of,
)

__all__ = [
    "Segment",
    "AnalyticBlock",
    "ProbeSchedule",
    "ProbeSequence",
    "RandomSpec",
    "covers",
    "simulate_bscaling",
    "recompute_objective",
    "delta_matrix",
    "delta_pairs",
    "overestimator_F",
    "upper_U",
    "det_cost_grouped",
    "f_alpha",
    "f_alpha_prime",
    "f_alpha_second",
    "expected_cost_exact",
    "expected_cost_grouped",
    "bscaling_completions_batch",
    "expected_cost_mc",
    "splitmix64",
]

INF = math.inf


class Segment(NamedTuple):
    """One probe: ``job`` runs on ``machine`` from ``start`` for ``duration``."""

    machine: int
    start: float
    job: int
    budget: float
    duration: float
    completed: bool

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class AnalyticBlock:
    """Infinitely many failing probes packed into ``[start, end)``."""

    machine: int
    start: float
    end: float
    elapsed: dict[int, float]


@dataclass(frozen=True)
class ProbeSchedule:
    blocks: tuple[AnalyticBlock, ...]
    segments: tuple[Segment, ...]
    machines: int = 1
    # jobs whose final probe was not allowed to be aborted
    nonpreempted: frozenset[int] = field(default_factory=frozenset)

    @property
    def prefix_time(self) -> float:
        return math.fsum(b.end - b.start for b in self.blocks)

    @property
    def prefix_elapsed(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for blk in self.blocks:
            for j, v in blk.elapsed.items():
                out[j] = out.get(j, 0.0) + v
        return out

    def completions(self) -> dict[int, float]:
        return {s.job: s.end for s in self.segments if s.completed}


def covers(budget: float, p: float) -> bool:
    """True iff a probe with this budget completes a job of length ``p``."""
    return budget >= p * (1 - EDGE)


def _check_b(b: float):
    if not (b > 1 and math.isfinite(b)):
        raise ValueError("b must be a finite number greater than 1")


def _check_order(order, n) -> list[int]:
    if order is None:
        return list(range(1, n + 1))
    order = [int(j) for j in order]
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError("order must be a permutation of the job indices")
    return order


def _check_plain(instance: Instance):
    if instance.machines != 1 or instance.has_release_dates:
        raise InstanceError("release dates or several machines: use extensions module")


def simulate_bscaling(instance: Instance, b: float, order: Sequence[int] | None = None,
                      xi: float = 0.0) -> tuple[ProbeSchedule, CompletionReport]:
    """Run the b-scaling strategy with probing order ``order`` and offset ``xi``.

    ``order`` lists job indices in the order they are probed within a round.
    The rounds below the first explicit round ``q0`` are charged analytically:
    ``q0`` is the largest integer round in which every probe still fails.
    """
    _check_b(b)
    _check_plain(instance)
    if not 0 <= xi < 1:
        raise ValueError("xi must lie in [0, 1)")
    order = _check_order(order, instance.n)
    jobs = instance.jobs
    q0 = min(ceil_log(j.smith / b ** xi, b) for j in jobs) - 1
    while any(covers(j.w * b ** (q0 + xi), j.p) for j in jobs):
        q0 -= 1
    scale = b ** (q0 + xi) / (b - 1)
    elapsed = {j.index: j.w * scale for j in jobs}
    t = math.fsum(elapsed.values())
    blocks = (AnalyticBlock(0, 0.0, t, elapsed),)

    segs = []
    comp = {}
    alive = list(order)
    q = q0
    while alive:
        left = []
        for j in alive:
            job = jobs[j - 1]
            budget = job.w * b ** (q + xi)
            done = covers(budget, job.p)
            dur = job.p if done else budget
            segs.append(Segment(0, t, j, budget, dur, done))
            t += dur
            if done:
                comp[j] = t
            else:
                left.append(j)
        alive = left
        q += 1
    sched = ProbeSchedule(blocks, tuple(segs))
    return sched, CompletionReport(comp, objective_of(instance, comp))


def recompute_objective(instance: Instance, schedule: ProbeSchedule) -> float:
    """Rebuild completion times from the probe list and return the objective.

    Durations are recomputed from budgets and processing times and probes are
    replayed in start order with one clock per machine. Overlaps on a machine,
    probes before release, a job on two machines at once and probes of
    finished jobs are rejected.
    """
    items = [(blk.start, 0, blk) for blk in schedule.blocks]
    items += [(s.start, 1, s) for s in schedule.segments]
    items.sort(key=lambda x: (x[0], x[1]))
    clock: dict[int, float] = {}
    job_free: dict[int, float] = {}
    comp: dict[int, float] = {}
    for start, kind, item in items:
        tol = 1e-9 * abs(start)
        now = clock.get(item.machine, 0.0)
        if start < now - tol:
            raise AssertionError("overlapping probes")
        begin = max(now, start)
        if kind == 0:
            clock[item.machine] = begin + (item.end - item.start)
            continue
        job = instance.job(item.job)
        if start < job.r - tol:
            raise AssertionError("probe before release")
        if job.index in comp:
            raise AssertionError("probe of a finished job")
        if begin < job_free.get(job.index, 0.0) - tol:
            raise AssertionError("job probed on two machines at once")
        done = covers(item.budget, job.p)
        end = begin + (job.p if done else item.budget)
        clock[item.machine] = job_free[job.index] = end
        if done:
            comp[job.index] = end
    if len(comp) != instance.n:
        raise AssertionError("not every job completes")
    return objective_of(instance, comp)


def delta_matrix(instance: Instance, schedule: ProbeSchedule,
                 report: CompletionReport) -> np.ndarray:
    """``D[j-1, k-1]``: time spent on job ``j`` before job ``k`` completes."""
    n = instance.n
    D = np.zeros((n, n))
    pre = schedule.prefix_elapsed
    ends = {k: report.completions[k] for k in range(1, n + 1)}
    for j in range(1, n + 1):
        D[j - 1, :] = pre.get(j, 0.0)
    for s in schedule.segments:
        for k, c in ends.items():
            if s.end <= c * (1 + EDGE):
                D[s.job - 1, k - 1] += s.duration
    return D


def delta_pairs(instance: Instance, D: np.ndarray) -> np.ndarray:
    """Upper triangular pair costs; their sum is the objective."""
    w = instance.w
    M = w[None, :] * D
    pair = M + M.T
    out = np.triu(pair, 1)
    out[np.diag_indices_from(out)] = np.diag(M)
    return out


def overestimator_F(s: float, s2: float, b: float) -> float:
    """Upper bound on the normalized pair cost of jobs with Smith ratios s <= s2."""
    _check_b(b)
    if s > s2:
        raise ValueError("requires s <= s2")
    k = floor_log(s, b)
    if k == floor_log(s2, b):
        return 2 * b ** (k + 1) / (b - 1) + s2
    return b ** (k + 1) * (2 / (b - 1) + 1) + s


def upper_U(instance: Instance, b: float) -> float:
    jobs = instance.jobs
    total = []
    for i, a in enumerate(jobs):
        for c in jobs[i:]:
            lo, hi = sorted((a.smith, c.smith))
            total.append(a.w * c.w * overestimator_F(lo, hi, b))
    return math.fsum(total)


def _completion_round(grouped: GroupedInstance, c, b: float) -> int:
    # eps == 0 stands for the limit eps -> 0+, so an exact power finishes a round later
    if c.eps == 0:
        return math.floor(c.e + EDGE) + 1
    return ceil_log(grouped.size(c), b)


def det_cost_grouped(grouped: GroupedInstance, b: float | None = None) -> float:
    """Cost of the deterministic strategy on a grouped unit weight instance.

    Jobs are probed largest first within a round, so a failing probe of a
    larger job always precedes the completing probe of a smaller one.
    ``eps == 0`` is read as the limit of a vanishing positive offset.
    """
    b = grouped.base if b is None else b
    _check_b(b)
    if any(c.w != 1.0 for c in grouped.classes):
        raise InstanceError("grouped costs need unit weights")
    cls = sorted(grouped.classes, key=grouped.size)
    rounds = np.array([_completion_round(grouped, c, b) for c in cls], dtype=float)
    sizes = np.array([grouped.size(c) for c in cls])
    n = np.array([float(c.n) for c in cls])
    lead = b ** rounds
    total = float(np.sum(n * (lead / (b - 1) + sizes)))
    total += float(np.sum(n * (n - 1) / 2 * (2 * lead / (b - 1) + sizes)))
    for i in range(len(cls) - 1):
        k = slice(i + 1, None)
        same = rounds[k] == rounds[i]
        pair = np.where(same, 2 * lead[i] / (b - 1) + sizes[k],
                        2 * lead[i] / (b - 1) + lead[i] + sizes[i])
        total += n[i] * float(np.dot(n[k], pair))
    return total


def f_alpha(alpha: float, b: float) -> float:
    """Normalized expected pair cost of two unit jobs at Smith ratio distance alpha."""
    _check_b(b)
    if not (1 - EDGE) <= alpha <= b * (1 + EDGE):
        raise ValueError("alpha must lie in [1, b]")
    lb = math.log(b)
    return (1 + alpha) / 2 + 2 / lb + (alpha - 1) * (1 - math.log(alpha)) / (2 * lb)


def f_alpha_prime(alpha: float, b: float) -> float:
    lb = math.log(b)
    return (1 - alpha * math.log(alpha / b)) / (2 * alpha * lb)


def f_alpha_second(alpha: float, b: float) -> float:
    return -(alpha + 1) / (2 * alpha ** 2 * math.log(b))


def _f_vec(alpha: np.ndarray, b: float) -> np.ndarray:
    lb = math.log(b)
    return (1 + alpha) / 2 + 2 / lb + (alpha - 1) * (1 - np.log(alpha)) / (2 * lb)


def expected_cost_exact(instance: Instance, b: float) -> float:
    """Expected cost of the randomized strategy (uniform order, uniform offset)."""
    _check_b(b)
    _check_plain(instance)
    s = instance.p / instance.w
    w = instance.w
    lb = math.log(b)
    diag = float(np.sum(w * w * s) * (1 + 1 / lb))
    lo = np.minimum.outer(s, s)
    ratio = np.minimum(b, np.maximum.outer(s, s) / lo)
    pair = np.outer(w, w) * lo * _f_vec(ratio, b)
    off = (float(np.sum(pair)) - float(np.trace(pair))) / 2
    return diag + off


def expected_cost_grouped(grouped: GroupedInstance, b: float | None = None) -> float:
    """Expected cost of the randomized strategy on a grouped unit weight instance."""
    b = grouped.base if b is None else b
    _check_b(b)
    if any(c.w != 1.0 for c in grouped.classes):
        raise InstanceError("grouped costs need unit weights")
    lb = math.log(b)
    f1 = 1 + 2 / lb
    cls = sorted(grouped.classes, key=grouped.size)
    sizes = [grouped.size(c) for c in cls]
    n = [float(c.n) for c in cls]
    total = 0.0
    for k in range(len(cls)):
        total += n[k] * (n[k] + 1) / 2 * sizes[k] * f1 - n[k] * sizes[k] / lb
    for k in range(len(cls)):
        ratios = np.minimum(b, np.array(sizes[k + 1:]) / sizes[k])
        if len(ratios):
            total += n[k] * sizes[k] * float(np.dot(n[k + 1:], _f_vec(ratios, b)))
    return total


@dataclass(frozen=True)
class RandomSpec:
    seed: int
    trials: int


_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 mixer, used to derive generator seeds."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def bscaling_completions_batch(instance: Instance, b: float, orders: np.ndarray,
                               xis: np.ndarray) -> np.ndarray:
    """Completion times of many b-scaling runs at once.

    ``orders`` has one row per run listing job indices (1-based) in probing
    order; ``xis`` holds the offsets. Returns an array of shape (runs, n).
    """
    _check_b(b)
    _check_plain(instance)
    p, w = instance.p, instance.w
    s = p / w
    n = instance.n
    orders = np.asarray(orders, dtype=int)
    xis = np.asarray(xis, dtype=float)
    runs = orders.shape[0]
    pos = np.empty_like(orders)
    pos[np.arange(runs)[:, None], orders - 1] = np.arange(n)[None, :]
    x = np.log(s)[None, :] / math.log(b) - xis[:, None]
    q = np.ceil(x - 1e-12 * np.maximum(1.0, np.abs(x)))
    scale = b ** (q + xis[:, None])                      # completing budget per weight
    own = w[None, :] * scale / (b - 1) + p[None, :]      # job's own share

    qj = q[:, :, None]
    qk = q[:, None, :]
    wk = w[None, None, :]
    pk = p[None, None, :]
    finished = wk * b ** (qk + xis[:, None, None]) / (b - 1) + pk
    failing = wk * scale[:, :, None] / (b - 1)
    before = pos[:, None, :] < pos[:, :, None]
    in_round = np.where(qk == qj, pk, wk * scale[:, :, None]) * before
    contrib = np.where(qk < qj, finished, failing + in_round)
    idx = np.arange(n)
    contrib[:, idx, idx] = own
    return contrib.sum(axis=2)


def expected_cost_mc(instance: Instance, b: float, spec: RandomSpec,
                     chunk: int = 2048) -> tuple[float, float]:
    """Monte Carlo estimate of the randomized strategy's cost.

    Uses numpy's PCG64 generator seeded with ``splitmix64(seed)``; orders are
    uniform permutations (Fisher-Yates shuffles) and offsets are uniform on
    [0, 1). Returns the sample mean and its standard error.
    """
    if spec.trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.Generator(np.random.PCG64(splitmix64(spec.seed)))
    n = instance.n
    vals = []
    left = spec.trials
    while left:
        m = min(chunk, left)
        left -= m
        orders = rng.permuted(np.tile(np.arange(1, n + 1), (m, 1)), axis=1)
        xis = rng.random(m)
        comp = bscaling_completions_batch(instance, b, orders, xis)
        vals.append(comp @ instance.w)
    vals = np.concatenate(vals)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), se


class ProbeSequence:
    """Incremental probe order of the b-scaling strategy.

    Starts at round ``start_round`` and yields ``(job, budget)`` pairs among
    the jobs reported as unfinished. Rounds below ``start_round`` are meant
    to be charged as an analytic prefix by the caller.
    """

    def __init__(self, weights: Sequence[float], b: float, start_round: int,
                 order: Sequence[int] | None = None, xi: float = 0.0):
        _check_b(b)
        self.weights = list(weights)
        self.b = b
        self.xi = xi
        self.order = _check_order(order, len(self.weights))
        self.round = start_round
        self._pos = 0

    def prefix_elapsed(self) -> dict[int, float]:
        scale = self.b ** (self.round + self.xi) / (self.b - 1)
        return {j: self.weights[j - 1] * scale for j in self.order}

    def next(self, unfinished) -> tuple[int, float] | None:
        if not unfinished:
            return None
        while True:
            if self._pos == len(self.order):
                self._pos = 0
                self.round += 1
            j = self.order[self._pos]
            self._pos += 1
            if j in unfinished:
                return j, self.weights[j - 1] * self.b ** (self.round + self.xi)
