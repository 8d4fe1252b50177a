"""Instances, grouped instances and exact clairvoyant baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "REL_TOL",
    "VALUE_RANGE",
    "InstanceError",
    "BaselineUndefinedError",
    "Job",
    "Instance",
    "GroupClass",
    "GroupedInstance",
    "CompletionReport",
    "validate",
    "make_instance",
    "wspt_order",
    "wspt_opt",
    "spt_list_parallel_opt",
    "grouped_opt",
    "scale_instance",
    "expand_grouped",
    "ceil_log",
    "floor_log",
    "objective_of",
]

REL_TOL = 1e-9
# boundary guard for "budget covers the processing time"
EDGE = 1e-12
# positive data outside this range would push round budgets b**q into
# underflow or overflow
VALUE_RANGE = (1e-100, 1e100)


class InstanceError(ValueError):
    """Raised for malformed job data."""


class BaselineUndefinedError(ValueError):
    """Raised when an exact baseline is not available for an instance."""


@dataclass(frozen=True)
class Job:
    index: int
    p: float
    w: float = 1.0
    r: float = 0.0

    @property
    def smith(self) -> float:
        return self.p / self.w


@dataclass(frozen=True)
class Instance:
    """A set of jobs on identical machines. Jobs are indexed 1..n."""

    jobs: tuple[Job, ...]
    machines: int = 1

    def __post_init__(self):
        if not isinstance(self.machines, (int, np.integer)) or self.machines < 1:
            raise InstanceError("machine count must be a positive integer")
        for pos, job in enumerate(self.jobs, start=1):
            if job.index != pos:
                raise InstanceError("jobs must be indexed 1..n in order")
            _check_job(job.p, job.w, job.r)

    @property
    def n(self) -> int:
        return len(self.jobs)

    @cached_property
    def p(self) -> np.ndarray:
        return np.array([j.p for j in self.jobs], dtype=float)

    @cached_property
    def w(self) -> np.ndarray:
        return np.array([j.w for j in self.jobs], dtype=float)

    @cached_property
    def r(self) -> np.ndarray:
        return np.array([j.r for j in self.jobs], dtype=float)

    @property
    def has_release_dates(self) -> bool:
        return any(j.r > 0 for j in self.jobs)

    @property
    def unit_weights(self) -> bool:
        return all(j.w == 1.0 for j in self.jobs)

    def job(self, index: int) -> Job:
        if not 1 <= index <= self.n:
            raise KeyError(f"unknown job {index}")
        return self.jobs[index - 1]


def _check_job(p, w, r):
    for name, v in (("processing time", p), ("weight", w), ("release date", r)):
        if not math.isfinite(v):
            raise InstanceError(f"non-finite {name}")
    if p <= 0:
        raise InstanceError("nonpositive processing time")
    if w <= 0:
        raise InstanceError("nonpositive weight")
    if r < 0:
        raise InstanceError("negative release date")
    lo, hi = VALUE_RANGE
    for name, v in (("processing time", p), ("weight", w), ("release date", r)):
        if v != 0 and not lo <= v <= hi:
            raise InstanceError(f"{name} {v!r} outside supported range [{lo:g}, {hi:g}]")


def validate(jobs: Iterable, machines: int = 1) -> Instance:
    """Build a normalized instance, re-indexing jobs 1..n in the given order.

    Each entry may be a ``Job``, a mapping with keys ``p``, ``w``, ``r`` or a
    tuple ``(p, w, r)`` with ``w`` and ``r`` optional.
    """
    out = []
    for pos, raw in enumerate(jobs, start=1):
        if isinstance(raw, Job):
            p, w, r = raw.p, raw.w, raw.r
        elif isinstance(raw, Mapping):
            p, w, r = raw["p"], raw.get("w", 1.0), raw.get("r", 0.0)
        else:
            vals = list(raw)
            if not 1 <= len(vals) <= 3:
                raise InstanceError("job tuples are (p, w, r)")
            p, w, r = (vals + [1.0, 0.0][len(vals) - 1:])[:3]
        p, w, r = float(p), float(w), float(r)
        _check_job(p, w, r)
        out.append(Job(pos, p, w, r))
    if not isinstance(machines, (int, np.integer)) or machines < 1:
        raise InstanceError("machine count must be a positive integer")
    return Instance(tuple(out), int(machines))


def make_instance(p: Sequence[float], w: Sequence[float] | None = None,
                  r: Sequence[float] | None = None, machines: int = 1) -> Instance:
    n = len(p)
    w = [1.0] * n if w is None else list(w)
    r = [0.0] * n if r is None else list(r)
    if len(w) != n or len(r) != n:
        raise InstanceError("p, w and r must have equal length")
    return validate(zip(p, w, r), machines)


@dataclass(frozen=True)
class CompletionReport:
    completions: dict[int, float]
    objective: float


def objective_of(instance: Instance, completions: Mapping[int, float]) -> float:
    return math.fsum(instance.job(j).w * c for j, c in completions.items())


def wspt_order(instance: Instance) -> list[int]:
    """Job indices sorted by Smith ratio, ties by index."""
    return sorted(range(1, instance.n + 1), key=lambda j: (instance.jobs[j - 1].smith, j))


def wspt_opt(instance: Instance) -> CompletionReport:
    """Optimal weighted completion time for one machine without release dates."""
    if instance.machines != 1 or instance.has_release_dates:
        raise BaselineUndefinedError("baseline undefined; use lower bound")
    t = 0.0
    comp = {}
    for j in wspt_order(instance):
        t += instance.jobs[j - 1].p
        comp[j] = t
    return CompletionReport(comp, objective_of(instance, comp))


def spt_list_parallel_opt(instance: Instance) -> CompletionReport:
    """SPT list scheduling on identical machines, optimal for unit weights."""
    if not instance.unit_weights:
        raise BaselineUndefinedError("optimality not guaranteed")
    if instance.has_release_dates:
        raise BaselineUndefinedError("baseline undefined; use lower bound")
    loads = [0.0] * instance.machines
    comp = {}
    for j in sorted(range(1, instance.n + 1), key=lambda j: (instance.jobs[j - 1].p, j)):
        m = min(range(len(loads)), key=loads.__getitem__)
        loads[m] += instance.jobs[j - 1].p
        comp[j] = loads[m]
    return CompletionReport(comp, objective_of(instance, comp))


def scale_instance(instance: Instance, alpha: float) -> Instance:
    """Multiply all processing times by ``alpha``."""
    if not alpha > 0:
        raise InstanceError("scale factor must be positive")
    return Instance(tuple(Job(j.index, j.p * alpha, j.w, j.r) for j in instance.jobs),
                    instance.machines)


@dataclass(frozen=True)
class GroupClass:
    """``n`` identical jobs of size ``base**e + eps`` and weight ``w``."""

    e: float
    n: int
    eps: float = 0.0
    w: float = 1.0


@dataclass(frozen=True)
class GroupedInstance:
    """Jobs grouped into classes of identical sizes.

    Counts are arbitrary precision integers. Empty classes are dropped and
    the exponents must be strictly increasing.
    """

    base: float
    classes: tuple[GroupClass, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.base > 1:
            raise InstanceError("base must exceed 1")
        kept = []
        for c in self.classes:
            if int(c.n) != c.n or c.n < 0:
                raise InstanceError("class counts must be nonnegative integers")
            if c.eps < 0 or not c.w > 0:
                raise InstanceError("invalid class parameters")
            if c.n > 0:
                kept.append(GroupClass(c.e, int(c.n), float(c.eps), float(c.w)))
        for a, b in zip(kept, kept[1:]):
            if not b.e > a.e:
                raise InstanceError("class exponents must be strictly increasing")
        object.__setattr__(self, "classes", tuple(kept))

    def size(self, c: GroupClass) -> float:
        return self.base ** c.e + c.eps

    @property
    def total_jobs(self) -> int:
        return sum(c.n for c in self.classes)


def grouped_opt(grouped: GroupedInstance) -> float:
    """WSPT objective of a grouped instance in closed form."""
    cls = sorted(grouped.classes, key=lambda c: grouped.size(c) / c.w)
    total = 0.0
    later_weight = sum(c.n * c.w for c in cls)
    for c in cls:
        n, p, w = float(c.n), grouped.size(c), c.w
        later_weight -= n * w
        total += p * w * n * (n + 1) / 2 + n * p * later_weight
    return total


def expand_grouped(grouped: GroupedInstance, descending: bool = True) -> Instance:
    """Materialize a grouped instance, largest jobs first by default."""
    if grouped.total_jobs > 10**6:
        raise InstanceError("too many jobs to expand")
    jobs = []
    cls = reversed(grouped.classes) if descending else grouped.classes
    for c in cls:
        jobs.extend([(grouped.size(c), c.w, 0.0)] * c.n)
    return validate(jobs)


def ceil_log(x: float, b: float) -> int:
    """Smallest integer q with b**q >= x, treating near-equality as equality."""
    q = math.ceil(math.log(x) / math.log(b))
    while b ** (q - 1) >= x * (1 - EDGE):
        q -= 1
    while b ** q < x * (1 - EDGE):
        q += 1
    return q


def floor_log(x: float, b: float) -> int:
    """Largest integer k with b**k <= x, treating near-equality as equality."""
    k = math.floor(math.log(x) / math.log(b))
    while b ** (k + 1) <= x * (1 + EDGE):
        k += 1
    while b ** k > x * (1 + EDGE):
        k -= 1
    return k
