"""Adversaries and lower bound instance families for kill-and-restart strategies.

A strategy is exposed to the adversary as an oracle that, given what it has
observed so far, names its next probe. The adversary lets every probe fail
until a deadline ``T`` and then fixes processing times just above the time
already spent, which forces a ratio close to 3 for any deterministic
strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from .core import (
    CompletionReport,
    GroupClass,
    GroupedInstance,
    Instance,
    grouped_opt,
    make_instance,
    wspt_opt,
)
from .killrestart import (
    AnalyticBlock,
    ProbeSequence,
    Segment,
    covers,
    det_cost_grouped,
    expected_cost_grouped,
)
from .spectral import lb_vector, rand_lb_vector

__all__ = [
    "Probing",
    "OracleState",
    "StrategyOracle",
    "BScalingOracle",
    "ForeverOracle",
    "run_oracle",
    "AdversaryOutcome",
    "adversary_deadline",
    "adversary_instance",
    "FamilyOutcome",
    "det_lb_family",
    "rand_lb_family",
]

INF = math.inf
MAX_PROBES = 10_000_000


class Probing(NamedTuple):
    start: float
    job: int
    budget: float


class OracleState(NamedTuple):
    """What a non-clairvoyant strategy may know at a decision point."""

    time: float
    unfinished: frozenset[int]
    history: tuple[Segment, ...]


class StrategyOracle(Protocol):
    def start(self, n: int) -> AnalyticBlock | None:
        """Reset for ``n`` unit weight jobs and return the failing prefix, if any."""

    def next_probe(self, state: OracleState) -> Probing | None:
        ...


class BScalingOracle:
    """The b-scaling strategy as an incremental oracle.

    The rounds whose total length stays below ``prefix_cap`` are returned as
    an analytic prefix; on instances with all processing times at least 1
    these probes fail anyway.
    """

    def __init__(self, b: float, xi: float = 0.0, order: Sequence[int] | None = None,
                 prefix_cap: float = 1.0):
        self.b = b
        self.xi = xi
        self.order = order
        self.prefix_cap = prefix_cap
        self._seq: ProbeSequence | None = None

    def start(self, n: int) -> AnalyticBlock:
        b = self.b
        q = math.floor(math.log(self.prefix_cap * (b - 1) / n, b) - self.xi)
        while n * b ** (q + self.xi) / (b - 1) > self.prefix_cap:
            q -= 1
        self._seq = ProbeSequence([1.0] * n, b, q, self.order, self.xi)
        elapsed = self._seq.prefix_elapsed()
        return AnalyticBlock(0, 0.0, math.fsum(elapsed.values()), elapsed)

    def next_probe(self, state: OracleState) -> Probing | None:
        nxt = self._seq.next(state.unfinished)
        if nxt is None:
            return None
        return Probing(state.time, nxt[0], nxt[1])


class ForeverOracle:
    """Runs the lowest indexed unfinished job to completion."""

    def start(self, n: int) -> None:
        return None

    def next_probe(self, state: OracleState) -> Probing | None:
        if not state.unfinished:
            return None
        return Probing(state.time, min(state.unfinished), INF)


def run_oracle(oracle: StrategyOracle, instance: Instance,
               max_probes: int = MAX_PROBES) -> tuple[tuple[Segment, ...], CompletionReport]:
    """Execute an oracle on a single machine instance without release dates."""
    block = oracle.start(instance.n)
    t = block.end if block is not None else 0.0
    unfinished = set(range(1, instance.n + 1))
    history: list[Segment] = []
    comp = {}
    while unfinished:
        if len(history) >= max_probes:
            raise RuntimeError("probe budget exhausted")
        pr = oracle.next_probe(OracleState(t, frozenset(unfinished), tuple(history)))
        if pr is None:
            raise RuntimeError("oracle stopped with unfinished jobs")
        if pr.job not in unfinished or pr.start < t - 1e-12 * max(1.0, t):
            raise ValueError("infeasible probe")
        job = instance.job(pr.job)
        start = max(t, pr.start)
        done = covers(pr.budget, job.p)
        dur = job.p if done else pr.budget
        history.append(Segment(0, start, pr.job, pr.budget, dur, done))
        t = start + dur
        if done:
            comp[pr.job] = t
            unfinished.discard(pr.job)
    obj = math.fsum(instance.job(j).w * c for j, c in comp.items())
    return tuple(history), CompletionReport(comp, obj)


@dataclass(frozen=True)
class AdversaryOutcome:
    instance: Instance
    strategy_cost: float
    opt_cost: float
    ratio: float
    branch: str
    deadline: float
    history: tuple[Segment, ...]


def adversary_deadline(n: int, eps: float) -> float:
    if not 2 / (n + 1) < eps <= 1:
        raise ValueError("eps must lie in (2/(n+1), 1]")
    return (2 - eps) * (n * n + n) / (eps * (n + 1) - 2)


def adversary_instance(oracle: StrategyOracle, n: int, eps: float = 0.5,
                       max_probes: int = MAX_PROBES) -> AdversaryOutcome:
    """Build an instance on which ``oracle`` pays at least about ``3 - eps`` times OPT.

    Every probe fails until the first probe that starts at or after the
    deadline ``T`` (or has an unbounded budget). If that probe is finite,
    each job gets ``p_j = 1 + Y_j`` with ``Y_j`` its probing time up to the
    end of that probe. Otherwise the other jobs get ``1 + Y_j(T)`` and the
    probed job ten times the optimum of the others.
    """
    T = adversary_deadline(n, eps)
    block = oracle.start(n)
    Y = {j: 0.0 for j in range(1, n + 1)}
    t = 0.0
    if block is not None:
        if block.end >= T:
            raise ValueError("the oracle's prefix reaches the deadline")
        for j, v in block.elapsed.items():
            Y[j] += v
        t = block.end
    history: list[Segment] = []
    everything = frozenset(Y)
    while True:
        if len(history) >= max_probes or t > 1e3 * T:
            raise RuntimeError("probe budget exhausted before the deadline")
        pr = oracle.next_probe(OracleState(t, everything, tuple(history)))
        if pr is None:
            raise RuntimeError("oracle stopped with unfinished jobs")
        if pr.start < t - 1e-12 * max(1.0, t) or pr.job not in Y:
            raise ValueError("infeasible probe")
        start = max(t, pr.start)
        infinite = pr.budget == INF or pr.budget > 1e6 * (1 + math.fsum(Y.values()))
        if start >= T or infinite:
            break
        history.append(Segment(0, start, pr.job, pr.budget, pr.budget, False))
        Y[pr.job] += pr.budget
        t = start + pr.budget
    j0 = pr.job
    if not infinite:
        Y[j0] += pr.budget
        p = [1 + Y[j] for j in range(1, n + 1)]
        branch = "finite"
    else:
        at_T = {j: 0.0 for j in Y}
        if block is not None:
            for j, v in block.elapsed.items():
                at_T[j] += v
        for s in history:
            at_T[s.job] += max(0.0, min(s.duration, T - s.start))
        others = sorted(1 + at_T[j] for j in Y if j != j0)
        opt_others = math.fsum(v * (len(others) - i) for i, v in enumerate(others))
        p = [1 + at_T[j] if j != j0 else 10 * opt_others for j in range(1, n + 1)]
        branch = "infinite"
    inst = make_instance(p)
    _, rep = run_oracle(oracle, inst, max_probes)
    opt = wspt_opt(inst).objective
    return AdversaryOutcome(inst, rep.objective, opt, rep.objective / opt, branch, T, tuple(history))


@dataclass(frozen=True)
class FamilyOutcome:
    grouped: GroupedInstance
    cost: float
    opt: float
    ratio: float


def _counts(x: np.ndarray, t: float | None) -> tuple[list[int], float]:
    pos = x[x > 0]
    if t is None:
        t = 1e6 / float(pos.min())
    return [int(math.floor(t * v)) if v > 0 else 0 for v in x], t


def det_lb_family(b: float, L: int, t: float | None = None, eps: float = 0.0) -> FamilyOutcome:
    """Grouped instance with ``floor(t * x_l)`` jobs of size ``b**l + eps`` (``l = 1..L``).

    ``eps = 0`` means the limit of a vanishing positive offset, where the
    deterministic strategy completes every job one round late. By default
    ``t`` makes the smallest nonzero class hold about a million jobs.
    """
    vec = lb_vector(L, b)
    counts, _ = _counts(vec.x, t)
    if counts[-1] == 0:
        raise ValueError("t too small: the largest class is empty")
    G = GroupedInstance(b, tuple(GroupClass(float(ell), n, eps)
                                 for ell, n in zip(range(1, L + 1), counts)))
    cost, opt = det_cost_grouped(G), grouped_opt(G)
    return FamilyOutcome(G, cost, opt, cost / opt)


def rand_lb_family(b: float, K: int, L: int, t: float | None = None) -> FamilyOutcome:
    """Grouped instance with ``floor(t * x_i)`` unit jobs of size ``b**(i/K)``, ``i = 0..L``."""
    vec = rand_lb_vector(b, K, L)
    counts, _ = _counts(vec.x, t)
    if counts[-1] == 0:
        raise ValueError("t too small: the largest class is empty")
    G = GroupedInstance(b, tuple(GroupClass(i / K, n) for i, n in enumerate(counts)))
    cost, opt = expected_cost_grouped(G), grouped_opt(G)
    return FamilyOutcome(G, cost, opt, cost / opt)
