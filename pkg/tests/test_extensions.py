import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from krs.core import make_instance, spt_list_parallel_opt
from krs.extensions import (inflate, parallel_chain, release_chain, round_parallel,
                            simulate_bscaling_parallel, simulate_bscaling_release,
                            transform_round_smith)
from krs.killrestart import recompute_objective, simulate_bscaling

from conftest import bases, instances, random_instances

B_RELEASE = (9 + math.sqrt(17)) / 8
B_PARALLEL = (3 + math.sqrt(6)) / 3


def test_release_examples():
    _, rep = simulate_bscaling_release(make_instance([1.0], r=[5.0]), 2)
    assert rep.completions[1] == pytest.approx(7.0)
    # job 1 finishes at 2; job 2 arrives at 3 and catches up from scratch
    _, rep = simulate_bscaling_release(make_instance([1.0, 4.0], r=[0.0, 3.0]), 2)
    assert rep.completions == pytest.approx({1: 2.0, 2: 11.0})


def test_release_reduces_to_plain():
    inst = make_instance([1.0, 1.0])
    assert simulate_bscaling_release(inst, 2)[1].completions == \
        pytest.approx(simulate_bscaling(inst, 2)[1].completions)


def test_parallel_examples():
    inst = make_instance([2.0, 5.0, 0.3], machines=3)
    assert simulate_bscaling_parallel(inst, 2)[1].completions == pytest.approx({1: 2, 2: 5, 3: 0.3})
    # the survivor's last probe is never aborted, so job 2 ends at 3 + 3
    sched, rep = simulate_bscaling_parallel(make_instance([1.0, 3.0]), 2)
    assert rep.completions == pytest.approx({1: 3.0, 2: 6.0})
    assert 2 in sched.nonpreempted
    inst = make_instance([1.0] * 4, machines=2)
    rep = simulate_bscaling_parallel(inst, 2)[1]
    assert rep.objective <= 10 * spt_list_parallel_opt(inst).objective


def test_parallel_m_override():
    inst = make_instance([1.0, 2.0, 3.0])
    a = simulate_bscaling_parallel(inst, 2, m=2)[1]
    b = simulate_bscaling_parallel(make_instance([1.0, 2.0, 3.0], machines=2), 2)[1]
    assert a.completions == pytest.approx(b.completions)


def test_transform_examples():
    assert transform_round_smith(make_instance([8.0]), 2).rounded.job(1).p == pytest.approx(8.0)
    assert transform_round_smith(make_instance([9.0]), 2).rounded.job(1).p == pytest.approx(16.0)
    pair = transform_round_smith(make_instance([3.0, 5.0], [2.0, 1.0]), 3)
    assert [j.p for j in pair.rounded.jobs] == pytest.approx([6.0, 9.0])
    assert all(j.r == 0 for j in pair.rounded.jobs)
    assert inflate(make_instance([4.0]), 2).job(1).p == pytest.approx(8.0)
    assert inflate(make_instance([9.0]), 3).job(1).p == pytest.approx(13.5)
    with pytest.raises(ValueError, match="power-of-b"):
        inflate(make_instance([5.0]), 2)


@given(st.integers(-4, 8), st.floats(0.2, 5.0), st.floats(1.2, 6.0))
def test_inflate_is_total_probing_time(q, w, b):
    p2 = inflate(make_instance([w * b ** q], [w]), b).job(1).p
    assert p2 == pytest.approx(w * b ** (q + 1) / (b - 1), rel=1e-9)


# properties

@given(instances(release=True), st.floats(1.3, 6.0))
def test_release_recompute_and_probe_end(inst, b):
    sched, rep = simulate_bscaling_release(inst, b)
    assert recompute_objective(inst, sched) == pytest.approx(rep.objective, rel=1e-9)
    for s in sched.segments:
        assert s.start + s.budget <= b * s.start * (1 + 1e-9)


@given(instances(), bases)
def test_release_zero_reduction(inst, b):
    got = simulate_bscaling_release(inst, b)[1].completions
    want = simulate_bscaling(inst, b)[1].completions
    for j in want:
        assert got[j] == pytest.approx(want[j], rel=1e-9)


@given(instances(release=True))
def test_release_chain(inst):
    c = release_chain(inst, B_RELEASE)
    assert c["alg"] <= c["alg_rounded"] + 1e-7 * c["alg_rounded"]
    assert c["alg_rounded"] <= c["wsetf_inflated"] * (1 + 1e-7)
    assert c["wsetf_inflated"] <= c["busy_bound"] * (1 + 1e-7)


@given(instances(weighted=False), st.integers(1, 5), bases)
def test_parallel_recompute(inst, m, b):
    inst = make_instance(inst.p.tolist(), machines=m)
    sched, rep = simulate_bscaling_parallel(inst, b)
    assert recompute_objective(inst, sched) == pytest.approx(rep.objective, rel=1e-9)


@given(instances(weighted=False, n_max=12), st.integers(2, 5))
def test_parallel_chain_and_bound(inst, m):
    inst = make_instance(inst.p.tolist(), machines=m)
    c = parallel_chain(inst, B_PARALLEL)
    assert c["alg"] <= c["alg_rounded"] * (1 + 1e-7)
    assert c["alg_rounded"] <= c["rr_inflated_plus"] * (1 + 1e-7)
    assert c["alg"] <= (5 + 2 * math.sqrt(6)) * spt_list_parallel_opt(inst).objective * (1 + 1e-9)


@given(instances(weighted=False), st.integers(1, 4), st.floats(1.0, 4.0))
def test_scaled_optimum(inst, m, alpha):
    # p' <= alpha p implies OPT(p') <= alpha OPT(p)
    base = make_instance(inst.p.tolist(), machines=m)
    rng = np.random.default_rng(len(inst.p))
    p2 = inst.p * rng.uniform(1e-3, alpha, inst.n)
    assert spt_list_parallel_opt(make_instance(p2.tolist(), machines=m)).objective <= \
        alpha * spt_list_parallel_opt(base).objective * (1 + 1e-12)


def test_round_parallel_powers():
    inst = random_instances(1, 3, n_max=20, weighted=False, machines=3)[0]
    r = round_parallel(inst, B_PARALLEL)
    for a, c in zip(inst.jobs, r.jobs):
        q = math.log(c.p, B_PARALLEL)
        assert abs(q - round(q)) < 1e-9 and a.p <= c.p * (1 + 1e-12) < B_PARALLEL * a.p
