import numpy as np
from hypothesis import settings, strategies as st

from krs.core import make_instance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

sizes = st.floats(min_value=0.01, max_value=1e4, allow_nan=False, allow_infinity=False)
weights = st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False)
bases = st.floats(min_value=1.1, max_value=12.0, allow_nan=False)


@st.composite
def instances(draw, n_max=8, weighted=True, release=False, machines=1):
    n = draw(st.integers(1, n_max))
    p = draw(st.lists(sizes, min_size=n, max_size=n))
    w = draw(st.lists(weights, min_size=n, max_size=n)) if weighted else None
    r = None
    if release:
        r = draw(st.lists(st.one_of(st.just(0.0), st.floats(1e-100, 100)), min_size=n, max_size=n))
    return make_instance(p, w, r, machines)


def random_instances(count, seed, n_max=10, weighted=True, release=False, machines=1,
                     decades=4.0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, n_max + 1))
        p = 10 ** rng.uniform(0, decades, n)
        w = 10 ** rng.uniform(-1, 1, n) if weighted else None
        r = rng.uniform(0, p.sum(), n) if release else None
        out.append(make_instance(p, w, r, machines))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
