import numpy as np
from hypothesis import settings, strategies as st

from springsim.netcore import SpringNetwork

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@st.composite
def networks(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    masses = draw(st.lists(st.floats(0.25, 4.0), min_size=n, max_size=n))
    pairs = [(j, k) for j in range(n) for k in range(j, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=len(pairs), unique=True))
    springs = [(j, k, draw(st.floats(0.1, 3.0))) for j, k in chosen]
    return SpringNetwork(masses, springs)


@st.composite
def net_and_state(draw, max_n=6):
    net = draw(networks(max_n))
    n = net.n_masses
    vec = st.lists(st.floats(-2.0, 2.0), min_size=n, max_size=n)
    x = np.array(draw(vec))
    v = np.array(draw(vec))
    v[0] += 0.5  # keep the energy away from zero
    return net, x, v


ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
