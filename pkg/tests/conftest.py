import numpy as np
import pytest
from hypothesis import strategies as st

from mcap_offload.experiments import GeneratorConfig, generate_scenario
from mcap_offload.model import Allocation, Cap, Cloud, Scenario, Strategy, StrategyProfile, Task

LOCAL_E = 2.3e-7

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_task(m=1, **kw):
    base = dict(d_in=1.6e8, d_out=1.6e7, cycles=3.8e10, alpha=0.5, beta=1.7e-7,
                cloud_utility=1.6e8, eta_up=(3.0,) * m, eta_down=(3.0,) * m,
                local_time_per_bit=1900 / 8 / 2.39e9, local_energy_per_bit=LOCAL_E,
                tx_energy_per_bit=1.42e-7, rx_energy_per_bit=1.42e-7)
    base.update(kw)
    return Task(**base)


def make_scenario(tasks, m=None, cap=None, cloud=None):
    m = m or len(tasks[0].eta_up)
    cap = cap or Cap(20e6, 20e6, 40e6, 5e9)
    return Scenario(tuple(tasks), (cap,) * m, cloud or Cloud(7.5e9, 15e6))


def gen(n=4, m=2, rnd=0, **kw):
    return generate_scenario(GeneratorConfig(n_users=n, n_caps=m, local_energy_per_bit=LOCAL_E, **kw), rnd)


def random_valid_profile(sc, rng):
    out = []
    for i in range(sc.n_users):
        allowed = sc.allowed_caps(i)
        site = int(rng.choice([0] + allowed))
        out.append(Strategy(site, bool(site and rng.random() < 0.5)))
    return StrategyProfile(tuple(out))


def random_feasible_allocation(profile, sc, rng):
    """Random positive shares for every assigned user, scaled inside all capacities."""
    n, m = sc.n_users, sc.n_caps
    a = Allocation.zeros(n, m)
    for j in range(m):
        users = [i for i, s in enumerate(profile) if s.site == j + 1]
        if not users:
            continue
        cap = sc.caps[j]
        wu, wd, wf = (rng.uniform(0.1, 1.0, len(users)) for _ in range(3))
        frac = rng.uniform(0.3, 1.0)
        up = wu / wu.sum() * min(cap.c_ul, cap.c_total / 2) * frac
        down = wd / wd.sum() * min(cap.c_dl, cap.c_total / 2) * frac
        f = wf / wf.sum() * cap.f_a * rng.uniform(0.3, 1.0)
        for k, i in enumerate(users):
            a.c_up[i, j] = up[k]
            a.c_down[i, j] = down[k]
            a.f_cap[i, j] = 0.0 if profile[i].cloud else f[k]
    return a


@st.composite
def scenarios(draw, max_users=4, max_caps=2, placement=True):
    """Small scenarios with parameters spread over a few orders of magnitude."""
    n = draw(st.integers(1, max_users))
    m = draw(st.integers(1, max_caps))
    pos = lambda lo, hi: st.floats(lo, hi, allow_nan=False, allow_infinity=False)
    tasks = []
    for _ in range(n):
        d_in = draw(pos(1e6, 3e8))
        eta = tuple(draw(pos(1.0, 6.0)) for _ in range(m))
        forb = frozenset(draw(st.sets(st.integers(1, m), max_size=m))) if placement else frozenset()
        tasks.append(make_task(m, d_in=d_in, d_out=draw(pos(1e5, 3e7)),
                               cycles=d_in / 8 * draw(pos(200.0, 4000.0)),
                               alpha=draw(pos(0.05, 2.0)), beta=draw(pos(0.0, 4e-7)),
                               cloud_utility=d_in, eta_up=eta,
                               eta_down=tuple(draw(pos(1.0, 6.0)) for _ in range(m)),
                               local_energy_per_bit=draw(pos(5e-8, 5e-7)), forbidden=forb))
    caps = []
    for _ in range(m):
        c_ul, c_dl = draw(pos(1e6, 4e7)), draw(pos(1e6, 4e7))
        c_total = draw(pos(max(c_ul, c_dl), c_ul + c_dl + 1e7))
        caps.append(Cap(c_ul, c_dl, c_total, draw(pos(1e9, 1e10))))
    return Scenario(tuple(tasks), tuple(caps), Cloud(draw(pos(1e9, 1e10)), draw(pos(5e6, 5e7))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
