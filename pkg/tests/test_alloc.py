import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import gen, make_scenario, make_task, random_valid_profile, scenarios
from mcap_offload import _kernels
from mcap_offload.alloc import allocation_oracle, optimize_allocation
from mcap_offload.model import Allocation, Cap, InvalidProfileError, Strategy, StrategyProfile, evaluate


def _check_invariants(res, prof, sc, tol=1e-6):
    assert res.allocation.check(prof, sc) == []
    c = evaluate(prof, res.allocation, sc)
    assert c.objective == pytest.approx(res.objective, rel=1e-12)
    assert res.converged and res.residual <= tol


def test_all_local_gives_zero_allocation():
    sc = gen(n=3)
    prof = StrategyProfile.all_local(3)
    res = optimize_allocation(prof, sc)
    a = res.allocation
    assert not (a.c_up.any() or a.c_down.any() or a.f_cap.any())
    expect = sum(t.alpha * t.local_energy for t in sc.tasks) + max(t.local_time for t in sc.tasks)
    assert res.objective == pytest.approx(expect, rel=1e-15)


def test_single_user_gets_whole_cap():
    task = make_task(eta_up=(2.0,), eta_down=(5.0,), d_out=8e7)
    cap = Cap(20e6, 20e6, 30e6, 5e9)
    sc = make_scenario([task], cap=cap)
    prof = StrategyProfile((Strategy(1),))
    res = optimize_allocation(prof, sc)
    a = res.allocation
    assert a.f_cap[0, 0] == pytest.approx(5e9, rel=1e-12)
    assert a.c_up[0, 0] + a.c_down[0, 0] == pytest.approx(30e6, rel=1e-9)
    # independent check of the split on a 0.01 MHz grid
    up = np.arange(10e6, 20e6 + 1, 1e4)
    down = 30e6 - up
    ok = down <= 20e6
    comm = 1.6e8 / (2 * up[ok]) + 8e7 / (5 * down[ok])
    best = up[ok][np.argmin(comm)]
    assert abs(a.c_up[0, 0] - best) <= 1e4
    assert comm.min() >= res.costs.delay[0] - 3.8e10 / 5e9 - 1e-9


def test_split_when_links_do_not_compete():
    # c_ul + c_dl <= c_total: both links run at their own caps
    sc = make_scenario([make_task()], cap=Cap(10e6, 15e6, 40e6, 5e9))
    res = optimize_allocation(StrategyProfile((Strategy(1),)), sc)
    assert res.allocation.c_up[0, 0] == pytest.approx(10e6, rel=1e-12)
    assert res.allocation.c_down[0, 0] == pytest.approx(15e6, rel=1e-12)


def test_identical_users_get_equal_delays():
    t = make_task(m=2)
    sc = make_scenario([t, t, t])
    prof = StrategyProfile((Strategy(1), Strategy(1), Strategy(1)))
    d = optimize_allocation(prof, sc).costs.delay
    assert np.ptp(d) <= 1e-6 * d.max()


def test_cloud_user_takes_no_cap_processing():
    sc = gen(n=3, m=1)
    prof = StrategyProfile((Strategy(1, True), Strategy(1), Strategy(0)))
    a = optimize_allocation(prof, sc).allocation
    assert a.f_cap[0, 0] == 0.0
    assert a.f_cap[1, 0] == pytest.approx(sc.caps[0].f_a, rel=1e-12)


def test_zero_output_gets_zero_downlink():
    sc = make_scenario([make_task(d_out=0.0), make_task()])
    prof = StrategyProfile((Strategy(1), Strategy(1)))
    res = optimize_allocation(prof, sc)
    assert res.allocation.c_down[0, 0] == 0.0
    _check_invariants(res, prof, sc)


def test_frozen_value():
    sc = gen(n=4, m=2, rnd=0)
    prof = StrategyProfile.parse("cap1 cap2 cap1+cloud local")
    res = optimize_allocation(prof, sc)
    assert res.objective == pytest.approx(FROZEN_OBJ, rel=1e-12)


def test_usage_errors():
    sc = gen(n=2)
    with pytest.raises(ValueError):
        optimize_allocation(StrategyProfile.all_local(2), sc, tol=0)
    with pytest.raises(InvalidProfileError):
        optimize_allocation(StrategyProfile((Strategy(0, True), Strategy())), sc)


@settings(max_examples=60, deadline=None)
@given(scenarios(max_users=6))
def test_optimality_and_invariants(sc):
    rng = np.random.default_rng(7)
    prof = random_valid_profile(sc, rng)
    res = optimize_allocation(prof, sc)
    _check_invariants(res, prof, sc)
    # no feasible perturbation beats the returned round time
    a = res.allocation
    for _ in range(20):
        mix = rng.uniform(0.5, 1.5, size=a.c_up.shape)
        pert = Allocation(a.c_up * mix, a.c_down * mix[:, ::-1] if a.c_down.shape[1] > 1 else a.c_down * mix,
                          a.f_cap * rng.uniform(0.5, 1.5, size=a.f_cap.shape))
        # rescale per CAP back into the capacity region
        for j, cap in enumerate(sc.caps):
            su, sd, sf = pert.c_up[:, j].sum(), pert.c_down[:, j].sum(), pert.f_cap[:, j].sum()
            k = min(1.0, cap.c_ul / su if su else 1, cap.c_dl / sd if sd else 1,
                    cap.c_total / (su + sd) if su + sd else 1)
            pert.c_up[:, j] *= k
            pert.c_down[:, j] *= k
            if sf:
                pert.f_cap[:, j] *= min(1.0, cap.f_a / sf)
        rt = evaluate(prof, pert, sc).round_time
        assert rt >= res.costs.round_time * (1 - 1e-6)


@settings(max_examples=40, deadline=None)
@given(scenarios(max_users=5))
def test_unused_cap_changes_nothing(sc):
    rng = np.random.default_rng(3)
    prof = random_valid_profile(sc, rng)
    before = optimize_allocation(prof, sc).objective
    tasks = [dataclasses.replace(t, eta_up=t.eta_up + (3.0,), eta_down=t.eta_down + (3.0,)) for t in sc.tasks]
    bigger = type(sc)(tuple(tasks), sc.caps + (sc.caps[0],), sc.cloud)
    assert optimize_allocation(prof, bigger).objective == pytest.approx(before, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(scenarios(max_users=6))
def test_jit_and_numpy_paths_agree(sc):
    if _kernels.numba is None:
        pytest.skip("numba not installed")
    prof = random_valid_profile(sc, np.random.default_rng(11))
    arr = sc.arrays
    j = _kernels.allocate_profile(prof.sites, prof.cloud_flags, arr, use_jit=True)
    n = _kernels.allocate_profile(prof.sites, prof.cloud_flags, arr, use_jit=False)
    np.testing.assert_allclose(j[3], n[3], rtol=1e-10)
    for x, y in zip(j[:3], n[:3]):
        np.testing.assert_allclose(x, y, rtol=1e-7, atol=1e-6)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("MCAP_OFFLOAD_DISABLE_JIT", "1")
    assert not _kernels.jit_requested()
    sc = gen(n=3)
    prof = StrategyProfile.parse("cap1 cap1 cap2+cloud")
    slow = optimize_allocation(prof, sc).objective
    monkeypatch.delenv("MCAP_OFFLOAD_DISABLE_JIT")
    assert optimize_allocation(prof, sc).objective == pytest.approx(slow, rel=1e-12)


# -- grid oracle --------------------------------------------------------------

def test_grid_local_user_is_exact():
    sc = make_scenario([make_task()])
    br = allocation_oracle(StrategyProfile.all_local(1), sc)
    exact = optimize_allocation(StrategyProfile.all_local(1), sc).objective
    assert br.lower == br.upper == pytest.approx(exact, rel=1e-15)


def test_grid_refinement_and_bracket():
    sc = gen(n=3, m=2, rnd=2)
    prof = StrategyProfile.parse("cap1 cap1 cap2")
    coarse = allocation_oracle(prof, sc, 0.1)
    fine = allocation_oracle(prof, sc, 0.05)
    exact = optimize_allocation(prof, sc).objective
    assert fine.upper <= coarse.upper + 1e-12
    assert fine.lower - 1e-9 <= exact <= fine.upper + 1e-9


def test_grid_refuses_large_instances():
    sc = gen(n=4, m=3)
    with pytest.raises(ValueError):
        allocation_oracle(StrategyProfile.all_local(4), sc)
    sc = gen(n=4, m=1)
    with pytest.raises(ValueError):
        allocation_oracle(StrategyProfile.parse("cap1 cap1 cap1 cap1"), sc)


# exact value; grid oracle at step 0.02 brackets it in [98.0520, 98.2457]
FROZEN_OBJ = 98.24194791640787
