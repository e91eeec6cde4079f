"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``CRITERION k PASS|FAIL: ...`` line (also collected in
the pytest terminal summary).  Run directly with ``python3 tests/test_acceptance.py``
to get just the ten lines.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, LOCAL_E, make_scenario, make_task  # noqa: E402
from direct import check_point  # noqa: E402
from mcap_offload.alloc import allocation_oracle, optimize_allocation  # noqa: E402
from mcap_offload.cli import main as cli_main  # noqa: E402
from mcap_offload.experiments import (  # noqa: E402
    GeneratorConfig,
    SweepSpec,
    compare_placement,
    generate_scenario,
    round_seed,
    run_sweep,
)
from mcap_offload.game import fip, mcap_ne, potential, strategy_set, verify_ne  # noqa: E402
from mcap_offload.model import Cap, Cloud, Scenario, Strategy, StrategyProfile, individual_cost  # noqa: E402
from mcap_offload.oracle import exhaustive, random_profile  # noqa: E402
from mcap_offload.relax import Layout, assemble_qcqp, lift_to_sdp, mcap, solve_sdp  # noqa: E402

CFG = GeneratorConfig(local_energy_per_bit=LOCAL_E, seed=2026)


def report(k, ok, detail):
    line = f"CRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_scenario(rng, n, m, placement=True):
    """Instances spread wider than the generator's defaults."""
    tasks = []
    for _ in range(n):
        d_in = rng.uniform(1e6, 3e8)
        forb = {int(rng.integers(1, m + 1))} if placement and rng.random() < 0.4 else set()
        tasks.append(make_task(
            m, d_in=d_in, d_out=rng.uniform(1e5, 3e7), cycles=d_in / 8 * rng.uniform(200, 4000),
            alpha=rng.uniform(0.05, 2), beta=rng.uniform(0, 4e-7), cloud_utility=d_in,
            eta_up=tuple(rng.uniform(1, 6, m)), eta_down=tuple(rng.uniform(1, 6, m)),
            local_energy_per_bit=rng.uniform(5e-8, 5e-7), forbidden=forb))
    caps = []
    for _ in range(m):
        c_ul, c_dl = rng.uniform(1e6, 4e7, 2)
        caps.append(Cap(c_ul, c_dl, rng.uniform(max(c_ul, c_dl), c_ul + c_dl + 1e7), rng.uniform(1e9, 1e10)))
    return Scenario(tuple(tasks), tuple(caps), Cloud(rng.uniform(1e9, 1e10), rng.uniform(5e6, 5e7)))


def _mixed_small(r):
    """N <= 4, M = 2 instances cycling through sizes, placement and cloud price."""
    cfg = CFG.replace(n_users=2 + r % 3, placement=r % 2 == 1, beta=(1.7e-7, 5e-8, 0.0)[r % 3])
    return generate_scenario(cfg, r)


def _border_excursion(Z, sc):
    lay = Layout(sc.n_users, sc.n_caps)
    idx = [lay.x(i, j) for i in range(sc.n_users) for j in range(sc.n_caps + 1)]
    idx += [lay.theta(i) for i in range(sc.n_users)]
    v = Z[-1, idx]
    return max(0.0, -v.min(), v.max() - 1.0)


# 1 -----------------------------------------------------------------------------

def test_criterion_1_constraint_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_diff = worst_feas = 0.0
    for k in range(100):
        sc = random_scenario(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)))
        q = assemble_qcqp(sc)
        d, f = check_point(q, lift_to_sdp(q), sc, rng)
        worst_diff, worst_feas = max(worst_diff, d), max(worst_feas, f)
    dt = time.perf_counter() - t0
    report(1, worst_diff <= 1e-9 and worst_feas <= 1e-9 and dt < 60,
           f"100 feasible integral points (N<=4, M<=2): worst matrix-vs-direct disagreement "
           f"{worst_diff:.2e} rel, worst feasibility residual {worst_feas:.2e} rel, {dt:.1f} s")


# 2 -----------------------------------------------------------------------------

def test_criterion_2_relaxation_bound():
    t0 = time.perf_counter()
    worst = -np.inf
    for r in range(50):
        sc = _mixed_small(r)
        sol = solve_sdp(lift_to_sdp(assemble_qcqp(sc)), sc)
        assert sol.ok, sol.status
        worst = max(worst, sol.objective - exhaustive(sc).objective)
    dt = time.perf_counter() - t0
    report(2, worst <= 1e-5 and dt < 600,
           f"50 instances (N<=4, M=2): max(SDP - optimum) = {worst:.4g} (<= 1e-5), {dt:.1f} s")


# 3 -----------------------------------------------------------------------------

def test_criterion_3_border_in_unit_interval():
    worst, count = 0.0, 0
    rng = np.random.default_rng(3)
    instances = [_mixed_small(r) for r in range(30)]
    instances += [generate_scenario(CFG.replace(n_users=n, placement=True), r) for r in range(5) for n in (6, 10)]
    instances += [random_scenario(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4))) for _ in range(20)]
    for sc in instances:
        sol = solve_sdp(lift_to_sdp(assemble_qcqp(sc)), sc)
        if sol.ok:
            count += 1
            worst = max(worst, _border_excursion(sol.Z, sc))
    report(3, worst <= 1e-7 and count == len(instances),
           f"{count}/{len(instances)} solved; last-row x/theta entries leave [0,1] by at most {worst:.2e} "
           f"(<= 1e-7)")


# 4 -----------------------------------------------------------------------------

def test_criterion_4_potential_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(500):
        sc = random_scenario(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)))
        a = StrategyProfile(tuple(
            (lambda opts: opts[int(rng.integers(len(opts)))])(strategy_set(i, sc)) for i in range(sc.n_users)))
        i = int(rng.integers(sc.n_users))
        opts = [s for s in strategy_set(i, sc) if s != a[i]] or [a[i]]
        b = a.replace(i, opts[int(rng.integers(len(opts)))])
        ra, rb = optimize_allocation(a, sc), optimize_allocation(b, sc)
        dphi = potential(a, ra.allocation, sc) - potential(b, rb.allocation, sc)
        du = individual_cost(i, a, ra.allocation, sc) - individual_cost(i, b, rb.allocation, sc)
        worst = max(worst, abs(dphi - du) / max(ra.objective, rb.objective))
    report(4, worst <= 1e-9, f"500 unilateral deviations: max |dphi - du_i| / phi = {worst:.2e} (<= 1e-9)")


# 5 -----------------------------------------------------------------------------

def test_criterion_5_fip_reaches_ne():
    cfg = CFG.replace(n_users=4)
    bad, steps, worst_gain = [], 0, -np.inf
    for r in range(50):
        sc = generate_scenario(cfg.replace(placement=r % 2 == 1), r)
        s = round_seed(cfg.seed, r)
        for start, tag in ((random_profile(sc, s), "random"), (StrategyProfile.all_local(4), "local")):
            sol, trace = fip(start, sc, start_tag=tag)
            steps += trace.iterations
            dec = all(st.potential_after < st.potential_before for st in trace.steps)
            rep = verify_ne(sol.profile, sc)
            worst_gain = max(worst_gain, rep.worst_gain)
            if not (dec and rep.ok):
                bad.append((r, tag))
        ne, trace = mcap_ne(sc, seed=s)
        if not verify_ne(ne.profile, sc).ok:
            bad.append((r, "mcap"))
    report(5, not bad, f"150 improvement paths on 50 rounds (N=4, M=2), {steps} steps, all strictly "
                       f"decreasing and verified NE; worst deviation gain {worst_gain:.2e}; failures {bad}")


# 6 -----------------------------------------------------------------------------

def test_criterion_6_near_optimal():
    cfg = CFG.replace(n_users=4)
    within_m = within_ne = 0
    ne_above_mcap = []
    gaps = []
    for r in range(50):
        sc = generate_scenario(cfg, r)
        s = round_seed(cfg.seed, r)
        opt = exhaustive(sc).objective
        m = mcap(sc, seed=s)
        ne, _ = mcap_ne(sc, seed=s)
        within_m += m.objective <= 1.1 * opt
        within_ne += ne.objective <= 1.1 * opt
        if ne.objective > m.objective:
            ne_above_mcap.append(r)
        gaps.append((m.objective / opt - 1, ne.objective / opt - 1))
    g = np.array(gaps)
    report(6, within_m >= 45 and within_ne >= 45 and not ne_above_mcap,
           f"50 rounds (N=4, M=2): MCAP within 10% on {within_m}/50, MCAP-NE on {within_ne}/50 "
           f"(need 45); mean gap {g[:, 0].mean():.2%} / {g[:, 1].mean():.2%}, "
           f"max {g[:, 0].max():.2%} / {g[:, 1].max():.2%}; MCAP-NE > MCAP in rounds {ne_above_mcap}")


# 7 -----------------------------------------------------------------------------

def test_criterion_7_warm_start():
    t0 = time.perf_counter()
    cfg = CFG.replace(n_users=10)
    it_m, it_r = [], []
    for r in range(50):
        sc = generate_scenario(cfg, r)
        s = round_seed(cfg.seed, r)
        it_m.append(mcap_ne(sc, seed=s)[1].iterations)
        it_r.append(fip(random_profile(sc, s), sc, start_tag="random")[1].iterations)
    ratio = np.mean(it_r) / max(np.mean(it_m), 1e-12)
    dt = time.perf_counter() - t0
    report(7, ratio >= 1.5 and dt < 1800,
           f"50 rounds (N=10, M=2): mean iterations random {np.mean(it_r):.2f} vs MCAP {np.mean(it_m):.2f}, "
           f"ratio {ratio:.2f} (>= 1.5), {dt:.1f} s")


# 8 -----------------------------------------------------------------------------

def _means(parameter, values, cfg, rounds=30):
    rows = run_sweep(SweepSpec(parameter, values, ("mcap_ne",), rounds, cfg.seed), cfg)
    assert all(r.completed == rounds for r in rows)
    return np.array([r.mean_objective for r in rows])


def rise_then_plateau(v, band=0.02):
    """Strictly increasing up to some index, every later value within ``band`` of the last."""
    for p in range(1, len(v)):
        if np.all(np.diff(v[: p + 1]) > 0) and np.all(np.abs(v[p:] / v[-1] - 1) <= band):
            return v[-1] > v[0] and abs(v[-1] / v[-2] - 1) <= band
    return False


def test_criterion_8_trends():
    t0 = time.perf_counter()
    caps = _means("n_caps", (1, 2, 3), CFG)
    users = _means("n_users", (4, 6, 8, 10), CFG)
    alpha = _means("alpha", (0.1, 0.25, 0.5, 1.0), CFG)
    betas = (0.0, 2.5e-8, 5e-8, 1e-7, 1.7e-7, 3.4e-7)
    beta = _means("beta", betas, CFG)
    (pl,) = compare_placement(CFG.replace(n_users=12, rounds=30), ("mcap_ne",))
    checks = {
        "n_caps non-increasing": bool(np.all(np.diff(caps) <= 0)),
        "n_users increasing": bool(np.all(np.diff(users) > 0)),
        "alpha increasing": bool(np.all(np.diff(alpha) > 0)),
        "beta rise-then-plateau": rise_then_plateau(beta),
        "placement constrained >= free": pl.constrained.mean_objective >= pl.unconstrained.mean_objective,
    }
    fmt = lambda v: "[" + ", ".join(f"{x:.2f}" for x in v) + "]"
    detail = (f"30 rounds each; n_caps {fmt(caps)}, n_users {fmt(users)}, alpha {fmt(alpha)}, "
              f"beta {fmt(beta)} (last two differ {abs(beta[-1] / beta[-2] - 1):.2%}), placement "
              f"{pl.unconstrained.mean_objective:.2f} -> {pl.constrained.mean_objective:.2f}; "
              f"failed: {[k for k, ok in checks.items() if not ok]}; {time.perf_counter() - t0:.0f} s")
    report(8, all(checks.values()), detail)


def test_plateau_rule():
    assert rise_then_plateau(np.array([1.0, 2.0, 3.0, 3.01, 3.0]))
    assert not rise_then_plateau(np.array([1.0, 2.0, 3.0, 4.0]))
    assert not rise_then_plateau(np.array([3.0, 2.0, 1.0, 1.0]))


# 9 -----------------------------------------------------------------------------

def test_criterion_9_allocation_vs_grid():
    rng = np.random.default_rng(9)
    tol = 1e-6
    done, worst_rel_gap, fails = 0, 0.0, []
    while done < 20:
        m = int(rng.integers(1, 3))
        sc = random_scenario(rng, int(rng.integers(1, 5)), m, placement=False)
        prof = StrategyProfile(tuple(
            Strategy(int(rng.integers(1, m + 1)), bool(rng.random() < 0.3)) if rng.random() < 0.8 else Strategy()
            for _ in range(sc.n_users)))
        per_cap = np.bincount(prof.sites, minlength=m + 1)[1:]
        if per_cap.max(initial=0) > 3 or per_cap.sum() == 0:
            continue
        step = {1: 0.02, 2: 0.05, 3: 0.1}[int(per_cap.max())]
        br = allocation_oracle(prof, sc, step)
        obj = optimize_allocation(prof, sc, tol).objective
        if not (br.lower * (1 - tol) <= obj <= br.upper * (1 + tol)):
            fails.append(done)
        worst_rel_gap = max(worst_rel_gap, br.upper / obj - 1)
        done += 1
    report(9, not fails,
           f"20 instances (<=3 users per CAP, M<=2): exact objective inside every grid bracket; "
           f"best grid point at most {worst_rel_gap:.2%} above the exact objective; failures {fails}")


# 10 ----------------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path):
    args = ["sweep", "--parameter", "n_caps", "--values", "1,2", "--rounds", "3", "--seed", "7",
            "--methods", "mcap,mcap_ne,random,random_ne,oracle", "--n-users", "4",
            "--local-energy-per-bit", str(LOCAL_E)]
    assert cli_main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    pa = (tmp_path / "a" / "plotdata_n_caps.txt").read_bytes()
    pb = (tmp_path / "b" / "plotdata_n_caps.txt").read_bytes()
    report(10, a == b and pa == pb and len(a) > 0,
           f"two identical sweep invocations: results.csv {len(a)} bytes, identical={a == b}; "
           f"plot data identical={pa == pb}")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(((n, f) for n, f in globals().items() if n.startswith("test_criterion_")),
                           key=lambda kv: int(kv[0].split("_")[2])):
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
