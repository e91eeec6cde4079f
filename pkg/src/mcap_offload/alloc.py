"""Resource allocation for a fixed offloading profile.

Energy does not depend on the allocation, so minimizing the system objective
reduces to minimizing the round time, and the CAPs decouple: each CAP solves
its own min-max delay problem over uplink, downlink and processing shares.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    Allocation,
    CostBreakdown,
    Scenario,
    StrategyProfile,
    evaluate,
    profile_energy,
    require_valid,
)

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class AllocResult:
    allocation: Allocation
    costs: CostBreakdown
    converged: bool
    residual: float
    lower_bound: float

    @property
    def objective(self) -> float:
        return self.costs.objective


def optimize_allocation(profile: StrategyProfile, scenario: Scenario,
                        tol: float = DEFAULT_TOL, use_jit: bool | None = None) -> AllocResult:
    """Optimal bandwidth and CAP processing shares for ``profile``.

    ``residual`` is the relative gap between the returned objective and a
    Lagrangian lower bound on the optimum; ``converged`` means it is within
    ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    require_valid(profile, scenario)
    arr = scenario.arrays
    c_up, c_down, f_cap, delay, lower = _kernels.allocate_profile(
        profile.sites, profile.cloud_flags, arr, use_jit)
    alloc = Allocation(c_up, c_down, f_cap)
    # recompute through the model so costs match evaluate() bit for bit
    costs = evaluate(profile, alloc, scenario)
    obj = costs.objective
    lb = float(costs.weighted_energy.sum()) + min(lower, costs.round_time)
    residual = max(0.0, (obj - lb) / obj) if obj > 0 else 0.0
    return AllocResult(alloc, costs, residual <= tol, residual, lb)


# -- grid oracle ----------------------------------------------------------------

@dataclass(frozen=True)
class GridBracket:
    lower: float
    upper: float
    points: int


_MAX_POINTS = 6_000_000


def _lattice(n: int, levels: int) -> np.ndarray:
    """All integer n-tuples in [0, levels] with sum <= levels."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    rows = [p for p in itertools.product(range(levels + 1), repeat=n) if sum(p) <= levels]
    return np.array(rows, dtype=np.int64)


def _waterfill(base: np.ndarray, cycles: np.ndarray, f_a: float, iters: int = 200) -> np.ndarray:
    """min over f (sum f <= f_a) of max_i base_i + cycles_i / f_i, for each row of base."""
    t_floor = base.max(axis=1)
    busy = cycles > 0
    if not busy.any():
        return t_floor
    lo = t_floor.copy()
    hi = t_floor + cycles[busy].sum() / f_a * busy.sum()
    bb = base[:, busy]
    cb = cycles[busy]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            need = (cb / (mid[:, None] - bb)).sum(axis=1)
        ok = (mid[:, None] > bb).all(axis=1) & (need <= f_a)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


def _cap_grid(k, a, b, c, c_ul, c_dl, c_total, f_a, step):
    n = len(k)
    levels = int(round(1.0 / step))
    lat = _lattice(n, levels)
    if len(lat) ** 2 > _MAX_POINTS:
        raise ValueError("grid too fine for exhaustive search; raise grid_step")
    gu, gd = c_ul / levels, c_dl / levels
    uu = lat * gu
    dd = lat * gd
    pairs_u = np.repeat(np.arange(len(lat)), len(lat))
    pairs_d = np.tile(np.arange(len(lat)), len(lat))
    keep = uu.sum(1)[pairs_u] + dd.sum(1)[pairs_d] <= c_total * (1 + 1e-12)
    u = uu[pairs_u[keep]]
    d = dd[pairs_d[keep]]

    def comm(u, d):
        with np.errstate(divide="ignore"):
            tu = np.where(a > 0, a / u, 0.0)
            td = np.where(b > 0, b / d, 0.0)
        return k + tu + td

    upper = _waterfill(comm(u, d), c, f_a).min()
    lower = _waterfill(comm(u + gu, d + gd), c, f_a).min()
    return float(lower), float(upper), len(u)


def allocation_oracle(profile: StrategyProfile, scenario: Scenario,
                      grid_step: float = 0.05) -> GridBracket:
    """Bracket the optimal objective by brute force over a bandwidth lattice.

    Bandwidth shares live on a lattice of ``grid_step`` times each capacity;
    CAP processing shares are water-filled exactly per lattice point.  The
    best lattice point gives the upper end.  Inflating every share by one
    lattice step gives the lower end, since rounding the true optimum down
    onto the lattice can cost at most one step per share.
    """
    require_valid(profile, scenario)
    if scenario.n_caps > 2:
        raise ValueError("instance too large for grid search (more than 2 CAPs)")
    if not 0 < grid_step <= 1:
        raise ValueError("grid_step must lie in (0, 1]")
    arr = scenario.arrays
    sites, clouds = profile.sites, profile.cloud_flags
    alpha = np.array([t.alpha for t in scenario.tasks])
    energy = float(alpha @ profile_energy(profile, scenario))
    local = sites == 0
    lo = hi = float(arr.local_time[local].max()) if local.any() else -np.inf
    points = 1
    for j in range(scenario.n_caps):
        idx = np.flatnonzero(sites == j + 1)
        if idx.size == 0:
            continue
        if idx.size > 3:
            raise ValueError("instance too large for grid search (more than 3 users on a CAP)")
        cl = clouds[idx]
        k = np.where(cl, arr.cloud_time[idx], 0.0)
        c = np.where(cl, 0.0, arr.cycles[idx])
        l_j, u_j, p_j = _cap_grid(k, arr.up_work[idx, j], arr.down_work[idx, j], c,
                                  arr.c_ul[j], arr.c_dl[j], arr.c_total[j], arr.f_a[j], grid_step)
        lo, hi = max(lo, l_j), max(hi, u_j)
        points *= p_j
    return GridBracket(energy + lo, energy + hi, points)
