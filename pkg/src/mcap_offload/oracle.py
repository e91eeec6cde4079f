"""Baselines: exhaustive search over all joint profiles, and random mapping."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .alloc import DEFAULT_TOL, optimize_allocation
from .game import strategy_set
from .model import Scenario, StrategyProfile
from .relax import Solution

DEFAULT_BUDGET = 2_000_000


class BudgetExceededError(RuntimeError):
    def __init__(self, count: int, budget: int):
        super().__init__(f"{count} profiles exceed the enumeration budget of {budget}")
        self.count = count
        self.budget = budget


def profile_count(scenario: Scenario) -> int:
    return math.prod(len(strategy_set(i, scenario)) for i in range(scenario.n_users))


def enumerate_profiles(scenario: Scenario):
    """Mixed-radix order; user 0 is the most significant digit."""
    sets = [strategy_set(i, scenario) for i in range(scenario.n_users)]
    for combo in itertools.product(*sets):
        yield StrategyProfile(combo)


def exhaustive(scenario: Scenario, budget: int = DEFAULT_BUDGET,
               alloc_tol: float = DEFAULT_TOL) -> Solution:
    """Global optimum by enumeration; the first profile wins ties."""
    count = profile_count(scenario)
    if count > budget:
        raise BudgetExceededError(count, budget)
    best, best_res = None, None
    for prof in enumerate_profiles(scenario):
        res = optimize_allocation(prof, scenario, alloc_tol)
        if best_res is None or res.objective < best_res.objective:
            best, best_res = prof, res
    return Solution.from_alloc(best, best_res, method="oracle", profiles=count)


def random_profile(scenario: Scenario, seed) -> StrategyProfile:
    """Uniform draw from every user's strategy set."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(scenario.n_users):
        options = strategy_set(i, scenario)
        out.append(options[int(rng.integers(len(options)))])
    return StrategyProfile(tuple(out))


def random_mapping(scenario: Scenario, seed, alloc_tol: float = DEFAULT_TOL) -> Solution:
    prof = random_profile(scenario, seed)
    return Solution.from_alloc(prof, optimize_allocation(prof, scenario, alloc_tol),
                               method="random", seed=seed)
