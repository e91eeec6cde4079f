"""MCAP-NE: the offloading game, its potential, and best-response improvement paths.

Each user's cost is its own weighted energy plus the shared round time, so a
unilateral deviation changes that user's cost and the system objective by
the same amount.  The system objective is therefore an exact potential and
every improvement path ends at a pure Nash equilibrium.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .alloc import DEFAULT_TOL, AllocResult, optimize_allocation
from .model import (
    LOCAL,
    Allocation,
    Scenario,
    Strategy,
    StrategyProfile,
    evaluate,
    require_valid,
)
from .relax import DEFAULT_SDP_TOL, DEFAULT_TRIALS, Solution, mcap

DEFAULT_EPS = 1e-6
START_TAGS = ("mcap", "random", "given", "local")


class FipError(RuntimeError):
    """Improvement path hit ``max_iter``; carries the partial trace."""

    def __init__(self, message, trace: "FipTrace"):
        super().__init__(message)
        self.trace = trace


def strategy_set(i: int, scenario: Scenario) -> list[Strategy]:
    """Local, then CAP-processed by ascending CAP, then cloud-forwarded by ascending CAP."""
    caps = scenario.allowed_caps(i)
    return ([Strategy(LOCAL, False)] + [Strategy(j, False) for j in caps]
            + [Strategy(j, True) for j in caps])


def potential(profile: StrategyProfile, alloc: Allocation, scenario: Scenario) -> float:
    return evaluate(profile, alloc, scenario).objective


def default_max_iter(scenario: Scenario) -> int:
    return 10 * scenario.n_users * (2 * scenario.n_caps + 1)


class _Evaluator:
    """Memoised optimal allocation per profile (pure, so caching is safe)."""

    def __init__(self, scenario: Scenario, tol: float):
        self.scenario = scenario
        self.tol = tol
        self._cache: dict[StrategyProfile, AllocResult] = {}
        self.calls = 0

    def __call__(self, profile: StrategyProfile) -> AllocResult:
        res = self._cache.get(profile)
        if res is None:
            self.calls += 1
            res = optimize_allocation(profile, self.scenario, self.tol)
            self._cache[profile] = res
        return res

    def cost(self, i: int, profile: StrategyProfile) -> float:
        return self(profile).costs.individual(i)


def _check_tol(eps: float, alloc_tol: float | None) -> float:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if alloc_tol is None:
        return min(DEFAULT_TOL, eps / 10)
    if eps < 10 * alloc_tol:
        raise ValueError("eps must be at least 10x the allocation tolerance")
    return alloc_tol


def _best(i, profile, ev: _Evaluator, eps):
    current = ev.cost(i, profile)
    best_s, best_u = None, current
    for s in strategy_set(i, ev.scenario):
        if s == profile[i]:
            continue
        u = ev.cost(i, profile.replace(i, s))
        if u < best_u:
            best_s, best_u = s, u
    if best_s is not None and current - best_u > eps:
        return best_s, current, best_u
    return None, current, current


def best_response(i: int, profile: StrategyProfile, scenario: Scenario,
                  eps: float = DEFAULT_EPS, alloc_tol: float | None = None) -> Strategy | None:
    """User ``i``'s cheapest strategy if it beats the current one by more than ``eps``.

    Equal-cost candidates resolve to the earliest in strategy-set order.
    """
    require_valid(profile, scenario)
    ev = _Evaluator(scenario, _check_tol(eps, alloc_tol))
    return _best(i, profile, ev, eps)[0]


@dataclass(frozen=True)
class FipStep:
    user: int
    old: Strategy
    new: Strategy
    potential_before: float
    potential_after: float

    def line(self) -> str:
        return (f"user={self.user} old={self.old} new={self.new} "
                f"potential_before={self.potential_before!r} potential_after={self.potential_after!r}")


@dataclass
class FipTrace:
    start: str = "given"
    steps: list[FipStep] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def to_text(self) -> str:
        head = f"# fip start={self.start} iterations={self.iterations}"
        return "\n".join([head] + [s.line() for s in self.steps]) + "\n"


def fip(start: StrategyProfile, scenario: Scenario, eps: float = DEFAULT_EPS,
        max_iter: int | None = None, alloc_tol: float | None = None,
        start_tag: str = "given") -> tuple[Solution, FipTrace]:
    """Best-response improvement path from ``start``.

    Users are scanned in index order; after every accepted deviation the scan
    restarts at user 0.  Stops when a full scan finds no improvement.
    """
    require_valid(start, scenario)
    ev = _Evaluator(scenario, _check_tol(eps, alloc_tol))
    max_iter = default_max_iter(scenario) if max_iter is None else max_iter
    trace = FipTrace(start_tag)
    profile = start
    i = 0
    while i < scenario.n_users:
        new, _, _ = _best(i, profile, ev, eps)
        if new is None:
            i += 1
            continue
        if trace.iterations >= max_iter:
            raise FipError(f"no equilibrium after {max_iter} deviations; "
                           "eps may be too small for the allocation tolerance", trace)
        nxt = profile.replace(i, new)
        trace.steps.append(FipStep(i, profile[i], new, ev(profile).objective, ev(nxt).objective))
        profile = nxt
        i = 0
    res = ev(profile)
    sol = Solution.from_alloc(profile, res, method="fip", start=start_tag,
                              iterations=trace.iterations, start_objective=ev(start).objective,
                              allocation_solves=ev.calls)
    return sol, trace


@dataclass(frozen=True)
class NeReport:
    ok: bool
    worst_gain: float            # largest u_i(a) - u_i(a_i', a_-i) over all deviations
    user: int | None = None
    deviation: Strategy | None = None

    def __bool__(self):
        return self.ok


def verify_ne(profile: StrategyProfile, scenario: Scenario, eps: float = DEFAULT_EPS,
              alloc_tol: float | None = None) -> NeReport:
    """Check every unilateral deviation, each with its own optimal allocation."""
    require_valid(profile, scenario)
    ev = _Evaluator(scenario, _check_tol(eps, alloc_tol))
    worst, who, dev = -float("inf"), None, None
    for i in range(scenario.n_users):
        u = ev.cost(i, profile)
        for s in strategy_set(i, scenario):
            if s == profile[i]:
                continue
            gain = u - ev.cost(i, profile.replace(i, s))
            if gain > worst:
                worst, who, dev = gain, i, s
    if who is None:
        return NeReport(True, 0.0)
    return NeReport(worst <= eps, worst, who, dev)


def mcap_ne(scenario: Scenario, trials: int = DEFAULT_TRIALS, seed: int = 0,
            eps: float = DEFAULT_EPS, sdp_tol: float = DEFAULT_SDP_TOL,
            max_iter: int | None = None, alloc_tol: float | None = None) -> tuple[Solution, FipTrace]:
    """MCAP followed by a best-response path started from its profile."""
    tol = _check_tol(eps, alloc_tol)
    start = mcap(scenario, trials, seed, sdp_tol, tol)
    sol, trace = fip(start.profile, scenario, eps, max_iter, tol, start_tag="mcap")
    meta = dict(start.meta)
    meta.update(method="mcap_ne", mcap_objective=start.objective, ne_objective=sol.objective,
                iterations=trace.iterations)
    return Solution(sol.profile, sol.allocation, sol.costs, meta), trace
