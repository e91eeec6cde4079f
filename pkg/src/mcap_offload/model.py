"""Problem instances and exact cost evaluation for multi-CAP task offloading.

Units are SI throughout: data in bits, bandwidth in Hz, rates in bits/s or
cycles/s, times in seconds, energies in joules.  Conversion from MB/MHz/Mbps
happens only when loading generator configs.

Site numbering: 0 is local processing, ``j >= 1`` is CAP ``j``.  Forbidden
sets hold 1-based CAP ids so they compare directly against sites.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LOCAL = 0

SCENARIO_FORMAT = "mcap-offload-scenario/1"


class InvalidProfileError(ValueError):
    """Raised when a strategy profile cannot be used with a scenario."""


@dataclass(frozen=True)
class Task:
    d_in: float
    d_out: float
    cycles: float
    alpha: float
    beta: float
    cloud_utility: float
    eta_up: tuple[float, ...]
    eta_down: tuple[float, ...]
    local_time_per_bit: float
    local_energy_per_bit: float
    tx_energy_per_bit: float
    rx_energy_per_bit: float
    forbidden: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "eta_up", tuple(float(v) for v in self.eta_up))
        object.__setattr__(self, "eta_down", tuple(float(v) for v in self.eta_down))
        object.__setattr__(self, "forbidden", frozenset(int(k) for k in self.forbidden))
        if len(self.eta_up) != len(self.eta_down):
            raise ValueError("eta_up and eta_down must have one entry per CAP")
        # d_in/d_out may be zero (degenerate tasks); everything else is a rate or weight
        for name in ("d_in", "d_out", "cloud_utility", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("cycles", "local_time_per_bit", "local_energy_per_bit",
                     "tx_energy_per_bit", "rx_energy_per_bit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if any(not v > 0 for v in self.eta_up + self.eta_down):
            raise ValueError("spectral efficiencies must be strictly positive")
        m = len(self.eta_up)
        if any(k < 1 or k > m for k in self.forbidden):
            raise ValueError(f"forbidden CAP ids must lie in 1..{m}")

    @property
    def local_time(self) -> float:
        return self.local_time_per_bit * self.d_in

    @property
    def local_energy(self) -> float:
        return self.local_energy_per_bit * self.d_in

    @property
    def tx_energy(self) -> float:
        return self.tx_energy_per_bit * self.d_in

    @property
    def rx_energy(self) -> float:
        return self.rx_energy_per_bit * self.d_out

    @property
    def cloud_energy(self) -> float:
        """Extra weighted-utility energy charged for cloud processing."""
        return self.beta * self.cloud_utility


@dataclass(frozen=True)
class Cap:
    c_ul: float
    c_dl: float
    c_total: float
    f_a: float

    def __post_init__(self):
        if not (self.c_ul > 0 and self.c_dl > 0 and self.c_total > 0 and self.f_a > 0):
            raise ValueError("CAP capacities must be strictly positive")
        if self.c_ul > self.c_total or self.c_dl > self.c_total:
            raise ValueError("c_ul and c_dl may not exceed c_total")


@dataclass(frozen=True)
class Cloud:
    f_c: float
    r_ac: float

    def __post_init__(self):
        if not (self.f_c > 0 and self.r_ac > 0):
            raise ValueError("cloud rates must be strictly positive")


@dataclass(frozen=True)
class Scenario:
    tasks: tuple[Task, ...]
    caps: tuple[Cap, ...]
    cloud: Cloud

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "caps", tuple(self.caps))
        if not self.tasks or not self.caps:
            raise ValueError("a scenario needs at least one task and one CAP")
        for i, task in enumerate(self.tasks):
            if len(task.eta_up) != len(self.caps):
                raise ValueError(f"task {i} has {len(task.eta_up)} efficiencies for {len(self.caps)} CAPs")

    @property
    def n_users(self) -> int:
        return len(self.tasks)

    @property
    def n_caps(self) -> int:
        return len(self.caps)

    @cached_property
    def arrays(self) -> "ScenarioArrays":
        return ScenarioArrays.from_scenario(self)

    def allowed_caps(self, i: int) -> list[int]:
        return [j for j in range(1, self.n_caps + 1) if j not in self.tasks[i].forbidden]

    def with_tasks(self, tasks: Iterable[Task]) -> "Scenario":
        return Scenario(tuple(tasks), self.caps, self.cloud)


@dataclass(frozen=True)
class ScenarioArrays:
    """Column view of a scenario, in the layout the numeric kernels expect."""

    up_work: np.ndarray       # d_in / eta_up, shape (N, M); seconds * Hz
    down_work: np.ndarray     # d_out / eta_down, shape (N, M)
    cycles: np.ndarray        # (N,)
    local_time: np.ndarray    # (N,)
    cloud_time: np.ndarray    # CAP-to-cloud transfer plus cloud compute, (N,)
    c_ul: np.ndarray          # (M,)
    c_dl: np.ndarray
    c_total: np.ndarray
    f_a: np.ndarray

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "ScenarioArrays":
        t = sc.tasks
        d_in = np.array([x.d_in for x in t])
        d_out = np.array([x.d_out for x in t])
        cycles = np.array([x.cycles for x in t])
        eta_u = np.array([x.eta_up for x in t])
        eta_d = np.array([x.eta_down for x in t])
        cloud_time = (d_in + d_out) / sc.cloud.r_ac + cycles / sc.cloud.f_c
        return cls(
            up_work=d_in[:, None] / eta_u,
            down_work=d_out[:, None] / eta_d,
            cycles=cycles,
            local_time=np.array([x.local_time for x in t]),
            cloud_time=cloud_time,
            c_ul=np.array([c.c_ul for c in sc.caps]),
            c_dl=np.array([c.c_dl for c in sc.caps]),
            c_total=np.array([c.c_total for c in sc.caps]),
            f_a=np.array([c.f_a for c in sc.caps]),
        )


@dataclass(frozen=True, order=True)
class Strategy:
    site: int = LOCAL
    cloud: bool = False

    @property
    def is_local(self) -> bool:
        return self.site == LOCAL

    def __str__(self):
        if self.site == LOCAL:
            return "local"
        return f"cap{self.site}" + ("+cloud" if self.cloud else "")

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip().lower()
        if text == "local":
            return cls()
        cloud = text.endswith("+cloud")
        body = text[: -len("+cloud")] if cloud else text
        if not body.startswith("cap"):
            raise ValueError(f"cannot parse strategy {text!r}")
        return cls(int(body[3:]), cloud)


@dataclass(frozen=True)
class StrategyProfile:
    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    def __iter__(self):
        return iter(self.strategies)

    def __str__(self):
        return " ".join(str(s) for s in self.strategies)

    def replace(self, i: int, strategy: Strategy) -> "StrategyProfile":
        s = list(self.strategies)
        s[i] = strategy
        return StrategyProfile(tuple(s))

    @property
    def sites(self) -> np.ndarray:
        return np.array([s.site for s in self.strategies], dtype=np.int64)

    @property
    def cloud_flags(self) -> np.ndarray:
        return np.array([s.cloud for s in self.strategies], dtype=np.bool_)

    @classmethod
    def all_local(cls, n: int) -> "StrategyProfile":
        return cls(tuple(Strategy() for _ in range(n)))

    @classmethod
    def parse(cls, text: str) -> "StrategyProfile":
        return cls(tuple(Strategy.parse(t) for t in text.split()))


@dataclass(frozen=True)
class Allocation:
    c_up: np.ndarray    # (N, M) Hz
    c_down: np.ndarray  # (N, M) Hz
    f_cap: np.ndarray   # (N, M) cycles/s

    @classmethod
    def zeros(cls, n: int, m: int) -> "Allocation":
        return cls(np.zeros((n, m)), np.zeros((n, m)), np.zeros((n, m)))

    def check(self, profile: StrategyProfile, scenario: Scenario, slack: float = 1e-9) -> list[str]:
        """Return a list of violated allocation invariants (empty when valid)."""
        problems = []
        n, m = scenario.n_users, scenario.n_caps
        for name in ("c_up", "c_down", "f_cap"):
            arr = getattr(self, name)
            if arr.shape != (n, m):
                return [f"{name} has shape {arr.shape}, expected {(n, m)}"]
            if (arr < 0).any():
                problems.append(f"{name} has negative entries")
        for i, s in enumerate(profile):
            for j in range(m):
                if s.site != j + 1 and (self.c_up[i, j] or self.c_down[i, j] or self.f_cap[i, j]):
                    problems.append(f"user {i} holds resources at CAP {j + 1} without being assigned there")
            if s.cloud and self.f_cap[i].any():
                problems.append(f"cloud-forwarded user {i} holds CAP processing rate")
        a = scenario.arrays
        up, down = self.c_up.sum(0), self.c_down.sum(0)
        for j in range(m):
            if up[j] > a.c_ul[j] * (1 + slack):
                problems.append(f"uplink capacity exceeded at CAP {j + 1}")
            if down[j] > a.c_dl[j] * (1 + slack):
                problems.append(f"downlink capacity exceeded at CAP {j + 1}")
            if up[j] + down[j] > a.c_total[j] * (1 + slack):
                problems.append(f"total bandwidth exceeded at CAP {j + 1}")
            if self.f_cap[:, j].sum() > a.f_a[j] * (1 + slack):
                problems.append(f"processing capacity exceeded at CAP {j + 1}")
        return problems


@dataclass(frozen=True)
class CostBreakdown:
    energy: np.ndarray   # (N,) joules, unweighted
    delay: np.ndarray    # (N,) seconds
    alpha: np.ndarray    # (N,) weights carried along for recomputation

    @property
    def weighted_energy(self) -> np.ndarray:
        return self.alpha * self.energy

    @property
    def round_time(self) -> float:
        return float(self.delay.max())

    @property
    def objective(self) -> float:
        return float(self.weighted_energy.sum()) + self.round_time

    def individual(self, i: int) -> float:
        return float(self.weighted_energy[i]) + self.round_time


@dataclass(frozen=True)
class Violation:
    user: int
    constraint: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_profile(profile: StrategyProfile, scenario: Scenario) -> ValidationReport:
    """Check one-site, cloud-via-CAP and placement constraints for every user.

    Raises InvalidProfileError on a length mismatch; constraint violations are
    reported, not raised.
    """
    if len(profile) != scenario.n_users:
        raise InvalidProfileError(
            f"profile has {len(profile)} strategies for {scenario.n_users} users")
    found = []
    for i, s in enumerate(profile):
        if not 0 <= s.site <= scenario.n_caps:
            found.append(Violation(i, "one-site", f"site {s.site} outside 0..{scenario.n_caps}"))
            continue
        if s.cloud and s.site == LOCAL:
            found.append(Violation(i, "cloud-via-cap", "cloud processing requires a CAP"))
        if s.site in scenario.tasks[i].forbidden:
            found.append(Violation(i, "placement", f"CAP {s.site} is forbidden"))
    return ValidationReport(tuple(found))


def require_valid(profile: StrategyProfile, scenario: Scenario) -> None:
    report = validate_profile(profile, scenario)
    if not report.ok:
        v = report.violations[0]
        raise InvalidProfileError(f"user {v.user} violates {v.constraint}: {v.detail}")


def _ratio(num: float, den: float, what: str, i: int) -> float:
    if num == 0:
        return 0.0
    if den == 0:
        raise ZeroDivisionError(f"user {i} is assigned zero {what}")
    return num / den


def evaluate(profile: StrategyProfile, alloc: Allocation, scenario: Scenario) -> CostBreakdown:
    """Per-user energies and delays of a profile under a given allocation."""
    require_valid(profile, scenario)
    n = scenario.n_users
    energy = np.empty(n)
    delay = np.empty(n)
    for i, (s, task) in enumerate(zip(profile, scenario.tasks)):
        if s.site == LOCAL:
            energy[i] = task.local_energy
            delay[i] = task.local_time
            continue
        j = s.site - 1
        t = (_ratio(task.d_in, task.eta_up[j] * alloc.c_up[i, j], "uplink bandwidth", i)
             + _ratio(task.d_out, task.eta_down[j] * alloc.c_down[i, j], "downlink bandwidth", i))
        e = task.tx_energy + task.rx_energy
        if s.cloud:
            t += (task.d_in + task.d_out) / scenario.cloud.r_ac + task.cycles / scenario.cloud.f_c
            e += task.cloud_energy
        else:
            t += _ratio(task.cycles, alloc.f_cap[i, j], "CAP processing rate", i)
        energy[i] = e
        delay[i] = t
    alpha = np.array([t.alpha for t in scenario.tasks])
    return CostBreakdown(energy, delay, alpha)


def individual_cost(i: int, profile: StrategyProfile, alloc: Allocation, scenario: Scenario) -> float:
    """Own weighted energy of user ``i`` plus the shared round time."""
    return evaluate(profile, alloc, scenario).individual(i)


def profile_energy(profile: StrategyProfile, scenario: Scenario) -> np.ndarray:
    """Unweighted per-user energy; it does not depend on the allocation."""
    out = np.empty(scenario.n_users)
    for i, (s, task) in enumerate(zip(profile, scenario.tasks)):
        if s.site == LOCAL:
            out[i] = task.local_energy
        else:
            out[i] = task.tx_energy + task.rx_energy + (task.cloud_energy if s.cloud else 0.0)
    return out


# -- serialization -----------------------------------------------------------

_TASK_UNITS = {
    "d_in": "bit", "d_out": "bit", "cycles": "cycle", "alpha": "s/J",
    "beta": "J/utility", "cloud_utility": "utility", "eta_up": "bit/s/Hz",
    "eta_down": "bit/s/Hz", "local_time_per_bit": "s/bit",
    "local_energy_per_bit": "J/bit", "tx_energy_per_bit": "J/bit",
    "rx_energy_per_bit": "J/bit", "forbidden": "CAP id (1-based)",
}
_CAP_UNITS = {"c_ul": "Hz", "c_dl": "Hz", "c_total": "Hz", "f_a": "cycle/s"}
_CLOUD_UNITS = {"f_c": "cycle/s", "r_ac": "bit/s"}


def scenario_to_dict(sc: Scenario) -> dict:
    tasks = []
    for t in sc.tasks:
        d = {k: getattr(t, k) for k in _TASK_UNITS}
        d["eta_up"] = list(t.eta_up)
        d["eta_down"] = list(t.eta_down)
        d["forbidden"] = sorted(t.forbidden)
        tasks.append(d)
    return {
        "format": SCENARIO_FORMAT,
        "units": {"task": _TASK_UNITS, "cap": _CAP_UNITS, "cloud": _CLOUD_UNITS},
        "cloud": {k: getattr(sc.cloud, k) for k in _CLOUD_UNITS},
        "caps": [{k: getattr(c, k) for k in _CAP_UNITS} for c in sc.caps],
        "tasks": tasks,
    }


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("format") != SCENARIO_FORMAT:
        raise ValueError(f"unsupported scenario format {d.get('format')!r}")
    tasks = [Task(**{k: v for k, v in t.items()}) for t in d["tasks"]]
    caps = [Cap(**c) for c in d["caps"]]
    return Scenario(tuple(tasks), tuple(caps), Cloud(**d["cloud"]))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=1) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def profile_from_sites(sites: Sequence[int], clouds: Sequence[bool]) -> StrategyProfile:
    return StrategyProfile(tuple(Strategy(int(s), bool(c)) for s, c in zip(sites, clouds)))


def isclose_rel(a: float, b: float, rel: float) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0) or a == b
