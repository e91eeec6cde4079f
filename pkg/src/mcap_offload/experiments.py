"""Scenario generator and parameter sweeps for the simulation study.

Per-round randomness is split into independent streams keyed by
(seed, round, user) and (seed, round, user, CAP), so growing ``n_users`` or
``n_caps`` keeps the draws of the existing users and links.  Sweeps therefore
compare methods and parameter values on common random numbers.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .alloc import DEFAULT_TOL, optimize_allocation
from .model import Cap, Cloud, Scenario, Task

log = logging.getLogger(__name__)

MB = 1e6 * 8      # bits
MHZ = 1e6
MBPS = 1e6

CSV_VERSION = "mcap-offload-results/1"
CSV_COLUMNS = ("parameter", "value", "method", "rounds", "completed", "mean_objective",
               "std_objective", "mean_iterations")
METHODS = ("mcap", "mcap_ne", "random", "random_ne", "oracle")
SWEEP_PARAMETERS = ("n_caps", "n_users", "alpha", "beta", "placement")

_USER_STREAM = 0
_LINK_STREAM = 1
_PLACEMENT_STREAM = 2


@dataclass(frozen=True)
class GeneratorConfig:
    """Simulation defaults; sizes in bits, rates in Hz, bit/s or cycle/s."""

    n_users: int = 10
    n_caps: int = 2
    cycles_per_byte: float = 1900.0
    d_in_range: tuple[float, float] = (10 * MB, 30 * MB)
    d_out_range: tuple[float, float] = (1 * MB, 3 * MB)
    alpha: float = 0.5
    beta: float = 1.7e-7
    c_ul: float = 20 * MHZ
    c_dl: float = 20 * MHZ
    c_total: float = 40 * MHZ
    eta_range: tuple[float, float] = (2.0, 5.0)
    local_cpu: float = 2.39e9
    cap_cpu: float = 5e9
    cloud_cpu: float = 7.5e9
    tx_energy_per_bit: float = 1.42e-7
    rx_energy_per_bit: float = 1.42e-7
    r_ac: float = 15 * MBPS
    local_energy_per_bit: float | None = None
    placement: bool = False
    rounds: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.n_caps < 1:
            raise ValueError("need at least one user and one CAP")
        for name in ("d_in_range", "d_out_range", "eta_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")

    def replace(self, **kw) -> "GeneratorConfig":
        return dataclasses.replace(self, **kw)

    @property
    def local_time_per_bit(self) -> float:
        return self.cycles_per_byte / 8 / self.local_cpu


SAMPLE_LOCAL_ENERGY_PER_BIT = 2.3e-7

_CONFIG_UNITS = {"MB": MB, "MHz": MHZ, "Mbps": MBPS}
_CONFIG_FIELDS = {
    "d_in_range": "MB", "d_out_range": "MB", "c_ul": "MHz", "c_dl": "MHz",
    "c_total": "MHz", "r_ac": "Mbps",
}


def config_from_mapping(d: dict, base: GeneratorConfig | None = None) -> GeneratorConfig:
    """Build a config from a parsed YAML/JSON mapping.

    Sizes, bandwidths and rates may be given as ``{value: 20, unit: MHz}`` or
    as the suffixed keys ``c_ul_MHz`` etc.; plain numbers use internal units.
    """
    base = base or GeneratorConfig()
    known = {f.name for f in dataclasses.fields(GeneratorConfig)}
    out = {}
    for key, val in d.items():
        name, unit = key, None
        for u in _CONFIG_UNITS:
            if key.endswith("_" + u):
                name, unit = key[: -len(u) - 1], u
        if isinstance(val, dict):
            unit, val = val.get("unit"), val["value"]
        if name not in known:
            raise ValueError(f"unknown config field {key!r}")
        if unit is not None:
            if unit not in _CONFIG_UNITS or _CONFIG_FIELDS.get(name) != unit:
                raise ValueError(f"unit {unit!r} not accepted for {name}")
            f = _CONFIG_UNITS[unit]
            val = tuple(v * f for v in val) if isinstance(val, (list, tuple)) else val * f
        elif isinstance(val, list):
            val = tuple(val)
        out[name] = val
    return base.replace(**out)


def load_config(path: str | Path, base: GeneratorConfig | None = None) -> GeneratorConfig:
    import yaml

    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    return config_from_mapping(data, base)


def round_seed(seed: int, round_index: int) -> int:
    """Integer seed for round-level draws (heuristic trials, random starts)."""
    return int(np.random.SeedSequence([seed, round_index]).generate_state(1)[0])


def generate_scenario(cfg: GeneratorConfig, round_index: int) -> Scenario:
    if cfg.local_energy_per_bit is None:
        raise ValueError("local_energy_per_bit is required (no default); "
                         f"the documented sample value is {SAMPLE_LOCAL_ENERGY_PER_BIT}")
    n, m = cfg.n_users, cfg.n_caps
    tasks = []
    for i in range(n):
        rng = np.random.default_rng([cfg.seed, round_index, _USER_STREAM, i])
        d_in = float(rng.uniform(*cfg.d_in_range))
        d_out = float(rng.uniform(*cfg.d_out_range))
        etas = [np.random.default_rng([cfg.seed, round_index, _LINK_STREAM, i, j]).uniform(
            *cfg.eta_range) for j in range(m)]
        forbidden: frozenset[int] = frozenset()
        if cfg.placement:
            pick = int(np.random.default_rng([cfg.seed, round_index, _PLACEMENT_STREAM, i])
                       .integers(m + 1))
            forbidden = frozenset({pick}) if pick else frozenset()
        tasks.append(Task(
            d_in=d_in, d_out=d_out, cycles=d_in / 8 * cfg.cycles_per_byte,
            alpha=cfg.alpha, beta=cfg.beta, cloud_utility=d_in,
            eta_up=tuple(float(e) for e in etas), eta_down=tuple(float(e) for e in etas),
            local_time_per_bit=cfg.local_time_per_bit,
            local_energy_per_bit=cfg.local_energy_per_bit,
            tx_energy_per_bit=cfg.tx_energy_per_bit, rx_energy_per_bit=cfg.rx_energy_per_bit,
            forbidden=forbidden))
    caps = tuple(Cap(cfg.c_ul, cfg.c_dl, cfg.c_total, cfg.cap_cpu) for _ in range(m))
    return Scenario(tuple(tasks), caps, Cloud(cfg.cloud_cpu, cfg.r_ac))


# -- method runners ------------------------------------------------------------

@dataclass(frozen=True)
class MethodOutcome:
    objective: float
    iterations: float = math.nan
    wall_time: float = math.nan
    error: str = ""


@dataclass(frozen=True)
class RunOptions:
    trials: int = 10
    sdp_tol: float = 1e-7
    alloc_tol: float = DEFAULT_TOL
    ne_eps: float = 1e-6
    max_iter: int | None = None
    budget: int = 2_000_000


def run_method(method: str, scenario: Scenario, seed: int, opts: RunOptions = RunOptions()) -> MethodOutcome:
    """Run one method on one scenario; failures come back as an outcome with ``error`` set."""
    from . import game, oracle, relax

    t0 = time.perf_counter()
    try:
        if method == "mcap":
            sol = relax.mcap(scenario, opts.trials, seed, opts.sdp_tol, opts.alloc_tol)
            obj, it = sol.objective, math.nan
        elif method == "mcap_ne":
            sol, trace = game.mcap_ne(scenario, opts.trials, seed, opts.ne_eps,
                                      sdp_tol=opts.sdp_tol, max_iter=opts.max_iter)
            obj, it = sol.objective, trace.iterations
        elif method == "random":
            prof = oracle.random_profile(scenario, seed)
            obj, it = optimize_allocation(prof, scenario, opts.alloc_tol).objective, math.nan
        elif method == "random_ne":
            prof = oracle.random_profile(scenario, seed)
            sol, trace = game.fip(prof, scenario, opts.ne_eps, opts.max_iter, start_tag="random")
            obj, it = sol.objective, trace.iterations
        elif method == "oracle":
            sol = oracle.exhaustive(scenario, opts.budget)
            obj, it = sol.objective, math.nan
        else:
            raise ValueError(f"unknown method {method!r}")
    except (oracle.BudgetExceededError, relax.SdpSolveError, game.FipError) as exc:
        log.warning("%s failed: %s", method, exc)
        return MethodOutcome(math.nan, error=type(exc).__name__)
    return MethodOutcome(obj, it, time.perf_counter() - t0)


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    methods: tuple[str, ...] = ("mcap", "mcap_ne")
    rounds: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.rounds < 1 or not self.values:
            raise ValueError("need at least one value and one round")

    def config_for(self, cfg: GeneratorConfig, value) -> GeneratorConfig:
        if self.parameter == "placement":
            return cfg.replace(placement=bool(value), seed=self.seed, rounds=self.rounds)
        cast = int if self.parameter in ("n_caps", "n_users") else float
        return cfg.replace(**{self.parameter: cast(value)}, seed=self.seed, rounds=self.rounds)


@dataclass(frozen=True)
class ResultRow:
    parameter: str
    value: float
    method: str
    rounds: int
    completed: int
    mean_objective: float
    std_objective: float
    mean_iterations: float
    mean_wall_time: float
    objectives: tuple[float, ...] = field(default=(), repr=False)

    def csv_cells(self) -> list[str]:
        return [self.parameter, repr(self.value), self.method, str(self.rounds), str(self.completed),
                repr(self.mean_objective), repr(self.std_objective), repr(self.mean_iterations)]


def _aggregate(parameter, value, method, outcomes: Sequence[MethodOutcome]) -> ResultRow:
    obj = np.array([o.objective for o in outcomes])
    ok = np.isfinite(obj)
    its = np.array([o.iterations for o in outcomes])
    wall = np.array([o.wall_time for o in outcomes])
    mean = float(obj[ok].mean()) if ok.any() else math.nan
    std = float(obj[ok].std(ddof=1)) if ok.sum() > 1 else math.nan
    it_ok = np.isfinite(its)
    return ResultRow(parameter, value, method, len(outcomes), int(ok.sum()), mean, std,
                     float(its[it_ok].mean()) if it_ok.any() else math.nan,
                     float(wall[np.isfinite(wall)].mean()) if np.isfinite(wall).any() else math.nan,
                     tuple(float(v) for v in obj))


def check_oracle_budget(spec: SweepSpec, cfg: GeneratorConfig, budget: int) -> None:
    from .oracle import BudgetExceededError

    if "oracle" not in spec.methods:
        return
    for v in spec.values:
        c = spec.config_for(cfg, v)
        size = (1 + 2 * c.n_caps) ** c.n_users
        if size > budget:
            raise BudgetExceededError(size, budget)


def run_sweep(spec: SweepSpec, cfg: GeneratorConfig, out_dir: str | Path | None = None,
              opts: RunOptions = RunOptions(),
              progress: Callable[[str], None] | None = None) -> list[ResultRow]:
    """Run every method on ``rounds`` scenarios per sweep value.

    With ``out_dir`` set, writes ``results.csv``, ``plotdata_<parameter>.txt``
    and the informational ``timing.csv``; only the latter depends on wall time.
    """
    check_oracle_budget(spec, cfg, opts.budget)
    rows = []
    for value in spec.values:
        c = spec.config_for(cfg, value)
        per_method: dict[str, list[MethodOutcome]] = {m: [] for m in spec.methods}
        for r in range(spec.rounds):
            sc = generate_scenario(c, r)
            s = round_seed(spec.seed, r)
            for m in spec.methods:
                per_method[m].append(run_method(m, sc, s, opts))
        for m in spec.methods:
            rows.append(_aggregate(spec.parameter, value, m, per_method[m]))
            if progress:
                progress(f"{spec.parameter}={value} {m}: {rows[-1].mean_objective:.6g}")
    if out_dir is not None:
        write_results(rows, spec, out_dir)
    return rows


def results_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.csv_cells())
    return buf.getvalue()


def plotdata(rows: Sequence[ResultRow], parameter: str) -> str:
    """Whitespace-separated table: x then one mean-objective column per method."""
    methods = list(dict.fromkeys(r.method for r in rows))
    values = list(dict.fromkeys(r.value for r in rows))
    table = {(r.value, r.method): r.mean_objective for r in rows}
    lines = ["# " + " ".join([parameter] + methods)]
    for v in values:
        lines.append(" ".join([repr(float(v))] + [repr(table.get((v, m), math.nan)) for m in methods]))
    return "\n".join(lines) + "\n"


def write_results(rows: Sequence[ResultRow], spec: SweepSpec, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(rows))
    (out / f"plotdata_{spec.parameter}.txt").write_text(plotdata(rows, spec.parameter))
    with open(out / "timing.csv", "w") as fh:
        fh.write("value,method,mean_wall_time_s\n")
        for r in rows:
            fh.write(f"{r.value!r},{r.method},{r.mean_wall_time!r}\n")


@dataclass(frozen=True)
class PlacementComparison:
    method: str
    unconstrained: ResultRow
    constrained: ResultRow

    @property
    def paired_difference(self) -> np.ndarray:
        return np.array(self.constrained.objectives) - np.array(self.unconstrained.objectives)


def compare_placement(cfg: GeneratorConfig, methods: Sequence[str] = ("mcap_ne",),
                      out_dir: str | Path | None = None,
                      opts: RunOptions = RunOptions()) -> list[PlacementComparison]:
    """Same seeds with and without placement constraints."""
    spec = SweepSpec("placement", (0, 1), tuple(methods), cfg.rounds, cfg.seed)
    rows = run_sweep(spec, cfg, out_dir, opts)
    free = {r.method: r for r in rows if r.value == 0}
    cons = {r.method: r for r in rows if r.value == 1}
    return [PlacementComparison(m, free[m], cons[m]) for m in methods]
