"""Command-line interface: ``mcap-offload {gen,solve,sweep,placement}``.

Exit codes: 0 success, 1 usage/input error, 2 enumeration budget refusal,
3 solver failure (SDP non-convergence or improvement path over max_iter).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .alloc import DEFAULT_TOL
from .game import DEFAULT_EPS, FipError, fip, mcap_ne
from .model import StrategyProfile, load_scenario, save_scenario
from .oracle import DEFAULT_BUDGET, BudgetExceededError, exhaustive, random_mapping, random_profile
from .relax import (
    DEFAULT_SDP_TOL,
    DEFAULT_TRIALS,
    SdpSolveError,
    assemble_qcqp,
    dump_qcqp,
    dump_sdp,
    lift_to_sdp,
    mcap,
)

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("mcap_offload")


def _config(args) -> ex.GeneratorConfig:
    cfg = ex.load_config(args.config) if args.config else ex.GeneratorConfig()
    over = {}
    for name in ("n_users", "n_caps", "local_energy_per_bit", "seed", "rounds"):
        val = getattr(args, name, None)
        if val is not None:
            over[name] = val
    return cfg.replace(**over)


def _opts(args) -> ex.RunOptions:
    return ex.RunOptions(trials=args.trials, sdp_tol=args.sdp_tol, alloc_tol=args.alloc_tol,
                         ne_eps=args.ne_eps, max_iter=args.max_iter, budget=args.budget)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    sc = ex.generate_scenario(_config(args), args.round)
    path = _out(args) / f"scenario_{args.round}.json"
    save_scenario(sc, path)
    print(path)
    return EXIT_OK


def _solution_dict(sol, scenario) -> dict:
    c = sol.costs
    return {
        "profile": [str(s) for s in sol.profile],
        "objective": c.objective,
        "round_time": c.round_time,
        "energy": c.energy.tolist(),
        "delay": c.delay.tolist(),
        "c_up": sol.allocation.c_up.tolist(),
        "c_down": sol.allocation.c_down.tolist(),
        "f_cap": sol.allocation.f_cap.tolist(),
        "meta": {k: (v if isinstance(v, (int, float, str, bool)) or v is None else str(v))
                 for k, v in sol.meta.items()},
    }


def cmd_solve(args) -> int:
    if args.scenario:
        sc = load_scenario(args.scenario)
    else:
        sc = ex.generate_scenario(_config(args), args.round)
    out = _out(args)
    if args.dump_qcqp or args.dump_sdp:
        q = assemble_qcqp(sc)
        if args.dump_qcqp:
            dump_qcqp(q, out / "qcqp.txt")
        if args.dump_sdp:
            dump_sdp(lift_to_sdp(q), out / "sdp.txt")
    trace = None
    method = args.method
    start = args.start or {"mcap-ne": "mcap", "random-ne": "random"}.get(method)
    if method == "mcap":
        sol = mcap(sc, args.trials, args.seed, args.sdp_tol, args.alloc_tol, fallback=not args.no_fallback)
    elif method == "oracle":
        sol = exhaustive(sc, args.budget, args.alloc_tol)
    elif method == "random":
        sol = random_mapping(sc, args.seed, args.alloc_tol)
    elif start == "mcap":
        sol, trace = mcap_ne(sc, args.trials, args.seed, args.ne_eps, args.sdp_tol, args.max_iter)
    else:
        if start == "random":
            prof = random_profile(sc, args.seed)
        else:
            prof = StrategyProfile.all_local(sc.n_users)
        sol, trace = fip(prof, sc, args.ne_eps, args.max_iter, start_tag=start)
    (out / "solution.json").write_text(json.dumps(_solution_dict(sol, sc), indent=2) + "\n")
    if trace is not None:
        (out / "trace.txt").write_text(trace.to_text())
    print(f"method={method} objective={sol.objective!r} profile={' '.join(map(str, sol.profile))}")
    return EXIT_OK


def _values(text: str, parameter: str) -> tuple:
    cast = int if parameter in ("n_caps", "n_users", "placement") else float
    return tuple(cast(v) for v in text.split(","))


def cmd_sweep(args) -> int:
    cfg = _config(args)
    spec = ex.SweepSpec(args.parameter, _values(args.values, args.parameter),
                        tuple(m.replace("-", "_") for m in args.methods.split(",")),
                        cfg.rounds, cfg.seed)
    rows = ex.run_sweep(spec, cfg, _out(args), _opts(args), progress=log.info)
    sys.stdout.write(ex.results_csv(rows))
    return EXIT_OK


def cmd_placement(args) -> int:
    cfg = _config(args)
    if args.n_users is None:
        cfg = cfg.replace(n_users=12)
    methods = tuple(m.replace("-", "_") for m in args.methods.split(","))
    pairs = ex.compare_placement(cfg, methods, _out(args), _opts(args))
    for p in pairs:
        print(f"{p.method}: unconstrained={p.unconstrained.mean_objective!r} "
              f"constrained={p.constrained.mean_objective!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcap-offload", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, rounds=True):
        sp.add_argument("--config", help="YAML generator config (accepts MB/MHz/Mbps fields)")
        sp.add_argument("--seed", type=int, default=None)
        if rounds:
            sp.add_argument("--rounds", type=int, default=None)
        sp.add_argument("--out", default=".")
        sp.add_argument("--n-users", dest="n_users", type=int)
        sp.add_argument("--n-caps", dest="n_caps", type=int)
        sp.add_argument("--local-energy-per-bit", dest="local_energy_per_bit", type=float,
                        help=f"J/bit; required unless set in --config (sample value "
                             f"{ex.SAMPLE_LOCAL_ENERGY_PER_BIT})")

    def solver(sp):
        sp.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
        sp.add_argument("--sdp-tol", type=float, default=DEFAULT_SDP_TOL)
        sp.add_argument("--alloc-tol", type=float, default=DEFAULT_TOL,
                        help="relative tolerance for mcap/oracle/random; the -ne methods "
                             "evaluate allocations at ne-eps/10")
        sp.add_argument("--ne-eps", type=float, default=DEFAULT_EPS)
        sp.add_argument("--max-iter", type=int, default=None)
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)

    g = sub.add_parser("gen", help="write a generated scenario file")
    common(g, rounds=False)
    g.add_argument("--round", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one scenario")
    common(s, rounds=False)
    solver(s)
    s.add_argument("--scenario", help="scenario file; otherwise generated from the config")
    s.add_argument("--round", type=int, default=0)
    s.add_argument("--method", choices=("mcap", "mcap-ne", "oracle", "random", "random-ne"),
                   default="mcap-ne")
    s.add_argument("--start", choices=("mcap", "random", "local"),
                   help="improvement-path start for the -ne methods")
    s.add_argument("--no-fallback", action="store_true",
                   help="fail instead of sampling the random mapping when the SDP solve fails")
    s.add_argument("--dump-qcqp", action="store_true")
    s.add_argument("--dump-sdp", action="store_true")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="vary one parameter over many rounds")
    common(w)
    solver(w)
    w.add_argument("--parameter", required=True, choices=ex.SWEEP_PARAMETERS)
    w.add_argument("--values", required=True, help="comma-separated")
    w.add_argument("--methods", default="mcap,mcap_ne")
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("placement", help="paired runs with and without placement constraints")
    common(pl)
    solver(pl)
    pl.add_argument("--methods", default="mcap_ne")
    pl.set_defaults(func=cmd_placement)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", 0) is None and args.command == "solve":
        args.seed = 0
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SdpSolveError, FipError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
