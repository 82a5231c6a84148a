"""Command-line front end.

Every subcommand writes exactly one report.  Options may also come from a
YAML file passed with ``--config`` (keys are option names); flags given on
the command line win, and the resolved options are echoed in the report
metadata together with the text of every input file.

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from weakinfo import __version__
from weakinfo.config import load_economy, load_run_config, load_terminal_law
from weakinfo.convergence import convergence_sweep, parse_family, walk_moves
from weakinfo.errors import CapExceeded, NumericalFailure, ValidationError
from weakinfo.lattice import DEFAULT_PATH_CAP
from weakinfo.report import emit_report
from weakinfo.utility import parse_utility
from weakinfo.valuation import (
    hedge_strategy,
    martingale_residual,
    optimal_wealth_process,
    simulate_strategy,
    value_discrete,
)
from weakinfo.walks import KINDS, WalkSpec, limit_of, walk_table
from weakinfo.weak_measure import PHI, markov_check, minimal_measure, minimality_check, transition_table

COMMANDS = ("value", "transitions", "markov", "minimality", "sweep", "walks", "hedge")
RATIONAL_OK = {"transitions", "markov", "minimality"}

COMMON_DEFAULTS = {"out": None, "seed": 0, "threads": None, "path_cap": DEFAULT_PATH_CAP, "arithmetic": "float"}
DEFAULTS = {
    "value": {"format": "json", "x": 1.0},
    "hedge": {"format": "csv", "x": 1.0},
    "transitions": {"format": "csv"},
    "markov": {"format": "csv"},
    "minimality": {"format": "csv", "phi": "square", "trials": 1000},
    "sweep": {
        "format": "csv", "walk": "binomial", "n": "64,128,256,512,1024,2048,4096",
        "utility": "log", "x": 1.0, "xi": "tilt:0.5", "cap_sigmas": 8.0, "timings": False,
    },
    "walks": {
        "format": "csv", "kind": "binomial", "p": 0.6, "q": None, "probs": None,
        "n": "64,256,1024,4096", "samples": 100000, "repeats": 1,
        "normalization": "centered", "sigma": None,
    },
}
REQUIRED = {
    "value": ("economy", "nu", "utility"),
    "hedge": ("economy", "nu", "utility"),
    "transitions": ("economy", "nu"),
    "markov": ("economy", "nu"),
    "minimality": ("economy", "nu"),
    "sweep": (),
    "walks": (),
}


def _int_list(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        items = text
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        return [int(t) for t in items]
    except (TypeError, ValueError):
        raise ValidationError(f"n: expected comma-separated integers, got {text!r}") from None


def _float_list(text) -> list[float]:
    items = text if isinstance(text, list) else str(text).split(",")
    try:
        return [float(t) for t in items]
    except (TypeError, ValueError):
        raise ValidationError(f"probs: expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakinfo", description="Value of weak information on multinomial lattices.")
    parser.add_argument("--version", action="version", version=f"weakinfo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="YAML file with option defaults")
    common.add_argument("--out", help="report path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("--path-cap", type=int, help=f"largest k**n * n path-steps to enumerate (default {DEFAULT_PATH_CAP})")
    common.add_argument("--arithmetic", choices=("float", "rational"))

    lattice = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    lattice.add_argument("--economy", help="economy YAML file")
    lattice.add_argument("--nu", help="terminal anticipation YAML file")

    def add(name, help_text, parents):
        return sub.add_parser(name, help=help_text, parents=parents, argument_default=argparse.SUPPRESS)

    for name in ("value", "hedge"):
        p = add(name, "optimal value and multiplier" if name == "value" else "optimal wealth and replicating strategy",
                [common, lattice])
        p.add_argument("--utility", help="log, power:<alpha> or table:<csv>")
        p.add_argument("--x", type=float, help="initial capital")
    add("transitions", "transition probabilities of the minimal measure", [common, lattice])
    add("markov", "exhaustive Markov property check", [common, lattice])
    p = add("minimality", "random competitor measures with the same terminal law", [common, lattice])
    p.add_argument("--phi", choices=sorted(PHI))
    p.add_argument("--trials", type=int)

    p = add("sweep", "discrete values on refining lattices against the continuous limit", [common])
    p.add_argument("--walk", help="binomial, trinomial or multinomial:<k>")
    p.add_argument("--n", help="comma-separated step counts")
    p.add_argument("--utility")
    p.add_argument("--x", type=float)
    p.add_argument("--xi", help="flat or tilt:<theta>")
    p.add_argument("--cap-sigmas", help="cap of the tilt in standard deviations, or 'none'")
    p.add_argument("--timings", action="store_true", help="fill the seconds column (breaks byte-identity)")

    p = add("walks", "Monte Carlo diagnostics of scaled random walks", [common])
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--probs", help="comma-separated component probabilities (multinomial)")
    p.add_argument("--n", help="comma-separated step counts")
    p.add_argument("--samples", type=int)
    p.add_argument("--repeats", type=int, help="number of consecutive seeds starting at --seed")
    p.add_argument("--normalization", choices=("centered", "raw"))
    p.add_argument("--sigma", type=float)
    return parser


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """Merge defaults, config file and flags; returns ``(options, inputs)``."""
    given = vars(args).copy()
    command = given.pop("command")
    inputs = {}
    from_file = {}
    if "config" in given:
        path = given.pop("config")
        from_file, text = load_run_config(path)
        inputs["config"] = {"path": path, "text": text}
        from_file.pop("command", None)
    opts = {**COMMON_DEFAULTS, **DEFAULTS[command], **from_file, **given}
    allowed = set(COMMON_DEFAULTS) | set(DEFAULTS[command]) | set(REQUIRED[command])
    if command in ("value", "hedge", "transitions", "markov", "minimality"):
        allowed |= {"economy", "nu"}
    unknown = sorted(set(opts) - allowed)
    if unknown:
        raise ValidationError(f"config: option(s) {unknown} do not apply to '{command}'")
    for key in REQUIRED[command]:
        if opts.get(key) is None:
            raise ValidationError(f"{key}: required for '{command}'")
    if opts["arithmetic"] not in ("float", "rational"):
        raise ValidationError("arithmetic: must be 'float' or 'rational'")
    if opts["arithmetic"] == "rational" and command not in RATIONAL_OK:
        raise ValidationError(f"arithmetic: rational mode is only available for {sorted(RATIONAL_OK)}")
    if opts["format"] not in ("csv", "json"):
        raise ValidationError("format: must be 'csv' or 'json'")
    opts["command"] = command
    return opts, inputs


def _threads(opts) -> int:
    t = opts["threads"]
    if t is None:
        return os.cpu_count() or 1
    if int(t) < 1:
        raise ValidationError("threads: must be at least 1")
    return int(t)


def _lattice_inputs(opts, inputs):
    exact = opts["arithmetic"] == "rational"
    economy, text = load_economy(opts["economy"], exact)
    inputs["economy"] = {"path": opts["economy"], "text": text}
    nu, text = load_terminal_law(opts["nu"], economy, exact)
    inputs["nu"] = {"path": opts["nu"], "text": text}
    if economy.path_steps() > int(opts["path_cap"]) and opts["command"] in RATIONAL_OK | {"hedge"}:
        raise CapExceeded(economy.path_steps(), int(opts["path_cap"]))
    return economy, nu


def run_value(opts, inputs):
    economy, nu = _lattice_inputs(opts, inputs)
    res = value_discrete(economy, nu, parse_utility(opts["utility"]), float(opts["x"]))
    rows = [{"u": res.value, "lambda": res.multiplier, "budget_residual": res.budget_residual}]
    return rows, ("u", "lambda", "budget_residual"), {}


def run_hedge(opts, inputs):
    economy, nu = _lattice_inputs(opts, inputs)
    x = float(opts["x"])
    res = value_discrete(economy, nu, parse_utility(opts["utility"]), x)
    wealth = optimal_wealth_process(economy, nu, parse_utility(opts["utility"]), x, res)
    strategy = hedge_strategy(economy, wealth)
    rep = simulate_strategy(strategy, x, wealth)
    rows = []
    for m in range(economy.n_periods + 1):
        for c in economy.classes(m):
            rows.append({
                "time": m, "state": c, "price": float(economy.price(c)), "wealth": wealth.values[(m, c)],
                "shares": strategy.shares.get((m, c)), "bond": strategy.bond.get((m, c)),
            })
    summary = {
        "u": res.value, "lambda": res.multiplier, "martingale_residual": martingale_residual(wealth),
        "replication_error": rep.max_error, "self_financing_error": rep.self_financing_error,
        "min_wealth": rep.min_wealth,
    }
    return rows, ("time", "state", "price", "wealth", "shares", "bond"), summary


def run_transitions(opts, inputs):
    economy, nu = _lattice_inputs(opts, inputs)
    measure = minimal_measure(economy, nu, enumerate_paths=False)
    rows = [
        {"time": m, "state": c, "move": e, "probability": p, "occupancy": measure.marginals[(m, c)]}
        for m, c, e, p in transition_table(measure)
    ]
    return rows, ("time", "state", "move", "probability", "occupancy"), {}


def run_markov(opts, inputs):
    economy, nu = _lattice_inputs(opts, inputs)
    rep = markov_check(minimal_measure(economy, nu, cap=int(opts["path_cap"])))
    rows = [{"time": m, "max_deviation": d} for m, d in enumerate(rep.per_time)]
    aliases = {str(m): [[":".join(map(str, c)) for c in g] for g in groups] for m, groups in rep.aliases.items()}
    return rows, ("time", "max_deviation"), {
        "max_deviation": rep.max_deviation, "histories": rep.histories, "price_aliases": aliases,
    }


def run_minimality(opts, inputs):
    economy, nu = _lattice_inputs(opts, inputs)
    rep = minimality_check(economy, nu, opts["phi"], int(opts["trials"]), int(opts["seed"]), _threads(opts))
    rows = [{"trial": t, "gap": float(g)} for t, g in enumerate(rep.gaps)]
    return rows, ("trial", "gap"), {
        "phi": rep.phi, "baseline": float(rep.baseline), "min_gap": float(rep.min_gap), "violations": rep.violations,
    }


def run_sweep(opts, inputs):
    walk = str(opts["walk"])
    walk_moves(walk)
    cap = opts["cap_sigmas"]
    if cap is None or str(cap).lower() == "none":
        cap = None
    else:
        try:
            cap = float(cap)
        except ValueError:
            raise ValidationError(f"cap_sigmas: expected a number or 'none', got {cap!r}") from None
    family = parse_family(str(opts["xi"]), walk, cap)
    rep = convergence_sweep(
        family, parse_utility(str(opts["utility"])), float(opts["x"]), walk, _int_list(opts["n"]), _threads(opts)
    )
    rows = [
        {"n": r.n, "u_discrete": r.u_discrete, "u_limit": r.u_limit, "abs_error": r.abs_error,
         "seconds": r.seconds if opts["timings"] else None}
        for r in rep.rows
    ]
    summary = {
        "u_limit": rep.u_limit, "lambda_limit": rep.multiplier_limit,
        "lambda_n": [r.multiplier for r in rep.rows], "sup_density": rep.sup_density,
        "tail_decreasing": rep.tail_decreasing,
    }
    return rows, ("n", "u_discrete", "u_limit", "abs_error", "seconds"), summary


def run_walks(opts, inputs):
    kind = opts["kind"]
    if kind not in KINDS:
        raise ValidationError(f"kind: must be one of {KINDS}")
    if kind == "multinomial":
        if opts["probs"] is None:
            raise ValidationError("probs: required for kind 'multinomial'")
        probs = _float_list(opts["probs"])
    elif kind == "trinomial":
        if opts["q"] is None:
            raise ValidationError("q: required for kind 'trinomial'")
        probs = [float(opts["p"]), float(opts["q"])]
    else:
        probs = [float(opts["p"])]
    n_list = _int_list(opts["n"])
    seed, repeats = int(opts["seed"]), int(opts["repeats"])
    if repeats < 1:
        raise ValidationError("repeats: must be at least 1")
    sigma = None if opts["sigma"] is None else float(opts["sigma"])
    table = walk_table(kind, probs, n_list, int(opts["samples"]), range(seed, seed + repeats),
                       opts["normalization"], sigma, _threads(opts))
    rows = [vars(r) for r in table]
    limits = {str(n): vars(limit_of(WalkSpec(kind, tuple(probs), n, sigma, opts["normalization"]))) for n in n_list}
    return rows, ("kind", "n", "samples", "seed", "mean", "var", "ks", "charfn_gap"), {"limit": limits}


RUNNERS = {
    "value": run_value, "hedge": run_hedge, "transitions": run_transitions, "markov": run_markov,
    "minimality": run_minimality, "sweep": run_sweep, "walks": run_walks,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts, inputs = resolve(args)
        rows, schema, summary = RUNNERS[opts["command"]](opts, inputs)
        meta = {"tool": "weakinfo", "version": __version__, "command": opts["command"],
                "config": {k: v for k, v in opts.items() if k != "out"}, "inputs": inputs}
        if summary:
            meta["summary"] = summary
        emit_report(rows, schema, opts["format"], opts["out"], meta)
    except ValidationError as exc:
        print(f"weakinfo: error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"weakinfo: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"weakinfo: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
