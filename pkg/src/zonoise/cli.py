"""Command-line entry point: bounds, solve, maln, schedule and bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .bounds import CLASSES, MissingConstant, noise_bound
from .harness import (
    ALGORITHMS,
    DEFAULT_FAMILY,
    POLICIES,
    MalnQuery,
    default_set,
    make_policy,
    measure_maln,
    run_algorithm,
)
from .oracles import NoisyOracle
from .problems import FAMILIES, ClassParams, make_instance
from .reductions import schedule_lipschitz_sg, schedule_smooth_sg

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def dump_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(rows[0])
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(r.get(k)) for k in fields})
    return buf.getvalue()


def _cell(v):
    v = _jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def envelope(cmd: str, config: dict, result) -> dict:
    return {"version": "v" + __version__, "command": cmd, "config": config, "seed": config.get("seed"), "result": result}


# --------------------------------------------------------------------------
# argument parsing


def _class_flags(p: argparse.ArgumentParser, n_default: Optional[int] = None):
    p.add_argument("--n", type=int, default=n_default, help="dimension")
    p.add_argument("--M", type=float, help="Lipschitz constant")
    p.add_argument("--R", type=float, help="distance bound from x* to the set")
    p.add_argument("--L", type=float, help="smoothness constant")
    p.add_argument("--mu", type=float, help="strong-growth constant")
    p.add_argument("--nu", type=str, help="strong-growth exponent (number or inf)")


def _out_flags(p: argparse.ArgumentParser, fmt: str = "json"):
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=fmt)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zonoise", description="Noise-tolerant zeroth-order optimization experiments.")
    ap.add_argument("--version", action="version", version="v" + __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="upper bound on the admissible noise level of a function class")
    p.add_argument("--class", dest="cls", required=True, choices=CLASSES)
    _class_flags(p)
    p.add_argument("--eps", type=float, required=True)
    _out_flags(p)

    p = sub.add_parser("solve", help="run one algorithm on one seeded instance")
    p.add_argument("--algo", required=True)
    p.add_argument("--family")
    _class_flags(p, n_default=None)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--policy", default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-calls", help="write one JSON line per oracle call to this file")
    _out_flags(p)

    p = sub.add_parser("maln", help="bisect on the noise level for the empirical break point")
    p.add_argument("--algo", required=True)
    p.add_argument("--family")
    _class_flags(p, n_default=None)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--policy", default="exhaustive")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theory-class", default="lip-convex", choices=CLASSES)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--emit-plot-data", help="write (delta, success rate) pairs as CSV to this file")
    _out_flags(p)

    p = sub.add_parser("schedule", help="restart schedule as CSV")
    p.add_argument("--case", required=True, choices=("lip-sg", "smooth-sg"))
    _class_flags(p, n_default=1)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float)
    _out_flags(p, fmt="csv")

    p = sub.add_parser("bench", help="sweep solve or maln over a parameter grid read from a TOML file")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _out_flags(p)
    return ap


# --------------------------------------------------------------------------
# commands


def _nu(v) -> Optional[float]:
    if v is None:
        return None
    if str(v).lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def _constants(args) -> dict:
    c = {k: getattr(args, k) for k in ("n", "M", "R", "L", "mu") if getattr(args, k, None) is not None}
    if getattr(args, "nu", None) is not None:
        c["nu"] = _nu(args.nu)
    return c


def run_bounds(args) -> tuple[dict, list[dict]]:
    c = _constants(args)
    try:
        b = noise_bound(args.cls, c, args.eps)
    except MissingConstant as e:
        raise UsageError(f"missing constant {e.name}: {e}") from e
    config = {"class": args.cls, "eps": args.eps, **c}
    return envelope("bounds", config, b.to_dict()), [dict(config, **b.to_dict())]


def _problem(args) -> tuple[str, str, ClassParams]:
    algo = args.algo
    if algo not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    family = args.family or DEFAULT_FAMILY[algo]
    if family not in FAMILIES:
        raise UsageError(f"unknown instance family {family!r}; choose from {', '.join(FAMILIES)}")
    if args.policy not in POLICIES:
        raise UsageError(f"unknown noise policy {args.policy!r}; choose from {', '.join(POLICIES)}")
    n = args.n if args.n is not None else (1 if algo.startswith("grid1d") else 2)
    S = default_set(algo, n)
    M = args.M if args.M is not None else 1.0
    R = args.R if args.R is not None else S.diameter()
    nu = _nu(args.nu)
    if family == "cone":
        mu = args.mu if args.mu is not None else M
        params = ClassParams(n=n, M=M, R=R, L=args.L, mu=mu, nu=1.0 if nu is None else nu)
    elif family == "quadratic":
        mu = args.mu if args.mu is not None else 1.0
        params = ClassParams(n=n, M=args.M if args.M is not None else max(1.0, mu * R), R=R, L=mu, mu=mu, nu=2.0 if nu is None else nu)
    else:
        params = ClassParams(n=n, M=M, R=R, L=args.L, mu=args.mu or 0.0, nu=1.0 if nu is None else nu)
    return algo, family, params


def run_solve(args) -> tuple[dict, list[dict]]:
    try:
        algo, family, params = _problem(args)
    except ValueError as e:
        raise UsageError(str(e)) from e
    S = default_set(algo, params.n)
    rng = np.random.default_rng(args.seed)
    inst_seed, noise_seed, algo_seed = (int(v) for v in rng.integers(0, 2**31, size=3))
    try:
        inst = make_instance(family, params, S, seed=inst_seed)
    except ValueError as e:
        raise UsageError(str(e)) from e
    policy = make_policy(args.policy, args.delta, noise_seed, args.eps, inst, algo, params.M)
    config = {
        "algo": algo,
        "family": family,
        "params": params.to_dict(),
        "eps": args.eps,
        "delta": args.delta,
        "policy": args.policy,
        "seed": args.seed,
    }
    log = open(args.log_calls, "w") if args.log_calls else None
    try:
        oracle = NoisyOracle(inst, policy, log=log)
        rep = run_algorithm(algo, oracle, inst.params, args.eps, algo_seed)
    finally:
        if log is not None:
            log.close()
    rep.seed = args.seed
    rep.attach_gap(inst)
    result = rep.to_dict()
    result["success"] = bool(rep.gap <= args.eps)
    result["instance"] = inst.to_dict()
    row = {k: result[k] for k in ("algo", "seed", "eps", "delta", "gap", "calls", "success", "flags", "x", "value")}
    return envelope("solve", config, result), [row]


def run_maln(args) -> tuple[dict, list[dict]]:
    try:
        algo, family, params = _problem(args)
        q = MalnQuery(
            algo=algo,
            params=params,
            epsilon=args.eps,
            family=family,
            policy=args.policy,
            trials=args.trials,
            threshold=args.threshold,
            delta_max=args.delta_max,
            tol=args.tol,
            seed=args.seed,
            theory_class=args.theory_class,
        )
    except ValueError as e:
        raise UsageError(str(e)) from e
    rep = measure_maln(q, jobs=max(1, args.jobs))
    if args.emit_plot_data:
        write_output(rep.curve_csv(), args.emit_plot_data)
    d = rep.to_dict()
    rows = [{"delta": c["delta"], "success_rate": c["success_rate"], "worst_gap": c["worst_gap"]} for c in d["curve"]]
    return envelope("maln", q.to_dict(), d), rows


def run_schedule(args) -> tuple[dict, list[dict]]:
    c = _constants(args)
    if "mu" not in c:
        raise UsageError("missing constant mu")
    if args.case == "smooth-sg" and "L" not in c:
        raise UsageError("missing constant L")
    R = c.get("R", 1.0)
    try:
        params = ClassParams(n=c.get("n", 1), M=c.get("M", 1.0), R=R, L=c.get("L"), mu=c["mu"], nu=c.get("nu", 1.0))
        if args.case == "lip-sg":
            sch = schedule_lipschitz_sg(params, args.eps, args.gamma, args.alpha, beta=args.beta)
        else:
            sch = schedule_smooth_sg(params, args.eps, args.alpha, beta=args.beta)
    except ValueError as e:
        raise UsageError(str(e)) from e
    config = {"case": args.case, "eps": args.eps, "gamma": args.gamma, "alpha": args.alpha, "beta": args.beta, "params": params.to_dict(), "seed": None}
    return envelope("schedule", config, sch.to_dict()), sch.to_rows()


# --------------------------------------------------------------------------
# bench


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_bench_config(path: str, overrides: list[str]) -> dict:
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = _parse_value(value.strip())
    if cfg.get("command") not in ("solve", "maln"):
        raise UsageError("bench config needs command = \"solve\" or \"maln\"")
    return cfg


def run_bench(args) -> tuple[dict, list[dict]]:
    """Cartesian product over every list-valued key of the config."""
    cfg = load_bench_config(args.config, args.set)
    command = cfg["command"]
    sweep = {k: v for k, v in cfg.items() if isinstance(v, list)}
    fixed = {k: v for k, v in cfg.items() if k not in sweep and k != "command"}
    parser = build_parser()
    rows, results = [], []
    keys = sorted(sweep)
    for combo in itertools.product(*(sweep[k] for k in keys)):
        point = dict(fixed, **dict(zip(keys, combo)))
        argv = [command]
        for k, v in sorted(point.items()):
            argv += [f"--{k.replace('_', '-') if k not in ('M', 'R', 'L') else k}", str(v)]
        if command == "maln":
            argv += ["--jobs", str(args.jobs)]
        try:
            sub = parser.parse_args(argv)
        except SystemExit as e:
            raise UsageError(f"bad bench point {point}") from e
        env, sub_rows = COMMANDS[command](sub)
        results.append({"point": point, "result": env["result"]})
        for r in sub_rows:
            rows.append(dict({f"param_{k}": point[k] for k in keys}, **r))
    config = {"config_file": os.path.basename(args.config), "settings": cfg, "seed": cfg.get("seed")}
    return envelope("bench", config, results), rows


COMMANDS = {"bounds": run_bounds, "solve": run_solve, "maln": run_maln, "schedule": run_schedule, "bench": run_bench}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        env, rows = COMMANDS[args.command](args)
    except UsageError as e:
        print(f"zonoise {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure: report what we know
        partial = envelope(args.command, vars(args), {"status": "failed", "error": f"{type(e).__name__}: {e}"})
        write_output(dump_json(partial), getattr(args, "out", None))
        print(f"zonoise {args.command}: runtime failure: {e}", file=sys.stderr)
        return 1
    text = dump_csv(rows) if args.format == "csv" else dump_json(env)
    write_output(text, args.out)
    return 0
