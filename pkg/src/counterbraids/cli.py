"""Command-line front end.

    counterbraids threshold --k 3 --beta 0.5 --which bp,area,potential
    counterbraids curves --k 3 --beta 0.5 --kind residual --eps 0.25 --out res.csv
    counterbraids simulate --m0 10000 --k 3 --beta 0.5 --eps 0.14 --trials 50
    counterbraids fig2 --smoke --out gaps.csv --long-out gaps_long.csv
    counterbraids graph --m0 1000 --k 3 --beta 0.5 --seed 7 --out g.txt

Every flag may also come from a JSON file given with ``--config``; flags on
the command line win over the file, which wins over built-in defaults.
Exit status: 0 clean, 1 partial numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from . import __version__
from .decoder import DEFAULT_MAX_ITER, bp_decode, peel_decode
from .degree_model import EnsembleParams
from .exceptions import CapacityError, CounterBraidError, DomainError
from .export import (manifest_hash, reports_to_json, write_curve_csv, write_json, write_reports_csv,
                     write_reports_long, write_rows_csv)
from .graph import DEFAULT_DEPTH, build_coupled, build_single_layer, build_two_layer, encode, \
    graphs_equal, read_graph, sample_flows, write_graph
from .study import (FULL_BETAS, FULL_KS, FULL_LAYOUTS, SMOKE_BETAS, SMOKE_KS, SMOKE_LAYOUTS,
                    Tolerances, check_gap_rows, default_workers, gap_study, threshold_cell)
from .uncoupled import bp_threshold_beta, ebp_exit_curve, cosine_grid, residual_exit_curve

log = logging.getLogger("counterbraids")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
THRESHOLD_KINDS = {"bp": "eps_bp", "beta": "beta_bp", "area": "eps_area", "potential": "eps_potential",
                   "coupled": "eps_bp_coupled", "modified": "eps_modified"}
SATURATION_TOL = 0.005

DEFAULTS = {
    "threshold": dict(which="bp", N=128, w=5, eps=None, k=None, beta=None, gamma=None, format="csv",
                      out=None, smoke=False, tol_bp=None, tol_coupled=None, tol_area=None,
                      tol_potential=None, max_sweeps=None),
    "curves": dict(kind="ebp", k=None, beta=None, gamma=None, eps=None, n_points=4000, out=None),
    "simulate": dict(m0=None, k=None, beta=None, m1=None, eps=None, trials=50, seed=0, f_min=1,
                     model="two-point", p=0.5, decoder="peel", N=None, w=None, max_iter=DEFAULT_MAX_ITER,
                     format="json", out=None),
    "fig2": dict(k=None, betas=None, N=None, w=None, smoke=False, workers=None, out=None, long_out=None,
                 manifest=None, saturation_tol=SATURATION_TOL, tol_bp=None, tol_coupled=None,
                 tol_area=None, tol_potential=None, max_sweeps=None),
    "graph": dict(m0=None, k=None, beta=None, m1=None, seed=0, depth=DEFAULT_DEPTH, layers=1, m2=None,
                  k2=None, d1=None, N=None, w=None, out=None, check=False),
}


class UsageError(Exception):
    pass


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()] if not isinstance(text, list) else [int(v) for v in text]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()] if not isinstance(text, list) else [float(v) for v in text]


def build_parser():
    parser = argparse.ArgumentParser(prog="counterbraids", description="Counter braid thresholds, curves and simulation.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", default=None, help="JSON file of flag defaults")
        p.add_argument("-v", "--verbose", action="count", default=S)

    def ensemble(p, with_m1=False):
        p.add_argument("--k", type=int, default=S, help="flow degree")
        p.add_argument("--beta", type=float, default=S, help="counters per flow")
        if with_m1:
            p.add_argument("--m1", type=int, default=S, help="number of counters (instead of --beta)")
        else:
            p.add_argument("--gamma", type=float, default=S, help="average counter degree (instead of --beta)")

    def tolerances(p):
        p.add_argument("--tol-bp", type=float, default=S)
        p.add_argument("--tol-coupled", type=float, default=S)
        p.add_argument("--tol-area", type=float, default=S)
        p.add_argument("--tol-potential", type=float, default=S)
        p.add_argument("--max-sweeps", type=int, default=S)
        p.add_argument("--smoke", action="store_true", default=S, help="coarse tolerances and caps for quick runs")

    p = sub.add_parser("threshold", help="compute decoding thresholds for one ensemble")
    common(p)
    ensemble(p)
    p.add_argument("--which", default=S, help="comma list of " + ",".join(THRESHOLD_KINDS))
    p.add_argument("--eps", type=float, default=S, help="channel parameter (needed for --which beta)")
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--w", type=int, default=S)
    tolerances(p)
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("curves", help="export EBP or residual EXIT curves as CSV")
    common(p)
    ensemble(p)
    p.add_argument("--kind", choices=("ebp", "residual"), default=S)
    p.add_argument("--eps", type=float, default=S, help="channel parameter (residual curve only)")
    p.add_argument("--n-points", type=int, default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("simulate", help="Monte-Carlo encode/decode trials")
    common(p)
    ensemble(p, with_m1=True)
    p.add_argument("--m0", type=int, default=S, help="number of flows")
    p.add_argument("--eps", type=float, default=S, help="probability a flow exceeds f_min")
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--f-min", type=int, default=S)
    p.add_argument("--model", choices=("two-point", "geometric"), default=S)
    p.add_argument("--p", type=float, default=S, help="geometric tail parameter")
    p.add_argument("--decoder", choices=("peel", "bp"), default=S)
    p.add_argument("--N", type=int, default=S, help="coupled construction: positions")
    p.add_argument("--w", type=int, default=S, help="coupled construction: coupling width")
    p.add_argument("--max-iter", type=int, default=S)
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--out", default=S)

    p = sub.add_parser("fig2", help="threshold-gap sweep over (k, beta)")
    common(p)
    p.add_argument("--k", default=S, help="comma list of flow degrees")
    p.add_argument("--betas", default=S, help="comma list of beta values")
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--w", type=int, default=S)
    tolerances(p)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--saturation-tol", type=float, default=S,
                   help="allowed |modified - area| when reporting saturation")
    p.add_argument("--out", default=S)
    p.add_argument("--long-out", default=S)
    p.add_argument("--manifest", default=S)

    p = sub.add_parser("graph", help="build a braid graph and serialize it")
    common(p)
    ensemble(p, with_m1=True)
    p.add_argument("--m0", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--depth", type=int, default=S)
    p.add_argument("--layers", type=int, choices=(1, 2), default=S)
    p.add_argument("--m2", type=int, default=S)
    p.add_argument("--k2", type=int, default=S)
    p.add_argument("--d1", type=int, default=S)
    p.add_argument("--N", type=int, default=S)
    p.add_argument("--w", type=int, default=S)
    p.add_argument("--check", action="store_true", default=S, help="re-read the output and verify it")
    p.add_argument("--out", default=S)
    return parser


def resolve_config(args) -> dict:
    """Merge defaults, the optional JSON config file and explicit flags."""
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {cmd}: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    for key, val in vars(args).items():
        if key in cfg:
            cfg[key] = val
    cfg["command"] = cmd
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _check(cond, msg):
    if not cond:
        raise UsageError(msg)


def _gamma_from(cfg):
    _require(cfg, "k")
    _check(cfg["k"] >= 1, "--k must be at least 1")
    if cfg.get("gamma") is not None:
        _check(cfg.get("beta") is None, "give --beta or --gamma, not both")
        _check(cfg["gamma"] > 0, "--gamma must be positive")
        return cfg["gamma"], cfg["k"] / cfg["gamma"]
    _require(cfg, "beta")
    _check(cfg["beta"] > 0, "--beta must be positive")
    return cfg["k"] / cfg["beta"], cfg["beta"]


def _tolerances(cfg):
    tol = Tolerances.smoke() if cfg.get("smoke") else Tolerances()
    for name in ("bp", "coupled", "area", "potential"):
        val = cfg.get(f"tol_{name}")
        if val is not None:
            _check(val > 0, f"--tol-{name} must be positive")
            setattr(tol, name, float(val))
    if cfg.get("max_sweeps") is not None:
        _check(cfg["max_sweeps"] >= 1, "--max-sweeps must be at least 1")
        tol.max_sweeps = int(cfg["max_sweeps"])
    return tol


def _header(cfg):
    return {"manifest": manifest_hash(cfg), "version": __version__}


# threshold ---------------------------------------------------------------

def cmd_threshold(cfg):
    which = [w.strip() for w in (cfg["which"] if isinstance(cfg["which"], list) else str(cfg["which"]).split(","))
             if w.strip()]
    bad = set(which) - set(THRESHOLD_KINDS)
    _check(which and not bad, f"--which takes a comma list of {','.join(THRESHOLD_KINDS)}")
    tol = _tolerances(cfg)
    _require(cfg, "k")
    k = cfg["k"]
    _check(k >= 2, "--k must be at least 2")
    needs_gamma = set(which) - {"beta"}
    gamma = beta = None
    if needs_gamma:
        gamma, beta = _gamma_from(cfg)
    if "beta" in which:
        _require(cfg, "eps")
        _check(0 < cfg["eps"] <= 1, "--eps must lie in (0, 1]")
    if {"coupled", "modified"} & set(which):
        _check(cfg["N"] >= 1 and 1 <= cfg["w"] <= cfg["N"] + 1, "need N >= 1 and 1 <= w <= N + 1")

    row = {"k": k, "beta": beta, "gamma": gamma, "N": cfg["N"], "w": cfg["w"]}
    error = None
    if needs_gamma:
        rep = threshold_cell(k, beta, cfg["N"], cfg["w"], tol, needs_gamma)
        for name in which:
            if name != "beta":
                row[THRESHOLD_KINDS[name]] = getattr(rep, THRESHOLD_KINDS[name])
        error = rep.error
    if "beta" in which:
        row["eps"] = cfg["eps"]
        try:
            row["beta_bp"] = bp_threshold_beta(k, cfg["eps"], tol.bp)
        except CounterBraidError as exc:
            row["beta_bp"] = math.nan
            error = f"{type(exc).__name__}: {exc}"
    row["error"] = error or ""
    if cfg["format"] == "json":
        write_json({"header": _header(cfg), "rows": [row]}, cfg["out"])
    else:
        write_rows_csv([row], cfg["out"], _header(cfg))
    return EXIT_PARTIAL if error else EXIT_OK


# curves ------------------------------------------------------------------

def cmd_curves(cfg):
    gamma, _ = _gamma_from(cfg)
    k = cfg["k"]
    _check(k >= 2, "--k must be at least 2")
    _check(cfg["n_points"] >= 3, "--n-points must be at least 3")
    if cfg["kind"] == "residual":
        _require(cfg, "eps")
        _check(0 <= cfg["eps"] <= 1, "--eps must lie in [0, 1]")
        curve = residual_exit_curve(k, gamma, cfg["eps"], cosine_grid(cfg["n_points"]))
    else:
        _check(cfg.get("eps") is None, "--eps applies only to --kind residual")
        curve = ebp_exit_curve(k, gamma, cosine_grid(cfg["n_points"]))
    write_curve_csv(curve, cfg["out"], cfg["kind"], _header(cfg))
    return EXIT_OK


# simulate ----------------------------------------------------------------

def _simulation_setup(cfg):
    _require(cfg, "m0", "k", "eps")
    m0, k = cfg["m0"], cfg["k"]
    _check(m0 >= 1 and k >= 1, "--m0 and --k must be positive")
    _check(0 <= cfg["eps"] <= 1, "--eps must lie in [0, 1]")
    _check(cfg["trials"] >= 1, "--trials must be at least 1")
    _check(cfg["f_min"] >= 0, "--f-min must be nonnegative")
    if cfg.get("m1") is not None:
        _check(cfg.get("beta") is None, "give --beta or --m1, not both")
        m1 = cfg["m1"]
    else:
        _require(cfg, "beta")
        m1 = int(round(cfg["beta"] * m0))
    _check(m1 >= 1, "need at least one counter")
    params = EnsembleParams(k, m0 * k / m1, cfg["eps"], cfg["f_min"])
    coupled = cfg.get("N") is not None or cfg.get("w") is not None
    if coupled:
        _require(cfg, "N", "w")
        _check(m0 % cfg["N"] == 0, "--m0 must be a multiple of --N for the coupled construction")
    return params, m1, coupled


def _run_trial(cfg, params, m1, coupled, t):
    graph_seed, flow_seed = [cfg["seed"], t, 0], [cfg["seed"], t, 1]
    if coupled:
        graph = build_coupled(cfg["m0"] // cfg["N"], params, cfg["N"], cfg["w"], graph_seed)
    else:
        graph = build_single_layer(cfg["m0"], m1, params.k, graph_seed)
    flows = sample_flows(cfg["m0"], params, cfg["model"], cfg["p"], flow_seed)
    rec = {"trial": t, "capacity_error": False}
    try:
        state = encode(graph, flows)
    except CapacityError:
        rec["capacity_error"] = True
        return rec
    decode = peel_decode if cfg["decoder"] == "peel" else bp_decode
    res = decode(graph.first, state.values[0], params.f_min, cfg["max_iter"])
    correct = res.converged & (res.estimates == flows)
    rec.update(
        full_recovery=bool(res.all_converged and np.array_equal(res.estimates, flows)),
        peeled_fraction=float(res.converged.mean()),
        oscillating_fraction=float(res.oscillating.mean()),
        correct_fraction=float(correct.mean()),
        iterations=int(res.iterations),
    )
    return rec


def cmd_simulate(cfg):
    try:
        params, m1, coupled = _simulation_setup(cfg)
        trials = [_run_trial(cfg, params, m1, coupled, t) for t in range(cfg["trials"])]
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    ok = [r for r in trials if not r["capacity_error"]]
    n_ok = len(ok)
    agg = {
        "trials": len(trials),
        "capacity_errors": len(trials) - n_ok,
        "recovery_rate": sum(r["full_recovery"] for r in ok) / n_ok if n_ok else math.nan,
        "mean_peeled_fraction": float(np.mean([r["peeled_fraction"] for r in ok])) if n_ok else math.nan,
        "mean_oscillating_fraction": float(np.mean([r["oscillating_fraction"] for r in ok])) if n_ok else math.nan,
        "m1": m1,
        "gamma": params.gamma,
    }
    if cfg["format"] == "json":
        write_json({"header": _header(cfg), "config": cfg, "aggregate": agg, "trials": trials}, cfg["out"])
    else:
        cols = ("trial", "capacity_error", "full_recovery", "peeled_fraction", "oscillating_fraction",
                "correct_fraction", "iterations")
        meta = dict(_header(cfg))
        meta.update({f"aggregate.{k}": v for k, v in agg.items()})
        write_rows_csv([{c: r.get(c) for c in cols} for r in trials], cfg["out"], meta)
    return EXIT_PARTIAL if agg["capacity_errors"] else EXIT_OK


# fig2 --------------------------------------------------------------------

def cmd_fig2(cfg):
    smoke = bool(cfg.get("smoke"))
    ks = _int_list(cfg["k"]) if cfg.get("k") is not None else list(SMOKE_KS if smoke else FULL_KS)
    betas = _float_list(cfg["betas"]) if cfg.get("betas") is not None else list(SMOKE_BETAS if smoke else FULL_BETAS)
    _check(ks and all(k >= 2 for k in ks), "--k needs degrees >= 2")
    _check(betas and all(0 < b < 1 for b in betas), "--betas must lie inside (0, 1)")
    if cfg.get("N") is not None or cfg.get("w") is not None:
        _require(cfg, "N", "w")
        _check(cfg["N"] >= 1 and 1 <= cfg["w"] <= cfg["N"] + 1, "need N >= 1 and 1 <= w <= N + 1")
        layouts = [(cfg["N"], cfg["w"])]
    else:
        layouts = list(SMOKE_LAYOUTS if smoke else FULL_LAYOUTS)
    tol = _tolerances(cfg)
    workers = cfg["workers"] if cfg.get("workers") is not None else default_workers()
    _check(workers >= 1, "--workers must be at least 1")

    start = time.perf_counter()
    rows = []
    for N, w in layouts:
        rows.extend(gap_study(ks, betas, N, w, tol, workers))
    wall = time.perf_counter() - start

    failed = [r for r in rows if r.error]
    violations = check_gap_rows(rows)
    unsaturated = [r for r in rows if (r.N, r.w) != (1, 1) and not r.error
                   and abs(r.eps_modified - r.eps_area) > cfg["saturation_tol"]]
    for r in violations:
        log.warning("gap ordering violated at k=%d beta=%.2f N=%d w=%d", r.k, r.beta, r.N, r.w)
    for r in unsaturated:
        log.warning("modified threshold %.6f not within %.3g of area threshold %.6f (k=%d beta=%.2f)",
                    r.eps_modified, cfg["saturation_tol"], r.eps_area, r.k, r.beta)

    header = _header(cfg)
    write_reports_csv(rows, cfg["out"], header)
    if cfg.get("long_out"):
        write_reports_long(rows, cfg["long_out"], header)
    if cfg.get("manifest"):
        write_json({
            **header, "config": cfg, "grids": {"k": ks, "beta": betas, "layouts": layouts},
            "tolerances": vars(tol), "seeds": None, "workers": workers, "wall_time_s": wall,
            "failed_cells": len(failed), "gap_violations": len(violations),
            "unsaturated_cells": len(unsaturated), "rows": reports_to_json(rows),
        }, cfg["manifest"])
    return EXIT_PARTIAL if failed else EXIT_OK


# graph -------------------------------------------------------------------

def cmd_graph(cfg):
    _require(cfg, "m0", "k")
    m0, k = cfg["m0"], cfg["k"]
    if cfg.get("m1") is not None:
        _check(cfg.get("beta") is None, "give --beta or --m1, not both")
        m1 = cfg["m1"]
    else:
        _require(cfg, "beta")
        m1 = int(round(cfg["beta"] * m0))
    try:
        if cfg.get("N") is not None or cfg.get("w") is not None:
            _require(cfg, "N", "w")
            _check(cfg["layers"] == 1, "the coupled construction has a single layer")
            _check(m0 % cfg["N"] == 0, "--m0 must be a multiple of --N")
            graph = build_coupled(m0 // cfg["N"], EnsembleParams(k, m0 * k / m1), cfg["N"], cfg["w"],
                                  cfg["seed"], cfg["depth"])
        elif cfg["layers"] == 2:
            _require(cfg, "m2", "k2", "d1")
            graph = build_two_layer(m0, m1, cfg["m2"], k, cfg["k2"], cfg["d1"], cfg["depth"], cfg["seed"])
        else:
            graph = build_single_layer(m0, m1, k, cfg["seed"], cfg["depth"])
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    if cfg["out"] in (None, "-"):
        write_graph(graph, sys.stdout)
        return EXIT_OK
    write_graph(graph, cfg["out"])
    if cfg.get("check") and not graphs_equal(graph, read_graph(cfg["out"])):
        log.error("graph read back from %s differs from the one written", cfg["out"])
        return EXIT_PARTIAL
    return EXIT_OK


COMMANDS = {"threshold": cmd_threshold, "curves": cmd_curves, "simulate": cmd_simulate,
            "fig2": cmd_fig2, "graph": cmd_graph}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cfg["version"] = __version__
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except DomainError as exc:
        parser.error(str(exc))
    except CounterBraidError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
