"""Command-line experiment runner writing CSV tables.

Subcommands ``analyze``, ``simulate``, ``compare``, ``sweep`` and ``verify``.
Exit codes: 0 success, 2 configuration error, 3 numerical-precision
failure, 4 a verification threshold was exceeded, 1 anything else.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import time
from typing import Iterable, Optional

import numpy as np

from . import network, oracle, single
from .config import (INF, PRESETS, build_config, config_hash, load_file, parse_catalogs,
                     parse_float_list, parse_int_list, parse_policy_sets)
from .errors import ConfigError, NoRootError, PrecisionError
from .popularity import make_explicit, make_geometric, make_zipf
from .simulator import RunSpec, TopologySpec, run_replications

__all__ = ["main", "build_parser", "run", "OUT_DIR_ENV"]

OUT_DIR_ENV = "RNDCACHE_OUT_DIR"
NA = "NA"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PRECISION, EXIT_THRESHOLD = 0, 1, 2, 3, 4


class GridPointError(Exception):
    def __init__(self, exc: Exception, context: str):
        super().__init__(f"{context}: {exc}")
        self.exc = exc
        self.context = context


@contextlib.contextmanager
def _at(**where):
    """Attach the grid point to any numerical error raised inside."""
    try:
        yield
    except (PrecisionError, NoRootError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        ctx = ", ".join(f"{k}={v}" for k, v in where.items())
        raise GridPointError(exc, ctx) from exc


def _fmt(x) -> str:
    if x is None:
        return NA
    if isinstance(x, (float, np.floating)):
        return NA if math.isnan(x) else repr(float(x))
    return str(x)


# -- distributions ------------------------------------------------------------


def _dist(cfg: dict, alpha: float, catalog):
    d = cfg["distribution"]
    if d["kind"] == "geometric":
        kappa = float(d["kappa"])
        if catalog == INF:
            return make_geometric(kappa)
        return make_explicit((1 - kappa) * kappa ** np.arange(int(catalog)))
    return make_zipf(alpha, None if catalog == INF else int(catalog))


def _sim_summary(cfg: dict, dist, topo: TopologySpec, seed: int):
    r = cfg["run"]
    if r["reps"] < 2 or not dist.is_finite:
        return None
    spec = RunSpec(dist, topo, r["warmup"], r["measure"])
    jobs = r["jobs"] or os.cpu_count() or 1
    return run_replications(spec, r["reps"], base_seed=seed, jobs=min(jobs, r["reps"]))[1]


def _seed_for(cfg: dict, point: int) -> int:
    # distinct, reproducible seed ranges per grid point
    return cfg["run"]["seed"] + 10007 * point


# -- tables ---------------------------------------------------------------------


def table_prefactors(cfg: dict, mode: str):
    if mode == "simulate":
        raise ConfigError("the prefactor table has no simulated counterpart", field="table")
    header = ["alpha", "rho", "lambda"]
    rows = [[a, single.prefactor_rnd(a), single.prefactor_lru(a)]
            for a in cfg["distribution"]["alpha"]]
    return header, rows


def _single_analytic(cfg: dict, dist, policy: str, alpha: float, C: int):
    kind = cfg["distribution"]["kind"]
    exact = asym = None
    if policy in ("RND", "FIFO"):
        exact = single.miss_rate_exact(dist, C)
    if C >= 1:
        if kind == "zipf":
            asym = single.miss_rate_asymptotic(policy, alpha, C).value
        elif policy == "LRU":
            kappa = float(cfg["distribution"]["kappa"])
            asym = single.miss_rate_lru_light_tail((1 - kappa) / kappa, -math.log(kappa), 1.0, C).value
    return exact, asym


def table_single(cfg: dict, mode: str, sizes: Optional[Iterable[int]] = None):
    header = ["alpha", "catalog", "policy", "C", "analytic_exact", "analytic_asymptotic",
              "sim_mean", "sim_stderr", "sim_reps"]
    rows = []
    point = 0
    sizes = list(cfg["grid"]["sizes"] if sizes is None else sizes)
    d = cfg["distribution"]
    alphas = d["alpha"] if d["kind"] == "zipf" else [math.nan]
    for alpha in alphas:
        for cat in d["catalog"]:
            dist = _dist(cfg, alpha, cat)
            for policy in cfg["topology"]["policies"]:
                for C in sizes:
                    exact = asym = mean = err = None
                    reps = 0
                    with _at(alpha=alpha, catalog=cat, policy=policy, C=C):
                        if mode != "simulate":
                            exact, asym = _single_analytic(cfg, dist, policy, alpha, C)
                        if mode != "analyze" and C >= 1:
                            s = _sim_summary(cfg, dist, TopologySpec.single(policy, C),
                                             _seed_for(cfg, point))
                            if s is not None:
                                mean, err, reps = s.mean["global"][0], s.stderr["global"][0], s.n
                    point += 1
                    rows.append([alpha, cat, policy, C, exact, asym, mean, err, reps])
    return header, rows


def _topology(cfg: dict, policies: list, sizes: list) -> TopologySpec:
    t = cfg["topology"]
    if t["shape"] == "tree":
        return TopologySpec.tree(policies, sizes, t["leaf_weights"], t["arity"])
    if t["shape"] == "single" and len(sizes) == 1:
        return TopologySpec.single(policies[0], sizes[0])
    return TopologySpec.line(policies, sizes)


def _plan(cfg: dict, policies: list, sizes: list, alpha: float) -> network.NetworkPlan:
    try:
        return network.NetworkPlan(tuple(zip(policies, sizes)), alpha)
    except ValueError as exc:
        raise ConfigError(str(exc), field="topology.policies") from exc


def table_network(cfg: dict, mode: str):
    header = ["policies", "alpha", "catalog", "level", "rank", "analytic_local", "analytic_global",
              "exact_local", "sim_local_mean", "sim_local_stderr", "sim_global_mean",
              "sim_global_stderr", "sim_reps"]
    rows = []
    point = 0
    t = cfg["topology"]
    ranks = np.array(cfg["grid"]["ranks"])
    d = cfg["distribution"]
    if d["kind"] != "zipf":
        raise ConfigError("network formulas are stated for Zipf popularity", field="distribution.kind")
    for pset in t["policies"]:
        policies = pset.split("-")
        for alpha in d["alpha"]:
            plan = _plan(cfg, policies, t["sizes"], alpha)
            for cat in d["catalog"]:
                dist = _dist(cfg, alpha, cat)
                s = None
                exact = None
                with _at(policies=pset, alpha=alpha, catalog=cat):
                    if mode != "analyze":
                        s = _sim_summary(cfg, dist, _topology(cfg, policies, t["sizes"]),
                                         _seed_for(cfg, point))
                    if (mode != "simulate" and plan.depth == 1 and policies[0] != "LRU"
                            and (dist.support_size is None or ranks.max() <= dist.support_size)):
                        exact = single.per_object_miss_curve(dist, t["sizes"][0], ranks)
                point += 1
                for lv in range(1, plan.depth + 1):
                    if mode != "simulate":
                        glob, loc = network.level_miss_per_object(plan, lv, ranks)
                    for i, r in enumerate(ranks):
                        row = [pset, alpha, cat, lv, int(r)]
                        if mode != "simulate":
                            row += [loc[i], glob[i], exact[i] if exact is not None else None]
                        else:
                            row += [None, None, None]
                        if s is not None and r <= s.mean["rank_local"].shape[1]:
                            row += [s.mean["rank_local"][lv - 1, r - 1],
                                    s.stderr["rank_local"][lv - 1, r - 1],
                                    s.mean["rank_global"][lv - 1, r - 1],
                                    s.stderr["rank_global"][lv - 1, r - 1], s.n]
                        else:
                            row += [None, None, None, None, 0]
                        rows.append(row)
    return header, rows


def table_sweep(cfg: dict, mode: str):
    """Average miss per level with every level set to the same size ``C``."""
    if cfg["table"] == "prefactors":
        return table_prefactors(cfg, mode)
    if cfg["table"] == "single":
        return table_single(cfg, "compare")
    header = ["policies", "alpha", "catalog", "C", "level", "analytic_formula",
              "analytic_catalog_sum", "sim_global_mean", "sim_global_stderr",
              "sim_local_mean", "sim_local_stderr", "sim_reps"]
    rows = []
    point = 0
    d = cfg["distribution"]
    depth = len(cfg["topology"]["sizes"])
    for pset in cfg["topology"]["policies"]:
        policies = pset.split("-")
        for alpha in d["alpha"]:
            for cat in d["catalog"]:
                dist = _dist(cfg, alpha, cat)
                for C in cfg["grid"]["sizes"]:
                    if C < 1:
                        continue
                    sizes = [C] * depth
                    plan = _plan(cfg, policies, sizes, alpha)
                    with _at(policies=pset, alpha=alpha, catalog=cat, C=C):
                        s = _sim_summary(cfg, dist, _topology(cfg, policies, sizes),
                                         _seed_for(cfg, point))
                        point += 1
                        for lv in range(1, depth + 1):
                            formula = (network.average_global_miss(plan, lv)
                                       if all(p != "LRU" for p in policies) else None)
                            csum = (network.average_global_miss_sum(plan, lv, dist)
                                    if dist.is_finite else None)
                            row = [pset, alpha, cat, C, lv, formula, csum]
                            if s is not None:
                                row += [s.mean["global"][lv - 1], s.stderr["global"][lv - 1],
                                        s.mean["local"][lv - 1], s.stderr["local"][lv - 1], s.n]
                            else:
                                row += [None, None, None, None, 0]
                            rows.append(row)
    return header, rows


# -- verify ---------------------------------------------------------------------


def verification_checks() -> list:
    """``(name, max deviation, threshold)`` for the analytic and oracle checks."""
    checks = []
    worst = 0.0
    for a in (2, 4, 6):
        M = single.miss_rates_exact(make_zipf(a), 200)
        for C in range(201):
            ref = single.miss_rate_zipf_closed(a, C)
            worst = max(worst, abs(M[C] / ref - 1.0))
    checks.append(("zipf_closed_forms", worst, 1e-9))

    worst = 0.0
    for kappa in (0.3, 0.5, 0.9):
        M = single.miss_rates_exact(make_geometric(kappa), 100)
        for C in range(101):
            worst = max(worst, abs(M[C] / single.miss_rate_geometric(kappa, C) - 1.0))
    checks.append(("geometric_closed_form", worst, 1e-10))

    tv = ratio = balance = 0.0
    rng = np.random.default_rng(12345)
    for N in range(1, 9):
        for C in range(0, min(N, 4) + 1):
            for dist in (make_zipf(1.5, N), make_explicit(0.5 ** np.arange(N)),
                         make_explicit(rng.random(N) + 0.05)):
                space = oracle.build_state_space(dist, C)
                tv = max(tv, oracle.total_variation(oracle.stationary_bruteforce(dist, C, space),
                                                    oracle.product_form(dist, C)))
                if C < N:
                    ratio = max(ratio, abs(oracle.miss_rate_subsets(dist, C)
                                           - single.miss_rate_exact(dist, C)))
                balance = max(balance, oracle.reversibility_check(dist, C, space)[1])
    checks += [("oracle_product_form_tv", tv, 1e-10), ("oracle_subset_ratio", ratio, 1e-12),
               ("oracle_detailed_balance", balance, 1e-12)]

    worst = 0.0
    for a in (1.5, 2.0, 3.0):
        dist = make_zipf(a)
        for C in range(1, 201):
            sp = single.saddle_point(dist, C)
            worst = max(worst, sp.residual / C, 0.0 if sp.theta >= C else math.inf)
    checks.append(("saddle_point_residual", worst, 1e-9))

    dev = max(abs(single.prefactor_rnd(1.01) * 0.01 - 1), abs(single.prefactor_lru(1.01) * 0.01 - 1))
    checks.append(("prefactors_near_one", dev, 0.10))
    dev = max(abs(single.prefactor_rnd(100.0) - 1),
              abs(single.prefactor_lru(100.0) * 100 / math.exp(single.EULER_GAMMA) - 1))
    checks.append(("prefactors_large_alpha", dev, 0.05))
    return checks


def table_verify(cfg: dict, mode: str):
    header = ["check", "max_deviation", "threshold", "passed"]
    rows = [[name, dev, thr, "yes" if dev <= thr else "no"]
            for name, dev, thr in verification_checks()]
    return header, rows


# -- driver -----------------------------------------------------------------------


def run(cfg: dict, mode: str):
    """Compute the table for ``mode``; returns ``(header, rows)``."""
    if mode == "verify":
        return table_verify(cfg, mode)
    if mode == "sweep":
        return table_sweep(cfg, mode)
    if cfg["table"] == "prefactors":
        return table_prefactors(cfg, mode)
    if cfg["table"] == "single":
        return table_single(cfg, mode)
    return table_network(cfg, mode)


def render_csv(cfg: dict, mode: str, header: list, rows: list) -> str:
    buf = io.StringIO()
    record = dict(cfg, mode=mode)
    buf.write(f"# config_sha256={config_hash(record)} seed={cfg['run']['seed']}\n")
    buf.write("# config=" + json.dumps(record, sort_keys=True, separators=(",", ":"), default=str)
              + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _output_path(cfg: dict, mode: str, out: Optional[str]) -> str:
    if out:
        return out
    if cfg["output"].get("path"):
        return cfg["output"]["path"]
    name = cfg.get("preset") or cfg["table"]
    return os.path.join(os.environ.get(OUT_DIR_ENV, "."), f"{mode}-{name}.csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rndcache",
                                description="Miss probabilities of RND, FIFO and LRU caches.")
    sub = p.add_subparsers(dest="mode", required=True)
    helps = {
        "analyze": "analytic tables only",
        "simulate": "simulation tables only",
        "compare": "analytic and simulated columns side by side",
        "verify": "oracle and closed-form checks; exit 4 on failure",
        "sweep": "average miss per level over a grid of equal cache sizes",
    }
    for mode, text in helps.items():
        s = sub.add_parser(mode, help=text)
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--config", help="YAML configuration file")
        s.add_argument("--out", help=f"output CSV path (default: ${OUT_DIR_ENV} or .)")
        s.add_argument("--seed", type=int)
        s.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
        s.add_argument("--alpha", help="comma-separated Zipf exponents")
        s.add_argument("--catalog", help="comma-separated catalog sizes, 'inf' for unbounded")
        s.add_argument("--sizes", help="cache sizes: grid for single/sweep, per level for network")
        s.add_argument("--policies", help="comma-separated policy sets, e.g. RND,LRU or RND-LRU")
        s.add_argument("--warmup", type=int)
        s.add_argument("--measure", type=int)
        s.add_argument("--reps", type=int)
    return p


def _overrides(args, base_table: str) -> dict:
    o: dict = {}

    def put(section, key, value):
        o.setdefault(section, {})[key] = value

    if args.seed is not None:
        put("run", "seed", args.seed)
    if args.jobs is not None:
        put("run", "jobs", args.jobs)
    if args.warmup is not None:
        put("run", "warmup", args.warmup)
    if args.measure is not None:
        put("run", "measure", args.measure)
    if args.reps is not None:
        put("run", "reps", args.reps)
    if args.alpha:
        put("distribution", "alpha", parse_float_list(args.alpha, "alpha"))
    if args.catalog:
        put("distribution", "catalog", parse_catalogs(args.catalog))
    if args.policies:
        put("topology", "policies", parse_policy_sets(args.policies))
    if args.sizes:
        sizes = parse_int_list(args.sizes, "sizes")
        if base_table == "network" and args.mode != "sweep":
            put("topology", "sizes", sizes)
        else:
            put("grid", "sizes", sizes)
    return o


def _error(code: int, exc: Exception, context: Optional[str] = None) -> int:
    record = {"status": "error", "exit_code": code, "error": type(exc).__name__,
              "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["field"] = exc.field
    if isinstance(exc, PrecisionError):
        record["C"] = exc.C
    if context:
        record["context"] = context
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_data = load_file(args.config) if args.config else None
        name = args.preset or (file_data or {}).get("preset")
        base = build_config(name, file_data)
        cfg = build_config(name, file_data, _overrides(args, base["table"]))
        start = time.time()
        header, rows = run(cfg, args.mode)
        text = render_csv(cfg, args.mode, header, rows)
        path = _output_path(cfg, args.mode, args.out)
        if path == "-":
            sys.stdout.write(text)
        else:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w") as fh:
                fh.write(text)
            print(f"wrote {len(rows)} rows to {path} in {time.time() - start:.1f}s", file=sys.stderr)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, exc)
    except GridPointError as exc:
        code = EXIT_PRECISION if isinstance(exc.exc, PrecisionError) else EXIT_FAIL
        return _error(code, exc.exc, exc.context)
    except PrecisionError as exc:
        return _error(EXIT_PRECISION, exc)
    if args.mode == "verify":
        failed = [r[0] for r in rows if r[-1] != "yes"]
        for r in rows:
            print(f"{r[0]:<26} max deviation {r[1]:.3e}  threshold {r[2]:.0e}  "
                  f"{'ok' if r[-1] == 'yes' else 'FAILED'}", file=sys.stderr)
        if failed:
            return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
