"""Command-line entry point: ``msvcj <command> --config model.json [flags]``.

Exit codes: 0 success, 2 invalid input, 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import bench
from .aiv import aiv_ce, aiv_rr, distribution_hash, support_bound, triple_bound
from .bermudan import DEFAULT_SPAN, ExerciseSchedule, price_bermudan
from .calibration import (ReturnSeries, SearchBox, boxplot_split, calibrate_jumps,
                          load_quotes)
from .config import ModelConfig
from .errors import CapExceededError, ValidationError
from .european import implied_vol, price_model
from .jumps import jump_time_bias, implied_vol_impact, truncate_poisson
from .montecarlo import SimConfig, lsm_bermudan, mc_european, mc_exact_conditional


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, default=float)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _config(args) -> ModelConfig:
    if not args.config:
        raise ValidationError("--config is required for this command")
    cfg = ModelConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.numerics["seed"] = args.seed
    return cfg


def cmd_aiv(args) -> dict:
    cfg = _config(args)
    chain = cfg.chain
    L = args.steps or chain.steps_for(cfg.require_market().maturity, "maturity")
    precision = int(cfg.numerics["precision"])
    cap = args.triple_cap or int(cfg.numerics["triple_cap"])
    if args.method == "ce":
        dist = aiv_ce(chain, L, precision)
    else:
        dist = aiv_rr(chain, L, precision, cap)
    if args.csv:
        _write_rows(args.csv, ("v", "prob"), dist.to_rows())
    return {
        "config": cfg.to_dict(),
        "method": args.method,
        "L": L,
        "support_size": len(dist),
        "support_bound": support_bound(chain.m, L),
        "triple_bound": triple_bound(chain.m, L),
        "mean": dist.mean(),
        "hash": distribution_hash(dist),
        "stats": {k: v for k, v in dist.stats.items() if k != "triples_per_step"},
    }


def cmd_price_eu(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    res = price_model(market, cfg.chain, cfg.jump, cfg.pea, n_hermite=int(cfg.numerics["n_hermite"]),
                      n_laguerre=int(cfg.numerics["n_laguerre"]), precision=int(cfg.numerics["precision"]),
                      components=args.components)
    return {"config": cfg.to_dict(), "model": cfg.model().kind, **res.to_dict()}


def _schedule(cfg: ModelConfig, args) -> ExerciseSchedule:
    if args.schedule:
        return ExerciseSchedule.parse(args.schedule)
    b = cfg.extras.get("bermudan")
    if not b:
        raise ValidationError("Bermudan commands need --schedule interval:count or a 'bermudan' config block")
    return ExerciseSchedule(float(b["interval"]), int(b["count"]))


def cmd_price_berm(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    sched = _schedule(cfg, args)
    spots = _floats(args.spots) if args.spots else [market.spot]
    out = []
    for n in _ints(args.n_points):
        res = price_bermudan(cfg.model(), market, sched, n, args.method, spots=spots, span=args.span,
                             kernel_mode=args.kernel)
        out.extend(r.to_dict() for r in res)
    return {"config": cfg.to_dict(), "model": cfg.model().kind,
            "schedule": {"interval": sched.interval, "count": sched.count}, "results": out}


def _sim(cfg: ModelConfig, args) -> SimConfig:
    seed = int(cfg.numerics.get("seed", 0))
    return SimConfig(args.substeps, args.paths, args.runs, seed, args.antithetic)


def _per_run_csv(args, est) -> None:
    if args.csv:
        _write_rows(args.csv, ("run", "estimate"), enumerate(est.per_run.tolist()))


def cmd_mc(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    sim = _sim(cfg, args)
    if args.exact_conditional:
        est = mc_exact_conditional(cfg.model(), market, sim, relocate=args.relocate)
    else:
        est = mc_european(cfg.model(), market, sim)
    _per_run_csv(args, est)
    lo, hi = est.ci95()
    return {"config": cfg.to_dict(), "sim": asdict(sim),
            **est.to_dict(), "ci95": [lo, hi]}


def cmd_lsm(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    sim = _sim(cfg, args)
    est = lsm_bermudan(cfg.model(), market, _schedule(cfg, args), sim, args.degree)
    _per_run_csv(args, est)
    return {"config": cfg.to_dict(), **est.to_dict()}


def cmd_bias(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    if cfg.jump is None or cfg.pea is None:
        raise ValidationError("bias needs both 'jumps' and 'pea' blocks")
    n_max = cfg.jump.n_max
    if n_max is None:
        n_max = truncate_poisson(cfg.jump.intensity, market.maturity, cfg.jump.truncation_eps).n_max
    eb = jump_time_bias(cfg.jump, cfg.pea, market.maturity, max(n_max, 1))
    if args.sigma_imp:
        sig = args.sigma_imp
    else:
        price = price_model(market, cfg.chain, cfg.jump, cfg.pea, n_hermite=int(cfg.numerics["n_hermite"]),
                            n_laguerre=int(cfg.numerics["n_laguerre"]),
                            precision=int(cfg.numerics["precision"])).price
        sig = implied_vol(price, market.spot, market.strike, market.rate, market.maturity, market.dividend,
                          market.kind)
    return {"config": cfg.to_dict(), "expected_bias": eb, "sigma_imp": sig,
            "vol_impact": implied_vol_impact(sig, eb), "n_max": n_max}


def cmd_calibrate(args) -> dict:
    cfg = _config(args)
    market = cfg.require_market()
    out = {"config": cfg.to_dict()}
    if args.prices:
        split = boxplot_split(ReturnSeries.from_csv(args.prices), args.k_f)
        lo, hi = split.bounds
        out["boxplot"] = {"k_f": split.k_f, "q1": split.q1, "q3": split.q3, "iqr": split.iqr,
                          "lower": lo, "upper": hi, "n_jumps": int(split.jump_indices.size),
                          "lambda": split.intensity, "mu": split.jump_mean, "eps2": split.jump_var}
    if args.quotes:
        quotes = load_quotes(args.quotes, market.maturity)
        cal = cfg.extras.get("calibration", {})
        box = SearchBox(**{k: tuple(v) for k, v in cal.get("box", {}).items()})
        seed = int(cfg.numerics.get("seed", 0))
        res = calibrate_jumps(cfg.model(), quotes, market.spot, market.rate, market.maturity,
                              args.iters, seed, box, market.dividend, cal.get("start"))
        out["calibration"] = res.to_dict()
        out["quotes"] = [{"strike": q.strike, "bid": q.bid, "ask": q.ask, "mid": q.mid} for q in quotes]
    if "boxplot" not in out and "calibration" not in out:
        raise ValidationError("calibrate needs --prices and/or --quotes")
    return out


def cmd_bench(args) -> dict:
    rows = bench.run_bench(_ints(args.m), _ints(args.L), tuple(args.algos.split(",")), args.repeats,
                           int(float(args.path_cap)), int(float(args.triple_cap)), args.seed or 0)
    if args.csv:
        bench.write_csv(rows, args.csv)
    else:
        bench.write_csv(rows, sys.stdout)
    return {"rows": [r.as_csv() for r in rows]}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msvcj", description="Markov-switching SV option pricing with co-jumps")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="model configuration JSON")
        sp.add_argument("--out", help="write the JSON result here instead of stdout")
        sp.add_argument("--threads", type=int, default=None, help="accepted for compatibility; work runs on one thread")
        sp.add_argument("--seed", type=int, default=None, help="overrides numerics.seed")
        return sp

    sp = common(sub.add_parser("aiv", help="AIV distribution"))
    sp.add_argument("--steps", type=int, help="chain steps L (default: maturity / tau)")
    sp.add_argument("--method", choices=("rr", "ce"), default="rr")
    sp.add_argument("--triple-cap", type=int, default=None)
    sp.add_argument("--csv", help="write support and probabilities")
    sp.set_defaults(func=cmd_aiv)

    sp = common(sub.add_parser("price-eu", help="analytic European price"))
    sp.add_argument("--components", action="store_true", help="include per (n, v) contributions")
    sp.set_defaults(func=cmd_price_eu)

    sp = common(sub.add_parser("price-berm", help="Bermudan tangent/secant bounds"))
    sp.add_argument("--schedule", help="interval:count, e.g. 0.5:6")
    sp.add_argument("--n-points", default="100", help="comma-separated grid sizes")
    sp.add_argument("--method", choices=("tangent", "secant", "both"), default="both")
    sp.add_argument("--spots", help="comma-separated spots (default: market.spot)")
    sp.add_argument("--span", type=float, default=DEFAULT_SPAN)
    sp.add_argument("--kernel", choices=("auto", "exact", "table"), default="auto")
    sp.set_defaults(func=cmd_price_berm)

    for name, func, help_ in (("mc", cmd_mc, "Euler Monte Carlo European price"),
                              ("lsm", cmd_lsm, "least-squares Monte Carlo Bermudan price")):
        sp = common(sub.add_parser(name, help=help_))
        sp.add_argument("--paths", type=int, default=100_000)
        sp.add_argument("--runs", type=int, default=10)
        sp.add_argument("--substeps", type=int, default=1500)
        sp.add_argument("--antithetic", action="store_true")
        sp.add_argument("--csv", help="per-run estimates")
        sp.set_defaults(func=func)
        if name == "mc":
            sp.add_argument("--exact-conditional", action="store_true",
                            help="conditional Black-Scholes estimator with exact integrated variance")
            sp.add_argument("--relocate", action="store_true", help="move late jumps to the window start")
        else:
            sp.add_argument("--schedule", help="interval:count")
            sp.add_argument("--degree", type=int, default=3)

    sp = common(sub.add_parser("bias", help="expected AIV bias of the jump-time relocation"))
    sp.add_argument("--sigma-imp", type=float, default=None, help="implied vol (default: from the analytic price)")
    sp.set_defaults(func=cmd_bias)

    sp = common(sub.add_parser("calibrate", help="box-plot split and jump calibration"))
    sp.add_argument("--prices", help="CSV date,close")
    sp.add_argument("--quotes", help="CSV strike,bid,ask")
    sp.add_argument("--iters", type=int, default=2000)
    sp.add_argument("--k-f", type=float, default=1.5)
    sp.set_defaults(func=cmd_calibrate)

    sp = common(sub.add_parser("bench", help="CE vs RR timing table"))
    sp.add_argument("--m", default="2,3,4")
    sp.add_argument("--L", default="10,12,14,16")
    sp.add_argument("--algos", default="ce,rr")
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--path-cap", default="1e8")
    sp.add_argument("--triple-cap", default="1e8")
    sp.add_argument("--csv", help="write CSV here (default: stdout)")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        payload = args.func(args)
    except ValidationError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    except CapExceededError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 3
    if args.command != "bench" or args.out:
        _emit(args, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
