"""Evaluate or calibrate the jump law against a set of call quotes; the spot must be supplied."""
import argparse

import numpy as np

from msvcj.calibration import calibrate_jumps, load_quotes, model_call_prices
from msvcj.config import ModelConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/calibration_example.json")
    ap.add_argument("--quotes", default="configs/quotes_example.csv")
    ap.add_argument("--spot", type=float, required=True)
    ap.add_argument("--init-var", type=float, default=None, help="starting variance state")
    ap.add_argument("--iters", type=int, default=0, help="random-search iterations (0 only evaluates)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ModelConfig.load(args.config)
    chain = cfg.chain
    if args.init_var is not None:
        chain = chain.with_initial(int(np.argmin(np.abs(chain.variances - args.init_var))))
    cfg.chain = chain
    model, mkt = cfg.model(), cfg.require_market()
    quotes = load_quotes(args.quotes, mkt.maturity)
    strikes = [q.strike for q in quotes]
    if args.iters:
        res = calibrate_jumps(model, quotes, args.spot, mkt.rate, mkt.maturity, args.iters, args.seed)
        print(f"lambda={res.intensity:.4f} mu={res.log_mean:.5f} eps2={res.log_var:.5f} "
              f"objective={res.objective:.3e} ({res.seconds:.0f}s)")
        prices = res.model_prices
    else:
        prices = model_call_prices(model, strikes, args.spot, mkt.rate, mkt.maturity, mkt.dividend)
    print("strike     bid     ask     mid   model   bias%")
    for q, p in zip(quotes, prices):
        print(f"{q.strike:6g} {q.bid:7.2f} {q.ask:7.2f} {q.mid:7.3f} {p:7.2f} {100 * (p / q.mid - 1):7.2f}")


if __name__ == "__main__":
    main()
