"""Tangent and secant bounds for the Bermudan call across spots and grid sizes, with an optional LSM column."""
import argparse
import time
from dataclasses import replace

from msvcj.bermudan import DEFAULT_SPAN, ContinuationKernel, ExerciseSchedule, price_bermudan
from msvcj.config import ModelConfig, bermudan_config
from msvcj.montecarlo import SimConfig, lsm_bermudan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", choices=("sv", "svcj"), default="sv")
    ap.add_argument("--n", default="50,100,200", help="grid sizes")
    ap.add_argument("--spots", default="60,90,100,110,140")
    ap.add_argument("--span", type=float, default=DEFAULT_SPAN)
    ap.add_argument("--lsm-paths", type=int, default=0, help="paths per LSM run (0 skips LSM)")
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    cfg = ModelConfig.from_dict(bermudan_config(jumps=args.model == "svcj"))
    model, mkt = cfg.model(), cfg.market
    sched = ExerciseSchedule(cfg.extras["bermudan"]["interval"], cfg.extras["bermudan"]["count"])
    spots = [float(s) for s in args.spots.split(",")]
    t0 = time.perf_counter()
    kernel = ContinuationKernel(model, sched.interval, mkt.rate, mkt.dividend)
    print(f"continuation kernel ready in {time.perf_counter() - t0:.1f}s ({kernel.mode})")
    print("method    n  " + "".join(f"{s:>10g}" for s in spots) + "   seconds")
    for n in (int(x) for x in args.n.split(",")):
        t0 = time.perf_counter()
        res = price_bermudan(model, mkt, sched, n, spots=spots, span=args.span, kernel=kernel)
        secs = time.perf_counter() - t0
        print(f"tangent {n:4d}  " + "".join(f"{r.lower_bound:10.3f}" for r in res) + f"  {secs:8.1f}")
        print(f"secant  {n:4d}  " + "".join(f"{r.upper_bound:10.3f}" for r in res))
    if args.lsm_paths:
        sim = SimConfig(n_paths=args.lsm_paths, n_runs=10, seed=args.seed)
        row, err = [], []
        for s in spots:
            est = lsm_bermudan(model, replace(mkt, spot=s), sched, sim)
            row.append(est.mean)
            err.append(est.std_err)
        print("lsm           " + "".join(f"{v:10.3f}" for v in row))
        print("(std err)     " + "".join(f"{'(%.3f)' % e:>10}" for e in err))


if __name__ == "__main__":
    main()
