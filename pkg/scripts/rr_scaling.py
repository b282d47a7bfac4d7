"""Timing of complete enumeration versus recursive recombination, with log-log slopes per chain size."""
import argparse
import sys

from msvcj import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", default="2,3,4,5,6")
    ap.add_argument("--L", default="10,15,20,25,30,35,40,45,50")
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--csv", help="CSV output path (default: stdout)")
    args = ap.parse_args()

    ms = [int(x) for x in args.m.split(",")]
    Ls = [int(x) for x in args.L.split(",")]
    progress = lambda r: print(f"{r.algo} m={r.m} L={r.L}: {r.seconds}", file=sys.stderr, flush=True)
    rows = bench.run_bench(ms, Ls, repeats=args.repeats, progress=progress)
    bench.write_csv(rows, args.csv or sys.stdout)
    for m in ms:
        pts = [(r.L, r.seconds) for r in rows if r.algo == "rr" and r.m == m and r.L >= 20
               and not isinstance(r.seconds, str)]
        if len(pts) >= 2:
            print(f"rr slope m={m}: {bench.loglog_slope(*zip(*pts)):.2f}", file=sys.stderr)


if __name__ == "__main__":
    main()
