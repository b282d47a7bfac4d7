"""Timing harness for complete enumeration versus recursive recombination."""
from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .aiv import DEFAULT_TRIPLE_CAP, aiv_ce, aiv_rr, distribution_hash
from .errors import CapExceededError
from .msvol import DEFAULT_PATH_CAP, ChainSpec

FIELDS = ("algo", "m", "L", "seconds", "repeats", "result_hash")


def bench_chain(m: int, seed: int = 0, tau: float = 1.0 / 252) -> ChainSpec:
    """Generic m-state chain: irregular variance levels and a dense random transition matrix."""
    rng = np.random.default_rng([seed, m])
    var = np.sort(0.01 + 0.09 * rng.random(m))
    P = rng.random((m, m)) + 0.05
    P /= P.sum(axis=1, keepdims=True)
    P[:, -1] = 1.0 - P[:, :-1].sum(axis=1)
    return ChainSpec.from_variances(var, P, tau, var[m // 2])


@dataclass
class BenchRow:
    algo: str
    m: int
    L: int
    seconds: float | str
    repeats: int
    result_hash: str

    def as_csv(self) -> dict:
        sec = self.seconds if isinstance(self.seconds, str) else f"{self.seconds:.6g}"
        return {"algo": self.algo, "m": self.m, "L": self.L, "seconds": sec,
                "repeats": self.repeats, "result_hash": self.result_hash}


def _timed(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def run_bench(m_list, L_list, algos=("ce", "rr"), repeats: int = 1, path_cap: int = DEFAULT_PATH_CAP,
              triple_cap: int = DEFAULT_TRIPLE_CAP, seed: int = 0, progress=None) -> list[BenchRow]:
    """Median wall time per (algorithm, m, L); cells over a cap are recorded as ``skipped``.

    Where both algorithms ran, their result hashes must agree.
    """
    rows = []
    for m in m_list:
        chain = bench_chain(m, seed)
        for L in L_list:
            hashes = {}
            for algo in algos:
                if algo == "ce" and m**L > path_cap:
                    rows.append(BenchRow(algo, m, L, "skipped", repeats, "skipped"))
                    continue
                fn = (lambda: aiv_ce(chain, L, cap=path_cap)) if algo == "ce" else (
                    lambda: aiv_rr(chain, L, triple_cap=triple_cap))
                try:
                    sec, dist = _timed(fn, repeats)
                except (CapExceededError, MemoryError):
                    rows.append(BenchRow(algo, m, L, "skipped", repeats, "skipped"))
                    continue
                hashes[algo] = distribution_hash(dist)
                rows.append(BenchRow(algo, m, L, sec, repeats, hashes[algo]))
                if progress:
                    progress(rows[-1])
            if len(set(hashes.values())) > 1:
                raise AssertionError(f"CE and RR distributions differ at m={m}, L={L}: {hashes}")
    return rows


def write_csv(rows, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r.as_csv())
    finally:
        if own:
            fh.close()


def loglog_slope(L_values, seconds) -> float:
    """Least-squares slope of log(seconds) against log(L)."""
    x, y = np.log(np.asarray(L_values, float)), np.log(np.asarray(seconds, float))
    return float(np.polyfit(x, y, 1)[0])
