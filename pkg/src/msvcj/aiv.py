"""Exact distribution of the Markov-switching average integrated variance.

``V = (1/L) * sum_{k=0}^{L-1} sigma_k^2`` takes finitely many values.  The
recursive-recombination (RR) routine carries triples ``(running sum, step,
last state)`` forward one step at a time and merges triples that agree on all
three features, so the work grows polynomially in L.  Complete enumeration (CE)
walks all ``m^L`` paths and is kept as the ground-truth oracle.

Recombination happens on integers: every squared state is mapped to a
fixed-point key ``round(u_k^2 * 10^precision)`` and running sums of keys are
compared exactly.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, ValidationError
from .msvol import DEFAULT_PATH_CAP, ChainSpec, iter_path_blocks

DEFAULT_PRECISION = 12
DEFAULT_TRIPLE_CAP = 10**8
_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class AivDistribution:
    """Finite distribution of V with its integer recombination keys."""

    support: np.ndarray
    probs: np.ndarray
    horizon_steps: int
    chain_fingerprint: str
    keys: np.ndarray = field(repr=False)
    precision: int = DEFAULT_PRECISION
    stats: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.support.size

    def mean(self) -> float:
        return float(self.probs @ self.support)

    def to_rows(self):
        return list(zip(self.support.tolist(), self.probs.tolist()))


def support_bound(m: int, num_steps: int) -> int:
    """Upper bound C(L+m-2, m-1) on the number of distinct AIV values."""
    if m < 1 or num_steps < 1:
        raise ValidationError("support_bound needs m >= 1 and num_steps >= 1")
    return math.comb(num_steps + m - 2, m - 1)


def triple_bound(m: int, num_steps: int) -> int:
    """Upper bound m*C(L-1+m, m) on triples created over steps 1..L."""
    if m < 1 or num_steps < 1:
        raise ValidationError("triple_bound needs m >= 1 and num_steps >= 1")
    return m * math.comb(num_steps - 1 + m, m)


def layer_bound(m: int, step: int) -> int:
    """Bound m*C(l+m-2, m-1) on the triples alive at a single step l."""
    return m * math.comb(step + m - 2, m - 1)


def state_keys(chain: ChainSpec, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    scale = 10**precision
    keys = np.rint(chain.variances * scale)
    if np.any(keys < 1):
        raise ValidationError(
            f"precision {precision} maps a variance level to zero; increase precision"
        )
    return keys.astype(np.int64)


def _check_key_range(keys: np.ndarray, num_steps: int, precision: int) -> None:
    if int(keys.max()) * num_steps >= _INT64_MAX:
        raise ValidationError(
            f"fixed-point key sums overflow int64 for L={num_steps} at precision {precision}; "
            "lower the precision"
        )


def _finish(keys, probs, chain, L, precision, stats) -> AivDistribution:
    keep = probs > 0
    keys, probs = keys[keep], probs[keep]
    support = keys / (10.0**precision * L)
    keys.setflags(write=False)
    support.setflags(write=False)
    probs.setflags(write=False)
    return AivDistribution(support, probs, L, chain.fingerprint(), keys, precision, stats)


def _unique_sorted(a: np.ndarray) -> np.ndarray:
    a.sort(kind="stable")
    if a.size == 0:
        return a
    mask = np.empty(a.size, dtype=bool)
    mask[0] = True
    np.not_equal(a[1:], a[:-1], out=mask[1:])
    return a[mask]


def aiv_rr(chain: ChainSpec, num_steps: int, precision: int = DEFAULT_PRECISION,
           triple_cap: int = DEFAULT_TRIPLE_CAP) -> AivDistribution:
    """Exact AIV distribution via recursive recombination.

    Each layer is stored as sorted unique running-sum keys ``x`` with an
    ``(K, m)`` matrix of probabilities indexed by the last state.  Stepping
    forward adds the squared key of the last state and multiplies by P.
    """
    t0 = time.perf_counter()
    L = int(num_steps)
    if L < 1:
        raise ValidationError("num_steps must be >= 1")
    m = chain.m
    skey = state_keys(chain, precision)
    _check_key_range(skey, L, precision)
    P = chain.transition
    s0 = chain.initial_state_index

    if m == 1:
        keys = np.array([skey[0] * L], dtype=np.int64)
        stats = {"triples_per_step": [1] * L, "peak_triples": 1, "total_triples": L,
                 "seconds": time.perf_counter() - t0}
        return _finish(keys, np.ones(1), chain, L, precision, stats)

    keys = np.array([skey[s0]], dtype=np.int64)
    probs = P[s0][None, :].copy()
    counts = [int(np.count_nonzero(probs))]
    for step in range(1, L):
        live = probs > 0
        new_keys = _unique_sorted(np.concatenate([keys[live[:, i]] + skey[i] for i in range(m)]))
        if new_keys.size * m > triple_cap:
            raise CapExceededError(
                f"RR layer {step + 1} would hold up to {new_keys.size * m} triples, above the "
                f"triple cap {triple_cap}; total triples over L={L} steps are bounded by "
                f"m*C(L-1+m, m) = {triple_bound(m, L)} for m={m}",
                m=m, num_steps=L, cap=triple_cap, bound=triple_bound(m, L), step=step + 1,
            )
        W = np.zeros((new_keys.size, m))
        for i in range(m):
            pos = np.searchsorted(new_keys, keys[live[:, i]] + skey[i])
            W[pos, i] = probs[live[:, i], i]
        keys, probs = new_keys, W @ P
        counts.append(int(np.count_nonzero(probs)))

    pv = probs.sum(axis=1)
    stats = {
        "triples_per_step": counts,
        "peak_triples": max(counts),
        "total_triples": int(sum(counts)),
        "seconds": time.perf_counter() - t0,
    }
    return _finish(keys, pv, chain, L, precision, stats)


def aiv_ce(chain: ChainSpec, num_steps: int, precision: int = DEFAULT_PRECISION,
           cap: int = DEFAULT_PATH_CAP) -> AivDistribution:
    """Ground-truth AIV distribution by walking every chain path."""
    t0 = time.perf_counter()
    L = int(num_steps)
    skey = state_keys(chain, precision)
    _check_key_range(skey, L, precision)
    P = chain.transition
    acc: dict[int, float] = {}
    n_paths = 0
    for block in iter_path_blocks(chain, L, cap=cap):
        k = skey[block[:, :-1]].sum(axis=1)
        p = np.prod(P[block[:, :-1], block[:, 1:]], axis=1)
        uk, inv = np.unique(k, return_inverse=True)
        ps = np.bincount(inv, weights=p, minlength=uk.size)
        for key, val in zip(uk.tolist(), ps.tolist()):
            acc[key] = acc.get(key, 0.0) + val
        n_paths += block.shape[0]
    keys = np.array(sorted(acc), dtype=np.int64)
    probs = np.array([acc[int(k)] for k in keys])
    stats = {"paths": n_paths, "seconds": time.perf_counter() - t0}
    return _finish(keys, probs, chain, L, precision, stats)


_CACHE: dict = {}


def aiv_distribution(chain: ChainSpec, num_steps: int, precision: int = DEFAULT_PRECISION,
                     triple_cap: int = DEFAULT_TRIPLE_CAP) -> AivDistribution:
    """Memoized :func:`aiv_rr` keyed on the chain fingerprint, L and precision."""
    key = (chain.fingerprint(), int(num_steps), precision)
    dist = _CACHE.get(key)
    if dist is None:
        dist = aiv_rr(chain, num_steps, precision, triple_cap)
        if len(_CACHE) > 256:
            _CACHE.clear()
        _CACHE[key] = dist
    return dist


def distribution_hash(dist: AivDistribution) -> str:
    """Digest of the support keys plus probabilities rounded to 12 significant digits."""
    import hashlib

    h = hashlib.sha256(np.ascontiguousarray(dist.keys).tobytes())
    h.update(np.array([float(f"{p:.12e}") for p in dist.probs]).tobytes())
    return h.hexdigest()[:16]
