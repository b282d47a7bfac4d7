"""Analytic European prices under MS-SV, MS-SVJ and MS-SVCJ.

Every price here is a finite mixture of Black-Scholes values.  A mixture is
described by *atoms*: a log-spot shift ``a``, an annualized variance ``V`` and a
weight ``w``, contributing ``w * BS(S * e^a, V, r, q, T, K)``.

* MS-SV:   atoms (0, v, p_V(v)) over the AIV support.
* MS-SVJ:  Merton jump-diffusion price for each AIV atom.
* MS-SVCJ: atoms (-lambda*zeta*T + x, v + b_hat*y, p(N=n) p_V(v) w_xy) over
  jump counts n, quadrature nodes (x, y) for (X_n, Y_n) and AIV atoms v.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .aiv import DEFAULT_PRECISION, AivDistribution, aiv_distribution
from .errors import ValidationError
from .jumps import (DEFAULT_HERMITE, DEFAULT_LAGUERRE, JumpSpec, PeaSpec, jump_quadrature,
                    pea_aggregate, truncate_poisson)
from .msvol import ChainSpec


@dataclass(frozen=True)
class MarketSpec:
    spot: float
    strike: float
    rate: float
    maturity: float
    dividend: float = 0.0
    kind: str = "call"

    def __post_init__(self):
        if not self.spot > 0:
            raise ValidationError(f"spot must be > 0, got {self.spot}")
        if not self.strike > 0:
            raise ValidationError(f"strike must be > 0, got {self.strike}")
        if not self.maturity > 0:
            raise ValidationError(f"maturity must be > 0, got {self.maturity}")
        if self.kind not in ("call", "put"):
            raise ValidationError(f"option kind must be 'call' or 'put', got {self.kind!r}")

    def forward(self) -> float:
        return self.spot * math.exp((self.rate - self.dividend) * self.maturity)


@dataclass
class PriceResult:
    price: float
    delta: float
    truncation_mass_dropped: float = 0.0
    n_max: int = 0
    support_size: int = 0
    quadrature_orders: tuple = (0, 0)
    seconds: float = 0.0
    components: Optional[list] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "price": self.price,
            "delta": self.delta,
            "n_max": self.n_max,
            "support_size": self.support_size,
            "dropped_poisson_mass": self.truncation_mass_dropped,
            "quadrature_orders": list(self.quadrature_orders),
            "seconds": self.seconds,
        }
        if self.components is not None:
            out["components"] = self.components
        return out


def bs_price(spot, v, r, q, T, K, kind="call"):
    """Black-Scholes price and spot delta for annualized variance ``v``.

    Broadcasts over array arguments.  ``v = 0`` gives the discounted intrinsic
    value of the forward.
    """
    spot = np.asarray(spot, dtype=float)
    v = np.asarray(v, dtype=float)
    K = np.asarray(K, dtype=float)
    dq, dr = math.exp(-q * T), math.exp(-r * T)
    sd = np.sqrt(v * T)
    fwd = spot * math.exp((r - q) * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.log(fwd / K)
        d1 = np.where(sd > 0, lm / sd + 0.5 * sd, np.where(lm > 0, np.inf, -np.inf))
        d2 = d1 - sd
    n1, n2 = ndtr(d1), ndtr(d2)
    if kind == "call":
        price = dq * spot * n1 - dr * K * n2
        delta = dq * n1
    elif kind == "put":
        price = dr * K * (1.0 - n2) - dq * spot * (1.0 - n1)
        delta = dq * (n1 - 1.0)
    else:
        raise ValidationError(f"option kind must be 'call' or 'put', got {kind!r}")
    price = np.maximum(price, 0.0)
    if price.ndim == 0:
        return float(price), float(delta)
    return price, delta


@dataclass(frozen=True, eq=False)
class Atoms:
    """Flat arrays describing a Black-Scholes mixture."""

    shift: np.ndarray
    var: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.weight.size


def price_atoms(spot, strikes, atoms: Atoms, r: float, q: float, T: float, kind: str = "call",
                chunk: int = 1 << 21):
    """Mixture price and delta for every (spot, strike) pair given as broadcastable arrays.

    Sums are accumulated over atoms in a fixed order, so results do not depend
    on chunking of the pair list.
    """
    spot, strikes = np.broadcast_arrays(np.asarray(spot, dtype=float), np.asarray(strikes, dtype=float))
    shape = spot.shape
    s, k = spot.ravel(), strikes.ravel()
    price = np.empty(s.size)
    delta = np.empty(s.size)
    growth = np.exp(atoms.shift)
    step = max(1, chunk // max(1, len(atoms)))
    for lo in range(0, s.size, step):
        sl = slice(lo, lo + step)
        S_eff = s[sl, None] * growth[None, :]
        p, d = bs_price(S_eff, atoms.var[None, :], r, q, T, k[sl, None], kind)
        price[sl] = p @ atoms.weight
        delta[sl] = (d * growth[None, :]) @ atoms.weight
    return price.reshape(shape), delta.reshape(shape)


def mixture_distribution(chain: ChainSpec, probs_by_state, num_steps: int,
                         precision: int = DEFAULT_PRECISION) -> tuple[np.ndarray, np.ndarray]:
    """AIV distribution when the starting state is itself random with the given probabilities.

    Per-state distributions are merged on their integer keys.
    """
    acc: dict[int, float] = {}
    for idx, w in enumerate(np.asarray(probs_by_state, dtype=float)):
        if w <= 0:
            continue
        dist = aiv_distribution(chain.with_initial(idx), num_steps, precision)
        for key, p in zip(dist.keys.tolist(), dist.probs.tolist()):
            acc[key] = acc.get(key, 0.0) + w * p
    keys = np.array(sorted(acc), dtype=np.int64)
    probs = np.array([acc[int(kk)] for kk in keys])
    return keys / (10.0**precision * num_steps), probs


def _check_lognormal(jump: JumpSpec):
    if not isinstance(jump, JumpSpec):
        raise ValidationError("MS-SVCJ pricing needs a lognormal JumpSpec")


def svcj_atoms(support, probs, jump: JumpSpec, pea: PeaSpec | None, T: float,
               n_hermite: int = DEFAULT_HERMITE, n_laguerre: int = DEFAULT_LAGUERRE):
    """Atoms of the MS-SVCJ mixture for an AIV distribution over horizon T.

    Returns ``(atoms, truncation)``.  Atoms are ordered by jump count, then
    quadrature node, then AIV value.
    """
    _check_lognormal(jump)
    support = np.asarray(support, dtype=float)
    probs = np.asarray(probs, dtype=float)
    trunc = truncate_poisson(jump.intensity, T, jump.truncation_eps, jump.n_max)
    b_hat = pea_aggregate(pea, T) if pea is not None else 0.0
    drift = -jump.intensity * jump.zeta * T
    shifts, variances, weights = [], [], []
    for n, pn in enumerate(trunc.weights):
        quad = jump_quadrature(n, jump.log_mean, jump.log_var, n_hermite, n_laguerre)
        shifts.append(np.repeat(drift + quad.x, support.size))
        variances.append((support[None, :] + b_hat * quad.y[:, None]).ravel())
        weights.append((pn * quad.weights[:, None] * probs[None, :]).ravel())
    atoms = Atoms(np.concatenate(shifts), np.concatenate(variances), np.concatenate(weights))
    return atoms, trunc


def _maturity_steps(chain: ChainSpec, T: float) -> int:
    return chain.steps_for(T, "maturity")


def price_ms_sv(market: MarketSpec, chain: ChainSpec, precision: int = DEFAULT_PRECISION,
                dist: AivDistribution | None = None) -> PriceResult:
    """AIV mixture of Black-Scholes prices."""
    t0 = time.perf_counter()
    L = _maturity_steps(chain, market.maturity)
    dist = dist or aiv_distribution(chain, L, precision)
    atoms = Atoms(np.zeros(len(dist)), dist.support, dist.probs)
    p, d = price_atoms(market.spot, market.strike, atoms, market.rate, market.dividend,
                       market.maturity, market.kind)
    return PriceResult(float(p), float(d), 0.0, 0, len(dist), (0, 0), time.perf_counter() - t0)


def merton_jd_pricer(jump: JumpSpec) -> Callable:
    """Merton lognormal jump-diffusion price as a function of the diffusion variance.

    Conditional on n jumps the terminal log-price is Gaussian with variance
    ``v*T + n*eps2``, so each term is a Black-Scholes value; the Poisson sum is
    truncated exactly like the MS-SVCJ pricer (same N_max, no renormalization).
    """

    def pricer(spot, v, r, q, T, K, kind="call"):
        trunc = truncate_poisson(jump.intensity, T, jump.truncation_eps, jump.n_max)
        price = np.zeros(np.broadcast(np.asarray(spot), np.asarray(v), np.asarray(K)).shape)
        delta = np.zeros_like(price)
        for n, pn in enumerate(trunc.weights):
            g = math.exp(-jump.intensity * jump.zeta * T + n * jump.log_mean + 0.5 * n * jump.log_var)
            p, d = bs_price(np.asarray(spot) * g, np.asarray(v) + n * jump.log_var / T, r, q, T, K, kind)
            price = price + pn * p
            delta = delta + pn * g * np.asarray(d)
        return price, delta

    pricer.truncation = lambda T: truncate_poisson(jump.intensity, T, jump.truncation_eps, jump.n_max)
    return pricer


def price_ms_svj(market: MarketSpec, chain: ChainSpec, jump: JumpSpec, jd_pricer: Callable | None = None,
                 precision: int = DEFAULT_PRECISION) -> PriceResult:
    """AIV mixture of jump-diffusion prices; ``jd_pricer`` defaults to the Merton series.

    ``jd_pricer(spot, v, r, q, T, K, kind)`` must return ``(price, delta)`` arrays
    broadcast over ``v``.
    """
    t0 = time.perf_counter()
    L = _maturity_steps(chain, market.maturity)
    dist = aiv_distribution(chain, L, precision)
    pricer = jd_pricer or merton_jd_pricer(jump)
    p, d = pricer(market.spot, dist.support, market.rate, market.dividend, market.maturity,
                  market.strike, market.kind)
    price = float(np.asarray(p) @ dist.probs)
    delta = float(np.asarray(d) @ dist.probs)
    dropped, n_max = 0.0, 0
    if hasattr(pricer, "truncation"):
        tr = pricer.truncation(market.maturity)
        dropped, n_max = tr.dropped_mass, tr.n_max
    return PriceResult(price, delta, dropped, n_max, len(dist), (0, 0), time.perf_counter() - t0)


def price_ms_svcj(market: MarketSpec, chain: ChainSpec, jump: JumpSpec, pea: PeaSpec | None,
                  n_hermite: int = DEFAULT_HERMITE, n_laguerre: int = DEFAULT_LAGUERRE,
                  precision: int = DEFAULT_PRECISION, components: bool = False) -> PriceResult:
    """Closed-form MS-SVCJ price: Poisson x quadrature x AIV mixture of Black-Scholes values.

    Jumps inside the final decay window are treated as starting at T - delta,
    which makes every jump contribute a full window to the integrated variance.
    """
    t0 = time.perf_counter()
    L = _maturity_steps(chain, market.maturity)
    dist = aiv_distribution(chain, L, precision)
    atoms, trunc = svcj_atoms(dist.support, dist.probs, jump, pea, market.maturity, n_hermite, n_laguerre)
    r, q, T = market.rate, market.dividend, market.maturity
    S_eff = market.spot * np.exp(atoms.shift)
    p, d = bs_price(S_eff, atoms.var, r, q, T, market.strike, market.kind)
    contrib = p * atoms.weight
    price = float(contrib.sum())
    delta = float((d * np.exp(atoms.shift)) @ atoms.weight)
    table = None
    if components:
        m = len(dist)
        table = []
        start = 0
        for n in range(trunc.n_max + 1):
            n_nodes = jump_quadrature(n, jump.log_mean, jump.log_var, n_hermite, n_laguerre).weights.size
            block = contrib[start:start + n_nodes * m].reshape(n_nodes, m).sum(axis=0)
            start += n_nodes * m
            table.extend({"n": n, "v": float(v), "value": float(c)} for v, c in zip(dist.support, block))
    orders = (n_hermite, n_laguerre) if trunc.n_max > 0 else (0, 0)
    return PriceResult(price, delta, trunc.dropped_mass, trunc.n_max, len(dist), orders,
                       time.perf_counter() - t0, table)


def price_model(market: MarketSpec, chain: ChainSpec, jump: JumpSpec | None = None,
                pea: PeaSpec | None = None, **numerics) -> PriceResult:
    """Dispatch on which blocks are present: no jumps -> MS-SV, no PEA -> MS-SVJ."""
    precision = numerics.get("precision", DEFAULT_PRECISION)
    if jump is None:
        return price_ms_sv(market, chain, precision)
    if pea is None:
        return price_ms_svj(market, chain, jump, precision=precision)
    return price_ms_svcj(market, chain, jump, pea, numerics.get("n_hermite", DEFAULT_HERMITE),
                         numerics.get("n_laguerre", DEFAULT_LAGUERRE), precision,
                         numerics.get("components", False))


def implied_vol(price: float, spot: float, strike: float, rate: float, maturity: float,
                dividend: float = 0.0, kind: str = "call") -> float:
    """Black-Scholes implied volatility by bracketing root search."""
    def gap(sig):
        return float(bs_price(spot, sig * sig, rate, dividend, maturity, strike, kind)[0]) - price

    lo, hi = 1e-6, 5.0
    if gap(lo) > 0 or gap(hi) < 0:
        raise ValidationError(f"price {price} is outside the Black-Scholes range for this contract")
    return brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)
