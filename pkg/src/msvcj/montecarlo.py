"""Monte Carlo oracles: Euler European pricing and least-squares Monte Carlo for Bermudans.

Given the chain path and the jumps, the instantaneous variance is a
deterministic function of time, so an Euler scheme for ``ln S`` with
left-endpoint variances is Gaussian with mean ``sum (r - q - lambda*zeta -
v_k/2) h`` and variance ``sum v_k h``.  The European simulator draws that
Gaussian directly, which is identical in distribution to stepping through all
substeps, and reproduces the discretization error of the PEA decay exactly.

Runs use independent Philox streams spawned from one seed, so results are
reproducible and do not depend on block sizes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bermudan import ExerciseSchedule
from .errors import ValidationError
from .european import MarketSpec, bs_price
from .models import Model


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``n_substeps`` is the Euler grid over the option maturity."""

    n_substeps: int = 1500
    n_paths: int = 100_000
    n_runs: int = 10
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_substeps < 1:
            raise ValidationError("n_substeps must be >= 1")
        if self.n_paths < 1 or self.n_runs < 1:
            raise ValidationError("n_paths and n_runs must be >= 1")
        if self.antithetic and self.n_paths % 2:
            raise ValidationError("antithetic sampling needs an even n_paths")

    def run_generators(self):
        children = np.random.SeedSequence(self.seed).spawn(self.n_runs)
        return [np.random.Generator(np.random.Philox(c)) for c in children]


@dataclass
class McEstimate:
    """Mean of per-run estimates.

    ``std_err`` is the sample standard deviation of the run estimates, the
    precision of a single run; ``sem`` divides it by sqrt(n_runs).
    """

    mean: float
    std_err: float
    per_run: np.ndarray
    sem: float
    n_paths: int
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_runs(cls, runs, n_paths: int, seconds: float = 0.0, **extra) -> "McEstimate":
        runs = np.asarray(runs, dtype=float)
        sd = float(runs.std(ddof=1)) if runs.size > 1 else 0.0
        return cls(float(runs.mean()), sd, runs, sd / math.sqrt(runs.size), n_paths, seconds, extra)

    def ci95(self) -> tuple[float, float]:
        return self.mean - 1.96 * self.std_err, self.mean + 1.96 * self.std_err

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_err": self.std_err,
            "sem": self.sem,
            "per_run": self.per_run.tolist(),
            "n_paths": self.n_paths,
            "seconds": self.seconds,
            **self.extra,
        }


def chain_variance_sums(model: Model, n: int, num_steps: int, group: int, rng) -> np.ndarray:
    """Simulate chain paths and return ``tau * sum sigma^2`` over consecutive groups of steps.

    Output shape is ``(n, num_steps // group)``; only the running state is stored.
    """
    chain = model.chain
    var = chain.variances
    cdf = np.cumsum(chain.transition, axis=1)
    cdf[:, -1] = 1.0
    out = np.zeros((n, num_steps // group))
    state = np.full(n, chain.initial_state_index)
    for k in range(num_steps):
        out[:, k // group] += var[state]
        if chain.m > 1:
            u = rng.random(n)
            state = (u[:, None] >= cdf[state]).sum(axis=1)
    return out * chain.step


@dataclass
class JumpDraws:
    """Flat jump arrays; ``owner`` maps each jump to its path, times sorted within a path."""

    owner: np.ndarray
    times: np.ndarray
    log_size: np.ndarray


def draw_jumps(model: Model, n: int, horizon: float, rng) -> JumpDraws:
    if model.jump is None or model.jump.intensity == 0:
        empty = np.zeros(0)
        return JumpDraws(np.zeros(0, dtype=np.int64), empty, empty)
    j = model.jump
    counts = rng.poisson(j.intensity * horizon, n)
    owner = np.repeat(np.arange(n), counts)
    times = rng.uniform(0.0, horizon, owner.size)
    order = np.lexsort((times, owner))
    times = times[order]
    logs = j.log_mean + math.sqrt(j.log_var) * rng.standard_normal(owner.size)
    return JumpDraws(owner, times, logs)


def _pea_window(model: Model, jumps: JumpDraws, lo, hi) -> np.ndarray:
    """Exact per-jump integral of the PEA spike over [lo, hi] (arrays broadcast against jumps)."""
    pea = model.pea
    a = np.maximum(jumps.times, lo)
    b = np.minimum(jumps.times + pea.delta, hi)
    dec = np.exp(-pea.beta * (a - jumps.times)) - np.exp(-pea.beta * (b - jumps.times))
    return np.where(b > a, pea.b * jumps.log_size**2 * dec / pea.beta, 0.0)


def _pea_euler(model: Model, jumps: JumpDraws, horizon: float, n_substeps: int) -> np.ndarray:
    """Per-jump PEA variance seen by a left-endpoint Euler scheme with ``n_substeps`` steps."""
    pea = model.pea
    h = horizon / n_substeps
    eps = 1e-9
    k0 = np.floor(jumps.times / h + eps) + 1
    k1 = np.minimum(np.floor((jumps.times + pea.delta) / h + eps), n_substeps - 1)
    count = np.maximum(k1 - k0 + 1, 0)
    ratio = math.exp(-pea.beta * h)
    first = np.exp(-pea.beta * (k0 * h - jumps.times))
    geo = first * -np.expm1(count * math.log(ratio)) / -math.expm1(math.log(ratio))
    return pea.b * jumps.log_size**2 * h * geo


def _per_path(values, owner, n) -> np.ndarray:
    return np.bincount(owner, weights=values, minlength=n) if values.size else np.zeros(n)


def _payoff(S, K, kind):
    return np.maximum(S - K, 0.0) if kind == "call" else np.maximum(K - S, 0.0)


def simulate_terminal(model: Model, market: MarketSpec, n: int, n_substeps: int, rng,
                      antithetic: bool = False) -> np.ndarray:
    """Terminal spots from the Euler scheme (jumps at their true times, PEA cut at maturity)."""
    T = market.maturity
    L = model.chain.steps_for(T, "maturity")
    if n_substeps % L:
        raise ValidationError(
            f"n_substeps={n_substeps} must be a multiple of the {L} chain steps to maturity "
            "so regime switches fall on the Euler grid"
        )
    base = n // 2 if antithetic else n
    V = chain_variance_sums(model, base, L, L, rng)[:, 0]
    jumps = draw_jumps(model, base, T, rng)
    X = _per_path(jumps.log_size, jumps.owner, base)
    if model.pea is not None and jumps.owner.size:
        V = V + _per_path(_pea_euler(model, jumps, T, n_substeps), jumps.owner, base)
    Z = rng.standard_normal(base)
    if antithetic:
        V, X, Z = np.tile(V, 2), np.tile(X, 2), np.concatenate([Z, -Z])
    drift = (market.rate - market.dividend - model.drift_correction()) * T
    return market.spot * np.exp(drift - 0.5 * V + np.sqrt(V) * Z + X)


def mc_european(model: Model, market: MarketSpec, sim: SimConfig) -> McEstimate:
    """Euler Monte Carlo European price without any jump-time relocation."""
    t0 = time.perf_counter()
    disc = math.exp(-market.rate * market.maturity)
    runs = []
    for rng in sim.run_generators():
        S = simulate_terminal(model, market, sim.n_paths, sim.n_substeps, rng, sim.antithetic)
        runs.append(disc * _payoff(S, market.strike, market.kind).mean())
    return McEstimate.from_runs(runs, sim.n_paths, time.perf_counter() - t0, n_substeps=sim.n_substeps)


def mc_exact_conditional(model: Model, market: MarketSpec, sim: SimConfig, relocate: bool = False,
                         paired: bool = False) -> McEstimate:
    """Conditional Black-Scholes estimator with the path's exact integrated variance.

    ``relocate`` moves jumps from the last PEA window to its start, which is
    the assumption behind the analytic price.  With ``paired`` the estimator
    returns the per-run mean difference (unrelocated minus relocated) on the
    same paths, in ``extra['paired_diff']``.
    """
    t0 = time.perf_counter()
    T = market.maturity
    L = model.chain.steps_for(T, "maturity")
    runs, diffs = [], []
    for rng in sim.run_generators():
        n = sim.n_paths
        V = chain_variance_sums(model, n, L, L, rng)[:, 0]
        jumps = draw_jumps(model, n, T, rng)
        X = _per_path(jumps.log_size, jumps.owner, n)
        shift = X - model.drift_correction() * T

        def price(times):
            v = V
            if model.pea is not None and jumps.owner.size:
                moved = JumpDraws(jumps.owner, times, jumps.log_size)
                v = V + _per_path(_pea_window(model, moved, 0.0, T), jumps.owner, n)
            p, _ = bs_price(market.spot * np.exp(shift), v / T, market.rate, market.dividend, T,
                            market.strike, market.kind)
            return p

        if model.pea is not None:
            relocated = np.minimum(jumps.times, max(T - model.pea.delta, 0.0))
        else:
            relocated = jumps.times
        p = price(relocated if relocate else jumps.times)
        runs.append(p.mean())
        if paired:
            other = price(jumps.times if relocate else relocated)
            d = (other - p) if relocate else (p - other)
            diffs.append(d.mean())
    extra = {"relocate": relocate}
    if paired:
        extra["paired_diff"] = float(np.mean(diffs))
        extra["paired_diff_sem"] = float(np.std(diffs, ddof=1) / math.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
    return McEstimate.from_runs(runs, sim.n_paths, time.perf_counter() - t0, **extra)


def simulate_exercise_spots(model: Model, market: MarketSpec, schedule: ExerciseSchedule, n: int, rng,
                            antithetic: bool = False) -> np.ndarray:
    """Spots at every exercise date, shape (n, count), with exact per-interval variances."""
    spi = schedule.steps_per_interval(model)
    M, dt = schedule.count, schedule.interval
    T = schedule.maturity
    base = n // 2 if antithetic else n
    V = chain_variance_sums(model, base, spi * M, spi, rng)
    jumps = draw_jumps(model, base, T, rng)
    X = np.zeros((base, M))
    if jumps.owner.size:
        slot = np.minimum((jumps.times // dt).astype(np.int64), M - 1)
        np.add.at(X, (jumps.owner, slot), jumps.log_size)
        if model.pea is not None:
            for j in range(M):
                w = _pea_window(model, jumps, j * dt, (j + 1) * dt)
                V[:, j] += _per_path(w, jumps.owner, base)
    Z = rng.standard_normal((base, M))
    if antithetic:
        V, X, Z = np.tile(V, (2, 1)), np.tile(X, (2, 1)), np.concatenate([Z, -Z])
    drift = (market.rate - market.dividend - model.drift_correction()) * dt
    logs = np.cumsum(drift - 0.5 * V + np.sqrt(V) * Z + X, axis=1)
    return market.spot * np.exp(logs)


def _basis(S, payoff, K, degree):
    x = S / K
    cols = [x**d for d in range(degree + 1)]
    cols.append(payoff / K)
    return np.column_stack(cols)


def lsm_price(spots: np.ndarray, market: MarketSpec, dt: float, degree: int = 3) -> float:
    """Longstaff-Schwartz estimate from simulated spots at the exercise dates."""
    K, kind = market.strike, market.kind
    growth = math.exp(-market.rate * dt)
    cash = _payoff(spots[:, -1], K, kind)
    for j in range(spots.shape[1] - 2, -1, -1):
        cash *= growth
        S = spots[:, j]
        pay = _payoff(S, K, kind)
        itm = pay > 0
        if itm.sum() > degree + 2:
            A = _basis(S[itm], pay[itm], K, degree)
            coef, *_ = np.linalg.lstsq(A, cash[itm], rcond=None)
            ex = pay[itm] > A @ coef
            idx = np.flatnonzero(itm)[ex]
            cash[idx] = pay[idx]
    value = growth * cash.mean()
    return max(value, float(_payoff(np.array(market.spot), K, kind)))


def lsm_bermudan(model: Model, market: MarketSpec, schedule: ExerciseSchedule, sim: SimConfig,
                 basis_degree: int = 3) -> McEstimate:
    """Least-squares Monte Carlo Bermudan price; regressors 1, S, ..., S^degree and the payoff."""
    if basis_degree < 1:
        raise ValidationError("basis_degree must be >= 1")
    if abs(schedule.maturity - market.maturity) > 1e-12 * max(1.0, market.maturity):
        raise ValidationError("schedule maturity must equal the option maturity")
    t0 = time.perf_counter()
    runs = []
    for rng in sim.run_generators():
        spots = simulate_exercise_spots(model, market, schedule, sim.n_paths, rng, sim.antithetic)
        runs.append(lsm_price(spots, market, schedule.interval, basis_degree))
    return McEstimate.from_runs(runs, sim.n_paths, time.perf_counter() - t0, basis_degree=basis_degree)
