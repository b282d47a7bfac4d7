"""Bermudan bounds by backward induction on convex piecewise-linear value functions.

A value function ``f(S) = a + b*S + sum_j g_j (S - k_j)^+`` rolls back one
exercise interval as a portfolio of cash, forward and European calls, so each
date only needs European prices and deltas on a grid of spots.  The exercise
value ``H = max(payoff, continuation)`` is convex; replacing it with the upper
envelope of its tangents under-approximates it (lower bound), replacing it
with chords through the grid over-approximates it (upper bound).

The chain state at an exercise date is mixed in with its unconditional
distribution at that date, independently of the spot.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import ndtr

from .aiv import aiv_distribution
from .errors import ValidationError
from .european import Atoms, MarketSpec, mixture_distribution
from .models import Model
from .msvol import StateDistribution, evolve_distribution

KINK_MERGE_REL = 1e-9
GAMMA_DROP = 1e-12
DEFAULT_SPAN = 2.0


@dataclass(frozen=True)
class ExerciseSchedule:
    """Equally spaced exercise dates ``interval, 2*interval, ..., count*interval``."""

    interval: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("schedule needs at least one exercise date")
        if not self.interval > 0:
            raise ValidationError("exercise interval must be > 0")

    @classmethod
    def parse(cls, text: str) -> "ExerciseSchedule":
        """Parse ``"interval:count"``, e.g. ``"0.5:6"``."""
        try:
            a, b = text.split(":")
            return cls(float(a), int(b))
        except ValueError as exc:
            raise ValidationError(f"schedule must look like 'interval:count', got {text!r}") from exc

    @property
    def maturity(self) -> float:
        return self.interval * self.count

    @property
    def dates(self) -> np.ndarray:
        return self.interval * np.arange(self.count + 1)

    def steps_per_interval(self, model: Model) -> int:
        return model.chain.steps_for(self.interval, "exercise interval")


@dataclass
class PiecewiseValue:
    """Convex piecewise-linear function on S >= 0 in call-portfolio form."""

    intercept: float
    slope: float
    kinks: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gammas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.kinks = np.asarray(self.kinks, dtype=float)
        self.gammas = np.asarray(self.gammas, dtype=float)
        if self.kinks.shape != self.gammas.shape:
            raise ValidationError("kinks and gammas must have equal length")
        if np.any(self.gammas < 0):
            raise ValidationError("piecewise value must be convex (all slope increments >= 0)")

    @classmethod
    def payoff(cls, strike: float, kind: str = "call") -> "PiecewiseValue":
        if kind == "call":
            return cls(0.0, 0.0, [strike], [1.0])
        if kind == "put":
            return cls(strike, -1.0, [strike], [1.0])
        raise ValidationError(f"option kind must be 'call' or 'put', got {kind!r}")

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        out = self.intercept + self.slope * S
        if self.kinks.size:
            out = out + np.maximum(S[..., None] - self.kinks, 0.0) @ self.gammas
        return out

    def right_slope(self, S):
        S = np.asarray(S, dtype=float)
        out = self.slope + np.zeros_like(S)
        if self.kinks.size:
            out = out + (S[..., None] >= self.kinks).astype(float) @ self.gammas
        return out

    def left_slope(self, S):
        S = np.asarray(S, dtype=float)
        out = self.slope + np.zeros_like(S)
        if self.kinks.size:
            out = out + (S[..., None] > self.kinks).astype(float) @ self.gammas
        return out

    @property
    def asymptotic_slope(self) -> float:
        return float(self.slope + self.gammas.sum())

    def compact(self, scale: float) -> "PiecewiseValue":
        """Merge kinks closer than ``KINK_MERGE_REL * scale`` and drop negligible ones."""
        if self.kinks.size == 0:
            return self
        order = np.argsort(self.kinks)
        k, g = self.kinks[order], self.gammas[order]
        keep_k, keep_g = [k[0]], [g[0]]
        for kk, gg in zip(k[1:], g[1:]):
            if kk - keep_k[-1] < KINK_MERGE_REL * scale:
                tot = keep_g[-1] + gg
                if tot > 0:
                    keep_k[-1] = (keep_k[-1] * keep_g[-1] + kk * gg) / tot
                keep_g[-1] = tot
            else:
                keep_k.append(kk)
                keep_g.append(gg)
        k, g = np.array(keep_k), np.array(keep_g)
        mask = g >= GAMMA_DROP
        return PiecewiseValue(self.intercept, self.slope, k[mask], g[mask])


def _bs_unit_call(x, var, T, r, q, need_gamma=False):
    """Call with unit strike and spot ``x``: price, delta, optionally gamma."""
    sd = np.sqrt(var * T)
    dq, dr = math.exp(-q * T), math.exp(-r * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.log(x) + (r - q) * T
        d1 = np.where(sd > 0, lm / sd + 0.5 * sd, np.where(lm > 0, np.inf, -np.inf))
    n1, n2 = ndtr(d1), ndtr(d1 - sd)
    price = np.maximum(dq * x * n1 - dr * n2, 0.0)
    delta = dq * n1
    if not need_gamma:
        return price, delta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gamma = np.where(sd > 0, dq * np.exp(-0.5 * d1 * d1) / (math.sqrt(2 * math.pi) * x * sd), 0.0)
    return price, delta, gamma


class ContinuationKernel:
    """Mixture call prices for one interval length, reused across dates and strikes.

    ``exact`` evaluates every Black-Scholes atom for every (spot, strike) pair.
    ``table`` tabulates the unit-strike call ``c(z)`` per starting chain state
    on a log-moneyness grid (value, first and second derivative computed
    exactly) and interpolates with cubic Hermite splines, using homogeneity
    ``Call(S, k) = k * c(ln(S / k))``.  Pairs outside the table fall back to
    exact evaluation.
    """

    def __init__(self, model: Model, dt: float, rate: float, dividend: float, mode: str = "auto",
                 z_max: float = 4.0, z_step: float = 0.01):
        self.model, self.dt, self.r, self.q = model, dt, rate, dividend
        self.steps = model.chain.steps_for(dt, "exercise interval")
        if mode == "auto":
            mode = "exact" if model.kind == "ms_sv" else "table"
        if mode not in ("exact", "table"):
            raise ValidationError(f"kernel mode must be 'exact', 'table' or 'auto', got {mode!r}")
        self.mode = mode
        self._atoms_cache: dict = {}
        self._tables = None
        if mode == "table":
            self._build_tables(z_max, z_step)

    def atoms_for(self, pi: np.ndarray) -> Atoms:
        key = np.asarray(pi, dtype=float).tobytes()
        atoms = self._atoms_cache.get(key)
        if atoms is None:
            support, probs = mixture_distribution(self.model.chain, pi, self.steps, self.model.precision)
            atoms = self.model.atoms(support, probs, self.dt)
            self._atoms_cache[key] = atoms
        return atoms

    def _build_tables(self, z_max, z_step):
        n = int(round(2 * z_max / z_step)) + 1
        z = np.linspace(-z_max, z_max, n)
        x = np.exp(z)
        f, f1, f2 = [], [], []
        chain = self.model.chain
        for s in range(chain.m):
            dist = aiv_distribution(chain.with_initial(s), self.steps, self.model.precision)
            atoms = self.model.atoms(dist.support, dist.probs, self.dt)
            g = np.exp(atoms.shift)
            price = np.zeros(n)
            delta = np.zeros(n)
            gamma = np.zeros(n)
            step = max(1, (1 << 21) // len(atoms))
            for lo in range(0, n, step):
                xs = x[lo:lo + step, None] * g[None, :]
                p, d, gm = _bs_unit_call(xs, atoms.var[None, :], self.dt, self.r, self.q, need_gamma=True)
                price[lo:lo + step] = p @ atoms.weight
                delta[lo:lo + step] = (d * g) @ atoms.weight
                gamma[lo:lo + step] = (gm * g * g) @ atoms.weight
            f.append(price)
            f1.append(x * delta)
            f2.append(x * delta + x * x * gamma)
        self._tables = (z, np.array(f), np.array(f1), np.array(f2))

    def call(self, S, k, pi):
        """Mixture call price and delta for broadcastable spot/strike arrays under state mix ``pi``."""
        S, k = np.broadcast_arrays(np.asarray(S, dtype=float), np.asarray(k, dtype=float))
        shape = S.shape
        S, k = S.ravel(), k.ravel()
        price = np.zeros(S.size)
        delta = np.zeros(S.size)
        pos = S > 0
        if self.mode == "exact":
            idx = np.flatnonzero(pos)
            if idx.size:
                p, d = self._exact(S[idx], k[idx], pi)
                price[idx], delta[idx] = p, d
            return price.reshape(shape), delta.reshape(shape)
        z_grid, f, f1, f2 = self._tables
        pi = np.asarray(pi, dtype=float)
        with np.errstate(divide="ignore"):
            zq = np.log(S / k)
        inside = pos & (zq >= z_grid[0]) & (zq <= z_grid[-1])
        if inside.any():
            val = CubicHermiteSpline(z_grid, pi @ f, pi @ f1)(zq[inside])
            der = CubicHermiteSpline(z_grid, pi @ f1, pi @ f2)(zq[inside])
            price[inside] = k[inside] * np.maximum(val, 0.0)
            delta[inside] = der * np.exp(-zq[inside])
        outside = np.flatnonzero(pos & ~inside)
        if outside.size:
            p, d = self._exact(S[outside], k[outside], pi)
            price[outside], delta[outside] = p, d
        return price.reshape(shape), delta.reshape(shape)

    def _exact(self, S, k, pi):
        atoms = self.atoms_for(pi)
        g = np.exp(atoms.shift)
        price = np.empty(S.size)
        delta = np.empty(S.size)
        step = max(1, (1 << 21) // len(atoms))
        for lo in range(0, S.size, step):
            sl = slice(lo, lo + step)
            x = (S[sl] / k[sl])[:, None] * g[None, :]
            p, d = _bs_unit_call(x, atoms.var[None, :], self.dt, self.r, self.q)
            price[sl] = k[sl] * (p @ atoms.weight)
            delta[sl] = (d * g) @ atoms.weight
        return price, delta


def continuation_value(pw: PiecewiseValue, model: Model, state_dist: StateDistribution, spot, dt: float,
                       rate: float, dividend: float, kernel: ContinuationKernel | None = None):
    """Discounted expected value of ``pw`` one interval ahead, and its spot delta."""
    kernel = kernel or ContinuationKernel(model, dt, rate, dividend, mode="exact")
    S = np.asarray(spot, dtype=float)
    value = pw.intercept * math.exp(-rate * dt) + pw.slope * S * math.exp(-dividend * dt)
    delta = pw.slope * math.exp(-dividend * dt) + np.zeros_like(S)
    if pw.kinks.size:
        p, d = kernel.call(S[..., None], pw.kinks, state_dist.probs)
        value = value + p @ pw.gammas
        delta = delta + d @ pw.gammas
    if np.ndim(value) == 0:
        return float(value), float(delta)
    return value, delta


def tangent_envelope(points, values, slopes) -> PiecewiseValue:
    """Upper envelope on S >= 0 of the lines through (points, values) with given slopes."""
    points, values, slopes = (np.asarray(a, dtype=float) for a in (points, values, slopes))
    intercepts = values - slopes * points
    order = np.lexsort((intercepts, slopes))
    a, b = slopes[order], intercepts[order]
    # same slope: keep the highest line
    last = np.append(a[1:] != a[:-1], True)
    a, b = a[last], b[last]
    # lines below the best line at S = 0 with a smaller slope never become active on S >= 0
    start = int(np.argmax(np.where(b == b.max(), a, -np.inf)))
    a, b = a[start:], b[start:]
    hull_a, hull_b, xs = [a[0]], [b[0]], []
    for ai, bi in zip(a[1:], b[1:]):
        while True:
            x = (hull_b[-1] - bi) / (ai - hull_a[-1])
            if xs and x <= xs[-1]:
                hull_a.pop()
                hull_b.pop()
                xs.pop()
                continue
            break
        hull_a.append(ai)
        hull_b.append(bi)
        xs.append(max(x, 0.0))
    gam = np.diff(hull_a)
    return PiecewiseValue(hull_b[0], hull_a[0], np.array(xs), np.clip(gam, 0.0, None))


def secant_interpolant(points, values, right_slope: float) -> PiecewiseValue:
    """Chord interpolant through sorted (points, values), starting at S = 0, extended right with ``right_slope``."""
    points, values = np.asarray(points, dtype=float), np.asarray(values, dtype=float)
    if points[0] != 0.0:
        raise ValidationError("secant interpolation needs the node S = 0")
    chords = np.diff(values) / np.diff(points)
    slopes = np.append(chords, max(right_slope, chords[-1]))
    gam = np.diff(slopes)
    return PiecewiseValue(values[0], slopes[0], points[1:], np.clip(gam, 0.0, None))


@dataclass
class BermudanResult:
    lower_bound: float | None
    upper_bound: float | None
    n_points: int
    spot: float
    exercise_boundary: dict = field(default_factory=dict)
    european: float | None = None
    seconds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spot": self.spot,
            "n_points": self.n_points,
            "tangent": self.lower_bound,
            "secant": self.upper_bound,
            "exercise_boundary": self.exercise_boundary,
            "seconds": self.seconds,
        }


def spot_grid(model: Model, strike: float, maturity: float, n_points: int, span: float = DEFAULT_SPAN,
              extra=()) -> np.ndarray:
    """Geometric grid over K * exp(+-span * sigma_bar * sqrt(T)) plus the strike and ``extra`` points."""
    sig = math.sqrt(model.mean_variance())
    w = span * sig * math.sqrt(maturity)
    g = strike * np.exp(np.linspace(-w, w, n_points))
    return np.unique(np.concatenate([g, [strike], np.asarray(extra, dtype=float)]))


def _rollback(model, market, schedule, n_points, method, kernel, span, boundary_tol, extra=()):
    """Backward induction down to t_1; returns the value function at t_1 and boundaries."""
    K, kind = market.strike, market.kind
    payoff = PiecewiseValue.payoff(K, kind)
    grid = spot_grid(model, K, schedule.maturity, n_points, span, extra)
    spi = schedule.steps_per_interval(model)
    dt, r, q = schedule.interval, market.rate, market.dividend
    m = model.chain.m
    start = StateDistribution.point_mass(m, model.chain.initial_state_index)
    f = payoff
    boundary = {}
    for i in range(schedule.count - 1, 0, -1):
        pi = evolve_distribution(model.chain, start, i * spi)
        nodes = grid
        cont, cdel = continuation_value(f, model, pi, nodes, dt, r, q, kernel)
        pay = payoff(nodes)
        diff = cont - pay
        extra = []
        for j in np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0):
            def gap(s):
                return continuation_value(f, model, pi, s, dt, r, q, kernel)[0] - float(payoff(s))
            extra.append(brentq(gap, nodes[j], nodes[j + 1], xtol=1e-12 * K, rtol=1e-14))
        boundary[float(schedule.dates[i])] = extra
        if extra:
            xs = np.array(extra)
            c2, d2 = continuation_value(f, model, pi, xs, dt, r, q, kernel)
            nodes = np.concatenate([nodes, xs])
            cont = np.concatenate([cont, np.atleast_1d(c2)])
            cdel = np.concatenate([cdel, np.atleast_1d(d2)])
            pay = payoff(nodes)
        order = np.argsort(nodes)
        nodes, cont, cdel, pay = nodes[order], cont[order], cdel[order], pay[order]
        H = np.maximum(cont, pay)
        is_cross = np.isin(nodes, extra) if extra else np.zeros(nodes.size, bool)

        c_asym = f.asymptotic_slope * math.exp(-q * dt)
        asym = max(payoff.asymptotic_slope, c_asym)
        top = nodes[-1]
        top_slope = cdel[-1] if cont[-1] >= pay[-1] else float(payoff.right_slope(top))
        if asym - top_slope > boundary_tol:
            raise ValidationError(
                f"interpolation grid too narrow at t={schedule.dates[i]:.4g}: slope at S={top:.4g} is "
                f"{top_slope:.6g} but the asymptotic slope is {asym:.6g}; widen the grid span"
            )
        c0 = f.intercept * math.exp(-r * dt)
        H0 = max(c0, float(payoff(0.0)))

        if method == "tangent":
            c0_slope = f.slope * math.exp(-q * dt)
            s0_slope = c0_slope if c0 >= float(payoff(0.0)) else float(payoff.right_slope(0.0))
            pts, vals, slps = [0.0], [H0], [s0_slope]
            for s, c, d, p, cross in zip(nodes, cont, cdel, pay, is_cross):
                if cross:
                    pts += [s, s, s]
                    vals += [p, p, p]
                    slps += [d, float(payoff.left_slope(s)), float(payoff.right_slope(s))]
                elif c >= p:
                    pts.append(s)
                    vals.append(c)
                    slps.append(d)
                else:
                    pts += [s, s]
                    vals += [p, p]
                    slps += [float(payoff.left_slope(s)), float(payoff.right_slope(s))]
            f = tangent_envelope(pts, vals, slps)
        else:
            f = secant_interpolant(np.concatenate([[0.0], nodes]), np.concatenate([[H0], H]), asym)
        f = f.compact(K)
    return f, boundary


def price_bermudan(model: Model, market: MarketSpec, schedule: ExerciseSchedule, n_points: int,
                   method: str = "both", spots=None, span: float = DEFAULT_SPAN, kernel_mode: str = "auto",
                   boundary_tol: float = 1e-4, kernel: ContinuationKernel | None = None,
                   include_spot: bool = True):
    """Tangent (lower) and/or secant (upper) Bermudan price bounds.

    ``spots`` (default ``[market.spot]``) are priced off the same kernel; a list
    of results is returned when ``spots`` is given.  With ``include_spot`` each
    spot is added to its own grid, which costs one rollback per spot;
    otherwise a single rollback serves all spots.
    """
    if n_points < 3:
        raise ValidationError("n_points must be >= 3")
    if method not in ("tangent", "secant", "both"):
        raise ValidationError(f"method must be tangent, secant or both, got {method!r}")
    if abs(schedule.maturity - market.maturity) > 1e-12 * max(1.0, market.maturity):
        raise ValidationError("schedule maturity must equal the option maturity")
    kernel = kernel or ContinuationKernel(model, schedule.interval, market.rate, market.dividend, kernel_mode)
    spot_list = [market.spot] if spots is None else list(spots)
    methods = ["tangent", "secant"] if method == "both" else [method]
    m = model.chain.m
    pi0 = StateDistribution.point_mass(m, model.chain.initial_state_index)
    payoff = PiecewiseValue.payoff(market.strike, market.kind)
    out = {s: BermudanResult(None, None, n_points, float(s)) for s in spot_list}
    groups = [[s] for s in spot_list] if include_spot else [spot_list]
    for meth in methods:
        for group in groups:
            t0 = time.perf_counter()
            extra = group if include_spot else ()
            f, boundary = _rollback(model, market, schedule, n_points, meth, kernel, span, boundary_tol, extra)
            S = np.array(group, dtype=float)
            cont, _ = continuation_value(f, model, pi0, S, schedule.interval, market.rate, market.dividend, kernel)
            vals = np.maximum(np.atleast_1d(cont), payoff(S))
            elapsed = time.perf_counter() - t0
            for s, v in zip(group, vals):
                res = out[s]
                if meth == "tangent":
                    res.lower_bound = float(v)
                else:
                    res.upper_bound = float(v)
                res.exercise_boundary[meth] = boundary
                res.seconds[meth] = elapsed
    results = [out[s] for s in spot_list]
    return results if spots is not None else results[0]
