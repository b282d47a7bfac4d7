"""Data-facing estimation: box-plot jump split, PEA moment equations, option calibration.

Price histories are split into a diffusion and a jump subsample by the
box-plot rule.  The jump subsample feeds closed-form conditional moments of
the interval log-return; option quotes calibrate the jump law by random search
on the relative squared pricing error.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .aiv import aiv_distribution
from .errors import ValidationError
from .european import price_atoms
from .jumps import JumpSpec
from .models import Model

TRADING_DAYS = 252


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Closing prices sampled every ``interval`` years."""

    dates: np.ndarray
    prices: np.ndarray
    interval: float = 1.0 / TRADING_DAYS

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        dates = np.asarray(self.dates)
        if prices.ndim != 1 or prices.size != dates.size:
            raise ValidationError("dates and prices must be 1-d and of equal length")
        if np.any(prices <= 0):
            raise ValidationError("prices must be > 0")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValidationError("dates must be strictly increasing")
        if not self.interval > 0:
            raise ValidationError("sampling interval must be > 0")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", dates)

    @classmethod
    def from_csv(cls, path, interval: float = 1.0 / TRADING_DAYS) -> "ReturnSeries":
        """Read a ``date,close`` CSV; ISO dates sort correctly as datetime64."""
        dates, closes = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                dates.append(np.datetime64(row["date"].strip()))
                closes.append(float(row["close"]))
        return cls(np.array(dates), np.array(closes), interval)

    @property
    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(self.prices))

    @property
    def years(self) -> float:
        return self.log_returns.size * self.interval


@dataclass(frozen=True, eq=False)
class BoxplotSplit:
    k_f: float
    q1: float
    q3: float
    jump_indices: np.ndarray
    diffusion_indices: np.ndarray
    intensity: float
    jump_mean: float
    jump_var: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def bounds(self) -> tuple[float, float]:
        return self.q1 - self.k_f * self.iqr, self.q3 + self.k_f * self.iqr

    @property
    def has_jumps(self) -> bool:
        return self.jump_indices.size > 0


def boxplot_split(series: ReturnSeries | np.ndarray, k_f: float = 1.5, interval: float | None = None) -> BoxplotSplit:
    """Returns outside ``[Q1 - k_f*IQR, Q3 + k_f*IQR]`` are jumps.

    Quartiles use linear interpolation between order statistics.  Accepts a
    :class:`ReturnSeries` or a raw array of log-returns (then ``interval``
    defaults to one trading day).
    """
    if isinstance(series, ReturnSeries):
        r, a = series.log_returns, series.interval
    else:
        r = np.asarray(series, dtype=float)
        a = interval if interval is not None else 1.0 / TRADING_DAYS
    if r.size < 8:
        raise ValidationError(f"box-plot split needs at least 8 returns, got {r.size}")
    if not k_f >= 0:
        raise ValidationError("k_f must be >= 0")
    q1, q3 = np.percentile(r, [25.0, 75.0])
    lo, hi = q1 - k_f * (q3 - q1), q3 + k_f * (q3 - q1)
    jump = (r < lo) | (r > hi)
    jr = r[jump]
    return BoxplotSplit(
        k_f=float(k_f), q1=float(q1), q3=float(q3),
        jump_indices=np.flatnonzero(jump), diffusion_indices=np.flatnonzero(~jump),
        intensity=jr.size / (r.size * a),
        jump_mean=float(jr.mean()) if jr.size else 0.0,
        jump_var=float(jr.var(ddof=1)) if jr.size > 1 else 0.0,
    )


def normal_raw_moments(mu: float, var: float) -> tuple[float, float, float]:
    """Second to fourth raw moments of N(mu, var)."""
    return (mu**2 + var,
            mu**3 + 3 * mu * var,
            mu**4 + 6 * mu**2 * var + 3 * var**2)


def gmm_moments(sigma2: float, jump: JumpSpec, b: float, attenuation: float, a: float = 1.0 / TRADING_DAYS,
                form: str = "exact"):
    """Central moments (2nd, 3rd, 4th) of the interval log-return given the volatility level.

    ``attenuation`` is the PEA decay rate and spikes are integrated over their
    full decay (the PEA window length does not enter), with jumps from before
    the interval contributing at stationarity.  ``form="exact"`` is the
    Poisson-cumulant result; ``form="printed"`` keeps the commonly quoted
    fourth-moment expression, whose ``M2^2`` coefficient is
    ``3a^2 b(b+2)/d^2 + 3a`` and which has no spike-variance term.
    """
    if attenuation <= 0:
        raise ValidationError("attenuation rate must be > 0")
    if form not in ("exact", "printed"):
        raise ValidationError(f"form must be 'exact' or 'printed', got {form!r}")
    m2, m3, m4 = normal_raw_moments(jump.log_mean, jump.log_var)
    lam = jump.intensity
    M2, M3, M4 = lam * m2, lam * m3, lam * m4
    d = attenuation
    e = math.exp(-d * a)
    kern = (d * a - 1 + e) / d**2
    var = a * sigma2 + a * (1 + b / d) * M2
    third = (a + 3 * b * kern) * M3
    fourth = 3 * (a * sigma2) ** 2 + 6 * a**2 * sigma2 * (1 + b / d) * M2 + (a + 6 * b * kern) * M4
    if form == "printed":
        fourth += (3 * a**2 * b * (b + 2) / d**2 + 3 * a) * M2**2
    else:
        # squared spike integral, from jumps before and inside the interval
        spike_sq = ((1 - e) ** 2 / (2 * d**3)
                    + (a - 2 * (1 - e) / d + (1 - e * e) / (2 * d)) / d**2)
        fourth += 3 * a**2 * (1 + b / d) ** 2 * M2**2 + 3 * b**2 * M4 * spike_sq
    return var, third, fourth


def sample_central_moments(returns) -> tuple[float, float, float]:
    r = np.asarray(returns, dtype=float)
    c = r - r.mean()
    return float(np.mean(c**2)), float(np.mean(c**3)), float(np.mean(c**4))


def fit_pea_moments(target, sigma2: float, jump: JumpSpec, a: float = 1.0 / TRADING_DAYS,
                    x0=(1.0, 100.0), bounds=((0.0, 1e-6), (np.inf, np.inf))):
    """Least-squares fit of (b, attenuation) so :func:`gmm_moments` matches ``target`` (relative residuals)."""
    target = np.asarray(target, dtype=float)
    scale = np.where(np.abs(target) > 0, np.abs(target), 1.0)

    def resid(x):
        return (np.array(gmm_moments(sigma2, jump, x[0], x[1], a)) - target) / scale

    sol = least_squares(resid, np.asarray(x0, dtype=float), bounds=bounds)
    return float(sol.x[0]), float(sol.x[1]), sol


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    bid: float
    ask: float
    maturity: float | None = None
    quote_date: str | None = None

    def __post_init__(self):
        if not 0 <= self.bid <= self.ask:
            raise ValidationError(f"quote at strike {self.strike}: need 0 <= bid <= ask, got {self.bid}, {self.ask}")
        if not self.strike > 0:
            raise ValidationError("strike must be > 0")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)


def load_quotes(path, maturity: float | None = None) -> list[OptionQuote]:
    """Read a ``strike,bid,ask`` CSV."""
    with open(path, newline="") as fh:
        return [OptionQuote(float(r["strike"]), float(r["bid"]), float(r["ask"]), maturity)
                for r in csv.DictReader(fh)]


def interpolate_rate(maturity: float, t1: float, r1: float, t2: float, r2: float) -> float:
    """Linear interpolation (or extrapolation) of a deposit rate in maturity."""
    if t1 == t2:
        raise ValidationError("rate pillars need distinct maturities")
    return r1 + (r2 - r1) * (maturity - t1) / (t2 - t1)


def model_call_prices(model: Model, strikes, spot: float, rate: float, maturity: float,
                      dividend: float = 0.0) -> np.ndarray:
    L = model.chain.steps_for(maturity, "maturity")
    dist = aiv_distribution(model.chain, L, model.precision)
    atoms = model.atoms(dist.support, dist.probs, maturity)
    price, _ = price_atoms(spot, np.asarray(strikes, dtype=float), atoms, rate, dividend, maturity, "call")
    return np.asarray(price, dtype=float)


def calibration_objective(prices, quotes) -> float:
    mids = np.array([q.mid for q in quotes])
    return float(np.sum(((np.asarray(prices) - mids) / mids) ** 2))


@dataclass(frozen=True)
class SearchBox:
    """Search bounds; lambda and eps2 are sampled log-uniformly when their lower bound is positive."""

    intensity: tuple = (0.5, 20.0)
    log_mean: tuple = (-0.15, 0.05)
    log_var: tuple = (1e-4, 0.05)

    def __post_init__(self):
        for name in ("intensity", "log_mean", "log_var"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValidationError(f"search box {name}: lower bound above upper bound")
        if self.intensity[0] < 0 or self.log_var[0] < 0:
            raise ValidationError("search box needs lambda >= 0 and eps2 >= 0")

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape (n, 3) to candidates."""
        out = np.empty_like(u)
        for col, (lo, hi), logscale in ((0, self.intensity, True), (1, self.log_mean, False),
                                        (2, self.log_var, True)):
            if logscale and lo > 0:
                out[:, col] = np.exp(math.log(lo) + u[:, col] * (math.log(hi) - math.log(lo)))
            else:
                out[:, col] = lo + u[:, col] * (hi - lo)
        return out


@dataclass
class CalibrationResult:
    intensity: float
    log_mean: float
    log_var: float
    objective: float
    model_prices: np.ndarray
    history: np.ndarray = field(repr=False)
    rejected: list = field(default_factory=list, repr=False)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.intensity,
            "mu": self.log_mean,
            "eps2": self.log_var,
            "objective": self.objective,
            "model_prices": self.model_prices.tolist(),
            "iterations": int(self.history.size),
            "rejected": self.rejected,
            "seconds": self.seconds,
        }


def calibrate_jumps(model: Model, quotes: list[OptionQuote], spot: float, rate: float, maturity: float,
                    iterations: int = 2000, seed: int = 0, box: SearchBox | None = None,
                    dividend: float = 0.0, start=None) -> CalibrationResult:
    """Random search over (lambda, mu, eps2) with chain and PEA held fixed.

    Candidates are drawn up front from ``seed``, so a longer search replays
    the shorter one and can only improve the best objective.  ``start`` is an
    optional candidate evaluated first.
    """
    if not quotes:
        raise ValidationError("calibration needs at least one quote")
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    box = box or SearchBox()
    t0 = time.perf_counter()
    strikes = np.array([q.strike for q in quotes])
    base_jump = model.jump or JumpSpec(0.0, 0.0, 0.0)
    cands = box.sample(np.random.default_rng(seed).random((iterations, 3)))
    if start is not None:
        cands = np.vstack([np.asarray(start, dtype=float)[None, :], cands])
    best = (math.inf, None, None)
    history = np.empty(len(cands))
    rejected = []
    for i, (lam, mu, eps2) in enumerate(cands):
        try:
            jump = replace(base_jump, intensity=float(lam), log_mean=float(mu), log_var=float(eps2))
            prices = model_call_prices(replace(model, jump=jump), strikes, spot, rate, maturity, dividend)
            if not np.all(np.isfinite(prices)):
                raise ValidationError("non-finite model price")
            obj = calibration_objective(prices, quotes)
        except (ValidationError, ValueError, FloatingPointError) as exc:
            rejected.append({"candidate": [float(lam), float(mu), float(eps2)], "reason": str(exc)})
            obj = math.inf
        if obj < best[0]:
            best = (obj, (float(lam), float(mu), float(eps2)), prices)
        history[i] = best[0]
    if best[1] is None:
        raise ValidationError("every calibration candidate failed to price")
    (lam, mu, eps2) = best[1]
    return CalibrationResult(lam, mu, eps2, best[0], best[2], history, rejected, time.perf_counter() - t0)
