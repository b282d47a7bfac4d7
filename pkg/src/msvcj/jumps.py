"""Co-jump machinery: lognormal jumps, Poisson truncation and the PEA variance impact.

A price jump ``J`` with ``ln J ~ N(mu, eps2)`` adds ``b * ln(J)^2`` to the
instantaneous variance, decaying like ``exp(-beta * s)`` for ``s <= delta``.
For n jumps only the pair ``X = sum ln J_i`` and ``Y = sum ln^2 J_i`` matters;
``X ~ N(n mu, n eps2)`` is independent of ``(Y - X^2/n) / eps2 ~ chi2(n - 1)``,
which turns expectations over the pair into a Hermite x Laguerre product rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special, stats

from .errors import ValidationError

DEFAULT_HERMITE = 40
DEFAULT_LAGUERRE = 40


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson lognormal jumps.

    ``n_max`` pins the Poisson truncation point; when ``None`` the smallest
    count with tail mass below ``truncation_eps`` is used.
    """

    intensity: float
    log_mean: float
    log_var: float
    truncation_eps: float = 5.5e-5
    n_max: Optional[int] = None

    def __post_init__(self):
        if not self.intensity >= 0:
            raise ValidationError(f"jump intensity must be >= 0, got {self.intensity}")
        if not self.log_var >= 0:
            raise ValidationError(f"jump log-variance must be >= 0, got {self.log_var}")
        if not 0 < self.truncation_eps < 1:
            raise ValidationError(f"truncation eps must lie in (0, 1), got {self.truncation_eps}")
        if self.n_max is not None and self.n_max < 0:
            raise ValidationError("n_max must be >= 0")

    @property
    def zeta(self) -> float:
        """Mean relative jump E[J - 1]."""
        return math.expm1(self.log_mean + 0.5 * self.log_var)

    @property
    def eta(self) -> float:
        """E[ln^2 J]."""
        return self.log_mean**2 + self.log_var


@dataclass(frozen=True)
class PeaSpec:
    """Proportional, exponentially attenuating variance response to a jump."""

    b: float
    beta: float
    delta: float

    def __post_init__(self):
        if not self.b >= 0:
            raise ValidationError(f"PEA coefficient b must be >= 0, got {self.b}")
        if not self.beta > 0:
            raise ValidationError(f"PEA attenuation beta must be > 0, got {self.beta}")
        if not self.delta > 0:
            raise ValidationError(f"PEA duration delta must be > 0, got {self.delta}")


@dataclass(frozen=True)
class PoissonTruncation:
    n_max: int
    weights: np.ndarray
    dropped_mass: float


def truncate_poisson(lam: float, maturity: float, eps: float, n_max: int | None = None) -> PoissonTruncation:
    """Poisson(lam * maturity) weights for n = 0..N_max (not renormalized)."""
    mu = lam * maturity
    if mu < 0:
        raise ValidationError("lambda * maturity must be >= 0")
    if mu == 0:
        return PoissonTruncation(0, np.ones(1), 0.0)
    if n_max is None:
        n_max = 0
        while stats.poisson.sf(n_max, mu) >= eps:
            n_max += 1
    w = stats.poisson.pmf(np.arange(n_max + 1), mu)
    return PoissonTruncation(int(n_max), w, float(stats.poisson.sf(n_max, mu)))


def joint_density(n: int, mu: float, eps2: float, x, y):
    """Density of (sum ln J, sum ln^2 J) for n lognormal jumps.

    For n = 1 the pair lives on the parabola y = x^2; the returned value is
    the density of x there and 0 off the curve.
    """
    if n < 1:
        raise ValidationError("joint density needs n >= 1 (n = 0 is a point mass at the origin)")
    if eps2 <= 0:
        raise ValidationError("joint density needs eps2 > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = np.exp(-((x - n * mu) ** 2) / (2 * n * eps2)) / math.sqrt(2 * math.pi * n * eps2)
    if n == 1:
        on_curve = np.isclose(y, x * x, rtol=1e-12, atol=1e-15)
        return np.where(on_curve, gx, 0.0)
    q = (y - x * x / n) / eps2
    k = (n - 1) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_chi = (k - 1) * np.log(q) - q / 2 - special.gammaln(k) - k * math.log(2.0)
        gy = np.exp(log_chi) / eps2
    return np.where(q > 0, gx * gy, 0.0)


@dataclass(frozen=True, eq=False)
class JumpQuadrature:
    """Product rule for (X_n, Y_n); ``x``, ``y``, ``weights`` are flat node arrays."""

    count: int
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    orders: tuple


@lru_cache(maxsize=64)
def _hermite(order: int):
    z, w = hermegauss(order)
    return z, w / w.sum()


@lru_cache(maxsize=256)
def _laguerre(order: int, alpha: float):
    t, w = special.roots_genlaguerre(order, alpha)
    return 2.0 * t, w / w.sum()


def jump_quadrature(n: int, mu: float, eps2: float, n_hermite: int = DEFAULT_HERMITE,
                    n_laguerre: int = DEFAULT_LAGUERRE) -> JumpQuadrature:
    """Nodes and weights for expectations over (X_n, Y_n) with Y = X^2/n + eps2 * Q."""
    if n < 0:
        raise ValidationError("jump count must be >= 0")
    if n == 0:
        one = np.ones(1)
        return JumpQuadrature(0, np.zeros(1), np.zeros(1), one, (0, 0))
    if eps2 == 0:
        return JumpQuadrature(n, np.array([n * mu]), np.array([n * mu * mu]), np.ones(1), (0, 0))
    z, wz = _hermite(n_hermite)
    x = n * mu + math.sqrt(n * eps2) * z
    if n == 1:
        return JumpQuadrature(1, x, x * x, wz.copy(), (n_hermite, 0))
    q, wq = _laguerre(n_laguerre, (n - 3) / 2.0)
    X = np.repeat(x, q.size)
    Y = X * X / n + eps2 * np.tile(q, x.size)
    W = np.outer(wz, wq).ravel()
    return JumpQuadrature(n, X, Y, W / W.sum(), (n_hermite, n_laguerre))


def expectation_over_jumps(n: int, mu: float, eps2: float, h: Callable, n_hermite: int = DEFAULT_HERMITE,
                           n_laguerre: int = DEFAULT_LAGUERRE) -> float:
    """E[h(X_n, Y_n)]; ``h`` must accept numpy arrays."""
    quad = jump_quadrature(n, mu, eps2, n_hermite, n_laguerre)
    vals = np.broadcast_to(np.asarray(h(quad.x, quad.y), dtype=float), quad.weights.shape)
    return float(quad.weights @ vals)


def pea_aggregate(pea: PeaSpec, maturity: float) -> float:
    """Aggregated coefficient b(1 - e^{-beta*delta}) / (T*beta) for full decay windows."""
    if maturity <= 0:
        raise ValidationError("maturity must be > 0")
    return pea.b * -math.expm1(-pea.beta * pea.delta) / (maturity * pea.beta)


def jump_time_bias(jump: JumpSpec, pea: PeaSpec, maturity: float, n_max: int) -> float:
    """Expected AIV overstatement from moving jumps in [T - delta, T] back to T - delta.

    Sums over l total jumps (Poisson) and j of them landing in the last window
    (independent Poisson split); each such jump is uniform in the window.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    lam, T, D = jump.intensity, maturity, pea.delta
    if lam == 0 or pea.b == 0:
        return 0.0
    bd = pea.beta * D
    per_jump = pea.b * jump.eta / (pea.beta * T) * (-math.expm1(-bd) / bd - math.exp(-bd))
    window = stats.poisson.pmf(np.arange(n_max + 1), lam * D)
    early = stats.poisson.pmf(np.arange(n_max + 1), lam * max(T - D, 0.0))
    eb = 0.0
    for total in range(1, n_max + 1):
        for j in range(1, total + 1):
            eb += window[j] * early[total - j] * j * per_jump
    return float(eb)


def implied_vol_impact(sigma_imp: float, eb: float) -> float:
    """Volatility change sqrt(s^2) - sqrt(s^2 - EB) implied by a variance bias EB."""
    return sigma_imp - math.sqrt(sigma_imp**2 - eb)
