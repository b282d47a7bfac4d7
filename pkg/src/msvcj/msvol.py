"""Discrete-time Markov-switching volatility chain.

The chain lives on volatility levels ``u_1 < ... < u_m`` and switches every
``step`` years according to a row-stochastic matrix.  Besides the chain
container this module evolves state distributions, enumerates sample paths
(the brute-force oracle for :mod:`msvcj.aiv`) and samples paths for the
simulation oracles.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, ValidationError

ROW_SUM_TOL = 1e-12
DEFAULT_PATH_CAP = 10**8


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Markov-switching volatility chain.

    Attributes:
        states: volatility levels (annualized), strictly increasing.
        transition: m x m row-stochastic matrix, ``transition[i, j] = P(i -> j)``.
        step: switching interval tau in years.
        initial_state_index: index of the known state at time zero.
        renormalize: rescale rows that are off by rounding instead of failing.
    """

    states: np.ndarray
    transition: np.ndarray
    step: float
    initial_state_index: int = 0
    renormalize: bool = False
    variances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        states = _frozen(self.states).ravel()
        P = np.array(self.transition, dtype=float)
        m = states.size
        if m < 1:
            raise ValidationError("chain needs at least one state")
        if np.any(~np.isfinite(states)) or np.any(states <= 0):
            raise ValidationError(f"volatility states must be positive, got {states.tolist()}")
        if m > 1 and np.any(np.diff(states) <= 0):
            raise ValidationError("volatility states must be strictly increasing")
        if P.shape != (m, m):
            raise ValidationError(f"transition matrix must be {m}x{m}, got shape {P.shape}")
        for i, row in enumerate(P):
            if np.any(~np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
                raise ValidationError(f"transition row {i} has entries outside [0, 1]: {row.tolist()}")
            s = row.sum()
            if abs(s - 1.0) > ROW_SUM_TOL:
                if self.renormalize and s > 0:
                    P[i] = row / s
                else:
                    raise ValidationError(
                        f"transition row {i} sums to {s!r}, expected 1 within {ROW_SUM_TOL}"
                    )
        if not (np.isfinite(self.step) and self.step > 0):
            raise ValidationError(f"step tau must be positive, got {self.step}")
        if not 0 <= int(self.initial_state_index) < m:
            raise ValidationError(f"initial_state_index {self.initial_state_index} out of range for {m} states")
        P.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "initial_state_index", int(self.initial_state_index))
        object.__setattr__(self, "variances", _frozen(states**2))

    @classmethod
    def from_variances(cls, states_var: Sequence[float], transition, tau: float,
                       initial_var: float | None = None, renormalize: bool = False) -> "ChainSpec":
        """Build a chain from variance levels, sorting them into canonical order.

        ``initial_var`` must match one of the levels (to 1e-12); ``None`` picks the first.
        """
        var = np.asarray(states_var, dtype=float).ravel()
        if np.any(var <= 0):
            raise ValidationError(f"variance states must be positive, got {var.tolist()}")
        P = np.asarray(transition, dtype=float)
        if P.shape != (var.size, var.size):
            raise ValidationError(f"transition matrix must be {var.size}x{var.size}, got shape {P.shape}")
        order = np.argsort(var, kind="stable")
        var, P = var[order], P[np.ix_(order, order)]
        if initial_var is None:
            idx = 0
        else:
            hits = np.flatnonzero(np.abs(var - initial_var) <= 1e-12)
            if hits.size != 1:
                raise ValidationError(f"initial_var {initial_var} is not one of the states {var.tolist()}")
            idx = int(hits[0])
        return cls(np.sqrt(var), P, tau, idx, renormalize)

    @property
    def m(self) -> int:
        return self.states.size

    def with_initial(self, index: int) -> "ChainSpec":
        return ChainSpec(self.states, self.transition, self.step, index)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.states, self.transition):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr((self.step, self.initial_state_index)).encode())
        return h.hexdigest()[:16]

    def to_config(self) -> dict:
        return {
            "states_var": self.variances.tolist(),
            "transition": self.transition.tolist(),
            "tau": self.step,
            "initial_var": float(self.variances[self.initial_state_index]),
        }

    def steps_for(self, horizon: float, what: str = "horizon") -> int:
        """Number of tau-steps in ``horizon``; raises if not an integer."""
        L = horizon / self.step
        Lr = round(L)
        if Lr < 1 or abs(L - Lr) > 1e-9 * max(1.0, L):
            raise ValidationError(
                f"{what} {horizon} is not an integer multiple of tau={self.step} "
                f"(ratio {L:.6g}); adjust tau so that {what}/tau is an integer"
            )
        return int(Lr)


@dataclass(frozen=True, eq=False)
class StateDistribution:
    probs: np.ndarray
    time_steps: int = 0

    def __post_init__(self):
        p = _frozen(self.probs).ravel()
        if np.any(p < 0) or abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise ValidationError(f"state distribution must be non-negative and sum to 1, got {p.tolist()}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, m: int, index: int) -> "StateDistribution":
        p = np.zeros(m)
        p[index] = 1.0
        return cls(p, 0)


@dataclass(frozen=True)
class SamplePath:
    states: tuple
    weight: float
    prob: float


def evolve_distribution(chain: ChainSpec, start: StateDistribution, steps: int) -> StateDistribution:
    """Push ``start`` forward ``steps`` tau-steps (row vector times P^steps)."""
    if steps < 0:
        raise ValidationError("steps must be non-negative")
    p = np.array(start.probs)
    for _ in range(steps):
        p = p @ chain.transition
    # clip tiny negative rounding and restore unit mass
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    return StateDistribution(p, start.time_steps + steps)


def stationary_distribution(chain: ChainSpec) -> np.ndarray:
    """Left eigenvector of P for eigenvalue 1 (least squares; unique for irreducible chains)."""
    m = chain.m
    A = np.vstack([chain.transition.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _check_path_cap(m: int, num_steps: int, cap: int) -> None:
    if m**num_steps > cap:
        raise CapExceededError(
            f"complete enumeration needs m^L = {m}^{num_steps} = {m**num_steps} paths, "
            f"above the enumeration cap {cap}",
            m=m, num_steps=num_steps, cap=cap,
        )


def enumerate_paths(chain: ChainSpec, num_steps: int, cap: int = DEFAULT_PATH_CAP) -> Iterator[SamplePath]:
    """Lazily yield every sample path ``sigma_0..sigma_L`` of the chain.

    Weight is the mean of the first L squared volatilities; the last state only
    enters through the path probability.
    """
    if num_steps < 1:
        raise ValidationError("num_steps must be >= 1")
    _check_path_cap(chain.m, num_steps, cap)
    return _enumerate(chain, num_steps)


def _enumerate(chain, L):
    s0 = chain.initial_state_index
    var, P = chain.variances, chain.transition
    for tail in itertools.product(range(chain.m), repeat=L):
        path = (s0,) + tail
        weight = sum(var[k] for k in path[:-1]) / L
        prob = 1.0
        for a, b in zip(path[:-1], path[1:]):
            prob *= P[a, b]
        yield SamplePath(path, weight, prob)


def iter_path_blocks(chain: ChainSpec, num_steps: int, block_size: int = 1 << 16,
                     cap: int = DEFAULT_PATH_CAP) -> Iterator[np.ndarray]:
    """Yield all paths as integer arrays of shape (block, L + 1), in mixed-radix order.

    Vectorized twin of :func:`enumerate_paths` for bulk oracles.
    """
    if num_steps < 1:
        raise ValidationError("num_steps must be >= 1")
    m, L = chain.m, num_steps
    _check_path_cap(m, L, cap)
    total = m**L
    radix = m ** np.arange(L - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, block_size):
        idx = np.arange(lo, min(lo + block_size, total), dtype=np.int64)
        digits = (idx[:, None] // radix[None, :]) % m
        block = np.empty((idx.size, L + 1), dtype=np.int64)
        block[:, 0] = chain.initial_state_index
        block[:, 1:] = digits
        yield block


def sample_paths(chain: ChainSpec, n_paths: int, num_steps: int, rng: np.random.Generator,
                 initial: int | None = None) -> np.ndarray:
    """Simulate ``n_paths`` chain paths; returns int array (n_paths, num_steps + 1)."""
    s0 = chain.initial_state_index if initial is None else initial
    cdf = np.cumsum(chain.transition, axis=1)
    cdf[:, -1] = 1.0
    out = np.empty((n_paths, num_steps + 1), dtype=np.int64)
    out[:, 0] = s0
    if chain.m == 1:
        out[:] = 0
        return out
    for k in range(num_steps):
        u = rng.random(n_paths)
        rows = cdf[out[:, k]]
        out[:, k + 1] = (u[:, None] >= rows).sum(axis=1)
    return out
