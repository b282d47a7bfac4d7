"""Model bundle: chain plus optional jump and PEA blocks, with numerical settings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aiv import DEFAULT_PRECISION
from .european import Atoms, svcj_atoms
from .jumps import DEFAULT_HERMITE, DEFAULT_LAGUERRE, JumpSpec, PeaSpec, truncate_poisson
from .msvol import ChainSpec


@dataclass(frozen=True)
class Model:
    """MS-SV when ``jump`` is None, MS-SVJ when only ``pea`` is None, else MS-SVCJ."""

    chain: ChainSpec
    jump: JumpSpec | None = None
    pea: PeaSpec | None = None
    n_hermite: int = DEFAULT_HERMITE
    n_laguerre: int = DEFAULT_LAGUERRE
    precision: int = DEFAULT_PRECISION

    @property
    def kind(self) -> str:
        if self.jump is None:
            return "ms_sv"
        return "ms_svj" if self.pea is None else "ms_svcj"

    def atoms(self, support, probs, T: float) -> Atoms:
        """Black-Scholes mixture atoms for horizon T given an AIV distribution."""
        support = np.asarray(support, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if self.kind == "ms_sv":
            return Atoms(np.zeros(support.size), support, probs)
        j = self.jump
        if self.kind == "ms_svj":
            # lognormal jump sizes convolve exactly with the diffusion
            trunc = truncate_poisson(j.intensity, T, j.truncation_eps, j.n_max)
            n = np.arange(trunc.n_max + 1)
            shift = -j.intensity * j.zeta * T + n * j.log_mean + 0.5 * n * j.log_var
            return Atoms(np.repeat(shift, support.size),
                         (support[None, :] + (n * j.log_var / T)[:, None]).ravel(),
                         (trunc.weights[:, None] * probs[None, :]).ravel())
        atoms, _ = svcj_atoms(support, probs, j, self.pea, T, self.n_hermite, self.n_laguerre)
        return atoms

    def mean_variance(self) -> float:
        from .msvol import stationary_distribution

        pi = stationary_distribution(self.chain)
        return float(pi @ self.chain.variances)

    def drift_correction(self) -> float:
        """Jump compensator lambda*zeta (0 without jumps)."""
        return 0.0 if self.jump is None else self.jump.intensity * self.jump.zeta

    def describe(self) -> str:
        return f"{self.kind} (m={self.chain.m}, tau={self.chain.step:.6g})"
