"""JSON model configuration.

Which model is priced follows from which blocks are present: no ``jumps``
block gives MS-SV, ``jumps`` without ``pea`` gives MS-SVJ, both give MS-SVCJ.

    {
      "chain":  {"states_var": [...], "transition": [[...]], "tau": 0.0083, "initial_var": 0.04},
      "jumps":  {"lambda": 3, "mu": -0.025, "eps2": 0.005, "trunc_eps": 5.5e-5, "n_max": 10},
      "pea":    {"b": 2, "beta": 250, "delta": 0.02},
      "market": {"spot": 50, "strike": 55, "rate": 0.05, "maturity": 0.25, "dividend": 0, "kind": "call"},
      "numerics": {"n_hermite": 40, "n_laguerre": 40, "precision": 12, "triple_cap": 100000000, "seed": 0}
    }
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .european import MarketSpec
from .jumps import JumpSpec, PeaSpec
from .models import Model
from .msvol import ChainSpec

_KNOWN = {"chain", "jumps", "pea", "market", "numerics", "bermudan", "mc", "calibration"}
_NUMERIC_DEFAULTS = {"n_hermite": 40, "n_laguerre": 40, "precision": 12, "triple_cap": 10**8, "seed": 0}


def _block(raw: dict, name: str, required: tuple, optional: tuple = ()) -> dict:
    blk = raw.get(name)
    if not isinstance(blk, dict):
        raise ValidationError(f"config block '{name}' must be an object")
    missing = [k for k in required if k not in blk]
    if missing:
        raise ValidationError(f"config block '{name}' is missing {', '.join(missing)}")
    unknown = set(blk) - set(required) - set(optional)
    if unknown:
        raise ValidationError(f"config block '{name}' has unknown keys {sorted(unknown)}")
    return blk


@dataclass
class ModelConfig:
    chain: ChainSpec
    jump: JumpSpec | None = None
    pea: PeaSpec | None = None
    market: MarketSpec | None = None
    numerics: dict = field(default_factory=lambda: dict(_NUMERIC_DEFAULTS))
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(raw) - _KNOWN
        if unknown:
            raise ValidationError(f"unknown config blocks {sorted(unknown)}")
        c = _block(raw, "chain", ("states_var", "transition", "tau"), ("initial_var", "renormalize"))
        chain = ChainSpec.from_variances(c["states_var"], c["transition"], c["tau"], c.get("initial_var"),
                                         bool(c.get("renormalize", False)))
        jump = pea = market = None
        if "jumps" in raw:
            j = _block(raw, "jumps", ("lambda", "mu", "eps2"), ("trunc_eps", "n_max"))
            jump = JumpSpec(float(j["lambda"]), float(j["mu"]), float(j["eps2"]),
                            float(j.get("trunc_eps", 5.5e-5)), j.get("n_max"))
        if "pea" in raw:
            if jump is None:
                raise ValidationError("config block 'pea' needs a 'jumps' block")
            p = _block(raw, "pea", ("b", "beta", "delta"))
            pea = PeaSpec(float(p["b"]), float(p["beta"]), float(p["delta"]))
        if "market" in raw:
            mk = _block(raw, "market", ("spot", "strike", "rate", "maturity"), ("dividend", "kind"))
            market = MarketSpec(float(mk["spot"]), float(mk["strike"]), float(mk["rate"]),
                                float(mk["maturity"]), float(mk.get("dividend", 0.0)), mk.get("kind", "call"))
        numerics = dict(_NUMERIC_DEFAULTS)
        numerics.update(raw.get("numerics", {}))
        extras = {k: copy.deepcopy(raw[k]) for k in ("bermudan", "mc", "calibration") if k in raw}
        return cls(chain, jump, pea, market, numerics, extras)

    @classmethod
    def load(cls, path) -> "ModelConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {"chain": self.chain.to_config()}
        if self.jump is not None:
            out["jumps"] = {"lambda": self.jump.intensity, "mu": self.jump.log_mean, "eps2": self.jump.log_var,
                            "trunc_eps": self.jump.truncation_eps, "n_max": self.jump.n_max}
        if self.pea is not None:
            out["pea"] = {"b": self.pea.b, "beta": self.pea.beta, "delta": self.pea.delta}
        if self.market is not None:
            m = self.market
            out["market"] = {"spot": m.spot, "strike": m.strike, "rate": m.rate, "maturity": m.maturity,
                             "dividend": m.dividend, "kind": m.kind}
        out["numerics"] = dict(self.numerics)
        out.update(copy.deepcopy(self.extras))
        return out

    def model(self, **overrides) -> Model:
        n = {**self.numerics, **overrides}
        return Model(self.chain, self.jump, self.pea, int(n["n_hermite"]), int(n["n_laguerre"]), int(n["precision"]))

    def require_market(self) -> MarketSpec:
        if self.market is None:
            raise ValidationError("this command needs a 'market' block in the config")
        return self.market


def example_config() -> dict:
    """Canonical MS-SVCJ example configuration (European call, S=50, K=55, T=0.25)."""
    return {
        "chain": {
            "states_var": [0.02, 0.04, 0.06, 0.08],
            "transition": [[0.70, 0.15, 0.10, 0.05], [0.03, 0.90, 0.06, 0.01],
                           [0.05, 0.05, 0.85, 0.05], [0.03, 0.07, 0.10, 0.80]],
            "tau": 0.25 / 30,
            "initial_var": 0.04,
        },
        "jumps": {"lambda": 3.0, "mu": -0.025, "eps2": 0.005, "trunc_eps": 5.5e-5, "n_max": 10},
        "pea": {"b": 2.0, "beta": 250.0, "delta": 0.02},
        "market": {"spot": 50.0, "strike": 55.0, "rate": 0.05, "maturity": 0.25, "dividend": 0.0, "kind": "call"},
        "numerics": dict(_NUMERIC_DEFAULTS),
    }


def bermudan_config(jumps: bool = False) -> dict:
    """Bermudan call example: K=100, T=3, exercisable every 0.5y, q=0.04."""
    cfg = example_config()
    cfg["chain"]["tau"] = 0.5 / 30
    cfg["market"] = {"spot": 100.0, "strike": 100.0, "rate": 0.05, "maturity": 3.0, "dividend": 0.04,
                     "kind": "call"}
    cfg["bermudan"] = {"interval": 0.5, "count": 6}
    if jumps:
        cfg["numerics"].update(n_hermite=12, n_laguerre=6)
    else:
        del cfg["jumps"], cfg["pea"]
    return cfg
