"""Option pricing under Markov-switching stochastic volatility with co-jumps."""
from .aiv import AivDistribution, aiv_ce, aiv_distribution, aiv_rr, support_bound, triple_bound
from .bermudan import BermudanResult, ExerciseSchedule, price_bermudan
from .errors import CapExceededError, ValidationError
from .european import MarketSpec, PriceResult, price_ms_sv, price_ms_svcj, price_ms_svj, price_model
from .jumps import JumpSpec, PeaSpec
from .models import Model
from .msvol import ChainSpec, StateDistribution

__all__ = [
    "AivDistribution", "BermudanResult", "CapExceededError", "ChainSpec", "ExerciseSchedule", "JumpSpec",
    "MarketSpec", "Model", "PeaSpec", "PriceResult", "StateDistribution", "ValidationError", "aiv_ce",
    "aiv_distribution", "aiv_rr", "price_bermudan", "price_model", "price_ms_sv", "price_ms_svcj",
    "price_ms_svj", "support_bound", "triple_bound",
]
__version__ = "0.1.0"
