"""pyhedonic: hedonic coalition formation for P2P energy trading"""

from .core.context import HedonicMatcher
from .core.engine import Engine, SessionResult
from .core.ga import run
from .core.matching import match_coalitions, settle
from .core.model import GaConfig, Order, Relation, RelationGraph, Scenario, WeightScheme, buyer, seller, validate_session
from .data import Ledger, load_scenario, parse_scenario, save_scenario, serialize_scenario, verify_chain
from .errors import HedonicError
from .sim import generate_scenario, run_baseline, run_session, village_spec

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "GaConfig",
    "HedonicError",
    "HedonicMatcher",
    "Ledger",
    "Order",
    "Relation",
    "RelationGraph",
    "Scenario",
    "SessionResult",
    "WeightScheme",
    "buyer",
    "generate_scenario",
    "load_scenario",
    "match_coalitions",
    "parse_scenario",
    "run",
    "run_baseline",
    "run_session",
    "save_scenario",
    "seller",
    "serialize_scenario",
    "settle",
    "validate_session",
    "verify_chain",
    "village_spec",
]
