"""Scenario files, the session ledger and run artifacts"""

from .ledger import Ledger, LedgerBlock, PayloadKind, ledger_frame, read_blocks, verify_chain
from .query import RunQuery, recompute_social_index
from .scenario import load_scenario, parse_scenario, save_scenario, serialize_scenario

__all__ = [
    "Ledger",
    "LedgerBlock",
    "PayloadKind",
    "RunQuery",
    "ledger_frame",
    "load_scenario",
    "parse_scenario",
    "read_blocks",
    "recompute_social_index",
    "save_scenario",
    "serialize_scenario",
    "verify_chain",
]
