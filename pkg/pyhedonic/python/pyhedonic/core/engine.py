import signal
import sys
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
import structlog

from pyhedonic.core.base import CoalitionPlan, MatcherBase
from pyhedonic.core.context import METRIC_COLUMNS, Context, HourResult
from pyhedonic.core.matching import MatchReport
from pyhedonic.core.model import Coalition, Order, Scenario, SettlementRecord, format_kwh, validate_session
from pyhedonic.data.ledger import Ledger, PayloadKind

logger = structlog.get_logger(__name__)


def _members(c: Coalition) -> List[str]:
    return [str(o.owner) for o in c.members]


def session_open_payload(scenario: Scenario, matcher: MatcherBase, hours: Sequence[int]) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "matcher": matcher.name,
        "hours": list(hours),
        "prosumers": [str(p) for p in sorted(scenario.graph.prosumers, key=lambda p: p.sort_key)],
        "default_relation": scenario.graph.default.label,
        "relations": [[str(a), str(b), rel.label] for a, b, rel in scenario.graph.explicit_pairs()],
    }
    cfg = getattr(matcher, "cfg", None)
    if cfg is not None:
        payload["ga"] = {
            "gamma_kwh": format_kwh(cfg.gamma_wh),
            "pop_size": cfg.pop_size,
            "iterations": cfg.iterations,
            "tournament_k": cfg.tournament_k,
            "m": repr(cfg.m),
            "weight_scheme": cfg.weight_scheme.value,
            "seed": cfg.seed,
        }
    return payload


def orders_payload(hour: int, orders: Iterable[Order]) -> Dict[str, Any]:
    return {
        "hour": hour,
        "orders": [
            {"owner": str(o.owner), "kwh": format_kwh(o.quantity_wh), "price": o.limit_price, "delta": o.delta_price}
            for o in orders
        ],
    }


def coalitions_payload(hour: int, plan: CoalitionPlan, social_index: int) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "hour": hour,
        "sell": [_members(c) for c in plan.sell],
        "buy": [_members(c) for c in plan.buy],
        "social_index": social_index,
    }
    if plan.trace is not None:
        payload["fitness"] = repr(plan.trace.final_fitness)
    return payload


def transactions_payload(hour: int, report: MatchReport) -> Dict[str, Any]:
    return {
        "hour": hour,
        "matched_kwh": format_kwh(report.total_matched_wh),
        "residual_supply_kwh": format_kwh(report.residual_supply_wh),
        "residual_demand_kwh": format_kwh(report.residual_demand_wh),
        "transactions": [
            {
                "sell": _members(tx.sell.coalition),
                "buy": _members(tx.buy.coalition),
                "kwh": format_kwh(tx.quantity_wh),
                "price": tx.unit_price,
                "allocations": [[str(o.owner), format_kwh(wh)] for o, wh in tx.per_member_allocations],
            }
            for tx in report.transactions
        ],
    }


def settlement_payload(hour: int, records: Iterable[SettlementRecord]) -> Dict[str, Any]:
    return {
        "hour": hour,
        "records": [
            {
                "committed_kwh": format_kwh(r.committed_wh),
                "delivered": [[str(o.owner), format_kwh(wh)] for o, wh in r.delivered],
                "tokens": r.token_amount,
                "under_delivered": [str(o.owner) for o in r.under_delivered],
            }
            for r in records
        ],
    }


@dataclass(frozen=True)
class SessionResult:
    scenario: Scenario
    matcher: str
    hours: Tuple[HourResult, ...]
    completed: bool = True

    def metrics_frame(self) -> pd.DataFrame:
        return pd.DataFrame([h.metrics.to_row() for h in self.hours], columns=METRIC_COLUMNS)

    @property
    def total_energy_wh(self) -> int:
        return sum(h.report.total_matched_wh for h in self.hours)

    def hour(self, hour: int) -> HourResult:
        for h in self.hours:
            if h.hour == hour:
                return h
        raise KeyError(f"hour {hour} was not run")


class Engine:
    """Drives a scenario hour by hour and records every step in the ledger"""

    def __init__(
        self,
        scenario: Scenario,
        matcher: MatcherBase,
        ledger: Optional[Ledger] = None,
        delivery_noise: float = 0.0,
    ):
        self.APPNAME = Path(sys.argv[0]).stem
        self.scenario = scenario
        self.session = validate_session(scenario.orders, scenario.graph)
        self.matcher = matcher
        self.ledger = ledger
        self.delivery_noise = delivery_noise

        self.contexts: Dict[int, Context] = {}
        self.active = False

    def make_context(self, hour: int) -> Context:
        if hour in self.contexts:
            return self.contexts[hour]

        context = Context(self.session, hour, self.matcher, self.delivery_noise, self.scenario.seed)
        self.contexts[hour] = context
        return context

    def _append(self, kind: PayloadKind, payload: Dict[str, Any]):
        if self.ledger is not None:
            self.ledger.append(kind, payload)

    def run(self, hours: Optional[Iterable[int]] = None) -> SessionResult:
        hours = sorted(set(hours)) if hours is not None else list(self.session.hours)
        for hour in hours:
            self.make_context(hour)

        # handlers can only be installed from the main thread
        previous = {}
        if threading.current_thread() is threading.main_thread():
            for sig in (signal.SIGTERM, signal.SIGINT):
                previous[sig] = signal.signal(sig, self.stop)

        self.active = True
        results: List[HourResult] = []
        try:
            self._append(PayloadKind.SESSION_OPEN, session_open_payload(self.scenario, self.matcher, hours))
            for hour in hours:
                if not self.active:
                    logger.warning("session_stopped", app=self.APPNAME, completed_hours=len(results))
                    break
                context = self.contexts[hour]
                result = context.process()
                self._append(PayloadKind.ORDERS, orders_payload(hour, result.orders))
                self._append(
                    PayloadKind.COALITIONS, coalitions_payload(hour, result.plan, result.metrics.social_index)
                )
                self._append(PayloadKind.TRANSACTIONS, transactions_payload(hour, result.report))
                self._append(PayloadKind.SETTLEMENT, settlement_payload(hour, result.settlements))
                results.append(result)
        finally:
            for sig, handler in previous.items():
                signal.signal(sig, handler)

        completed = len(results) == len(hours)
        self.active = False
        return SessionResult(self.scenario, self.matcher.name, tuple(results), completed)

    def stop(self, *_):
        self.active = False
