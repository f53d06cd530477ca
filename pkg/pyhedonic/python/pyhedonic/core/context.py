"""One market hour: coalition formation, matching, settlement and metrics"""

from dataclasses import dataclass, replace
from math import floor
from statistics import pstdev
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog

from pyhedonic.core.base import CoalitionPlan, MatcherBase
from pyhedonic.core.ga import run
from pyhedonic.core.matching import MatchReport, settle
from pyhedonic.core.model import (
    Coalition,
    GaConfig,
    Order,
    RelationGraph,
    Session,
    SettlementRecord,
    Side,
    wh_to_kwh,
)
from pyhedonic.core.scoring import relation_counts, social_index

logger = structlog.get_logger(__name__)


def hour_seed(seed: int, hour: int, stream: int = 0) -> int:
    """Independent 64-bit seed for one (run seed, hour, stream) triple"""
    state = np.random.SeedSequence([seed, hour, stream]).generate_state(1, dtype=np.uint64)
    return int(state[0])


class HedonicMatcher(MatcherBase):
    """Coalitions from the genetic search, repaired before matching"""

    name = "hedonic"

    def __init__(self, cfg: GaConfig):
        self.cfg = cfg

    def form_coalitions(self, session: Session, hour: int) -> CoalitionPlan:
        hourly = session.at(hour)
        offers, bids = hourly.offers, hourly.bids
        if not offers or not bids:
            # nothing can trade; leave the lone side as singletons
            logger.info("hour_one_sided", hour=hour, offers=len(offers), bids=len(bids))
            return CoalitionPlan(
                tuple(Coalition(Side.SELLER, (o,)) for o in offers),
                tuple(Coalition(Side.BUYER, (o,)) for o in bids),
            )
        trace = run(hourly, replace(self.cfg, seed=hour_seed(self.cfg.seed, hour)))
        return CoalitionPlan(trace.best.sell_coalitions, trace.best.buy_coalitions, trace)


@dataclass(frozen=True)
class SessionMetrics:
    hour: int
    total_energy_wh: int
    transaction_count: int
    mean_price: Optional[float]
    min_price: Optional[int]
    max_price: Optional[int]
    price_std: Optional[float]
    imbalance_wh: int
    supply_wh: int
    demand_wh: int
    social_index: int
    n_sell_coalitions: int
    n_buy_coalitions: int
    tokens: int
    under_delivered: int
    relation_counts: Tuple[Tuple[int, int, int], ...] = ()

    def to_row(self) -> Dict[str, object]:
        return {
            "hour": self.hour,
            "energy_kwh": wh_to_kwh(self.total_energy_wh),
            "transactions": self.transaction_count,
            "mean_price": self.mean_price,
            "min_price": self.min_price,
            "max_price": self.max_price,
            "price_std": self.price_std,
            "imbalance_kwh": wh_to_kwh(self.imbalance_wh),
            "supply_kwh": wh_to_kwh(self.supply_wh),
            "demand_kwh": wh_to_kwh(self.demand_wh),
            "social_index": self.social_index,
            "sell_coalitions": self.n_sell_coalitions,
            "buy_coalitions": self.n_buy_coalitions,
            "tokens_gwei": self.tokens,
            "under_delivered": self.under_delivered,
        }


METRIC_COLUMNS = [
    "hour",
    "energy_kwh",
    "transactions",
    "mean_price",
    "min_price",
    "max_price",
    "price_std",
    "imbalance_kwh",
    "supply_kwh",
    "demand_kwh",
    "social_index",
    "sell_coalitions",
    "buy_coalitions",
    "tokens_gwei",
    "under_delivered",
]


def session_metrics(
    hour: int,
    plan: CoalitionPlan,
    report: MatchReport,
    settlements: List[SettlementRecord],
    graph: RelationGraph,
) -> SessionMetrics:
    prices = report.unit_prices
    coalitions = plan.coalitions()
    return SessionMetrics(
        hour=hour,
        total_energy_wh=report.total_matched_wh,
        transaction_count=len(report.transactions),
        mean_price=float(np.mean(prices)) if prices else None,
        min_price=min(prices) if prices else None,
        max_price=max(prices) if prices else None,
        price_std=pstdev(prices) if prices else None,
        imbalance_wh=report.imbalance_wh,
        supply_wh=report.total_supply_wh,
        demand_wh=report.total_demand_wh,
        social_index=social_index(coalitions, graph),
        n_sell_coalitions=len(plan.sell),
        n_buy_coalitions=len(plan.buy),
        tokens=sum(r.token_amount for r in settlements),
        under_delivered=sum(len(r.under_delivered) for r in settlements),
        relation_counts=tuple(relation_counts(c, graph) for c in coalitions),
    )


@dataclass(frozen=True)
class HourResult:
    hour: int
    orders: Tuple[Order, ...]
    plan: CoalitionPlan
    report: MatchReport
    settlements: Tuple[SettlementRecord, ...]
    metrics: SessionMetrics


class Context:
    """Runs one hour of a session through a matcher"""

    def __init__(
        self,
        session: Session,
        hour: int,
        matcher: MatcherBase,
        delivery_noise: float = 0.0,
        seed: int = 0,
    ):
        if not 0.0 <= delivery_noise <= 1.0:
            raise ValueError("delivery_noise must be within [0, 1]")
        self.session = session
        self.hour = hour
        self.matcher = matcher
        self.delivery_noise = delivery_noise
        self.seed = seed
        self.result: Optional[HourResult] = None

    @property
    def orders(self) -> Tuple[Order, ...]:
        return self.session.at(self.hour).orders

    def delivered(self, report: MatchReport) -> Dict[Order, int]:
        """Delivered energy per seller order; empty when noise is off"""
        if self.delivery_noise == 0.0:
            return {}
        committed: Dict[Order, int] = {}
        for tx in report.transactions:
            for o, wh in tx.seller_allocations:
                committed[o] = committed.get(o, 0) + wh
        rng = np.random.default_rng(hour_seed(self.seed, self.hour, stream=1))
        delivered = {}
        for o in sorted(committed, key=lambda o: o.owner.sort_key):
            shortfall = rng.random() * self.delivery_noise
            delivered[o] = floor(committed[o] * (1.0 - shortfall))
        return delivered

    def process(self) -> HourResult:
        plan, report = self.matcher.match(self.session, self.hour)
        settlements = settle(report.transactions, self.delivered(report))
        metrics = session_metrics(self.hour, plan, report, settlements, self.session.graph)
        logger.info(
            "hour_done",
            hour=self.hour,
            matcher=self.matcher.name,
            energy_kwh=wh_to_kwh(metrics.total_energy_wh),
            transactions=metrics.transaction_count,
            social_index=metrics.social_index,
        )
        self.result = HourResult(self.hour, self.orders, plan, report, tuple(settlements), metrics)
        return self.result
