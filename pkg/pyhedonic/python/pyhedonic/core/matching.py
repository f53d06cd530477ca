"""Coalition orders, coalition-to-coalition matching and settlement"""

from dataclasses import dataclass, replace
from fractions import Fraction
from math import floor
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd
import structlog

from pyhedonic.core.model import (
    WH_PER_KWH,
    Coalition,
    CoalitionOrder,
    Order,
    RelationGraph,
    SettlementRecord,
    Side,
    Transaction,
    wh_to_kwh,
)
from pyhedonic.core.scoring import buyer_price_pref, relation_value, seller_price_pref
from pyhedonic.errors import UnknownOrderInDelivery

logger = structlog.get_logger(__name__)

Allocation = Tuple[Tuple[Order, int], ...]


@dataclass(frozen=True)
class MatchReport:
    hour: int
    transactions: Tuple[Transaction, ...]
    total_supply_wh: int
    total_demand_wh: int
    total_matched_wh: int
    residual_supply_wh: int
    residual_demand_wh: int

    @property
    def imbalance_wh(self) -> int:
        return abs(self.residual_supply_wh - self.residual_demand_wh)

    @property
    def unit_prices(self) -> List[int]:
        return [tx.unit_price for tx in self.transactions]

    def to_frame(self) -> pd.DataFrame:
        """One row per transaction"""
        return pd.DataFrame(
            [
                {
                    "hour": tx.hour,
                    "sell_members": " ".join(str(p) for p in tx.sell.coalition.owners()),
                    "buy_members": " ".join(str(p) for p in tx.buy.coalition.owners()),
                    "kwh": wh_to_kwh(tx.quantity_wh),
                    "price_gwei": tx.unit_price,
                }
                for tx in self.transactions
            ],
            columns=["hour", "sell_members", "buy_members", "kwh", "price_gwei"],
        )


def round_half_up(value: Fraction) -> int:
    return floor(value + Fraction(1, 2))


def aggregate_coalition_order(c: Coalition, index: int = 0) -> CoalitionOrder:
    members = c.members
    return CoalitionOrder(
        side=c.side,
        coalition=c,
        total_wh=sum(o.quantity_wh for o in members),
        avg_price=Fraction(sum(o.limit_price for o in members), len(members)),
        member_breakdown=tuple((o, o.quantity_wh) for o in members),
        index=index,
    )


def member_standing(order: Order, c: Coalition, g: RelationGraph) -> int:
    """Sum of relation values from ``order``'s owner to its co-members; 0 alone"""
    return sum(relation_value(g.relation(order.owner, o.owner)) for o in c.distinct if o.owner != order.owner)


def commits(order: Order, standing: int, unit_price: int) -> bool:
    """Whether a member puts its capacity behind a coalition trade at ``unit_price``

    A price at or better than the member's limit is always taken. Otherwise
    the sign of the member's standing in its coalition is added to its price
    preference at ``unit_price``: net friends back any price, members without
    net ties stay within their delta, net enemies hold out.
    """
    price = Fraction(unit_price)
    if order.side is Side.SELLER:
        if unit_price >= order.limit_price:
            return True
        pref = seller_price_pref(order.limit_price, order.delta_price, price)
    else:
        if unit_price <= order.limit_price:
            return True
        pref = buyer_price_pref(order.limit_price, order.delta_price, price)
    return (standing > 0) - (standing < 0) + pref >= 0


def largest_remainder(total: int, weights: Sequence[int]) -> List[int]:
    """Split ``total`` pro rata on integer weights; extras go to the largest
    remainders, first index on ties"""
    weight_sum = sum(weights)
    if total == 0:
        return [0] * len(weights)
    if weight_sum <= 0:
        raise ValueError("cannot allocate over zero total weight")
    shares = [total * w // weight_sum for w in weights]
    leftover = total - sum(shares)
    ranked = sorted(range(len(weights)), key=lambda i: (-(total * weights[i] % weight_sum), i))
    for i in ranked[:leftover]:
        shares[i] += 1
    return shares


def _allocate_side(order: CoalitionOrder, quantity_wh: int, remaining: Optional[Mapping[Order, int]]) -> Allocation:
    members = [o for o, _ in order.member_breakdown]
    weights = [remaining[o] if remaining is not None else wh for o, wh in order.member_breakdown]
    return tuple(zip(members, largest_remainder(quantity_wh, weights)))


def allocate_to_members(tx: Transaction, remaining: Optional[Mapping[Order, int]] = None) -> Tuple[Allocation, Allocation]:
    """Pro-rata member allocations of a transaction, exact in Wh

    Weights are the member order quantities, or the members' remaining
    capacity when ``remaining`` is given (partial fills).
    """
    return (
        _allocate_side(tx.sell, tx.quantity_wh, remaining),
        _allocate_side(tx.buy, tx.quantity_wh, remaining),
    )


def _open_capacity(
    order: CoalitionOrder,
    unit_price: int,
    capacity: Mapping[Order, int],
    standing: Optional[Mapping[Order, int]],
) -> Dict[Order, int]:
    """Remaining Wh each member puts behind a trade at ``unit_price``"""
    return {
        o: capacity[o] if standing is None or commits(o, standing[o], unit_price) else 0
        for o, _ in order.member_breakdown
    }


def match_coalitions(
    sell: Sequence[CoalitionOrder],
    buy: Sequence[CoalitionOrder],
    hour: int = 0,
    relations: Optional[RelationGraph] = None,
) -> MatchReport:
    """Greedy price-priority matching of seller against buyer coalition orders

    Pairs are matched while the buyer average is at least the seller average.
    Without ``relations`` every member backs every trade of its coalition.
    With ``relations`` a member only backs a trade it commits to at the
    clearing price (:func:`commits`).
    """
    sells = sorted(sell, key=lambda o: (o.avg_price, o.index))
    buys = sorted(buy, key=lambda o: (-o.avg_price, o.index))
    capacity: Dict[Order, int] = {}
    for o in list(sells) + list(buys):
        for member, wh in o.member_breakdown:
            capacity[member] = capacity.get(member, 0) + wh

    standing: Dict[int, Mapping[Order, int]] = {}
    if relations is not None:
        for o in list(sells) + list(buys):
            standing[id(o)] = {m: member_standing(m, o.coalition, relations) for m, _ in o.member_breakdown}

    transactions = []
    i = j = 0
    while i < len(buys) and j < len(sells):
        b, s = buys[i], sells[j]
        if b.avg_price < s.avg_price:
            break
        unit_price = round_half_up((s.avg_price + b.avg_price) / 2)
        b_open = _open_capacity(b, unit_price, capacity, standing.get(id(b)))
        s_open = _open_capacity(s, unit_price, capacity, standing.get(id(s)))
        b_wh, s_wh = sum(b_open.values()), sum(s_open.values())
        quantity = min(b_wh, s_wh)
        if quantity > 0:
            tx = Transaction(hour, s, b, quantity, unit_price)
            seller_alloc = _allocate_side(s, quantity, s_open)
            buyer_alloc = _allocate_side(b, quantity, b_open)
            for member, wh in seller_alloc + buyer_alloc:
                capacity[member] -= wh
            transactions.append(replace(tx, seller_allocations=seller_alloc, buyer_allocations=buyer_alloc))
        # a buyer only commits less as prices rise, a seller less as they fall
        if b_wh == quantity:
            i += 1
        if s_wh == quantity:
            j += 1

    supply = sum(o.total_wh for o in sells)
    demand = sum(o.total_wh for o in buys)
    matched = sum(tx.quantity_wh for tx in transactions)
    if relations is not None:
        logger.debug("coalitions_matched", hour=hour, transactions=len(transactions), matched_wh=matched)
    return MatchReport(
        hour=hour,
        transactions=tuple(transactions),
        total_supply_wh=supply,
        total_demand_wh=demand,
        total_matched_wh=matched,
        residual_supply_wh=supply - matched,
        residual_demand_wh=demand - matched,
    )


def settle(txs: Sequence[Transaction], delivered: Mapping[Order, int]) -> List[SettlementRecord]:
    """Pay sellers for the delivered share of their commitments

    ``delivered`` maps seller orders to delivered Wh for the hour; sellers
    missing from it delivered exactly what they committed. A seller's delivery
    is consumed transaction by transaction in order.
    """
    known = {o for tx in txs for o, _ in tx.per_member_allocations}
    unknown = [o for o in delivered if o not in known]
    if unknown:
        raise UnknownOrderInDelivery(f"{unknown[0]} is not part of any transaction")
    for o, wh in delivered.items():
        if o.side is not Side.SELLER:
            raise UnknownOrderInDelivery(f"{o} is a bid; only seller deliveries are settled")
        if wh < 0:
            raise ValueError(f"delivered energy for {o.owner} must be non-negative")

    committed: Dict[Order, int] = {}
    for tx in txs:
        for o, wh in tx.seller_allocations:
            committed[o] = committed.get(o, 0) + wh
    available = {o: delivered.get(o, wh) for o, wh in committed.items()}

    records = []
    for tx in txs:
        tokens = Fraction(0)
        rows = []
        short = []
        for o, wh in tx.seller_allocations:
            got = min(wh, available[o])
            available[o] -= got
            tokens += Fraction(tx.unit_price * got, WH_PER_KWH)
            rows.append((o, got))
            if got < wh:
                short.append(o)
        records.append(SettlementRecord(tx, tx.quantity_wh, tuple(rows), round_half_up(tokens), tuple(short)))
    return records


def prosumer_prices(report: MatchReport) -> pd.DataFrame:
    """Per-prosumer trading price of every member allocation"""
    rows = []
    for tx in report.transactions:
        for o, wh in tx.per_member_allocations:
            if wh == 0:
                continue
            rows.append(
                {
                    "hour": tx.hour,
                    "prosumer": str(o.owner),
                    "role": "seller" if o.side is Side.SELLER else "buyer",
                    "kwh": wh_to_kwh(wh),
                    "price_gwei": tx.unit_price,
                }
            )
    return pd.DataFrame(rows, columns=["hour", "prosumer", "role", "kwh", "price_gwei"])


def trading_surplus(report: MatchReport) -> pd.DataFrame:
    """Gwei gained by each member against its own limit price"""
    rows = []
    for tx in report.transactions:
        for o, wh in tx.per_member_allocations:
            margin = tx.unit_price - o.limit_price if o.side is Side.SELLER else o.limit_price - tx.unit_price
            rows.append(
                {
                    "hour": tx.hour,
                    "prosumer": str(o.owner),
                    "kwh": wh_to_kwh(wh),
                    "surplus_gwei": margin * wh / WH_PER_KWH,
                }
            )
    frame = pd.DataFrame(rows, columns=["hour", "prosumer", "kwh", "surplus_gwei"])
    return frame.groupby(["hour", "prosumer"], as_index=False, sort=True).sum()
