"""Domain types of a P2P energy market session

Energy is fixed-point kWh with 3 decimals, carried as integer watt-hours
(``*_wh`` fields). Prices are integer Gwei per kWh; coalition averages are
``Fraction`` so no comparison ever sees float drift.
"""

from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum, IntEnum
from fractions import Fraction
from functools import cached_property
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from pyhedonic.errors import (
    AsymmetricRelation,
    DuplicateOrder,
    HedonicError,
    MemberNotInGraph,
    SelfRelation,
    SessionValidationError,
    ZeroQuantity,
)

WH_PER_KWH = 1000


def kwh_to_wh(value: Union[str, int, float, Decimal]) -> int:
    """Parse a kWh amount with at most 3 decimals into integer Wh"""
    try:
        scaled = Decimal(str(value)) * WH_PER_KWH
    except InvalidOperation:
        raise ValueError(f"Invalid energy amount {value!r}") from None
    if scaled != scaled.to_integral_value():
        raise ValueError(f"Energy {value!r} has more than 3 decimals")
    return int(scaled)


def format_kwh(wh: int) -> str:
    sign = "-" if wh < 0 else ""
    whole, frac = divmod(abs(wh), WH_PER_KWH)
    return f"{sign}{whole}.{frac:03d}"


def wh_to_kwh(wh: int) -> float:
    return wh / WH_PER_KWH


class Side(Enum):
    BUYER = "buyer"
    SELLER = "seller"

    @property
    def opposite(self) -> "Side":
        return Side.SELLER if self is Side.BUYER else Side.BUYER


# sellers first everywhere an individual is walked side by side
SIDES: Tuple[Side, Side] = (Side.SELLER, Side.BUYER)


@dataclass(frozen=True)
class ProsumerId:
    """Buyer and seller indices are independent namespaces"""

    side: Side
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"Prosumer index must be non-negative, got {self.index}")

    def __str__(self) -> str:
        return f"{self.side.value}:{self.index}"

    @property
    def sort_key(self) -> Tuple[str, int]:
        return self.side.value, self.index

    @classmethod
    def parse(cls, text: str) -> "ProsumerId":
        try:
            side, index = text.split(":")
            return cls(Side(side), int(index))
        except ValueError:
            raise ValueError(f"Invalid prosumer id {text!r}") from None


def buyer(index: int) -> ProsumerId:
    return ProsumerId(Side.BUYER, index)


def seller(index: int) -> ProsumerId:
    return ProsumerId(Side.SELLER, index)


class Relation(IntEnum):
    """Friendship > Neutral > Enemy"""

    ENEMY = -1
    NEUTRAL = 0
    FRIENDSHIP = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Relation":
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"Unknown relation {text!r}") from None


Pair = Tuple[ProsumerId, ProsumerId]


class RelationGraph:
    """Pairwise relations over the prosumers of a scenario

    Edges are stored as given (directed) so that intake can detect asymmetric
    input; lookups fall back to the mirrored entry and then to ``default``.
    """

    def __init__(
        self,
        prosumers: Iterable[ProsumerId],
        edges: Optional[Mapping[Pair, Relation]] = None,
        default: Relation = Relation.NEUTRAL,
    ):
        self._prosumers: FrozenSet[ProsumerId] = frozenset(prosumers)
        self._edges: Mapping[Pair, Relation] = MappingProxyType(dict(edges or {}))
        self.default = default

    @classmethod
    def symmetric(
        cls,
        prosumers: Iterable[ProsumerId],
        pairs: Iterable[Tuple[ProsumerId, ProsumerId, Relation]],
        default: Relation = Relation.NEUTRAL,
    ) -> "RelationGraph":
        edges: Dict[Pair, Relation] = {}
        for a, b, rel in pairs:
            if a == b:
                raise SelfRelation(f"relation({a}, {a}) is undefined")
            known = edges.get((a, b))
            if known is not None and known != rel:
                raise AsymmetricRelation(f"{a} ~ {b} declared both {known.label} and {rel.label}")
            edges[(a, b)] = rel
            edges[(b, a)] = rel
        return cls(prosumers, edges, default)

    @property
    def n_prosumers(self) -> int:
        return len(self._prosumers)

    @property
    def prosumers(self) -> FrozenSet[ProsumerId]:
        return self._prosumers

    def __contains__(self, prosumer: ProsumerId) -> bool:
        return prosumer in self._prosumers

    def relation(self, a: ProsumerId, b: ProsumerId) -> Relation:
        if a == b:
            raise SelfRelation(f"relation({a}, {a}) is undefined")
        for p in (a, b):
            if p not in self._prosumers:
                raise MemberNotInGraph(f"{p} is not part of the relation graph")
        rel = self._edges.get((a, b))
        if rel is None:
            rel = self._edges.get((b, a), self.default)
        return rel

    def violations(self) -> List[HedonicError]:
        found: List[HedonicError] = []
        for (a, b), rel in self._edges.items():
            if a == b:
                found.append(SelfRelation(f"relation({a}, {a}) is declared"))
                continue
            for p in (a, b):
                if p not in self._prosumers:
                    found.append(MemberNotInGraph(f"{p} appears in a relation but is not a prosumer"))
            mirrored = self._edges.get((b, a))
            # each unordered pair reported once
            if mirrored is not None and mirrored != rel and a.sort_key < b.sort_key:
                found.append(
                    AsymmetricRelation(
                        f"relation({a}, {b}) = {rel.label} but relation({b}, {a}) = {mirrored.label}"
                    )
                )
        return found

    def explicit_pairs(self) -> List[Tuple[ProsumerId, ProsumerId, Relation]]:
        """Unordered pairs with a declared relation, canonically sorted"""
        seen: Dict[Pair, Relation] = {}
        for (a, b), rel in self._edges.items():
            if a == b:
                continue
            lo, hi = sorted((a, b), key=lambda p: p.sort_key)
            seen.setdefault((lo, hi), rel)
        return [(a, b, rel) for (a, b), rel in sorted(seen.items(), key=lambda kv: (kv[0][0].sort_key, kv[0][1].sort_key))]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelationGraph):
            return NotImplemented
        return (
            self._prosumers == other._prosumers
            and self.default == other.default
            and self.explicit_pairs() == other.explicit_pairs()
        )

    def __repr__(self) -> str:
        return f"RelationGraph(n_prosumers={self.n_prosumers}, explicit_pairs={len(self.explicit_pairs())})"


@dataclass(frozen=True)
class Order:
    """A per-hour bid (buyer owner) or offer (seller owner)"""

    owner: ProsumerId
    hour: int
    quantity_wh: int
    limit_price: int
    delta_price: int = 0

    def __post_init__(self):
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour must be in 0..23, got {self.hour}")
        if self.quantity_wh < 0:
            raise ValueError(f"quantity must be non-negative, got {self.quantity_wh} Wh")
        if self.limit_price < 0 or self.delta_price < 0:
            raise ValueError("limit price and delta must be non-negative")

    @property
    def side(self) -> Side:
        return self.owner.side

    @property
    def is_offer(self) -> bool:
        return self.owner.side is Side.SELLER

    @property
    def quantity_kwh(self) -> str:
        return format_kwh(self.quantity_wh)

    def __str__(self) -> str:
        return f"{self.owner}@{self.hour} {self.quantity_kwh}kWh/{self.limit_price}±{self.delta_price}"


@dataclass(frozen=True)
class Coalition:
    side: Side
    members: Tuple[Order, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("coalition must be non-empty")
        for order in self.members:
            if order.side is not self.side:
                raise ValueError(f"{order.owner} cannot join a {self.side.value} coalition")

    @cached_property
    def member_set(self) -> FrozenSet[Order]:
        return frozenset(self.members)

    @cached_property
    def distinct(self) -> Tuple[Order, ...]:
        """Members with repeated orders removed, first occurrence kept"""
        return tuple(dict.fromkeys(self.members))

    @cached_property
    def key(self) -> Tuple[Tuple[str, int], ...]:
        """Order-independent identity of the member set"""
        return tuple(sorted(o.owner.sort_key for o in self.member_set))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Order]:
        return iter(self.members)

    def owners(self) -> Tuple[ProsumerId, ...]:
        return tuple(o.owner for o in self.members)


@dataclass(frozen=True)
class Individual:
    """One candidate partition of an hour's orders into coalitions

    ``orders`` is the session universe the partition is measured against; it
    takes no part in equality.
    """

    sell_coalitions: Tuple[Coalition, ...]
    buy_coalitions: Tuple[Coalition, ...]
    orders: Tuple[Order, ...] = field(default=(), compare=False, repr=False)

    def coalitions(self) -> Tuple[Coalition, ...]:
        return self.sell_coalitions + self.buy_coalitions

    def side(self, side: Side) -> Tuple[Coalition, ...]:
        return self.sell_coalitions if side is Side.SELLER else self.buy_coalitions

    def with_side(self, side: Side, coalitions: Iterable[Coalition]) -> "Individual":
        coalitions = tuple(coalitions)
        if side is Side.SELLER:
            return Individual(coalitions, self.buy_coalitions, self.orders)
        return Individual(self.sell_coalitions, coalitions, self.orders)

    def side_orders(self, side: Side) -> Tuple[Order, ...]:
        return tuple(o for o in self.orders if o.side is side)

    @cached_property
    def canonical_key(self) -> Tuple[FrozenSet[FrozenSet[Order]], FrozenSet[FrozenSet[Order]]]:
        """Set-equality key used by the duplicate-individual guard"""
        return (
            frozenset(c.member_set for c in self.sell_coalitions),
            frozenset(c.member_set for c in self.buy_coalitions),
        )

    def duplication_counts(self) -> Tuple[int, int]:
        """(duplicated, missing) order counts against ``orders``"""
        seen = Counter(o for c in self.coalitions() for o in c.members)
        dup = sum(n - 1 for n in seen.values() if n > 1)
        miss = sum(1 for o in self.orders if o not in seen)
        return dup, miss

    @property
    def is_well_formed(self) -> bool:
        return self.duplication_counts() == (0, 0)


class WeightScheme(Enum):
    UNIFORM = "uniform"
    RELATION_PROMOTED = "promoted"


@dataclass(frozen=True)
class GaConfig:
    gamma_wh: int = 10 * WH_PER_KWH
    pop_size: int = 30
    iterations: int = 200
    tournament_k: int = 3
    m: float = 1.0
    weight_scheme: WeightScheme = WeightScheme.UNIFORM
    lambda_dup: float = 1.0
    lambda_miss: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if self.tournament_k < 2 or self.tournament_k > self.pop_size:
            raise ValueError("tournament_k must be in 2..pop_size")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.lambda_dup < 0 or self.lambda_miss < 0:
            raise ValueError("penalty coefficients must be non-negative")
        if self.gamma_wh < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class CoalitionOrder:
    """A coalition aggregated into one market order"""

    side: Side
    coalition: Coalition
    total_wh: int
    avg_price: Fraction
    member_breakdown: Tuple[Tuple[Order, int], ...]
    index: int = 0


@dataclass(frozen=True)
class Transaction:
    hour: int
    sell: CoalitionOrder
    buy: CoalitionOrder
    quantity_wh: int
    unit_price: int
    seller_allocations: Tuple[Tuple[Order, int], ...] = ()
    buyer_allocations: Tuple[Tuple[Order, int], ...] = ()

    def __post_init__(self):
        if self.quantity_wh <= 0:
            raise ValueError("transaction quantity must be positive")
        for allocations in (self.seller_allocations, self.buyer_allocations):
            if allocations and sum(wh for _, wh in allocations) != self.quantity_wh:
                raise ValueError("member allocations must sum to the transaction quantity")

    @property
    def per_member_allocations(self) -> Tuple[Tuple[Order, int], ...]:
        return self.seller_allocations + self.buyer_allocations


@dataclass(frozen=True)
class SettlementRecord:
    transaction: Transaction
    committed_wh: int
    delivered: Tuple[Tuple[Order, int], ...]
    token_amount: int
    under_delivered: Tuple[Order, ...] = ()


@dataclass(frozen=True)
class Prosumer:
    """A prosumer and the energy interval its orders are drawn from"""

    id: ProsumerId
    min_wh: int = 0
    max_wh: int = 0

    def __post_init__(self):
        if not 0 <= self.min_wh <= self.max_wh:
            raise ValueError(f"invalid energy interval for {self.id}")


@dataclass(frozen=True)
class Session:
    """Validated orders of a market session and their relation graph"""

    orders: Tuple[Order, ...]
    graph: RelationGraph

    @property
    def hours(self) -> Tuple[int, ...]:
        return tuple(sorted({o.hour for o in self.orders}))

    def at(self, hour: int) -> "Session":
        return Session(tuple(o for o in self.orders if o.hour == hour), self.graph)

    def side_orders(self, side: Side) -> Tuple[Order, ...]:
        return tuple(o for o in self.orders if o.side is side)

    @property
    def offers(self) -> Tuple[Order, ...]:
        return self.side_orders(Side.SELLER)

    @property
    def bids(self) -> Tuple[Order, ...]:
        return self.side_orders(Side.BUYER)


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    prosumers: Tuple[Prosumer, ...]
    graph: RelationGraph
    orders: Tuple[Order, ...]

    @property
    def hours(self) -> Tuple[int, ...]:
        return tuple(sorted({o.hour for o in self.orders}))


def validate_session(orders: Iterable[Order], graph: RelationGraph) -> Session:
    """Check every intake invariant and report all violations at once"""
    orders = tuple(orders)
    if not orders:
        raise ValueError("a session needs at least one order")

    violations: List[HedonicError] = list(graph.violations())
    seen = set()
    for order in orders:
        if order.quantity_wh == 0:
            violations.append(ZeroQuantity(f"{order.owner} hour {order.hour} has zero quantity"))
        key = (order.owner, order.hour)
        if key in seen:
            violations.append(DuplicateOrder(f"{order.owner} has more than one order for hour {order.hour}"))
        seen.add(key)
        if order.owner not in graph:
            violations.append(MemberNotInGraph(f"{order.owner} is not part of the relation graph"))

    if violations:
        raise SessionValidationError(violations)
    return Session(orders, graph)
