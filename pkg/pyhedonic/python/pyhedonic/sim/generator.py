"""Seeded scenario generation from prosumer energy profiles"""

from dataclasses import dataclass
from itertools import combinations
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from pyhedonic.core.model import (
    Order,
    Prosumer,
    ProsumerId,
    Relation,
    RelationGraph,
    Scenario,
    Side,
    kwh_to_wh,
)
from pyhedonic.errors import InvalidSpec

logger = structlog.get_logger(__name__)

MIX_TOLERANCE = 1e-9

# (id, min kWh, max kWh) of the 14-prosumer community
VILLAGE_BUYERS = ((1, 1, 14), (2, 1, 4), (3, 1, 20), (4, 2, 15))
VILLAGE_SELLERS = (
    (4, 0, 9),
    (5, 0, 11),
    (6, 0, 11),
    (7, 0, 12),
    (8, 0, 14),
    (9, 0, 16),
    (10, 0, 17),
    (11, 1, 23),
    (12, 1, 19),
    (13, 1, 20),
)

FRIENDSHIP_DOMINANT = (0.6, 0.3, 0.1)
NEUTRAL_DOMINANT = (0.1, 0.8, 0.1)
ENEMY_DOMINANT = (0.1, 0.2, 0.7)


@dataclass(frozen=True)
class ScenarioSpec:
    profiles: Tuple[Prosumer, ...]
    relation_mix: Tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    price_range: Tuple[int, int] = (1, 20)
    delta_range: Tuple[int, int] = (0, 2)
    hours: Tuple[int, ...] = tuple(range(24))
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if not self.profiles:
            raise InvalidSpec("a scenario needs at least one prosumer profile")
        ids = [p.id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("prosumer ids must be unique")
        if len(self.relation_mix) != 3 or any(p < 0 for p in self.relation_mix):
            raise InvalidSpec(f"relation mix {self.relation_mix} must be three non-negative probabilities")
        if abs(sum(self.relation_mix) - 1.0) > MIX_TOLERANCE:
            raise InvalidSpec(f"relation mix {self.relation_mix} does not sum to 1")
        for label, (lo, hi) in (("price", self.price_range), ("delta", self.delta_range)):
            if not 0 <= lo <= hi:
                raise InvalidSpec(f"{label} range ({lo}, {hi}) must satisfy 0 <= min <= max")
        if not self.hours or len(set(self.hours)) != len(self.hours):
            raise InvalidSpec("hours must be a non-empty list without repeats")
        if any(not 0 <= h <= 23 for h in self.hours):
            raise InvalidSpec("hours must lie in 0..23")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")

    @property
    def buyers(self) -> List[Prosumer]:
        return [p for p in self.profiles if p.id.side is Side.BUYER]

    @property
    def sellers(self) -> List[Prosumer]:
        return [p for p in self.profiles if p.id.side is Side.SELLER]


def _profiles(side: Side, rows: Sequence[Tuple[int, int, int]]) -> List[Prosumer]:
    return [Prosumer(ProsumerId(side, i), kwh_to_wh(lo), kwh_to_wh(hi)) for i, lo, hi in rows]


def village_spec(seed: int = 0, **overrides) -> ScenarioSpec:
    """The 14-prosumer community: 4 buyers, 10 sellers"""
    profiles = _profiles(Side.BUYER, VILLAGE_BUYERS) + _profiles(Side.SELLER, VILLAGE_SELLERS)
    overrides.setdefault("name", "village14")
    return ScenarioSpec(tuple(profiles), seed=seed, **overrides)


def community_spec(n_buyers: int = 24, n_sellers: int = 24, seed: int = 0, **overrides) -> ScenarioSpec:
    """A larger community whose profiles cycle through the 14-prosumer intervals"""
    if n_buyers < 0 or n_sellers < 0 or n_buyers + n_sellers == 0:
        raise InvalidSpec("community needs a positive number of prosumers")
    buyers = [(i + 1, *VILLAGE_BUYERS[i % len(VILLAGE_BUYERS)][1:]) for i in range(n_buyers)]
    sellers = [(i + 1, *VILLAGE_SELLERS[i % len(VILLAGE_SELLERS)][1:]) for i in range(n_sellers)]
    overrides.setdefault("name", f"community{n_buyers + n_sellers}")
    return ScenarioSpec(tuple(_profiles(Side.BUYER, buyers) + _profiles(Side.SELLER, sellers)), seed=seed, **overrides)


def _draw_relation(u: float, mix: Tuple[float, float, float]) -> Relation:
    # one uniform per pair keeps relation sweeps paired across mixes
    if u < mix[0]:
        return Relation.FRIENDSHIP
    if u < mix[0] + mix[1]:
        return Relation.NEUTRAL
    return Relation.ENEMY


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    relation_rng, order_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(2))
    profiles = sorted(spec.profiles, key=lambda p: p.id.sort_key)
    ids = [p.id for p in profiles]

    pairs = []
    for a, b in combinations(ids, 2):
        rel = _draw_relation(float(relation_rng.random()), spec.relation_mix)
        if rel is not Relation.NEUTRAL:
            pairs.append((a, b, rel))
    graph = RelationGraph.symmetric(ids, pairs)

    orders = []
    skipped = 0
    for hour in sorted(spec.hours):
        for p in profiles:
            quantity = int(order_rng.integers(p.min_wh, p.max_wh, endpoint=True))
            price = int(order_rng.integers(spec.price_range[0], spec.price_range[1], endpoint=True))
            delta = int(order_rng.integers(spec.delta_range[0], spec.delta_range[1], endpoint=True))
            if quantity == 0:
                skipped += 1
                continue
            orders.append(Order(p.id, hour, quantity, price, delta))

    logger.debug("scenario_generated", name=spec.name, seed=spec.seed, orders=len(orders), skipped=skipped)
    return Scenario(spec.name, spec.seed, tuple(profiles), graph, tuple(orders))
