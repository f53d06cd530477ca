"""Hedonic scoring of coalitions and individuals

Every function is pure. Coalitions are scored on their distinct members, so a
relation duplicated by a repeated order is counted once; the repetition itself
is charged through the duplication penalty of :func:`individual_fitness`.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np

from pyhedonic.core.model import (
    Coalition,
    GaConfig,
    Individual,
    Order,
    Relation,
    RelationGraph,
    Side,
    WeightScheme,
)
from pyhedonic.errors import WeightsDoNotSumToOne

WEIGHT_TOLERANCE = 1e-9

# group masses of the relation-promoted scheme: positive, zero, negative V_rel
PROMOTED_MASSES = (0.6, 0.2, 0.2)

_RELATION_VALUES = {
    Relation.FRIENDSHIP: 1,
    Relation.NEUTRAL: 0,
    Relation.ENEMY: -1,
}

ScoreCache = Dict[FrozenSet[Order], "CoalitionScore"]


@dataclass(frozen=True)
class CoalitionScore:
    v_rel: int
    v_price: int
    f_pref: int
    ideal: int
    shortfall: int


def relation_value(r: Relation) -> int:
    return _RELATION_VALUES[r]


def pair_count(size: int) -> int:
    return size * (size - 1) // 2


def relation_counts(c: Coalition, g: RelationGraph) -> Tuple[int, int, int]:
    """(friendship, neutral, enemy) counts over unordered member pairs"""
    counts = {Relation.FRIENDSHIP: 0, Relation.NEUTRAL: 0, Relation.ENEMY: 0}
    for a, b in combinations(c.distinct, 2):
        counts[g.relation(a.owner, b.owner)] += 1
    return counts[Relation.FRIENDSHIP], counts[Relation.NEUTRAL], counts[Relation.ENEMY]


def coalition_relation_score(c: Coalition, g: RelationGraph) -> int:
    friends, _, enemies = relation_counts(c, g)
    return friends - enemies


def seller_price_pref(offer_price: int, delta: int, coalition_avg: Fraction) -> int:
    if coalition_avg > offer_price:
        return 1
    if coalition_avg > offer_price - delta:
        return 0
    return -1


def buyer_price_pref(bid_price: int, delta: int, coalition_avg: Fraction) -> int:
    if coalition_avg < bid_price:
        return 1
    if coalition_avg < bid_price + delta:
        return 0
    return -1


def coalition_average_price(c: Coalition) -> Fraction:
    members = c.distinct
    return Fraction(sum(o.limit_price for o in members), len(members))


def coalition_price_score(c: Coalition) -> int:
    avg = coalition_average_price(c)
    pref = seller_price_pref if c.side is Side.SELLER else buyer_price_pref
    return sum(pref(o.limit_price, o.delta_price, avg) for o in c.distinct)


def coalition_pref_score(
    c: Coalition, g: RelationGraph, cache: Optional[ScoreCache] = None
) -> CoalitionScore:
    if cache is not None:
        hit = cache.get(c.member_set)
        if hit is not None:
            return hit

    size = len(c.distinct)
    v_rel = coalition_relation_score(c, g)
    v_price = coalition_price_score(c)
    f_pref = v_rel + v_price
    ideal = pair_count(size) + size
    score = CoalitionScore(v_rel, v_price, f_pref, ideal, ideal - f_pref)

    if cache is not None:
        cache[c.member_set] = score
    return score


def _promoted_weights(v_rels: Sequence[int]) -> np.ndarray:
    groups = (
        [i for i, v in enumerate(v_rels) if v > 0],
        [i for i, v in enumerate(v_rels) if v == 0],
        [i for i, v in enumerate(v_rels) if v < 0],
    )
    live_mass = sum(mass for mass, members in zip(PROMOTED_MASSES, groups) if members)
    weights = np.zeros(len(v_rels))
    for mass, members in zip(PROMOTED_MASSES, groups):
        if members:
            weights[members] = (mass / live_mass) / len(members)
    return weights


def coalition_weights(
    ind: Individual,
    g: RelationGraph,
    scheme: WeightScheme,
    cache: Optional[ScoreCache] = None,
) -> np.ndarray:
    coalitions = ind.coalitions()
    if not coalitions:
        raise ValueError("individual has no coalitions")
    if scheme is WeightScheme.UNIFORM:
        return np.full(len(coalitions), 1.0 / len(coalitions))
    return _promoted_weights([coalition_pref_score(c, g, cache).v_rel for c in coalitions])


def individual_fitness(
    ind: Individual,
    g: RelationGraph,
    cfg: GaConfig,
    cache: Optional[ScoreCache] = None,
) -> float:
    """Negated weighted L_m distance to the ideal point, minus order penalties

    Larger is better; 0 is the global maximum.
    """
    coalitions = ind.coalitions()
    if not coalitions:
        raise ValueError("individual has no coalitions")

    weights = coalition_weights(ind, g, cfg.weight_scheme, cache)
    total = float(weights.sum())
    if abs(total - 1.0) > WEIGHT_TOLERANCE or (weights < 0).any():
        raise WeightsDoNotSumToOne(f"weights sum to {total!r}")

    shortfalls = np.array(
        [coalition_pref_score(c, g, cache).shortfall for c in coalitions], dtype=float
    )
    distance = float(np.dot(weights, shortfalls ** cfg.m) ** (1.0 / cfg.m))

    dup, miss = ind.duplication_counts()
    return -distance - cfg.lambda_dup * dup - cfg.lambda_miss * miss


def social_index(coalitions: Sequence[Coalition], g: RelationGraph) -> int:
    """Sum of V_rel over a set of coalitions"""
    return sum(coalition_relation_score(c, g) for c in coalitions)
