"""Genetic search for hedonic coalitions

One seeded ``numpy.random.Generator`` drives a run. Draws happen in program
order: initial shuffles (one permutation per individual and side, sellers
first), then per iteration two tournaments, one crossover point per side, and
the mutation picks per side. Replaying that order reproduces any run.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from pyhedonic.core.model import (
    SIDES,
    Coalition,
    GaConfig,
    Individual,
    Order,
    Relation,
    RelationGraph,
    Session,
    Side,
)
from pyhedonic.core.scoring import ScoreCache, coalition_pref_score, individual_fitness
from pyhedonic.errors import EmptySide, PopulationTooSmall

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class Population:
    individuals: Tuple[Individual, ...]
    fitnesses: Tuple[float, ...]
    # pairwise individual_distance, kept in step with ``individuals``
    distances: np.ndarray = field(compare=False, repr=False)

    @classmethod
    def build(cls, individuals: Sequence[Individual], fitnesses: Sequence[float]) -> "Population":
        if len(individuals) != len(fitnesses):
            raise ValueError("individuals and fitnesses must have equal length")
        n = len(individuals)
        distances = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                distances[i, j] = distances[j, i] = individual_distance(individuals[i], individuals[j])
        return cls(tuple(individuals), tuple(float(f) for f in fitnesses), distances)

    def __len__(self) -> int:
        return len(self.individuals)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.fitnesses))

    @property
    def worst_index(self) -> int:
        return int(np.argmin(self.fitnesses))

    @property
    def mean_fitness(self) -> float:
        return float(np.mean(self.fitnesses))

    def replaced(self, index: int, ind: Individual, fitness: float, row: np.ndarray) -> "Population":
        individuals = list(self.individuals)
        fitnesses = list(self.fitnesses)
        individuals[index] = ind
        fitnesses[index] = float(fitness)
        distances = self.distances.copy()
        distances[index, :] = row
        distances[:, index] = row
        distances[index, index] = 0.0
        return Population(tuple(individuals), tuple(fitnesses), distances)


@dataclass(frozen=True)
class RunTrace:
    best_fitness: Tuple[float, ...]
    mean_fitness: Tuple[float, ...]
    best: Individual
    best_raw_fitness: float
    final_fitness: float
    iterations: int
    seed: int
    n_sell: int
    n_buy: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(1, len(self.best_fitness) + 1),
                "best_fitness": self.best_fitness,
                "mean_fitness": self.mean_fitness,
            }
        )

    def export(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.9f")
        return path


def compute_coalition_number(orders: Sequence[Order], gamma_wh: int) -> Tuple[int, int]:
    counts = []
    for side in SIDES:
        side_orders = [o for o in orders if o.side is side]
        seeds = sum(1 for o in side_orders if o.quantity_wh > gamma_wh)
        # nothing above the threshold still yields one coalition
        counts.append(seeds if seeds or not side_orders else 1)
    return counts[0], counts[1]


def _initial_side(side_orders: Sequence[Order], side: Side, gamma_wh: int, rng: np.random.Generator) -> List[Coalition]:
    seeds = [o for o in side_orders if o.quantity_wh > gamma_wh]
    rest = [o for o in side_orders if o.quantity_wh <= gamma_wh]
    buckets: List[List[Order]] = [[s] for s in seeds] or [[]]
    for position, k in enumerate(rng.permutation(len(rest))):
        buckets[position % len(buckets)].append(rest[k])
    return [Coalition(side, tuple(b)) for b in buckets if b]


def generate_initial_population(
    session: Session,
    cfg: GaConfig,
    rng: np.random.Generator,
    cache: Optional[ScoreCache] = None,
) -> Population:
    for side in SIDES:
        if not session.side_orders(side):
            raise EmptySide(f"no {side.value} orders in the session")

    individuals = []
    for _ in range(cfg.pop_size):
        sell = _initial_side(session.offers, Side.SELLER, cfg.gamma_wh, rng)
        buy = _initial_side(session.bids, Side.BUYER, cfg.gamma_wh, rng)
        individuals.append(Individual(tuple(sell), tuple(buy), session.orders))

    fitnesses = [individual_fitness(ind, session.graph, cfg, cache) for ind in individuals]
    return Population.build(individuals, fitnesses)


def _tournament_index(pop: Population, k: int, rng: np.random.Generator) -> int:
    if k > len(pop):
        raise ValueError(f"tournament size {k} exceeds population size {len(pop)}")
    drawn = rng.choice(len(pop), size=k, replace=False)
    # highest fitness, lowest index on ties
    return int(min(drawn, key=lambda i: (-pop.fitnesses[i], i)))


def tournament_select(pop: Population, k: int, rng: np.random.Generator) -> Individual:
    return pop.individuals[_tournament_index(pop, k, rng)]


def enemy_dominated(c: Coalition, g: RelationGraph) -> Tuple[Order, ...]:
    """Members with more enemies than friends and neutrals among co-members"""
    dominated = []
    for x in c.distinct:
        enemies = others = 0
        for y in c.distinct:
            if y == x:
                continue
            if g.relation(x.owner, y.owner) is Relation.ENEMY:
                enemies += 1
            else:
                others += 1
        if enemies > others:
            dominated.append(x)
    return tuple(dominated)


def enemy_participants(c: Coalition, g: RelationGraph) -> Tuple[Order, ...]:
    members = c.distinct
    return tuple(
        x
        for x in members
        if any(y != x and g.relation(x.owner, y.owner) is Relation.ENEMY for y in members)
    )


def _replace_at(coalitions: Tuple[Coalition, ...], index: int, side: Side, members: List[Order]) -> Tuple[Coalition, ...]:
    head, tail = coalitions[:index], coalitions[index + 1 :]
    if not members:
        return head + tail
    return head + (Coalition(side, tuple(members)),) + tail


def crossover(
    p1: Individual, p2: Individual, rng: np.random.Generator, g: RelationGraph
) -> Tuple[Individual, Individual]:
    o1, o2 = p1, p2
    for side in SIDES:
        c1s, c2s = p1.side(side), p2.side(side)
        n = min(len(c1s), len(c2s))
        if n == 0:
            continue
        point = int(rng.integers(n))
        a, b = c1s[point], c2s[point]
        swap_a, swap_b = enemy_dominated(a, g), enemy_dominated(b, g)
        if not swap_a and not swap_b:
            continue

        members_a = [o for o in a.members if o not in swap_a] + list(swap_b)
        members_b = [o for o in b.members if o not in swap_b] + list(swap_a)
        # a side never loses its last coalition
        if (not members_a and len(c1s) == 1) or (not members_b and len(c2s) == 1):
            continue
        o1 = o1.with_side(side, _replace_at(c1s, point, side, members_a))
        o2 = o2.with_side(side, _replace_at(c2s, point, side, members_b))
    return o1, o2


def mutate(
    ind: Individual,
    g: RelationGraph,
    rng: np.random.Generator,
    cache: Optional[ScoreCache] = None,
) -> Individual:
    for side in SIDES:
        coalitions = ind.side(side)
        if len(coalitions) < 2:
            continue
        ranked = sorted(range(len(coalitions)), key=lambda i: (coalition_pref_score(coalitions[i], g, cache).v_rel, i))
        i, j = ranked[0], ranked[1]
        eligible_i = enemy_participants(coalitions[i], g)
        eligible_j = enemy_participants(coalitions[j], g)
        if not eligible_i or not eligible_j:
            continue

        x = eligible_i[int(rng.integers(len(eligible_i)))]
        y = eligible_j[int(rng.integers(len(eligible_j)))]
        members_i = list(coalitions[i].members)
        members_j = list(coalitions[j].members)
        members_i[members_i.index(x)] = y
        members_j[members_j.index(y)] = x
        updated = list(coalitions)
        updated[i] = Coalition(side, tuple(members_i))
        updated[j] = Coalition(side, tuple(members_j))
        ind = ind.with_side(side, updated)
    return ind


def jaccard(a: Coalition, b: Coalition) -> float:
    sa, sb = a.member_set, b.member_set
    if not sa and not sb:
        return 1.0
    shared = len(sa & sb)
    return shared / (len(sa) + len(sb) - shared)


def _side_alignment(a: Sequence[Coalition], b: Sequence[Coalition]) -> Tuple[float, int]:
    """(sum of matched 1 - jaccard plus unmatched slots, slot count)"""
    slots = max(len(a), len(b))
    if slots == 0:
        return 0.0, 0

    where: Dict[Order, List[int]] = defaultdict(list)
    for jb, cb in enumerate(b):
        for o in cb.member_set:
            where[o].append(jb)
    overlaps: Dict[Tuple[int, int], int] = defaultdict(int)
    for ia, ca in enumerate(a):
        for o in ca.member_set:
            for jb in where.get(o, ()):
                overlaps[(ia, jb)] += 1

    # greedy best-Jaccard matching; the tie key is symmetric in (a, b)
    scored = []
    for (ia, jb), shared in overlaps.items():
        sim = shared / (len(a[ia].member_set) + len(b[jb].member_set) - shared)
        scored.append((-sim, tuple(sorted((a[ia].key, b[jb].key))), ia, jb, sim))
    scored.sort()

    used_a, used_b = set(), set()
    total = 0.0
    matched = 0
    for _, _, ia, jb, sim in scored:
        if ia in used_a or jb in used_b:
            continue
        used_a.add(ia)
        used_b.add(jb)
        total += 1.0 - sim
        matched += 1
    # disjoint or unmatched coalitions sit at distance 1
    return total + (slots - matched), slots


def individual_distance(i1: Individual, i2: Individual) -> float:
    total, slots = 0.0, 0
    for side in SIDES:
        side_total, side_slots = _side_alignment(i1.side(side), i2.side(side))
        total += side_total
        slots += side_slots
    return total / slots if slots else 0.0


def diversity_contribution(ind: Individual, pop: Union[Population, Sequence[Individual]]) -> float:
    individuals = pop.individuals if isinstance(pop, Population) else tuple(pop)
    others = [other for other in individuals if other is not ind]
    if not others:
        raise PopulationTooSmall("diversity needs at least one other individual")
    return min(individual_distance(ind, other) for other in others)


def update_population(pop: Population, offspring: Individual, offspring_fitness: float) -> Population:
    """Replace a weaker, least diverse member with the offspring when it pays off"""
    row = np.array([individual_distance(offspring, ind) for ind in pop.individuals])
    key = offspring.canonical_key
    keys = [ind.canonical_key for ind in pop.individuals]

    candidates = [i for i, f in enumerate(pop.fitnesses) if f < offspring_fitness]
    if candidates:
        contributions = {}
        for i in candidates:
            others = np.delete(pop.distances[i], i)
            contributions[i] = float(others.min()) if others.size else 0.0
        c_min = min(candidates, key=lambda i: (contributions[i], i))
        offspring_contribution = float(np.delete(row, c_min).min())
        duplicate = any(k == key for i, k in enumerate(keys) if i != c_min)
        if offspring_contribution > contributions[c_min] and not duplicate:
            return pop.replaced(c_min, offspring, offspring_fitness, row)

    worst = pop.worst_index
    if key not in keys and offspring_fitness > pop.fitnesses[worst]:
        return pop.replaced(worst, offspring, offspring_fitness, row)
    return pop


def repair(ind: Individual) -> Individual:
    """Drop repeated orders (first occurrence wins), reinsert missing ones

    Missing orders go to the smallest coalition of their side, lowest index on
    ties.
    """
    seen = set()
    repaired = ind
    for side in SIDES:
        buckets: List[List[Order]] = []
        for c in ind.side(side):
            members = []
            for o in c.members:
                if o not in seen:
                    seen.add(o)
                    members.append(o)
            if members:
                buckets.append(members)
        for o in ind.side_orders(side):
            if o in seen:
                continue
            seen.add(o)
            if not buckets:
                buckets.append([o])
                continue
            smallest = min(range(len(buckets)), key=lambda i: (len(buckets[i]), i))
            buckets[smallest].append(o)
        repaired = repaired.with_side(side, [Coalition(side, tuple(b)) for b in buckets])
    return repaired


def run(session: Session, cfg: GaConfig) -> RunTrace:
    hours = session.hours
    if len(hours) > 1:
        raise ValueError(f"run expects a single-hour session, got hours {hours}")

    g = session.graph
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    cache: ScoreCache = {}
    n_sell, n_buy = compute_coalition_number(session.orders, cfg.gamma_wh)

    pop = generate_initial_population(session, cfg, rng, cache)
    best_index = pop.best_index
    best, best_fitness = pop.individuals[best_index], pop.fitnesses[best_index]
    best_series, mean_series = [], []

    for _ in range(cfg.iterations):
        parent_1 = tournament_select(pop, cfg.tournament_k, rng)
        parent_2 = tournament_select(pop, cfg.tournament_k, rng)
        for child in crossover(parent_1, parent_2, rng, g):
            child = mutate(child, g, rng, cache)
            fitness = individual_fitness(child, g, cfg, cache)
            pop = update_population(pop, child, fitness)

        i = pop.best_index
        if pop.fitnesses[i] > best_fitness:
            best, best_fitness = pop.individuals[i], pop.fitnesses[i]
        best_series.append(best_fitness)
        mean_series.append(pop.mean_fitness)

    repaired = repair(best)
    final_fitness = individual_fitness(repaired, g, cfg, cache)
    logger.debug(
        "ga_run_done",
        hour=hours[0] if hours else None,
        seed=cfg.seed,
        n_sell=n_sell,
        n_buy=n_buy,
        best_fitness=best_fitness,
        final_fitness=final_fitness,
    )
    return RunTrace(
        tuple(best_series),
        tuple(mean_series),
        repaired,
        best_fitness,
        final_fitness,
        cfg.iterations,
        cfg.seed,
        n_sell,
        n_buy,
    )


def _partitions(items: Sequence[Order], k: int) -> Iterator[List[List[Order]]]:
    """Unordered partitions of ``items`` into exactly ``k`` non-empty blocks"""
    if k == 0:
        if not items:
            yield []
        return
    if len(items) < k:
        return
    first, rest = items[0], items[1:]
    for smaller in _partitions(rest, k - 1):
        yield [[first]] + smaller
    for partition in _partitions(rest, k):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1 :]


def brute_force_optimum(session: Session, cfg: GaConfig, n_sell: int, n_buy: int) -> Tuple[float, Individual]:
    """Exhaustive optimum over side partitions into the given coalition counts"""
    offers, bids = session.offers, session.bids
    if max(len(offers), len(bids)) > 10:
        raise ValueError("brute force is limited to 10 orders per side")

    cache: ScoreCache = {}
    best: Optional[Tuple[float, Individual]] = None
    sells = [tuple(Coalition(Side.SELLER, tuple(b)) for b in p) for p in _partitions(list(offers), n_sell)]
    buys = [tuple(Coalition(Side.BUYER, tuple(b)) for b in p) for p in _partitions(list(bids), n_buy)]
    for sell, buy in product(sells, buys):
        ind = Individual(sell, buy, session.orders)
        fitness = individual_fitness(ind, session.graph, cfg, cache)
        if best is None or fitness > best[0]:
            best = (fitness, ind)
    if best is None:
        raise ValueError("no partition with the requested coalition counts")
    return best
