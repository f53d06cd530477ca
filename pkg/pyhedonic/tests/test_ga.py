from unittest.mock import MagicMock

import numpy as np
import pytest

from pyhedonic.core import ga
from pyhedonic.core.model import GaConfig, Individual, Relation, Side, kwh_to_wh, validate_session
from pyhedonic.core.scoring import individual_fitness
from pyhedonic.errors import EmptySide, PopulationTooSmall

F, N, E = Relation.FRIENDSHIP, Relation.NEUTRAL, Relation.ENEMY


def fixed_rng(value=0):
    """Stands in for the generator where a test pins the crossover point"""
    return MagicMock(integers=MagicMock(return_value=value))


def test_coalition_number_counts_orders_above_threshold(make_offer, make_bid):
    orders = [make_offer(1, 5, 5), make_offer(2, 12, 5), make_offer(3, 20, 5), make_bid(1, 3, 5), make_bid(2, 9, 5)]
    assert ga.compute_coalition_number(orders, kwh_to_wh(10)) == (2, 1)


def test_coalition_number_zero_threshold(make_offer, make_bid):
    orders = [make_offer(i, 1, 5) for i in range(4)] + [make_bid(1, 1, 5)]
    assert ga.compute_coalition_number(orders, 0) == (4, 1)


def test_coalition_number_falls_back_to_one(make_offer, make_bid):
    orders = [make_offer(1, 5, 5), make_offer(2, 6, 5), make_bid(1, 3, 5)]
    assert ga.compute_coalition_number(orders, kwh_to_wh(100)) == (1, 1)


def test_initial_population_round_robin(make_offer, make_bid, make_graph):
    offers = [make_offer(i, 20, 5) for i in (1, 2, 3)] + [make_offer(i, 1, 5) for i in (4, 5, 6)]
    bids = [make_bid(1, 20, 5)]
    session = validate_session(offers + bids, make_graph(offers + bids))
    pop = ga.generate_initial_population(session, GaConfig(pop_size=5), np.random.default_rng(0))
    assert len(pop) == 5
    for ind in pop.individuals:
        assert sorted(len(c) for c in ind.sell_coalitions) == [2, 2, 2]
        assert ind.is_well_formed
        assert pop.fitnesses[pop.individuals.index(ind)] == individual_fitness(ind, session.graph, GaConfig(pop_size=5))


def test_initial_population_shuffles(make_offer, make_bid, make_graph):
    offers = [make_offer(1, 20, 5)] + [make_offer(i, 1, 5) for i in range(2, 8)]
    bids = [make_bid(1, 20, 5), make_bid(2, 20, 5)] + [make_bid(i, 1, 5) for i in range(3, 9)]
    session = validate_session(offers + bids, make_graph(offers + bids))
    for seed in range(5):
        pop = ga.generate_initial_population(session, GaConfig(pop_size=5), np.random.default_rng(seed))
        assert len({ind.canonical_key for ind in pop.individuals}) >= 2


def test_initial_population_without_freedom(make_offer, make_bid, make_graph):
    orders = [make_offer(1, 20, 5), make_bid(1, 20, 5)]
    session = validate_session(orders, make_graph(orders))
    pop = ga.generate_initial_population(session, GaConfig(pop_size=4), np.random.default_rng(0))
    assert len({ind.canonical_key for ind in pop.individuals}) == 1


def test_initial_population_needs_both_sides(make_offer, make_graph):
    orders = [make_offer(1, 20, 5)]
    session = validate_session(orders, make_graph(orders))
    with pytest.raises(EmptySide):
        ga.generate_initial_population(session, GaConfig(), np.random.default_rng(0))


@pytest.fixture(name="three_individuals")
def three_individuals_fixture(make_offer, make_bid, sellers, buyers):
    o = [make_offer(i, 1, 5) for i in (1, 2, 3)]
    b = make_bid(1, 1, 5)
    return [
        Individual((sellers(o[0], o[1], o[2]),), (buyers(b),)),
        Individual((sellers(o[0]), sellers(o[1], o[2])), (buyers(b),)),
        Individual((sellers(o[0], o[1]), sellers(o[2])), (buyers(b),)),
    ]


def test_tournament_full_size_returns_best(three_individuals):
    pop = ga.Population.build(three_individuals, [-5.0, -1.0, -3.0])
    for seed in range(5):
        assert ga.tournament_select(pop, 3, np.random.default_rng(seed)) is three_individuals[1]


def test_tournament_picks_best_of_drawn(three_individuals):
    pop = ga.Population.build(three_individuals, [-5.0, -1.0, -3.0])
    rng = MagicMock(choice=MagicMock(return_value=np.array([0, 2])))
    assert ga.tournament_select(pop, 2, rng) is three_individuals[2]


def test_tournament_single_individual(three_individuals):
    pop = ga.Population.build(three_individuals[:1], [-2.0])
    assert ga.tournament_select(pop, 1, np.random.default_rng(0)) is three_individuals[0]


def test_tournament_ties_go_to_lowest_index(three_individuals):
    pop = ga.Population.build(three_individuals, [-1.0, -1.0, -1.0])
    assert ga.tournament_select(pop, 3, np.random.default_rng(0)) is three_individuals[0]


def test_tournament_rejects_oversized_k(three_individuals):
    pop = ga.Population.build(three_individuals, [-1.0, -2.0, -3.0])
    with pytest.raises(ValueError):
        ga.tournament_select(pop, 4, np.random.default_rng(0))


def test_crossover_without_enemy_dominated_members(planted):
    offers, bids = planted.offers, planted.bids
    s = [ga.Coalition(Side.SELLER, (offers[0], offers[1])), ga.Coalition(Side.SELLER, (offers[2], offers[3]))]
    b = [ga.Coalition(Side.BUYER, (bids[0], bids[1])), ga.Coalition(Side.BUYER, (bids[2], bids[3]))]
    parent = Individual(tuple(s), tuple(b), planted.orders)
    o1, o2 = ga.crossover(parent, parent, np.random.default_rng(0), planted.graph)
    assert o1 == parent and o2 == parent


def test_crossover_moves_enemy_dominated_member(make_offer, make_bid, make_graph, sellers, buyers):
    s1, s2, s3, s4 = (make_offer(i, 1, 5) for i in (1, 2, 3, 4))
    b1 = make_bid(1, 1, 5)
    orders = (s1, s2, s3, s4, b1)
    g = make_graph(orders, [(s1, s2, E), (s1, s3, E)])
    parent_a = Individual((sellers(s1, s2, s3), sellers(s4)), (buyers(b1),), orders)
    parent_b = Individual((sellers(s1, s4), sellers(s2, s3)), (buyers(b1),), orders)

    child_a, child_b = ga.crossover(parent_a, parent_b, fixed_rng(0), g)
    assert child_a.sell_coalitions[0].members == (s2, s3)
    assert child_b.sell_coalitions[0].members == (s1, s4, s1)
    assert child_a.duplication_counts() == (0, 1)
    assert child_b.duplication_counts() == (1, 0)
    assert child_a.buy_coalitions == parent_a.buy_coalitions


def test_crossover_identical_parents(planted):
    offers, bids = planted.offers, planted.bids
    # every coalition mixes enemies
    s = [ga.Coalition(Side.SELLER, (offers[0], offers[2])), ga.Coalition(Side.SELLER, (offers[1], offers[3]))]
    b = [ga.Coalition(Side.BUYER, (bids[0], bids[2], bids[3])), ga.Coalition(Side.BUYER, (bids[1],))]
    parent = Individual(tuple(s), tuple(b), planted.orders)
    for seed in range(4):
        o1, o2 = ga.crossover(parent, parent, np.random.default_rng(seed), planted.graph)
        assert o1 == o2


def test_mutate_all_friends_unchanged(make_offer, make_bid, make_graph, sellers, buyers):
    s = [make_offer(i, 1, 5) for i in range(1, 5)]
    b = make_bid(1, 1, 5)
    g = make_graph(s + [b], [(x, y, F) for i, x in enumerate(s) for y in s[i + 1 :]])
    ind = Individual((sellers(s[0], s[1]), sellers(s[2], s[3])), (buyers(b),), tuple(s) + (b,))
    assert ga.mutate(ind, g, np.random.default_rng(0)) == ind


def test_mutate_swaps_one_member_each_way(make_offer, make_bid, make_graph, sellers, buyers):
    s = [make_offer(i, 1, 5) for i in range(1, 5)]
    b = make_bid(1, 1, 5)
    g = make_graph(s + [b], [(s[0], s[1], E), (s[2], s[3], E)])
    ind = Individual((sellers(s[0], s[1]), sellers(s[2], s[3])), (buyers(b),), tuple(s) + (b,))
    for seed in range(6):
        mutated = ga.mutate(ind, g, np.random.default_rng(seed))
        first, second = mutated.sell_coalitions
        assert (len(first), len(second)) == (2, 2)
        assert len(first.member_set & {s[2], s[3]}) == 1
        assert len(second.member_set & {s[0], s[1]}) == 1
        assert mutated.is_well_formed
        assert mutated.buy_coalitions == ind.buy_coalitions


def test_mutate_single_coalition_side_unchanged(make_offer, make_bid, make_graph, sellers, buyers):
    s = [make_offer(i, 1, 5) for i in range(1, 3)]
    b = make_bid(1, 1, 5)
    g = make_graph(s + [b], [(s[0], s[1], E)])
    ind = Individual((sellers(s[0], s[1]),), (buyers(b),), tuple(s) + (b,))
    assert ga.mutate(ind, g, np.random.default_rng(0)) == ind


def test_jaccard(make_offer, sellers):
    o = {i: make_offer(i, 1, 5) for i in range(1, 5)}
    assert ga.jaccard(sellers(o[1], o[2]), sellers(o[2], o[1])) == 1.0
    assert ga.jaccard(sellers(o[1]), sellers(o[2])) == 0.0
    assert ga.jaccard(sellers(o[1], o[2], o[3]), sellers(o[2], o[3], o[4])) == 0.5


def test_individual_distance(make_offer, sellers):
    o = {i: make_offer(i, 1, 5) for i in range(1, 6)}
    i1 = Individual((sellers(o[1], o[2], o[3]), sellers(o[5])), ())
    i2 = Individual((sellers(o[5]), sellers(o[2], o[3], o[4])), ())
    disjoint = Individual((sellers(o[4]), sellers(o[1])), ())
    other = Individual((sellers(o[2]), sellers(o[3])), ())
    assert ga.individual_distance(i1, i1) == 0.0
    assert ga.individual_distance(i1, i2) == pytest.approx(0.25)
    assert ga.individual_distance(i2, i1) == pytest.approx(0.25)
    assert ga.individual_distance(disjoint, other) == 1.0


def test_distance_pads_unequal_coalition_counts(make_offer, sellers):
    o = {i: make_offer(i, 1, 5) for i in range(1, 4)}
    i1 = Individual((sellers(o[1], o[2], o[3]),), ())
    i2 = Individual((sellers(o[1], o[2], o[3]), sellers(o[1])), ())
    assert ga.individual_distance(i1, i2) == pytest.approx(0.5)


def test_diversity_contribution(three_individuals):
    a, b, c = three_individuals
    assert ga.diversity_contribution(a, [a, Individual(a.sell_coalitions, a.buy_coalitions), b]) == 0.0
    expected = min(ga.individual_distance(a, b), ga.individual_distance(a, c))
    assert ga.diversity_contribution(a, [a, b, c]) == expected
    with pytest.raises(PopulationTooSmall):
        ga.diversity_contribution(a, [a])


def test_update_rejects_weaker_offspring(three_individuals, sellers):
    pop = ga.Population.build(three_individuals, [-1.0, -2.0, -3.0])
    o = three_individuals[0].sell_coalitions[0].members
    offspring = Individual((sellers(o[0], o[2]), sellers(o[1])), three_individuals[0].buy_coalitions)
    assert ga.update_population(pop, offspring, -4.0) is pop


def test_update_rejects_duplicates(three_individuals):
    pop = ga.Population.build(three_individuals, [-1.0, -2.0, -3.0])
    clone = Individual(three_individuals[1].sell_coalitions[::-1], three_individuals[1].buy_coalitions)
    assert ga.update_population(pop, clone, 0.0) is pop


def test_update_replaces_with_fitter_distinct_offspring(three_individuals, sellers):
    pop = ga.Population.build(three_individuals, [-1.0, -2.0, -3.0])
    o = three_individuals[0].sell_coalitions[0].members
    offspring = Individual((sellers(o[0], o[2]), sellers(o[1])), three_individuals[0].buy_coalitions)
    updated = ga.update_population(pop, offspring, 0.0)
    assert len(updated) == 3
    assert offspring in updated.individuals
    assert updated.distances.shape == (3, 3)
    rebuilt = ga.Population.build(updated.individuals, updated.fitnesses)
    assert np.allclose(updated.distances, rebuilt.distances)


def test_repair_dedupes_and_reinserts(make_offer, make_bid, sellers, buyers):
    s = [make_offer(i, 1, 5) for i in range(1, 5)]
    b = make_bid(1, 1, 5)
    orders = tuple(s) + (b,)
    flawed = Individual((sellers(s[0], s[1], s[0]), sellers(s[1], s[2])), (buyers(b),), orders)
    repaired = ga.repair(flawed)
    assert repaired.is_well_formed
    assert repaired.sell_coalitions[0].members == (s[0], s[1])
    assert repaired.sell_coalitions[1].members == (s[2], s[3])


def test_run_is_deterministic(planted):
    cfg = GaConfig(gamma_wh=kwh_to_wh(5), pop_size=8, iterations=15, seed=11)
    first, second = ga.run(planted, cfg), ga.run(planted, cfg)
    assert first == second
    assert first.to_frame().equals(second.to_frame())


@pytest.mark.parametrize("seed", range(10))
def test_run_elitism_and_repair(planted, seed):
    trace = ga.run(planted, GaConfig(gamma_wh=kwh_to_wh(5), pop_size=6, iterations=25, seed=seed))
    assert len(trace.best_fitness) == 25
    assert all(b >= a for a, b in zip(trace.best_fitness, trace.best_fitness[1:]))
    assert trace.best.is_well_formed
    assert (trace.n_sell, trace.n_buy) == (2, 2)


def test_single_iteration_keeps_initial_best(planted):
    cfg = GaConfig(gamma_wh=kwh_to_wh(5), pop_size=6, iterations=1, seed=2)
    trace = ga.run(planted, cfg)
    initial = ga.generate_initial_population(planted, cfg, np.random.default_rng(np.random.SeedSequence(2)))
    assert len(trace.best_fitness) == 1
    assert trace.best_fitness[0] >= max(initial.fitnesses)


def test_run_rejects_multi_hour_session(make_offer, make_bid, make_graph):
    orders = [make_offer(1, 1, 5, hour=10), make_bid(1, 1, 5, hour=11)]
    with pytest.raises(ValueError):
        ga.run(validate_session(orders, make_graph(orders)), GaConfig())


def test_trace_export(planted, tmp_path):
    trace = ga.run(planted, GaConfig(gamma_wh=kwh_to_wh(5), pop_size=4, iterations=3))
    path = trace.export(tmp_path / "trace.csv")
    assert path.read_text().splitlines()[0] == "iteration,best_fitness,mean_fitness"
    assert len(path.read_text().splitlines()) == 4


def test_planted_partition_matches_brute_force(planted):
    cfg = GaConfig(gamma_wh=kwh_to_wh(5))
    optimum, best = ga.brute_force_optimum(planted, cfg, 2, 2)
    assert {frozenset(o.owner.index for o in c.members) for c in best.sell_coalitions} == {frozenset({1, 2}), frozenset({3, 4})}

    hits = 0
    for seed in range(10):
        trace = ga.run(planted, GaConfig(gamma_wh=kwh_to_wh(5), seed=seed))
        hits += trace.final_fitness >= optimum - 1e-9
    assert hits >= 8


def test_brute_force_limit(make_offer, make_bid, make_graph):
    orders = [make_offer(i, 1, 5) for i in range(11)] + [make_bid(1, 1, 5)]
    with pytest.raises(ValueError):
        ga.brute_force_optimum(validate_session(orders, make_graph(orders)), GaConfig(), 1, 1)


@pytest.mark.slow
def test_random_sessions_reach_brute_force_optimum(make_offer, make_bid, make_graph):
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(20):
        n_sell, n_buy = rng.integers(2, 6, size=2)
        offers = [make_offer(i, int(rng.integers(1, 12)), int(rng.integers(1, 20)), int(rng.integers(0, 3))) for i in range(n_sell)]
        bids = [make_bid(i, int(rng.integers(1, 12)), int(rng.integers(1, 20)), int(rng.integers(0, 3))) for i in range(n_buy)]
        orders = offers + bids
        relations = [F, N, E]
        pairs = [
            (a, b, relations[int(rng.integers(3))])
            for side in (offers, bids)
            for i, a in enumerate(side)
            for b in side[i + 1 :]
        ]
        session = validate_session(orders, make_graph(orders, pairs))
        cfg = GaConfig(gamma_wh=kwh_to_wh(6), seed=int(rng.integers(1_000)))
        k_sell, k_buy = ga.compute_coalition_number(session.orders, cfg.gamma_wh)
        if max(k_sell, k_buy) > 3:
            cfg = GaConfig(gamma_wh=kwh_to_wh(9), seed=cfg.seed)
            k_sell, k_buy = ga.compute_coalition_number(session.orders, cfg.gamma_wh)
        optimum, _ = ga.brute_force_optimum(session, cfg, k_sell, k_buy)
        hits += ga.run(session, cfg).final_fitness >= optimum - 1e-9
    assert hits >= 16
