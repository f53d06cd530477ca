from dataclasses import replace
from itertools import combinations

import pandas as pd
import pytest

from pyhedonic.config import ExperimentConfig
from pyhedonic.core.model import GaConfig, Order, ProsumerId, Relation, RelationGraph, Scenario, Side, buyer, kwh_to_wh, seller
from pyhedonic.data.ledger import Ledger, PayloadKind, read_blocks, verify_chain
from pyhedonic.data.query import RunQuery, recompute_social_index
from pyhedonic.errors import InvalidSpec
from pyhedonic.sim.baseline import run_baseline
from pyhedonic.sim.experiments import (
    coalition_audit,
    baseline_report,
    experiment_baseline_comparison,
    experiment_gamma_sweep,
    experiment_relation_sweep,
    experiment_weight_promotion,
    gamma_report,
    paired_comparison,
    relation_report,
    run_session,
    social_index_series,
    summarize,
    weight_report,
)
from pyhedonic.sim.generator import (
    ENEMY_DOMINANT,
    FRIENDSHIP_DOMINANT,
    NEUTRAL_DOMINANT,
    community_spec,
    generate_scenario,
    village_spec,
)

HOURS = (10, 11, 12)


@pytest.fixture(name="village")
def village_fixture():
    return generate_scenario(village_spec(seed=5, hours=HOURS))


# generator


def test_village_has_fourteen_prosumers(village):
    sides = [p.id.side for p in village.prosumers]
    assert len(sides) == 14
    assert sides.count(Side.BUYER) == 4
    assert sides.count(Side.SELLER) == 10


def test_generated_orders_stay_in_profile_intervals():
    scenario = generate_scenario(village_spec(seed=9))
    buyer_2 = [o for o in scenario.orders if o.owner == buyer(2)]
    assert len(buyer_2) == 24
    assert all(1000 <= o.quantity_wh <= 4000 for o in buyer_2)
    assert all(1 <= o.limit_price <= 20 and 0 <= o.delta_price <= 2 for o in scenario.orders)


def test_friendship_only_mix():
    scenario = generate_scenario(village_spec(seed=1, relation_mix=(1.0, 0.0, 0.0), hours=(10,)))
    ids = sorted(scenario.graph.prosumers, key=lambda p: p.sort_key)
    assert all(scenario.graph.relation(a, b) is Relation.FRIENDSHIP for a, b in combinations(ids, 2))


def test_neutral_only_mix_declares_no_pairs():
    scenario = generate_scenario(village_spec(seed=1, relation_mix=(0.0, 1.0, 0.0), hours=(10,)))
    assert scenario.graph.explicit_pairs() == []


def test_generation_is_deterministic():
    spec = village_spec(seed=21, hours=HOURS)
    assert generate_scenario(spec) == generate_scenario(spec)
    assert generate_scenario(spec).orders != generate_scenario(replace(spec, seed=22)).orders


def test_relation_mix_does_not_change_orders():
    spec = village_spec(seed=4, hours=HOURS)
    friendly = generate_scenario(replace(spec, relation_mix=FRIENDSHIP_DOMINANT))
    hostile = generate_scenario(replace(spec, relation_mix=ENEMY_DOMINANT))
    assert friendly.orders == hostile.orders
    assert friendly.graph != hostile.graph


@pytest.mark.parametrize(
    "overrides",
    [
        {"relation_mix": (0.5, 0.5, 0.5)},
        {"relation_mix": (1.2, -0.1, -0.1)},
        {"price_range": (5, 1)},
        {"delta_range": (-1, 2)},
        {"hours": ()},
        {"hours": (3, 3)},
        {"hours": (24,)},
        {"seed": -1},
        {"profiles": ()},
    ],
)
def test_invalid_specs(overrides):
    with pytest.raises(InvalidSpec):
        replace(village_spec(), **overrides)


def test_community_spec():
    spec = community_spec(24, 24)
    assert spec.name == "community48"
    assert len(spec.buyers) == len(spec.sellers) == 24
    with pytest.raises(InvalidSpec):
        community_spec(0, 0)


# sessions


def test_no_compatible_prices(two_prosumer_scenario, small_cfg):
    result = run_session(two_prosumer_scenario(offer_price=9, bid_price=5), small_cfg)
    (hour,) = result.hours
    assert hour.report.transactions == ()
    assert hour.metrics.imbalance_wh == 4000
    assert hour.metrics.mean_price is None
    assert result.completed


def test_single_compatible_pair(two_prosumer_scenario, small_cfg):
    result = run_session(two_prosumer_scenario(offer_price=5, bid_price=9), small_cfg)
    (tx,) = result.hours[0].report.transactions
    assert (tx.quantity_wh, tx.unit_price) == (6000, 7)
    assert result.hours[0].metrics.tokens == 42
    assert result.total_energy_wh == 6000


def test_one_sided_hour_forms_singletons(small_cfg):
    orders = (
        Order(seller(1), 10, 3000, 5),
        Order(buyer(1), 10, 3000, 9),
        Order(seller(1), 11, 3000, 5),
        Order(seller(2), 11, 1000, 5),
    )
    scenario = Scenario("lopsided", 0, (), RelationGraph([seller(1), seller(2), buyer(1)]), orders)
    result = run_session(scenario, small_cfg)
    lone = result.hour(11)
    assert len(lone.plan.sell) == 2
    assert lone.plan.buy == ()
    assert lone.report.transactions == ()
    assert lone.plan.trace is None


def test_village_session_audit(village, small_cfg):
    result = run_session(village, small_cfg, hours=HOURS)
    assert [h.hour for h in result.hours] == list(HOURS)

    audit = coalition_audit(result)
    assert list(audit.columns) == ["hour", "side", "members", "friendship", "neutral", "enemy"]
    for row in audit.itertuples():
        ids = [ProsumerId.parse(p) for p in row.members.split()]
        recount = {Relation.FRIENDSHIP: 0, Relation.NEUTRAL: 0, Relation.ENEMY: 0}
        for a, b in combinations(ids, 2):
            recount[village.graph.relation(a, b)] += 1
        assert (row.friendship, row.neutral, row.enemy) == (
            recount[Relation.FRIENDSHIP],
            recount[Relation.NEUTRAL],
            recount[Relation.ENEMY],
        )

    series = social_index_series(result)
    by_hour = audit.assign(v=audit["friendship"] - audit["enemy"]).groupby("hour")["v"].sum()
    assert list(series["social_index"]) == [int(by_hour[h]) for h in HOURS]


def test_matched_energy_is_bounded(village, small_cfg):
    for result in (run_session(village, small_cfg, hours=HOURS), run_baseline(village, hours=HOURS)):
        for h in result.hours:
            r = h.report
            assert 0 <= r.total_matched_wh <= min(r.total_supply_wh, r.total_demand_wh)
            assert r.total_supply_wh == r.total_matched_wh + r.residual_supply_wh
            assert r.total_demand_wh == r.total_matched_wh + r.residual_demand_wh


def test_metrics_frame(village, small_cfg):
    frame = run_session(village, small_cfg, hours=(10,)).metrics_frame()
    assert len(frame) == 1
    assert frame.loc[0, "hour"] == 10
    assert frame.loc[0, "energy_kwh"] <= min(frame.loc[0, "supply_kwh"], frame.loc[0, "demand_kwh"])


# baseline


def test_baseline_matches_singleton_session(two_prosumer_scenario, small_cfg):
    scenario = two_prosumer_scenario(offer_price=4, bid_price=10)
    hedonic = run_session(scenario, small_cfg).hours[0]
    greedy = run_baseline(scenario).hours[0]
    assert greedy.report == hedonic.report
    assert greedy.metrics == hedonic.metrics


def test_baseline_incompatible_prices(two_prosumer_scenario):
    result = run_baseline(two_prosumer_scenario(offer_price=12, bid_price=3))
    assert result.matcher == "baseline"
    assert result.hours[0].report.transactions == ()


def test_baseline_bound_on_community():
    scenario = generate_scenario(community_spec(seed=3, hours=(10, 18)))
    for h in run_baseline(scenario).hours:
        r = h.report
        assert r.total_matched_wh <= min(r.total_supply_wh, r.total_demand_wh)
        assert all(len(c) == 1 for c in h.plan.coalitions())


# ledger


def test_ledger_records_every_step(village, small_cfg):
    ledger = Ledger.in_memory()
    result = run_session(village, small_cfg, hours=HOURS, ledger=ledger)
    kinds = [b.kind for b in read_blocks(ledger)]
    per_hour = [PayloadKind.ORDERS, PayloadKind.COALITIONS, PayloadKind.TRANSACTIONS, PayloadKind.SETTLEMENT]
    assert kinds == [PayloadKind.SESSION_OPEN] + per_hour * len(HOURS)
    assert verify_chain(ledger).ok

    expected = {h.hour: h.metrics.social_index for h in result.hours}
    assert recompute_social_index(ledger) == expected
    audit = RunQuery().audit(ledger)
    assert audit["ok"] and audit["social_index_ok"]


def test_ledger_bytes_are_deterministic(village, small_cfg):
    first, second = Ledger.in_memory(), Ledger.in_memory()
    run_session(village, small_cfg, hours=(10, 11), ledger=first)
    run_session(village, small_cfg, hours=(10, 11), ledger=second)
    assert first.getvalue() == second.getvalue()

    other = Ledger.in_memory()
    run_session(village, replace(small_cfg, seed=small_cfg.seed + 1), hours=(10, 11), ledger=other)
    assert read_blocks(other)[0].hash != read_blocks(first)[0].hash


def test_delivery_noise_flags_short_sellers(two_prosumer_scenario, small_cfg):
    scenario = two_prosumer_scenario(offer_price=5, bid_price=9)
    noisy = run_session(scenario, small_cfg, delivery_noise=1.0).hours[0]
    assert noisy.metrics.under_delivered == 1
    assert noisy.metrics.tokens <= 42
    again = run_session(scenario, small_cfg, delivery_noise=1.0).hours[0]
    assert again.settlements == noisy.settlements


def test_delivery_noise_out_of_range(two_prosumer_scenario, small_cfg):
    with pytest.raises(ValueError):
        run_session(two_prosumer_scenario(5, 9), small_cfg, delivery_noise=1.5)


# experiments

FAST = dict(replications=1, hours=(10,))


def test_single_gamma_gives_one_row(small_cfg):
    table = experiment_gamma_sweep(village_spec(seed=2), [5.0], small_cfg, **FAST)
    assert len(table) == 1
    assert table.loc[0, "gamma_kwh"] == 5.0
    assert table.loc[0, "arm"] == "5kWh"
    assert bool(table.loc[0, "accounting_ok"])


def test_gamma_sweep_needs_values(small_cfg):
    with pytest.raises(ValueError):
        experiment_gamma_sweep(village_spec(), [], small_cfg)


def test_friendship_only_mix_has_positive_social_index(small_cfg):
    cfg = replace(small_cfg, gamma_wh=kwh_to_wh(1000))
    table = experiment_relation_sweep(village_spec(seed=6), [(1.0, 0.0, 0.0)], cfg, **FAST)
    assert table.loc[0, "arm"] == "1/0/0"
    assert table.loc[0, "social_index"] > 0


def test_relation_sweep_arms_share_scenario_orders(small_cfg):
    mixes = [FRIENDSHIP_DOMINANT, NEUTRAL_DOMINANT, ENEMY_DOMINANT]
    table = experiment_relation_sweep(village_spec(seed=6), mixes, small_cfg, replications=2, hours=(10,))
    assert list(table["arm"]) == ["friendship", "friendship", "neutral", "neutral", "enemy", "enemy"]
    assert list(table["replication"]) == [0, 1] * 3
    assert table.groupby("replication")["supply_kwh"].nunique().eq(1).all()
    assert table["accounting_ok"].all()


def test_weight_promotion_arms_are_paired(small_cfg):
    table = experiment_weight_promotion(village_spec(seed=8), small_cfg, replications=2, hours=(10,))
    assert set(table["arm"]) == {"uniform", "promoted"}
    report = weight_report(table)
    assert report["scenarios_identical"]


def test_all_friend_community_promotion_equals_uniform(small_cfg):
    cfg = replace(small_cfg, gamma_wh=kwh_to_wh(1000))
    spec = village_spec(seed=8, relation_mix=(1.0, 0.0, 0.0))
    table = experiment_weight_promotion(spec, cfg, replications=2, hours=(10, 11))
    columns = ["energy_kwh", "transactions", "mean_price", "social_index", "sell_coalitions", "buy_coalitions"]
    uniform = table[table["arm"] == "uniform"].set_index("replication")[columns]
    promoted = table[table["arm"] == "promoted"].set_index("replication")[columns]
    pd.testing.assert_frame_equal(uniform, promoted)
    assert (uniform["social_index"] > 0).all()


def test_unbounded_gamma_gives_one_coalition_per_side(small_cfg):
    table = experiment_gamma_sweep(village_spec(seed=2), [1000.0], small_cfg, replications=2, hours=(10, 11))
    assert (table["sell_coalitions"] == 1).all()
    assert (table["buy_coalitions"] == 1).all()


def test_baseline_comparison_table(small_cfg):
    table = experiment_baseline_comparison(village_spec(seed=8), small_cfg, replications=2, hours=(10,))
    assert list(table["arm"]) == ["hedonic", "hedonic", "baseline", "baseline"]
    assert table["accounting_ok"].all()
    means = summarize(table)
    assert list(means["arm"]) == ["hedonic", "baseline"]


def test_parallel_workers_give_the_same_table(small_cfg):
    spec = village_spec(seed=12)
    serial = experiment_gamma_sweep(spec, [8.0, 2.0], small_cfg, replications=2, hours=(10,))
    parallel = experiment_gamma_sweep(spec, [8.0, 2.0], small_cfg, replications=2, hours=(10,), workers=2)
    pd.testing.assert_frame_equal(serial, parallel)


def _table(arms):
    rows = []
    for i, (arm, values, extra) in enumerate(arms):
        for r, v in enumerate(values):
            rows.append({"arm": arm, "arm_index": i, "replication": r, "seed": r, "scenario_sha256": "x", "energy_kwh": v, **extra})
    return pd.DataFrame(rows)


def test_paired_comparison():
    table = _table([("a", [2, 2, 2, 2, 0], {}), ("b", [1, 1, 1, 1, 1], {})])
    cmp = paired_comparison(table, "a", "b")
    assert cmp["pairs"] == 5
    assert cmp["win_share"] == pytest.approx(0.8)
    assert cmp["direction_ok"]
    assert cmp["mean_uplift_pct"] == pytest.approx(60.0)
    with pytest.raises(ValueError):
        paired_comparison(table, "a", "missing")


def test_gamma_report_orders_arms_by_coalitions():
    table = _table(
        [
            ("12kWh", [10.0] * 5, {"sell_coalitions": 4.0}),
            ("6kWh", [12.0] * 5, {"sell_coalitions": 13.0}),
            ("1.5kWh", [12.5] * 5, {"sell_coalitions": 23.0}),
        ]
    )
    report = gamma_report(table)
    assert report["arms_by_coalitions"] == ["12kWh", "6kWh", "1.5kWh"]
    assert report["first_step_ok"]
    assert report["diminishing_gain"]


def test_relation_report():
    table = _table([("friendship", [11.0] * 4, {}), ("neutral", [10.0] * 4, {}), ("enemy", [8.0] * 4, {})])
    report = relation_report(table).set_index("worse")
    assert report.loc["neutral", "mean_uplift_pct"] == pytest.approx(10.0)
    assert not report.loc["neutral", "outside_expected_range"]
    assert report.loc["enemy", "reduction_pct"] == pytest.approx(300 / 11)


def test_plot_arms_writes_png(tmp_path):
    from pyhedonic.plotting import plot_arms

    table = _table([("uniform", [3.0, 4.0, 5.0], {"mean_price": 9.0}), ("promoted", [4.0, 4.5, 6.0], {"mean_price": 8.0})])
    assert plot_arms(table, tmp_path / "arms.png").stat().st_size > 0
    assert plot_arms(table, tmp_path / "price.png", "mean_price", "Mean price [Gwei]").exists()


# replicated community runs

COMMUNITY_HOURS = (10, 11, 12)


@pytest.fixture(name="community", scope="module")
def community_fixture():
    return community_spec(seed=0)


@pytest.mark.slow
def test_friendship_trades_more_than_neutral_and_enemy(community):
    mixes = [FRIENDSHIP_DOMINANT, NEUTRAL_DOMINANT, ENEMY_DOMINANT]
    table = experiment_relation_sweep(community, mixes, GaConfig(), replications=30, hours=COMMUNITY_HOURS)
    assert table["accounting_ok"].all()
    report = relation_report(table).set_index("worse")
    assert report.loc["neutral", "pairs"] == 30
    assert report.loc["neutral", "direction_ok"]
    assert report.loc["enemy", "direction_ok"]
    assert report.loc["enemy", "reduction_pct"] > 0


@pytest.mark.slow
def test_finer_coalitions_trade_more_with_diminishing_gain(community):
    table = experiment_gamma_sweep(community, ExperimentConfig().gammas_kwh, GaConfig(), replications=30, hours=COMMUNITY_HOURS)
    assert table["accounting_ok"].all()
    report = gamma_report(table)
    assert report["arms_by_coalitions"] == ["15kWh", "10kWh", "6kWh"]
    assert report["first_step_ok"]
    assert report["diminishing_gain"]


@pytest.mark.slow
def test_single_coalition_per_side_trades_least(community):
    table = experiment_gamma_sweep(community, [1000.0, 15.0, 10.0, 6.0], GaConfig(), replications=10, hours=COMMUNITY_HOURS)
    coarsest = table[table["arm"] == "1000kWh"]
    # three hours, one coalition per side in each
    assert (coarsest["sell_coalitions"] == 1).all() and (coarsest["buy_coalitions"] == 1).all()
    means = summarize(table).set_index("arm")["energy_kwh"]
    assert means.idxmin() == "1000kWh"


@pytest.mark.slow
def test_hedonic_is_not_worse_than_baseline(community):
    table = experiment_baseline_comparison(community, GaConfig(), replications=30, hours=COMMUNITY_HOURS)
    assert table["accounting_ok"].all()
    report = baseline_report(table)
    assert report["pairs"] == 30
    assert report["hedonic_not_worse"]
