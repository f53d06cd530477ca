import pytest
import structlog

from pyhedonic.core.model import (
    Coalition,
    GaConfig,
    Order,
    Relation,
    RelationGraph,
    Scenario,
    Side,
    buyer,
    kwh_to_wh,
    seller,
    validate_session,
)


def offer(index, kwh, price, delta=0, hour=10):
    return Order(seller(index), hour, kwh_to_wh(kwh), price, delta)


def bid(index, kwh, price, delta=0, hour=10):
    return Order(buyer(index), hour, kwh_to_wh(kwh), price, delta)


@pytest.fixture(name="make_offer")
def make_offer_fixture():
    return offer


@pytest.fixture(name="make_bid")
def make_bid_fixture():
    return bid


@pytest.fixture(name="make_graph")
def make_graph_fixture():
    """Symmetric graph over the owners of ``orders``; ``pairs`` are (a, b, relation)"""

    def make(orders, pairs=(), default=Relation.NEUTRAL):
        owners = {o.owner for o in orders}
        return RelationGraph.symmetric(owners, [(a.owner, b.owner, rel) for a, b, rel in pairs], default)

    return make


@pytest.fixture(name="sellers")
def sellers_fixture():
    def make(*orders):
        return Coalition(Side.SELLER, tuple(orders))

    return make


@pytest.fixture(name="buyers")
def buyers_fixture():
    def make(*orders):
        return Coalition(Side.BUYER, tuple(orders))

    return make


@pytest.fixture(name="planted")
def planted_fixture():
    """4 sellers and 4 buyers; friends inside {1,2} and {3,4} of each side,
    enemies across. Orders 1 and 3 exceed a 5 kWh threshold."""
    offers = [offer(1, 8, 10, 1), offer(2, 2, 10, 1), offer(3, 8, 10, 1), offer(4, 2, 10, 1)]
    bids = [bid(1, 8, 10, 1), bid(2, 2, 10, 1), bid(3, 8, 10, 1), bid(4, 2, 10, 1)]
    pairs = []
    for side in (offers, bids):
        a, b, c, d = side
        pairs += [(a, b, Relation.FRIENDSHIP), (c, d, Relation.FRIENDSHIP)]
        pairs += [(x, y, Relation.ENEMY) for x in (a, b) for y in (c, d)]
    orders = offers + bids
    graph = RelationGraph.symmetric({o.owner for o in orders}, [(a.owner, b.owner, r) for a, b, r in pairs])
    return validate_session(orders, graph)


@pytest.fixture(name="small_cfg")
def small_cfg_fixture():
    return GaConfig(gamma_wh=kwh_to_wh(5), pop_size=10, iterations=20, seed=3)


@pytest.fixture(name="two_prosumer_scenario")
def two_prosumer_scenario_fixture():
    def make(offer_price, bid_price, offer_kwh=10, bid_kwh=6):
        orders = (offer(1, offer_kwh, offer_price), bid(1, bid_kwh, bid_price))
        graph = RelationGraph([seller(1), buyer(1)])
        return Scenario("pair", 0, (), graph, orders)

    return make


@pytest.fixture(autouse=True)
def reset_logging():
    # the CLI binds loggers to the current stderr, which capsys replaces per test
    yield
    structlog.reset_defaults()
