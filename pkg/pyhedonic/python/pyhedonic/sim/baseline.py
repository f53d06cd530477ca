"""Coalition-free greedy double auction used as a comparator"""

from typing import Iterable, Optional

from pyhedonic.core.base import CoalitionPlan, MatcherBase
from pyhedonic.core.engine import Engine, SessionResult
from pyhedonic.core.model import Coalition, Scenario, Session, Side
from pyhedonic.data.ledger import Ledger


class GreedyMatcher(MatcherBase):
    """Every order trades alone: bids high to low against offers low to high"""

    name = "baseline"

    def form_coalitions(self, session: Session, hour: int) -> CoalitionPlan:
        hourly = session.at(hour)
        offers = sorted(hourly.offers, key=lambda o: o.owner.sort_key)
        bids = sorted(hourly.bids, key=lambda o: o.owner.sort_key)
        return CoalitionPlan(
            tuple(Coalition(Side.SELLER, (o,)) for o in offers),
            tuple(Coalition(Side.BUYER, (o,)) for o in bids),
        )


def run_baseline(
    scenario: Scenario,
    hours: Optional[Iterable[int]] = None,
    ledger: Optional[Ledger] = None,
    delivery_noise: float = 0.0,
) -> SessionResult:
    return Engine(scenario, GreedyMatcher(), ledger, delivery_noise).run(hours)
