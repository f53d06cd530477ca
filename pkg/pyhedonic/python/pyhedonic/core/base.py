from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

from pyhedonic.core.ga import RunTrace
from pyhedonic.core.matching import MatchReport, aggregate_coalition_order, match_coalitions
from pyhedonic.core.model import Coalition, Session


@dataclass(frozen=True)
class CoalitionPlan:
    """Coalitions a matcher formed for one hour"""

    sell: Tuple[Coalition, ...]
    buy: Tuple[Coalition, ...]
    trace: Optional[RunTrace] = None

    def coalitions(self) -> Tuple[Coalition, ...]:
        return self.sell + self.buy


class MatcherBase(ABC):
    """Turns one hour of orders into coalitions and matches them"""

    name = "matcher"

    @abstractmethod
    def form_coalitions(self, session: Session, hour: int) -> CoalitionPlan:
        raise NotImplementedError

    def match(self, session: Session, hour: int) -> Tuple[CoalitionPlan, MatchReport]:
        plan = self.form_coalitions(session, hour)
        sell = [aggregate_coalition_order(c, i) for i, c in enumerate(plan.sell)]
        buy = [aggregate_coalition_order(c, i) for i, c in enumerate(plan.buy)]
        return plan, match_coalitions(sell, buy, hour, session.graph)
