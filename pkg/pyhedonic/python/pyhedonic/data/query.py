"""Read back run artifacts: metrics tables and persisted ledgers"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from pyhedonic.core.model import Coalition, Order, ProsumerId, Relation, RelationGraph, Side, kwh_to_wh
from pyhedonic.core.scoring import relation_counts, social_index
from pyhedonic.data.ledger import LedgerBlock, LedgerSource, PayloadKind, read_blocks, verify_chain
from pyhedonic.errors import StorageFailure


def graph_from_blocks(blocks: Sequence[LedgerBlock]) -> RelationGraph:
    opening = [b for b in blocks if b.kind is PayloadKind.SESSION_OPEN]
    if not opening:
        raise StorageFailure("ledger has no SessionOpen block")
    data = opening[0].data
    prosumers = [ProsumerId.parse(p) for p in data["prosumers"]]
    pairs = [(ProsumerId.parse(a), ProsumerId.parse(b), Relation.parse(r)) for a, b, r in data["relations"]]
    return RelationGraph.symmetric(prosumers, pairs, Relation.parse(data["default_relation"]))


def persisted_orders(blocks: Sequence[LedgerBlock]) -> Dict[int, Dict[ProsumerId, Order]]:
    by_hour: Dict[int, Dict[ProsumerId, Order]] = {}
    for block in blocks:
        if block.kind is not PayloadKind.ORDERS:
            continue
        data = block.data
        hour = data["hour"]
        by_hour[hour] = {}
        for o in data["orders"]:
            owner = ProsumerId.parse(o["owner"])
            by_hour[hour][owner] = Order(owner, hour, kwh_to_wh(o["kwh"]), o["price"], o["delta"])
    return by_hour


def persisted_coalitions(blocks: Sequence[LedgerBlock]) -> Dict[int, List[Coalition]]:
    """Coalitions per hour rebuilt from the Coalitions and Orders blocks"""
    orders = persisted_orders(blocks)
    by_hour: Dict[int, List[Coalition]] = {}
    for block in blocks:
        if block.kind is not PayloadKind.COALITIONS:
            continue
        data = block.data
        hour = data["hour"]
        try:
            by_hour[hour] = [
                Coalition(side, tuple(orders[hour][ProsumerId.parse(m)] for m in members))
                for side, key in ((Side.SELLER, "sell"), (Side.BUYER, "buy"))
                for members in data[key]
            ]
        except KeyError as e:
            raise StorageFailure(f"hour {hour} coalition member {e} has no persisted order") from None
    return by_hour


def recompute_social_index(source: LedgerSource) -> Dict[int, int]:
    """Social index per hour from the persisted coalitions and relation graph"""
    blocks = read_blocks(source)
    graph = graph_from_blocks(blocks)
    return {hour: social_index(cs, graph) for hour, cs in persisted_coalitions(blocks).items()}


def persisted_social_index(source: LedgerSource) -> Dict[int, int]:
    """Social index per hour exactly as the run recorded it"""
    return {
        b.data["hour"]: b.data["social_index"]
        for b in read_blocks(source)
        if b.kind is PayloadKind.COALITIONS
    }


class RunQuery:
    """Query metrics and ledgers written by RunStorage"""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        base = Path(out_dir) if out_dir else Path("data/runs")
        self.base_dir = base
        self.metrics_dir = base / "metrics"
        self.ledger_dir = base / "ledgers"
        self.experiment_dir = base / "experiments"

    def list_ledgers(self) -> List[Path]:
        if not self.ledger_dir.exists():
            return []
        return sorted(self.ledger_dir.glob("*.ledger"))

    def get_metrics(self, scenario: str, matcher: str = "hedonic", seeds: Optional[Sequence[int]] = None) -> pd.DataFrame:
        path = self.metrics_dir / f"{scenario}_{matcher}.csv"
        if not path.exists():
            return pd.DataFrame()
        df = pd.read_csv(path)
        if seeds is not None:
            df = df[df["seed"].isin(list(seeds))]
        return df.sort_values(["seed", "hour"]).reset_index(drop=True)

    def get_experiment(self, name: str) -> pd.DataFrame:
        path = self.experiment_dir / f"{name}.csv"
        if not path.exists():
            return pd.DataFrame()
        return pd.read_csv(path)

    def coalition_table(self, source: LedgerSource) -> pd.DataFrame:
        """Relation audit of every persisted coalition"""
        blocks = read_blocks(source)
        graph = graph_from_blocks(blocks)
        rows = []
        for hour, coalitions in sorted(persisted_coalitions(blocks).items()):
            for c in coalitions:
                friends, neutral, enemies = relation_counts(c, graph)
                rows.append(
                    {
                        "hour": hour,
                        "side": c.side.value,
                        "members": " ".join(str(p) for p in c.owners()),
                        "friendship": friends,
                        "neutral": neutral,
                        "enemy": enemies,
                    }
                )
        return pd.DataFrame(rows, columns=["hour", "side", "members", "friendship", "neutral", "enemy"])

    def audit(self, source: LedgerSource) -> Dict[str, object]:
        """Chain verification plus social-index recount for one ledger"""
        report = verify_chain(source)
        result: Dict[str, object] = {"ok": report.ok, "blocks": report.n_blocks, "first_bad": report.first_bad}
        if report.ok and report.n_blocks:
            recorded = persisted_social_index(source)
            recount = recompute_social_index(source)
            result["social_index_ok"] = recorded == recount
        return result
