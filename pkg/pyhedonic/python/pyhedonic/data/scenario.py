"""Line-oriented scenario files

One directive per line, blank lines and ``#`` comments ignored::

    scenario village14
    seed 7
    default_relation neutral
    prosumer seller:4 min=1.000 max=4.000
    relation buyer:1 seller:4 friendship
    order seller:4 hour=10 kwh=2.500 price=7 delta=1

``serialize_scenario`` writes the canonical form (prosumers, relations and
orders sorted); parsing canonical text and serializing again is byte-stable.
"""

from pathlib import Path
from typing import Dict, List, Tuple, Union

from pyhedonic.core.model import (
    Order,
    Pair,
    Prosumer,
    ProsumerId,
    Relation,
    RelationGraph,
    Scenario,
    format_kwh,
    kwh_to_wh,
)
from pyhedonic.errors import ScenarioFormatError


def _fields(tokens: List[str], expected: Tuple[str, ...]) -> Dict[str, str]:
    fields = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or key not in expected or key in fields:
            raise ValueError(f"unexpected field {token!r}")
        fields[key] = value
    missing = [k for k in expected if k not in fields]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")
    return fields


def parse_scenario(text: str) -> Scenario:
    name, seed = "scenario", 0
    default = Relation.NEUTRAL
    prosumers: List[Prosumer] = []
    edges: Dict[Pair, Relation] = {}
    orders: List[Order] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        directive, *rest = line.split()
        try:
            if directive == "scenario" and len(rest) == 1:
                name = rest[0]
            elif directive == "seed" and len(rest) == 1:
                seed = int(rest[0])
            elif directive == "default_relation" and len(rest) == 1:
                default = Relation.parse(rest[0])
            elif directive == "prosumer" and rest:
                f = _fields(rest[1:], ("min", "max"))
                prosumers.append(Prosumer(ProsumerId.parse(rest[0]), kwh_to_wh(f["min"]), kwh_to_wh(f["max"])))
            elif directive == "relation" and len(rest) == 3:
                a, b = ProsumerId.parse(rest[0]), ProsumerId.parse(rest[1])
                edges[(a, b)] = Relation.parse(rest[2])
            elif directive == "order" and rest:
                f = _fields(rest[1:], ("hour", "kwh", "price", "delta"))
                orders.append(
                    Order(
                        ProsumerId.parse(rest[0]),
                        int(f["hour"]),
                        kwh_to_wh(f["kwh"]),
                        int(f["price"]),
                        int(f["delta"]),
                    )
                )
            else:
                raise ValueError(f"unknown directive {line!r}")
        except ValueError as e:
            raise ScenarioFormatError(line_no, str(e)) from None

    graph = RelationGraph((p.id for p in prosumers), edges, default)
    return Scenario(name, seed, tuple(prosumers), graph, tuple(orders))


def serialize_scenario(scenario: Scenario) -> str:
    lines = [
        f"scenario {scenario.name}",
        f"seed {scenario.seed}",
        f"default_relation {scenario.graph.default.label}",
    ]
    for p in sorted(scenario.prosumers, key=lambda p: p.id.sort_key):
        lines.append(f"prosumer {p.id} min={format_kwh(p.min_wh)} max={format_kwh(p.max_wh)}")
    for a, b, rel in scenario.graph.explicit_pairs():
        lines.append(f"relation {a} {b} {rel.label}")
    for o in sorted(scenario.orders, key=lambda o: (o.hour, o.owner.sort_key)):
        lines.append(
            f"order {o.owner} hour={o.hour} kwh={format_kwh(o.quantity_wh)} price={o.limit_price} delta={o.delta_price}"
        )
    return "\n".join(lines) + "\n"


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_scenario(scenario), encoding="utf-8")
    return path
