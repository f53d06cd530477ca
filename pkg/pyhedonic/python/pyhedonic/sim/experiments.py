"""Session runs and the replicated parameter studies

Every study builds one job per (arm, replication). Replication ``r`` uses
scenario seed ``spec.seed + r`` and GA seed ``cfg.seed + r`` in every arm, so
arms are paired on identical scenarios. Jobs may run in worker processes; the
result table is always sorted by (arm, replication).
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from statistics import pstdev
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from pyhedonic.core.context import HedonicMatcher
from pyhedonic.core.engine import Engine, SessionResult
from pyhedonic.core.model import GaConfig, Scenario, WeightScheme, kwh_to_wh, wh_to_kwh
from pyhedonic.core.scoring import relation_counts
from pyhedonic.data.ledger import Ledger
from pyhedonic.data.scenario import serialize_scenario
from pyhedonic.sim.baseline import run_baseline
from pyhedonic.sim.generator import (
    ENEMY_DOMINANT,
    FRIENDSHIP_DOMINANT,
    NEUTRAL_DOMINANT,
    ScenarioSpec,
    generate_scenario,
)

logger = structlog.get_logger(__name__)

DIRECTION_SHARE = 0.8
MIX_NAMES = {
    FRIENDSHIP_DOMINANT: "friendship",
    NEUTRAL_DOMINANT: "neutral",
    ENEMY_DOMINANT: "enemy",
}


def run_session(
    scenario: Scenario,
    cfg: GaConfig,
    hours: Optional[Iterable[int]] = None,
    ledger: Optional[Ledger] = None,
    delivery_noise: float = 0.0,
) -> SessionResult:
    return Engine(scenario, HedonicMatcher(cfg), ledger, delivery_noise).run(hours)


def accounting_ok(result: SessionResult) -> bool:
    """Supply and demand both split exactly into matched and residual energy"""
    for h in result.hours:
        r = h.report
        matched = sum(tx.quantity_wh for tx in r.transactions)
        if matched != r.total_matched_wh:
            return False
        if r.total_supply_wh != matched + r.residual_supply_wh or r.total_demand_wh != matched + r.residual_demand_wh:
            return False
        if r.imbalance_wh != abs(r.residual_supply_wh - r.residual_demand_wh):
            return False
    return True


def session_row(result: SessionResult) -> Dict[str, object]:
    """One-line summary of a whole session"""
    prices = [p for h in result.hours for p in h.report.unit_prices]
    hours = result.hours
    return {
        "energy_kwh": wh_to_kwh(result.total_energy_wh),
        "transactions": sum(len(h.report.transactions) for h in hours),
        "mean_price": float(np.mean(prices)) if prices else float("nan"),
        "price_std": pstdev(prices) if prices else float("nan"),
        "social_index": sum(h.metrics.social_index for h in hours),
        "sell_coalitions": float(np.mean([len(h.plan.sell) for h in hours])) if hours else 0.0,
        "buy_coalitions": float(np.mean([len(h.plan.buy) for h in hours])) if hours else 0.0,
        "imbalance_kwh": wh_to_kwh(sum(h.report.imbalance_wh for h in hours)),
        "supply_kwh": wh_to_kwh(sum(h.report.total_supply_wh for h in hours)),
        "demand_kwh": wh_to_kwh(sum(h.report.total_demand_wh for h in hours)),
        "accounting_ok": accounting_ok(result),
    }


def coalition_audit(result: SessionResult) -> pd.DataFrame:
    """Friendship / neutral / enemy pair counts of every final coalition"""
    graph = result.scenario.graph
    rows = []
    for h in result.hours:
        for c in h.plan.coalitions():
            friends, neutral, enemies = relation_counts(c, graph)
            rows.append(
                {
                    "hour": h.hour,
                    "side": c.side.value,
                    "members": " ".join(str(p) for p in c.owners()),
                    "friendship": friends,
                    "neutral": neutral,
                    "enemy": enemies,
                }
            )
    return pd.DataFrame(rows, columns=["hour", "side", "members", "friendship", "neutral", "enemy"])


def social_index_series(result: SessionResult) -> pd.DataFrame:
    return pd.DataFrame(
        [{"hour": h.hour, "social_index": h.metrics.social_index} for h in result.hours],
        columns=["hour", "social_index"],
    )


@dataclass(frozen=True)
class _Job:
    arm: str
    arm_index: int
    replication: int
    spec: ScenarioSpec
    cfg: GaConfig
    matcher: str = "hedonic"
    hours: Optional[Tuple[int, ...]] = None


def _run_job(job: _Job) -> Dict[str, object]:
    scenario = generate_scenario(job.spec)
    if job.matcher == "baseline":
        result = run_baseline(scenario, job.hours)
    else:
        result = run_session(scenario, job.cfg, job.hours)
    return {
        "arm": job.arm,
        "arm_index": job.arm_index,
        "replication": job.replication,
        "seed": job.spec.seed,
        "scenario_sha256": hashlib.sha256(serialize_scenario(scenario).encode("utf-8")).hexdigest(),
        **session_row(result),
    }


def _run_jobs(jobs: Sequence[_Job], workers: int = 1) -> pd.DataFrame:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(job) for job in jobs]
    table = pd.DataFrame(rows)
    return table.sort_values(["arm_index", "replication"], kind="stable").reset_index(drop=True)


def _replicated(spec: ScenarioSpec, cfg: GaConfig, replication: int) -> Tuple[ScenarioSpec, GaConfig]:
    return replace(spec, seed=spec.seed + replication), replace(cfg, seed=cfg.seed + replication)


def _check_replications(replications: int):
    if replications < 1:
        raise ValueError("replications must be >= 1")


def mix_name(mix: Sequence[float]) -> str:
    mix = tuple(mix)
    return MIX_NAMES.get(mix, "/".join(f"{p:g}" for p in mix))


def experiment_gamma_sweep(
    spec: ScenarioSpec,
    gammas_kwh: Sequence[float],
    cfg: GaConfig = GaConfig(),
    replications: int = 30,
    hours: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Coalition threshold sweep: coalition counts, energy and price dispersion per Γ"""
    if not gammas_kwh:
        raise ValueError("at least one gamma is required")
    _check_replications(replications)
    jobs = []
    for i, gamma in enumerate(gammas_kwh):
        for r in range(replications):
            s, c = _replicated(spec, replace(cfg, gamma_wh=kwh_to_wh(gamma)), r)
            jobs.append(_Job(f"{gamma:g}kWh", i, r, s, c, hours=tuple(hours) if hours else None))
    table = _run_jobs(jobs, workers)
    table.insert(1, "gamma_kwh", [float(gammas_kwh[i]) for i in table["arm_index"]])
    logger.info("gamma_sweep_done", gammas=list(gammas_kwh), replications=replications)
    return table


def experiment_relation_sweep(
    spec: ScenarioSpec,
    mixes: Sequence[Tuple[float, float, float]],
    cfg: GaConfig = GaConfig(),
    replications: int = 30,
    hours: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Relation-distribution sweep on paired scenarios (same orders, coupled relations)"""
    if not mixes:
        raise ValueError("at least one relation mix is required")
    _check_replications(replications)
    jobs = []
    for i, mix in enumerate(mixes):
        for r in range(replications):
            s, c = _replicated(replace(spec, relation_mix=tuple(mix)), cfg, r)
            jobs.append(_Job(mix_name(mix), i, r, s, c, hours=tuple(hours) if hours else None))
    table = _run_jobs(jobs, workers)
    logger.info("relation_sweep_done", mixes=[mix_name(m) for m in mixes], replications=replications)
    return table


def experiment_weight_promotion(
    spec: ScenarioSpec,
    cfg: GaConfig = GaConfig(),
    replications: int = 30,
    hours: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Uniform against relation-promoted weights on identical scenarios"""
    _check_replications(replications)
    jobs = []
    for i, scheme in enumerate((WeightScheme.UNIFORM, WeightScheme.RELATION_PROMOTED)):
        for r in range(replications):
            s, c = _replicated(spec, replace(cfg, weight_scheme=scheme), r)
            jobs.append(_Job(scheme.value, i, r, s, c, hours=tuple(hours) if hours else None))
    return _run_jobs(jobs, workers)


def experiment_baseline_comparison(
    spec: ScenarioSpec,
    cfg: GaConfig = GaConfig(),
    replications: int = 30,
    hours: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Hedonic coalitions against the greedy double auction, per seed"""
    _check_replications(replications)
    jobs = []
    for i, matcher in enumerate(("hedonic", "baseline")):
        for r in range(replications):
            s, c = _replicated(spec, cfg, r)
            jobs.append(_Job(matcher, i, r, s, c, matcher=matcher, hours=tuple(hours) if hours else None))
    return _run_jobs(jobs, workers)


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Seed means per arm"""
    numeric = [c for c in table.columns if c not in ("arm", "arm_index", "replication", "seed", "scenario_sha256")]
    return table.groupby(["arm_index", "arm"], sort=True)[numeric].mean().reset_index().drop(columns="arm_index")


def paired_comparison(
    table: pd.DataFrame,
    better: str,
    worse: str,
    metric: str = "energy_kwh",
    share: float = DIRECTION_SHARE,
) -> Dict[str, float]:
    """How often and by how much arm ``better`` beats arm ``worse`` on paired seeds"""
    a = table[table["arm"] == better].set_index("replication")[metric]
    b = table[table["arm"] == worse].set_index("replication")[metric]
    a, b = a.align(b, join="inner")
    if a.empty:
        raise ValueError(f"no paired replications for {better!r} and {worse!r}")
    wins = float((a > b).mean())
    base = float(b.mean())
    uplift = (float(a.mean()) - base) / base * 100.0 if base else float("nan")
    return {
        "pairs": int(len(a)),
        "win_share": wins,
        "mean_better": float(a.mean()),
        "mean_worse": base,
        "mean_uplift_pct": uplift,
        "direction_ok": wins >= share,
    }


def relation_report(table: pd.DataFrame) -> pd.DataFrame:
    """Friendship against neutral and enemy mixes, with the expected magnitudes"""
    rows = []
    for better, worse, lo, hi in (("friendship", "neutral", 5.0, 20.0), ("friendship", "enemy", None, None)):
        cmp = paired_comparison(table, better, worse)
        if lo is not None:
            cmp["outside_expected_range"] = not lo <= cmp["mean_uplift_pct"] <= hi
        else:
            cmp["reduction_pct"] = (cmp["mean_better"] - cmp["mean_worse"]) / cmp["mean_better"] * 100.0
        rows.append({"better": better, "worse": worse, **cmp})
    return pd.DataFrame(rows)


def gamma_report(table: pd.DataFrame) -> Dict[str, object]:
    """Direction of the energy gain along Γ arms ordered by coalition count"""
    means = summarize(table).sort_values("sell_coalitions").reset_index(drop=True)
    arms = list(means["arm"])
    gains = []
    for few, more in zip(arms, arms[1:]):
        gains.append(paired_comparison(table, more, few))
    report: Dict[str, object] = {"arms_by_coalitions": arms, "steps": gains}
    if gains:
        report["first_step_ok"] = gains[0]["direction_ok"]
    if len(gains) >= 2:
        first = gains[0]["mean_better"] - gains[0]["mean_worse"]
        second = gains[1]["mean_better"] - gains[1]["mean_worse"]
        report["diminishing_gain"] = second < first
    return report


def weight_report(table: pd.DataFrame) -> Dict[str, float]:
    """Energy and mean-price change of promoted weights against uniform"""
    energy = paired_comparison(table, WeightScheme.RELATION_PROMOTED.value, WeightScheme.UNIFORM.value)
    price = paired_comparison(table, WeightScheme.RELATION_PROMOTED.value, WeightScheme.UNIFORM.value, "mean_price")
    paired = table.pivot(index="replication", columns="arm", values="scenario_sha256")
    return {
        "energy_delta_pct": energy["mean_uplift_pct"],
        "price_delta_pct": price["mean_uplift_pct"],
        "scenarios_identical": bool((paired.nunique(axis=1) == 1).all()),
    }


def baseline_report(table: pd.DataFrame) -> Dict[str, object]:
    cmp = paired_comparison(table, "hedonic", "baseline")
    cmp["hedonic_not_worse"] = cmp["mean_better"] >= cmp["mean_worse"]
    return cmp
