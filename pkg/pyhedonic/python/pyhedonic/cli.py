"""Command-line entry point: ``coalitionflow <subcommand> [flags]``"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from pyhedonic.config import DEFAULT_CONFIG_PATH, SimConfig, load_config, with_overrides
from pyhedonic.core.model import Scenario, WeightScheme, kwh_to_wh
from pyhedonic.data.ledger import Ledger, verify_chain
from pyhedonic.data.query import RunQuery
from pyhedonic.data.scenario import load_scenario, save_scenario
from pyhedonic.data.storage import RunStorage
from pyhedonic.errors import ConfigError, HedonicError
from pyhedonic.log import configure_logging
from pyhedonic.sim import experiments as ex
from pyhedonic.sim.baseline import run_baseline
from pyhedonic.sim.generator import generate_scenario


def _hours(text: str) -> Tuple[int, ...]:
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(x) for x in text.split("-"))
            return tuple(range(lo, hi + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid hours {text!r}, expected e.g. 10,11,12 or 10-12") from None


def _floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _mix(text: str) -> Tuple[float, float, float]:
    values = _floats(text.replace("/", ","))
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"relation mix {text!r} needs three probabilities")
    return values


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("-l", "--level", default=None, help="log level (debug, info, warn, error)")
    p.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="configuration file path")
    p.add_argument("--out", default=None, help="output directory (default from config)")
    p.add_argument("--seed", type=int, default=None, help="scenario and GA seed")
    p.add_argument("--hours", type=_hours, default=None, help="hours to simulate, e.g. 10,11,12 or 0-23")
    p.add_argument("--json-logs", action="store_true", help="render logs as JSON")


def _add_ga(p: argparse.ArgumentParser):
    p.add_argument("--gamma", type=float, default=None, help="coalition threshold in kWh")
    p.add_argument("--pop-size", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--m", type=float, default=None, help="distance control parameter (>= 1)")
    p.add_argument("--weights", choices=[s.value for s in WeightScheme], default=None)


def _add_experiment(p: argparse.ArgumentParser):
    _add_ga(p)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--plot", action="store_true", help="write PNG plots next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coalitionflow", description="Hedonic coalition P2P energy market simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated scenario file")
    _add_common(p)
    p.add_argument("-o", "--output", default=None, help="scenario file to write")

    for name, help_text in (("run", "run the hedonic market session"), ("baseline", "run the greedy double auction")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "run":
            _add_ga(p)
        p.add_argument("--scenario", default=None, help="scenario file (generated from config when omitted)")
        p.add_argument("--delivery-noise", type=float, default=None, help="max fractional under-delivery per seller")
        p.add_argument("--plot", action="store_true", help="write hourly energy and social index plots")

    p = sub.add_parser("sweep-gamma", help="coalition threshold study")
    _add_common(p)
    _add_experiment(p)
    p.add_argument("--gammas", type=_floats, default=None, help="comma-separated Γ values in kWh")

    p = sub.add_parser("sweep-relations", help="relation distribution study")
    _add_common(p)
    _add_experiment(p)
    p.add_argument("--mix", type=_mix, action="append", default=None, help="friend/neutral/enemy, repeatable")

    p = sub.add_parser("sweep-weights", help="uniform against relation-promoted weights")
    _add_common(p)
    _add_experiment(p)

    p = sub.add_parser("compare-baseline", help="hedonic coalitions against the greedy baseline")
    _add_common(p)
    _add_experiment(p)

    p = sub.add_parser("verify-ledger", help="verify a ledger's hash chain")
    p.add_argument("ledger", help="ledger file")
    p.add_argument("-l", "--level", default="warn")
    p.add_argument("--json-logs", action="store_true")
    return parser


def _config(args) -> SimConfig:
    cfg = load_config(args.config)
    weights = getattr(args, "weights", None)
    gamma = getattr(args, "gamma", None)
    cfg = with_overrides(
        cfg,
        gamma_wh=kwh_to_wh(gamma) if gamma is not None else None,
        pop_size=getattr(args, "pop_size", None),
        iterations=getattr(args, "iterations", None),
        m=getattr(args, "m", None),
        weight_scheme=WeightScheme(weights) if weights else None,
        seed=args.seed,
    )
    changes: Dict[str, object] = {}
    if args.out:
        changes["out_dir"] = args.out
    if getattr(args, "delivery_noise", None) is not None:
        changes["delivery_noise"] = args.delivery_noise
    if args.hours is not None:
        changes["hours"] = args.hours
    experiment_changes = {
        k: v
        for k, v in (
            ("replications", getattr(args, "replications", None)),
            ("workers", getattr(args, "workers", None)),
            ("hours", args.hours),
        )
        if v is not None
    }
    if experiment_changes:
        changes["experiments"] = replace(cfg.experiments, **experiment_changes)
    try:
        return replace(cfg, **changes) if changes else cfg
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _scenario(args, cfg: SimConfig) -> Scenario:
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return generate_scenario(cfg.scenario_spec(cfg.ga.seed))


def _print_table(table: pd.DataFrame):
    with pd.option_context("display.max_columns", None, "display.width", 160):
        print(table.to_string(index=False))


def cmd_generate(args, cfg: SimConfig) -> int:
    scenario = generate_scenario(cfg.scenario_spec(cfg.ga.seed))
    path = Path(args.output) if args.output else Path(cfg.out_dir) / "scenarios" / f"{scenario.name}_seed{scenario.seed}.txt"
    save_scenario(scenario, path)
    print(f"✅ Wrote {scenario.name} ({len(scenario.prosumers)} prosumers, {len(scenario.orders)} orders) to {path}")
    return 0


def _run_session(args, cfg: SimConfig, baseline: bool) -> int:
    scenario = _scenario(args, cfg)
    storage = RunStorage(cfg.out_dir)
    matcher = "baseline" if baseline else "hedonic"
    ledger_path = storage.ledger_path(scenario.name, matcher, cfg.ga.seed)
    if ledger_path.exists():
        ledger_path.unlink()

    print(f"🚀 {matcher} session {scenario.name} seed {cfg.ga.seed}")
    hours = args.hours
    with Ledger.open(ledger_path) as ledger:
        if baseline:
            result = run_baseline(scenario, hours, ledger, cfg.delivery_noise)
        else:
            result = ex.run_session(scenario, cfg.ga, hours, ledger, cfg.delivery_noise)
    metrics_path = storage.store_metrics(result, cfg.ga.seed)

    _print_table(result.metrics_frame())
    print(f"📊 Metrics: {metrics_path}")
    print(f"🔗 Ledger: {ledger_path} ({len(ledger)} blocks)")
    if args.plot:
        from pyhedonic import plotting

        stem = Path(cfg.out_dir) / "plots" / f"{scenario.name}_{matcher}_seed{cfg.ga.seed}"
        plotting.plot_hourly_energy(result.metrics_frame(), f"{stem}_energy.png")
        plotting.plot_social_index(ex.social_index_series(result), f"{stem}_social_index.png")
        print(f"🖼️ Plots written under {stem.parent}")
    storage.close()
    if not result.completed:
        print("🛑 Session stopped before all hours ran")
        return 1
    return 0


def cmd_run(args, cfg: SimConfig) -> int:
    return _run_session(args, cfg, baseline=False)


def cmd_baseline(args, cfg: SimConfig) -> int:
    return _run_session(args, cfg, baseline=True)


def _experiment(args, cfg: SimConfig, name: str, run: Callable[..., pd.DataFrame], report: Callable[[pd.DataFrame], object]) -> int:
    spec = cfg.scenario_spec(cfg.ga.seed)
    exp = cfg.experiments
    print(f"🧪 {name}: {exp.replications} replications, hours {list(exp.hours)}, {exp.workers} worker(s)")
    table = run(spec, cfg=cfg.ga, replications=exp.replications, hours=exp.hours, workers=exp.workers)
    storage = RunStorage(cfg.out_dir)
    path = storage.store_table(name, table)

    _print_table(ex.summarize(table))
    summary = report(table)
    if isinstance(summary, pd.DataFrame):
        _print_table(summary)
    else:
        for key, value in summary.items():
            print(f"  {key}: {value}")
    print(f"📊 Table: {path}")
    if args.plot:
        from pyhedonic import plotting

        png = path.with_suffix(".png")
        if name == "gamma_sweep":
            plotting.plot_gamma_sweep(table, png)
        else:
            plotting.plot_arms(table, png)
        if name == "weight_promotion":
            plotting.plot_arms(table, path.with_name(f"{name}_price.png"), "mean_price", "Mean price [Gwei]")
        print(f"🖼️ Plot: {png}")
    return 0


def cmd_sweep_gamma(args, cfg: SimConfig) -> int:
    gammas = args.gammas or cfg.experiments.gammas_kwh

    def run(spec, **kw):
        return ex.experiment_gamma_sweep(spec, gammas, **kw)

    return _experiment(args, cfg, "gamma_sweep", run, ex.gamma_report)


def cmd_sweep_relations(args, cfg: SimConfig) -> int:
    mixes: Sequence[Tuple[float, float, float]] = args.mix or cfg.experiments.mixes
    arms = {ex.mix_name(m) for m in mixes}

    def run(spec, **kw):
        return ex.experiment_relation_sweep(spec, mixes, **kw)

    def report(table):
        if {"friendship", "neutral", "enemy"} <= arms:
            return ex.relation_report(table)
        return ex.summarize(table)

    return _experiment(args, cfg, "relation_sweep", run, report)


def cmd_sweep_weights(args, cfg: SimConfig) -> int:
    return _experiment(args, cfg, "weight_promotion", ex.experiment_weight_promotion, ex.weight_report)


def cmd_compare_baseline(args, cfg: SimConfig) -> int:
    return _experiment(args, cfg, "baseline_comparison", ex.experiment_baseline_comparison, ex.baseline_report)


def cmd_verify_ledger(args) -> int:
    report = verify_chain(args.ledger)
    if not report.ok:
        print(f"❌ {args.ledger}: block {report.first_bad} failed ({report.reason})")
        return 1
    audit = RunQuery().audit(args.ledger)
    print(f"✅ {args.ledger}: {report.n_blocks} blocks verified")
    if audit.get("social_index_ok") is False:
        print("❌ persisted social index does not match the recount")
        return 1
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "baseline": cmd_baseline,
    "sweep-gamma": cmd_sweep_gamma,
    "sweep-relations": cmd_sweep_relations,
    "sweep-weights": cmd_sweep_weights,
    "compare-baseline": cmd_compare_baseline,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-ledger":
            configure_logging(args.level, json=args.json_logs)
            return cmd_verify_ledger(args)
        cfg = _config(args)
        configure_logging(args.level or cfg.log_level, json=args.json_logs)
        return COMMANDS[args.command](args, cfg)
    except HedonicError as e:
        print(f"❌ {type(e).__name__}: {e}")
        return 1
    except KeyboardInterrupt:
        print("\n⌨️ Keyboard interrupt received")
        return 130


if __name__ == "__main__":
    sys.exit(main())
