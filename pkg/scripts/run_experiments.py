#!/usr/bin/env python3
"""Run every parameter study on the 48-prosumer community and write tables and plots"""

import sys
from pathlib import Path

# Add pyhedonic to path
sys.path.insert(0, str(Path(__file__).parent.parent / "pyhedonic" / "python"))

import argparse
import signal
from dataclasses import replace
from datetime import datetime

import pandas as pd

from pyhedonic import plotting
from pyhedonic.config import load_config
from pyhedonic.data.storage import RunStorage
from pyhedonic.errors import HedonicError
from pyhedonic.log import configure_logging
from pyhedonic.sim import experiments as ex

SUITES = ("gamma", "relations", "weights", "baseline")


def main():
    parser = argparse.ArgumentParser(description="Hedonic coalition experiment suites")
    parser.add_argument("--config", default="config/market_session.json", help="configuration file path")
    parser.add_argument("--suite", choices=SUITES, action="append", help="suite to run (default: all)")
    parser.add_argument("--replications", type=int, help="override replications per arm")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--test", action="store_true", help="quick mode: 2 replications, hour 10, small GA")

    args = parser.parse_args()

    print("🚀 Hedonic coalition experiments")
    print(f"📅 Started at: {datetime.now()}")
    print(f"📋 Config: {args.config}")

    def signal_handler(signum, frame):
        print(f"\n📡 Received signal {signum}, shutting down...")
        sys.exit(130)

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        cfg = load_config(args.config)
        configure_logging(cfg.log_level)
        # the studies run on the 48-prosumer community
        cfg = replace(cfg, profile_set="community", n_buyers=24, n_sellers=24)
        exp = cfg.experiments
        if args.test:
            print("🧪 Running in test mode")
            exp = replace(exp, replications=2, hours=(10,))
            cfg = replace(cfg, ga=replace(cfg.ga, pop_size=10, iterations=30))
        if args.replications:
            exp = replace(exp, replications=args.replications)
        if args.workers:
            exp = replace(exp, workers=args.workers)

        spec = cfg.scenario_spec(cfg.ga.seed)
        storage = RunStorage(cfg.out_dir)
        common = dict(cfg=cfg.ga, replications=exp.replications, hours=exp.hours, workers=exp.workers)

        for suite in args.suite or SUITES:
            print(f"\n🧪 {suite}: {exp.replications} replications, hours {list(exp.hours)}")
            if suite == "gamma":
                table = ex.experiment_gamma_sweep(spec, exp.gammas_kwh, **common)
                path = storage.store_table("gamma_sweep", table)
                plotting.plot_gamma_sweep(table, path.with_suffix(".png"))
                report = ex.gamma_report(table)
            elif suite == "relations":
                table = ex.experiment_relation_sweep(spec, exp.mixes, **common)
                path = storage.store_table("relation_sweep", table)
                plotting.plot_arms(table, path.with_suffix(".png"))
                report = ex.relation_report(table)
            elif suite == "weights":
                table = ex.experiment_weight_promotion(spec, **common)
                path = storage.store_table("weight_promotion", table)
                plotting.plot_arms(table, path.with_suffix(".png"))
                plotting.plot_arms(table, path.with_name("weight_promotion_price.png"), "mean_price", "Mean price [Gwei]")
                report = ex.weight_report(table)
            else:
                table = ex.experiment_baseline_comparison(spec, **common)
                path = storage.store_table("baseline_comparison", table)
                plotting.plot_arms(table, path.with_suffix(".png"))
                report = ex.baseline_report(table)

            print(ex.summarize(table).to_string(index=False))
            print_report(report)
            print(f"📊 Table: {path}")

        storage.close()

    except KeyboardInterrupt:
        print("\n⌨️ Keyboard interrupt received")
        sys.exit(130)
    except HedonicError as e:
        print(f"❌ {type(e).__name__}: {e}")
        sys.exit(1)


def print_report(report):
    if isinstance(report, pd.DataFrame):
        with pd.option_context("display.max_columns", None, "display.width", 160):
            print(report.to_string(index=False))
        return
    for key, value in report.items():
        if key == "steps":
            for step in value:
                print(f"  step: {step}")
        else:
            print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
