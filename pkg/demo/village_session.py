#!/usr/bin/env python3
"""Demo: one market session on the 14-prosumer village, hour by hour"""

import sys
from pathlib import Path

# Add pyhedonic to path
sys.path.insert(0, str(Path(__file__).parent.parent / "pyhedonic" / "python"))

import pandas as pd

from pyhedonic import GaConfig, Ledger, generate_scenario, run_baseline, run_session, verify_chain, village_spec
from pyhedonic.core.matching import trading_surplus
from pyhedonic.log import configure_logging
from pyhedonic.sim.experiments import coalition_audit


class VillageSessionDemo:
    """Runs the hedonic market and the greedy baseline on the same scenario"""

    def __init__(self, seed: int = 7, hours=(10, 11, 12)):
        self.hours = hours
        self.scenario = generate_scenario(village_spec(seed=seed, hours=hours))
        self.cfg = GaConfig(gamma_wh=6000, seed=seed)
        self.ledger = Ledger.in_memory()

        print(f"🎯 Scenario {self.scenario.name} seed {seed}: {len(self.scenario.orders)} orders")

    def demonstrate_session(self):
        print("\n📊 === Hedonic session ===")
        result = run_session(self.scenario, self.cfg, self.hours, self.ledger)
        with pd.option_context("display.max_columns", None, "display.width", 160):
            print(result.metrics_frame().to_string(index=False))

            print("\n🤝 Coalition relation audit")
            print(coalition_audit(result).to_string(index=False))

            hour = result.hours[0]
            print(f"\n💰 Trading surplus at hour {hour.hour}")
            print(trading_surplus(hour.report).to_string(index=False))
        return result

    def demonstrate_baseline(self, hedonic):
        print("\n📊 === Greedy baseline ===")
        baseline = run_baseline(self.scenario, self.hours)
        print(f"⚡ Hedonic energy:  {hedonic.total_energy_wh / 1000:.3f} kWh")
        print(f"⚡ Baseline energy: {baseline.total_energy_wh / 1000:.3f} kWh")

    def demonstrate_ledger(self):
        print("\n🔗 === Ledger ===")
        report = verify_chain(self.ledger)
        print(f"{'✅' if report.ok else '❌'} {report.n_blocks} blocks, head {self.ledger.head[:16]}…")


def main():
    configure_logging("warn")
    demo = VillageSessionDemo()
    result = demo.demonstrate_session()
    demo.demonstrate_baseline(result)
    demo.demonstrate_ledger()


if __name__ == "__main__":
    main()
