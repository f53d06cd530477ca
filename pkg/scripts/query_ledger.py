#!/usr/bin/env python3
"""Ledger and run artifact query utility"""

import sys
from pathlib import Path

# Add pyhedonic to path
sys.path.insert(0, str(Path(__file__).parent.parent / "pyhedonic" / "python"))

import argparse

import pandas as pd

from pyhedonic.data.ledger import ledger_frame, read_blocks
from pyhedonic.data.query import RunQuery
from pyhedonic.errors import HedonicError


def main():
    parser = argparse.ArgumentParser(description="Query simulation ledgers and metrics")
    parser.add_argument("--out", default="data/runs", help="run output directory")
    parser.add_argument("--ledger", help="ledger file (default: every ledger under --out)")
    parser.add_argument("--format", choices=["summary", "blocks", "coalitions", "csv"], default="summary", help="output format")
    parser.add_argument("--hour", type=int, help="only show this hour")
    parser.add_argument("--output", help="CSV output path for --format csv")

    args = parser.parse_args()

    query = RunQuery(args.out)
    ledgers = [Path(args.ledger)] if args.ledger else query.list_ledgers()
    if not ledgers:
        print(f"❌ No ledgers found under {query.ledger_dir}")
        return 1

    status = 0
    for path in ledgers:
        print(f"🔍 {path}")
        try:
            if args.format == "summary":
                status |= print_summary(query, path)
            elif args.format == "blocks":
                print_frame(ledger_frame(path), args.hour)
            elif args.format == "coalitions":
                print_frame(query.coalition_table(path), args.hour)
            elif args.format == "csv":
                output_csv(query.coalition_table(path), args.output or f"{path.stem}_coalitions.csv")
        except HedonicError as e:
            print(f"❌ {type(e).__name__}: {e}")
            status = 1
    return status


def print_summary(query: RunQuery, path: Path) -> int:
    """Chain status, block counts and per-hour social index"""
    audit = query.audit(path)
    if not audit["ok"]:
        print(f"❌ Chain broken at block {audit['first_bad']}")
        return 1
    print(f"✅ {audit['blocks']} blocks, social index recount {'matches' if audit.get('social_index_ok') else 'differs'}")

    blocks = read_blocks(path)
    opening = blocks[0].data
    print(f"📋 Scenario {opening.get('scenario')} seed {opening.get('seed')} matcher {opening.get('matcher')}")
    frame = ledger_frame(path)
    print(frame.groupby("kind", sort=False).size().to_string())

    table = query.coalition_table(path)
    if not table.empty:
        social = (table["friendship"] - table["enemy"]).groupby(table["hour"]).sum()
        print("\n🤝 Social index per hour")
        print(social.to_string())
    return 0


def print_frame(df: pd.DataFrame, hour=None):
    if hour is not None and "hour" in df.columns:
        df = df[df["hour"] == hour]
    with pd.option_context("display.max_columns", None, "display.width", 160):
        print(df.to_string(index=False))


def output_csv(df: pd.DataFrame, filename: str):
    df.to_csv(filename, index=False)
    print(f"💾 Data saved to {filename}")


if __name__ == "__main__":
    sys.exit(main())
