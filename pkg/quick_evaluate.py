import os
import json
import argparse
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import pandas as pd

from experiments.run_experiment import FORMATS, emit
from reports.builder import ReportBuilder

TITLES = {
    "simulate": "Estimation error (mean, sd over replicates)",
    "factors": "Frequency of the estimated number of factors",
    "backtest": "Annualized out-of-sample risk",
}


def latest_run(logs_dir: str) -> Optional[Path]:
    """Most recent logs/<timestamp> directory that holds a metadata.json."""
    root = Path(logs_dir)
    if not root.is_dir():
        return None
    runs = sorted(p for p in root.iterdir() if (p / "metadata.json").exists())
    return runs[-1] if runs else None


def load_run(run_dir: str) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """metadata.json and the result table it points to (csv or json)."""
    meta_path = os.path.join(run_dir, "metadata.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"metadata.json not found in {run_dir}")
    with open(meta_path, "r", encoding="utf-8") as f:
        metadata = json.load(f)

    table_path = os.path.join(run_dir, metadata["table_file"])
    fmt = metadata.get("format", "csv")
    if fmt == "csv":
        table = pd.read_csv(table_path)
    elif fmt == "json":
        with open(table_path, "r", encoding="utf-8") as f:
            table = pd.DataFrame(json.load(f))
    else:
        raise ValueError(f"{table_path} was written as aligned text and cannot be re-read; rerun with --format csv")
    return metadata, table


def pivot_means(table: pd.DataFrame) -> pd.DataFrame:
    """pipeline x metric grid of means for a simulate table, in table order."""
    grid = table.pivot(index="pipeline", columns="metric", values="mean")
    grid = grid.reindex(index=pd.unique(table["pipeline"]), columns=pd.unique(table["metric"]))
    return grid.reset_index()


def describe(metadata: Dict[str, Any]):
    print(f"🔍 Run {metadata.get('timestamp')} ({metadata.get('command')})")
    print("=" * 60)
    if metadata.get("command") == "simulate":
        scenario = metadata.get("scenario", {})
        print(f"Scenario: n={scenario.get('n')}, d={scenario.get('d')}, tail={scenario.get('tail')}")
        print(f"Replicates: {metadata.get('reps')} (seed {metadata.get('seed')})")
        failures = {k: v for k, v in (metadata.get("failures") or {}).items() if v}
        if failures:
            print(f"⚠️  Failed replicates: {failures}")
    elif metadata.get("command") == "factors":
        print(f"d grid: {metadata.get('d_grid')}, methods: {metadata.get('methods')}, M={metadata.get('M')}")
    elif metadata.get("command") == "backtest":
        print(f"Data: {metadata.get('data')} ({len(metadata.get('tickers', []))} tickers)")
        print(f"Window: {metadata.get('window_months')} months, gaps: {len(metadata.get('gaps', []))}")


def main():
    parser = argparse.ArgumentParser(description="Re-render the table of an earlier run")
    parser.add_argument("--run-dir", help="logs/<timestamp> directory of the run")
    parser.add_argument("--logs-dir", default="logs", help="Logs directory used with --latest (default: logs)")
    parser.add_argument("--latest", action="store_true", help="Use the most recent run under --logs-dir")
    parser.add_argument("--format", choices=FORMATS, default="text", help="Output format")
    parser.add_argument("--pivot", action="store_true", help="pipeline x metric grid of means (simulate runs)")
    parser.add_argument("--out", help="Write the rendered table here instead of printing it")

    args = parser.parse_args()

    run_dir = args.run_dir
    if run_dir is None and args.latest:
        found = latest_run(args.logs_dir)
        run_dir = str(found) if found else None
    if run_dir is None:
        print("❌ Please specify either --run-dir or --latest")
        print("Examples:")
        print("  python quick_evaluate.py --latest")
        print("  python quick_evaluate.py --run-dir logs/20250617_143000 --format json")
        return

    try:
        metadata, table = load_run(run_dir)
    except (FileNotFoundError, ValueError) as e:
        print(f"❌ {e}")
        return

    describe(metadata)
    title = TITLES.get(metadata.get("command"), "")
    if args.pivot:
        if metadata.get("command") != "simulate":
            print("❌ --pivot only applies to simulate runs")
            return
        table = pivot_means(table)
        title = "Mean error per pipeline"

    if args.out:
        emit(table, args.format, args.out, title=title)
        print(f"✅ Written to {args.out}")
    elif args.format == "text":
        print(ReportBuilder().render(table, title=title))
    else:
        print(emit(table, args.format))


if __name__ == "__main__":
    main()
