"""
Near-RT RIC security simulator - command line entry point

    run      --scenario FILE [--seed N] [--out DIR]
    sweep    --scenario FILE --grid FILE --seeds a..b --out DIR [--workers N]
    compare  REPORT [REPORT ...] --out FILE
    validate --scenario FILE

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

import app
import config
from harness.metrics import ReportError, compare, write_report
from harness.scenario import ScenarioError, load_scenario
from harness.sweep import load_grid, parse_seeds, sweep, write_sweep

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class SimRunner:
    """Drives one CLI command and prints the human summary."""

    def __init__(self, out: Optional[Path] = None):
        self.out = out

    def run(self, scenario_path: str, seed: Optional[int]) -> Dict:
        scenario = load_scenario(scenario_path)
        _banner(f"RUN: {scenario.name}")
        print(f"Config hash: {scenario.config_hash()}")
        print(f"Seed:        {scenario.seed if seed is None else seed}")
        print(f"Ticks:       {scenario.ticks}")
        report, timing = app.run(scenario, seed)
        self._print_report(report, timing)
        if self.out is not None:
            path, _ = write_report(report, timing, self.out)
            print(f" Report saved: {path}\n")
        return report

    def sweep(self, scenario_path: str, grid_path: str, seeds: str, workers: int) -> List:
        scenario = load_scenario(scenario_path)
        grid = load_grid(grid_path)
        seed_list = parse_seeds(seeds)
        _banner(f"SWEEP: {scenario.name}")
        print(f"Grid:    {', '.join(grid) or '(empty)'}")
        print(f"Seeds:   {seed_list[0]}..{seed_list[-1]} ({len(seed_list)})")
        print(f"Workers: {workers}")
        runs = sweep(scenario, grid, seed_list, workers=workers)
        print("\nRuns:")
        print("-" * 70)
        for r in runs:
            params = ", ".join(f"{k}={v}" for k, v in r.parameters.items()) or "-"
            print(f"  p{r.index:03d} seed {r.seed:<5} {params:<40} "
                  f"{r.report['network']['mean_ue_throughput_mbps']:8.2f} Mbps")
        print("=" * 70 + "\n")
        if self.out is not None:
            print(f" Sweep table saved: {write_sweep(runs, self.out)}\n")
        return runs

    def compare(self, report_paths: List[str]) -> List[Dict]:
        reports = [json.loads(Path(p).read_text(encoding="utf-8")) for p in report_paths]
        rows = compare(reports[0], *reports[1:])
        _banner(f"COMPARE: {len(reports)} reports")
        table = pd.DataFrame(rows)
        print(table.to_string(index=False, na_rep="-") if not table.empty else "(no metrics)")
        print("=" * 70 + "\n")
        if self.out is not None:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            if self.out.suffix == ".json":
                self.out.write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8")
            else:
                table.to_csv(self.out, index=False)
            print(f" Delta table saved: {self.out}\n")
        return rows

    def validate(self, scenario_path: str) -> None:
        scenario = load_scenario(scenario_path)
        print(f"✓ {scenario.name}: valid ({scenario.config_hash()})")

    def _print_report(self, report: Dict, timing: Dict) -> None:
        network, pipeline, defences = report["network"], report["pipeline"], report["defences"]
        _banner("REPORT SUMMARY")
        print(f"Mean UE throughput:  {network['mean_ue_throughput_mbps']:.2f} Mbps")
        print(f"Handovers:           {network['handover_count']}")
        print(f"SLA violation ticks: {network['sla_violation_ticks']}")
        print(f"TS decisions:        {pipeline['ts_decisions']}")
        latency = pipeline["median_control_latency_ms"]
        print(f"Control latency:     {'-' if latency is None else f'{latency:.0f} ms'}")
        print(f"Alerts:              {defences['alert_count']}")
        print(f"Precision / recall:  {defences['precision']:.2f} / {defences['recall']:.2f}")
        print(f"Mean tick:           {timing['mean_tick_ms']:.3f} ms "
              f"(defences {100 * timing['defence_share']:.1f}%)")
        if report["attacks"]:
            print("\nAttacks:")
            print("-" * 70)
            for outcome in report["attacks"]:
                flag = "🛡" if outcome["status"] == "blocked" else ("🚨" if outcome["detected"] else "  ")
                headline = ", ".join(f"{k}={_short(v)}" for k, v in outcome["success_metric"].items())
                print(f"{flag} {outcome['attacker_id']:<28} {outcome['status']:<12} {headline}")
        print("=" * 70 + "\n")


def _banner(title: str) -> None:
    print("\n" + "=" * 70)
    print(f" {title}")
    print("=" * 70)


def _short(value) -> str:
    return "-" if value is None else f"{value:.3g}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ricsim", description="Near-RT RIC security simulator")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", type=Path, default=None)

    sw = commands.add_parser("sweep", help="run a parameter grid over seeds")
    sw.add_argument("--scenario", required=True)
    sw.add_argument("--grid", required=True)
    sw.add_argument("--seeds", required=True, help="a..b, a,b,c or a single seed")
    sw.add_argument("--out", type=Path, required=True)
    sw.add_argument("--workers", type=int, default=config.WORKERS)

    cmp = commands.add_parser("compare", help="delta table: first report is the baseline")
    cmp.add_argument("reports", nargs="+")
    cmp.add_argument("--out", type=Path, default=None)

    val = commands.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    config.setup_logging(args.log_level)

    problems = config.validate_config()
    if problems:
        for problem in problems:
            print(f" Config error: {problem}")
        return EXIT_INVALID

    runner = SimRunner(getattr(args, "out", None))
    try:
        if args.command == "run":
            runner.run(args.scenario, args.seed)
        elif args.command == "sweep":
            runner.sweep(args.scenario, args.grid, args.seeds, args.workers)
        elif args.command == "compare":
            runner.compare(args.reports)
        else:
            runner.validate(args.scenario)
    except (ScenarioError, ReportError) as e:
        print(f"\n Validation error: {e}")
        return EXIT_INVALID
    except json.JSONDecodeError as e:
        print(f"\n Validation error: malformed report ({e.msg})")
        return EXIT_INVALID
    except OSError as e:
        print(f"\n I/O error: {e}")
        return EXIT_IO
    except KeyboardInterrupt:
        print("\n\n  Interrupted by user")
        return 130
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
