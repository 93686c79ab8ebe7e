"""
Parameter sweeps: grid x seeds, optionally across worker processes.
"""

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import pandas as pd

import app
from harness.metrics import flatten_metrics, write_report
from harness.scenario import Scenario, ScenarioError, parse_scenario, with_parameters

logger = logging.getLogger(__name__)


@dataclass
class SweepRun:
    index: int
    parameters: Dict[str, Any]
    seed: int
    report: Dict
    timing: Dict


def expand_grid(grid: Mapping[str, Sequence]) -> List[Dict[str, Any]]:
    """Cartesian product of the grid in key order (first key varies slowest). Empty grid -> [{}]."""
    keys = list(grid)
    for key in keys:
        if not isinstance(grid[key], (list, tuple)) or not grid[key]:
            raise ScenarioError("grid values must be non-empty lists", key)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def load_grid(path) -> Dict[str, List]:
    """
    Raises:
        OSError: file missing or unreadable
        ScenarioError: not a JSON object of lists
    """
    try:
        grid = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid grid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(grid, dict):
        raise ScenarioError("grid must be an object of dotted-path -> list")
    return grid


def parse_seeds(text: str) -> List[int]:
    """`"a..b"` (inclusive), `"a,b,c"` or a single seed."""
    text = text.strip()
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            if high < low:
                raise ValueError
            return list(range(low, high + 1))
        return [int(part) for part in text.split(",")]
    except ValueError as e:
        raise ScenarioError(f"bad seed list {text!r}", "seeds") from e


def _run_point(scenario_data: Dict, seed: int):
    # process-pool job: the scenario travels as plain data
    return app.run(parse_scenario(scenario_data), seed)


def sweep(scenario: Scenario, grid: Mapping[str, Sequence], seeds: Sequence[int],
          workers: int = 1) -> List[SweepRun]:
    """
    Run every (grid point, seed) pair; results ordered grid-major, then seed.

    Raises:
        ScenarioError: a grid path does not exist or yields an invalid scenario
    """
    points = expand_grid(grid)
    variants = [with_parameters(scenario, p) for p in points]  # validate before running anything
    jobs = [(i, p, v.to_dict(), seed) for i, (p, v) in enumerate(zip(points, variants)) for seed in seeds]
    logger.info("sweep %s: %d grid points x %d seeds", scenario.name, len(points), len(seeds))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, data, seed) for _, _, data, seed in jobs]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_run_point(data, seed) for _, _, data, seed in jobs]

    return [
        SweepRun(index=i, parameters=dict(p), seed=seed, report=report, timing=timing)
        for (i, p, _, seed), (report, timing) in zip(jobs, outputs)
    ]


def sweep_table(runs: Sequence[SweepRun]) -> pd.DataFrame:
    """One row per run: grid parameters, seed, hash and every flattened metric."""
    rows = []
    for run in runs:
        row = {"point": run.index, "seed": run.seed, "scenario": run.report["scenario"],
               "config_hash": run.report["config_hash"]}
        row.update({f"param:{k}": json.dumps(v) for k, v in run.parameters.items()})
        row.update(flatten_metrics(run.report))
        row["mean_tick_ms"] = run.timing["mean_tick_ms"]
        row["defence_share"] = run.timing["defence_share"]
        rows.append(row)
    table = pd.DataFrame(rows)
    fixed = [c for c in ("point", "seed", "scenario", "config_hash") if c in table.columns]
    return table[fixed + sorted(c for c in table.columns if c not in fixed)]


def write_sweep(runs: Sequence[SweepRun], out_dir) -> Path:
    """Per-run report files plus `sweep.csv`. Returns the CSV path."""
    out = Path(out_dir)
    for run in runs:
        write_report(run.report, run.timing, out / "runs", stem=f"p{run.index:03d}-s{run.seed}")
    csv_path = out / "sweep.csv"
    sweep_table(runs).to_csv(csv_path, index=False)
    logger.info("sweep table written to %s", csv_path)
    return csv_path
