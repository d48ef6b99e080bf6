"""Shrinking benchmark over generated library scenarios."""

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import structlog
import yaml

from app.config import settings
from app.library.contracts import contracts
from app.library.scenarios import generate
from app.models import BenchRow, Scenario, ScenarioName, Strategy
from app.services.pipeline import TraceSimplifier

logger = structlog.get_logger()

Cell = Tuple[Scenario, Strategy, int]


def load_grid(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Read the benchmark grid YAML."""
    grid_path = Path(path or settings.bench_grid_path)
    try:
        with open(grid_path, "r", encoding="utf-8") as handle:
            grid = yaml.safe_load(handle) or {}
        logger.info("Bench grid loaded", path=str(grid_path))
        return grid
    except Exception as exc:
        logger.error("Failed to load bench grid", path=str(grid_path), error=str(exc))
        raise


def grid_cells(grid: Dict[str, Any], only: Sequence[str] = (), seed: Optional[int] = None) -> List[Cell]:
    """Expand the grid into (scenario, strategy, replays) cells, in grid order."""
    base_seed = grid.get("seed", 0) if seed is None else seed
    replays = int(grid.get("replays_per_candidate", 1))
    strategies = [Strategy(name) for name in grid.get("strategies", [s.value for s in Strategy])]
    cells: List[Cell] = []
    for entry in grid.get("scenarios", []):
        name = ScenarioName(entry["name"])
        if only and name.value not in only:
            continue
        for size in entry["sizes"]:
            scenario = Scenario(name=name, target_stimuli=int(size), seed=base_seed)
            for strategy in strategies:
                cells.append((scenario, strategy, replays))
    return cells


def run_cell(cell: Cell) -> BenchRow:
    """Generate, run live, then simplify one grid cell."""
    scenario, strategy, replays = cell
    stimuli = generate(scenario)
    simplifier = TraceSimplifier(contracts(), replays=replays, seed=scenario.seed)
    result = simplifier.simplify_stimuli(stimuli, strategy)
    return BenchRow(
        scenario=scenario.name,
        original_stimuli=len(stimuli),
        strategy=strategy,
        final_stimuli=result.stats.final_stimuli,
        steps=result.stats.steps,
        successful_steps=result.stats.successful_steps,
        bad_state=result.violation.bad_state,
    )


def run_grid(cells: Sequence[Cell], jobs: int = 1) -> List[BenchRow]:
    """Run every cell; with jobs > 1 cells run in worker processes. Rows keep grid order."""
    if jobs <= 1:
        rows = [run_cell(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, cells))
    logger.info("Bench finished", rows=len(rows), jobs=jobs)
    return rows


def render_table(rows: Sequence[BenchRow]) -> str:
    """Fixed-width text table, one row per (scenario, size, strategy)."""
    header = ("scenario", "original", "strategy", "final", "steps", "successful", "bad_state")
    body = [
        (
            row.scenario.value,
            str(row.original_stimuli),
            row.strategy.value,
            str(row.final_stimuli),
            str(row.steps),
            str(row.successful_steps),
            row.bad_state,
        )
        for row in rows
    ]
    widths = [max(len(line[column]) for line in [header] + body) for column in range(len(header))]
    lines = ["  ".join(value.ljust(width) for value, width in zip(line, widths)).rstrip() for line in [header] + body]
    return "\n".join(lines) + "\n"
