"""Benchmark running and reporting: gaps, tables, series, bundled optima."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .engine import EngineConfig, EpisodeAbortError, run_episode
from .instances import Instance, lower_bound, taillard_instance
from .schedule import Solution
from .trajectories import TrajectoryRecord
from .wire import ProtocolError


def gap_percent(makespan: float, optimum: float) -> float:
    """Relative optimality gap in percent."""
    if optimum <= 0:
        raise ValueError("optimum must be positive")
    return (makespan - optimum) / optimum * 100.0


def format_gap(makespan: float, optimum: float) -> str:
    return f"{gap_percent(makespan, optimum):.2f}%"


@dataclass(frozen=True)
class BenchmarkInstance:
    id: str
    instance: Instance
    optimum: int


def benchmark_15x15() -> list[BenchmarkInstance]:
    """The bundled ten 15x15 benchmark instances with known optima."""
    payload = json.loads(
        resources.files("shopsearch.data").joinpath("taillard15.json").read_text()
    )
    j, m = payload["num_jobs"], payload["num_machines"]
    return [
        BenchmarkInstance(
            id=row["id"],
            instance=taillard_instance(j, m, row["time_seed"], row["machine_seed"]),
            optimum=row["optimum"],
        )
        for row in payload["instances"]
    ]


@dataclass
class SolveRow:
    instance_id: str
    num_jobs: int
    num_machines: int
    lower_bound: int
    initial_makespan: int | None = None
    best_makespan: int | None = None
    optimum: int | None = None
    wall_clock: float | None = None
    error: str | None = None
    best_series: list[int] = field(default_factory=list)

    @property
    def gap(self) -> float | None:
        if self.optimum is None or self.best_makespan is None:
            return None
        return gap_percent(self.best_makespan, self.optimum)

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "num_jobs": self.num_jobs,
            "num_machines": self.num_machines,
            "lower_bound": self.lower_bound,
            "initial_makespan": self.initial_makespan,
            "best_makespan": self.best_makespan,
            "optimum": self.optimum,
            "wall_clock": self.wall_clock,
            "error": self.error,
            "best_series": self.best_series,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SolveRow":
        return cls(**{k: obj.get(k) for k in (
            "instance_id", "num_jobs", "num_machines", "lower_bound",
            "initial_makespan", "best_makespan", "optimum", "wall_clock", "error",
        )}, best_series=obj.get("best_series") or [])


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass
class BenchmarkReport:
    rows: list[SolveRow]
    config: dict

    @property
    def solved_rows(self) -> list[SolveRow]:
        return [r for r in self.rows if r.error is None]

    @property
    def mean_initial(self) -> float | None:
        return _mean([r.initial_makespan for r in self.solved_rows])

    @property
    def mean_best(self) -> float | None:
        return _mean([r.best_makespan for r in self.solved_rows])

    @property
    def mean_optimum(self) -> float | None:
        vals = [r.optimum for r in self.solved_rows if r.optimum is not None]
        return _mean(vals) if len(vals) == len(self.solved_rows) and vals else None

    @property
    def mean_gap(self) -> float | None:
        gaps = [r.gap for r in self.solved_rows if r.gap is not None]
        return _mean(gaps) if gaps and len(gaps) == len(self.solved_rows) else None

    def mean_best_series(self) -> list[float]:
        """Mean best-so-far makespan per iteration over solved rows."""
        rows = [r for r in self.solved_rows if r.best_series]
        if not rows:
            return []
        steps = min(len(r.best_series) for r in rows)
        return [_mean([r.best_series[t] for r in rows]) for t in range(steps)]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "rows": [r.to_json() for r in self.rows],
            "summary": {
                "mean_initial": self.mean_initial,
                "mean_best": self.mean_best,
                "mean_optimum": self.mean_optimum,
                "mean_gap": self.mean_gap,
                "errors": sum(1 for r in self.rows if r.error is not None),
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkReport":
        return cls(rows=[SolveRow.from_json(r) for r in obj["rows"]],
                   config=obj.get("config", {}))

    def to_text(self) -> str:
        headers = ["instance", "jxm", "lb", "initial", "best", "optimum", "gap", "secs"]
        body = []
        for r in self.rows:
            if r.error is not None:
                body.append([r.instance_id, f"{r.num_jobs}x{r.num_machines}",
                             str(r.lower_bound), "-", f"ERROR: {r.error}", "", "", ""])
                continue
            body.append([
                r.instance_id,
                f"{r.num_jobs}x{r.num_machines}",
                str(r.lower_bound),
                str(r.initial_makespan),
                str(r.best_makespan),
                "-" if r.optimum is None else str(r.optimum),
                "-" if r.gap is None else f"{r.gap:.2f}%",
                "-" if r.wall_clock is None else f"{r.wall_clock:.2f}",
            ])
        summary = ["mean", "", "",
                   "-" if self.mean_initial is None else f"{self.mean_initial:.1f}",
                   "-" if self.mean_best is None else f"{self.mean_best:.1f}",
                   "-" if self.mean_optimum is None else f"{self.mean_optimum:.1f}",
                   "-" if self.mean_gap is None else f"{self.mean_gap:.2f}%",
                   ""]
        table = [headers] + body + [summary]
        widths = [max(len(row[c]) for row in table) for c in range(len(headers))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in table]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _best_series(records: list[TrajectoryRecord], best: Solution) -> list[int]:
    # features at step t+1 carry the best after step t; the tail comes from
    # the returned best solution
    series = [records[t + 1].features.best_makespan for t in range(len(records) - 1)]
    if records:
        series.append(best.makespan)
    return series


def solve_instances(
    named: Sequence[tuple[str, Instance]],
    policy_factory: Callable[[], object],
    config: EngineConfig,
    optima: dict[str, int] | None = None,
    workers: int = 1,
    config_echo: dict | None = None,
) -> BenchmarkReport:
    """Run one episode per instance; failures land in the row, run continues."""
    optima = optima or {}

    def solve_one(item: tuple[str, Instance]) -> SolveRow:
        name, instance = item
        row = SolveRow(
            instance_id=name,
            num_jobs=instance.num_jobs,
            num_machines=instance.num_machines,
            lower_bound=lower_bound(instance),
            optimum=optima.get(name),
        )
        policy = policy_factory()
        start = time.perf_counter()
        try:
            records, best = run_episode(instance, policy, config, instance_id=name)
        except (EpisodeAbortError, ProtocolError) as exc:
            row.error = str(exc)
            return row
        finally:
            close = getattr(policy, "close", None)
            if close is not None:
                close()
        row.wall_clock = time.perf_counter() - start
        row.best_makespan = best.makespan
        row.initial_makespan = (
            records[0].features.current_makespan if records else best.makespan
        )
        row.best_series = _best_series(records, best)
        return row

    if workers <= 1:
        rows = [solve_one(item) for item in named]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(solve_one, named))
    return BenchmarkReport(rows=rows, config=config_echo or {})


def write_report(report: BenchmarkReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")


def read_report(path: str | Path) -> BenchmarkReport:
    return BenchmarkReport.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
