"""
Experiment suites - batches of seeded rollouts aggregated into CSV tables
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import pandas as pd
from tqdm import tqdm

from .errors import ConfigError
from .planner import PlannerConfig
from .human_model import NoiseConfig
from .simulator import (AGENT_MODES, OURS, Assets, ExecutionTrace, MetricsRecord, RolloutConfig,
                        run_rollout)

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1

COMPLETION_COLUMNS = ["schema_version", "task", "mode", "rollouts",
                      "subgoal_completion", "task_completion"]
FAILURE_COLUMNS = ["schema_version", "task", "mode", "rollouts",
                   "failures", "prevented", "recovered", "avg_actions"]
SWEEP_COLUMNS = ["schema_version", "task", "multiplier", "rollouts",
                 "failures", "prevented", "recovered"]

# composite task instance -> task sequence the human performs
DEFAULT_TASKS: Mapping[str, Tuple[str, ...]] = {
    "salmon_water": ("serve salmon", "serve water"),
    "coffee_washdish": ("serve coffee", "wash dishes"),
    "cereal_coffee": ("serve cereal", "serve coffee"),
    "toast_coffee": ("serve toast", "serve coffee"),
    "pizza_washdish": ("serve pizza", "wash dishes"),
}


@dataclass(frozen=True)
class SuiteConfig:
    rollouts: int = 30
    tasks: Mapping[str, Tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_TASKS))
    modes: Tuple[str, ...] = AGENT_MODES
    multipliers: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0)
    multiplier: float = 1.0
    seed: int = 0
    out_dir: str = "results"
    workers: int = 1
    max_steps: int = 60
    bootstrap_trials: int = 10
    strategy: str = "few-shot"
    remote_predictor: bool = False
    remote_endpoint: Optional[str] = None
    model_cache: Optional[str] = None
    save_traces: bool = False
    planner: PlannerConfig = PlannerConfig()
    noise: Optional[NoiseConfig] = None

    def __post_init__(self):
        if self.rollouts < 1:
            raise ConfigError("rollout count must be at least 1")
        if not self.tasks:
            raise ConfigError("suite needs at least one task")
        unknown = [m for m in self.modes if m not in AGENT_MODES]
        if unknown:
            raise ConfigError(f"unknown agent modes: {', '.join(unknown)}")
        if any(v < 0 for v in self.multipliers) or self.multiplier < 0:
            raise ConfigError("reward multipliers must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def rollout(self, task: str, mode: str, index: int,
                multiplier: Optional[float] = None) -> RolloutConfig:
        return RolloutConfig(task=task, tasks=tuple(self.tasks[task]), agent_mode=mode,
                             seed=self.seed + index, max_steps=self.max_steps,
                             multiplier=self.multiplier if multiplier is None else multiplier,
                             planner=self.planner, noise=self.noise, strategy=self.strategy,
                             bootstrap_trials=self.bootstrap_trials,
                             remote_predictor=self.remote_predictor,
                             remote_endpoint=self.remote_endpoint,
                             model_cache=self.model_cache)


# ---------------------------------------------------------------- execution

# assets of the current worker process, grounded once by _init_worker
_WORKER_ASSETS: Optional[Assets] = None


def _init_worker(assets: Assets) -> None:
    global _WORKER_ASSETS
    _WORKER_ASSETS = assets


def _run_one(cfg: RolloutConfig) -> Tuple[ExecutionTrace, MetricsRecord]:
    return run_rollout(cfg, _WORKER_ASSETS)


def run_many(configs: List[RolloutConfig], assets: Assets, workers: int = 1,
             progress: bool = False, desc: str = "rollouts"
             ) -> List[Tuple[ExecutionTrace, MetricsRecord]]:
    """
    Run rollouts, in a process pool when ``workers`` > 1; results keep input order.

    Every instance the configs name is grounded here, before the pool starts,
    so each worker receives the grounded worlds once through its initializer.
    """
    if assets is not None:
        for name in sorted({cfg.task for cfg in configs}):
            if name in assets.instances:
                assets.world(name)
    _init_worker(assets)
    bar = tqdm(total=len(configs), desc=desc, disable=not progress)
    results = []
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(assets,)) as pool:
                for result in pool.map(_run_one, configs):
                    results.append(result)
                    bar.update(1)
        else:
            for cfg in configs:
                results.append(_run_one(cfg))
                bar.update(1)
    finally:
        bar.close()
    return results


def _records(results: Iterable[Tuple[ExecutionTrace, MetricsRecord]]) -> pd.DataFrame:
    rows = []
    for trace, metrics in results:
        rows.append({"task": trace.task, "mode": trace.mode, "seed": trace.seed,
                     "multiplier": trace.multiplier, **metrics.as_dict()})
    return pd.DataFrame(rows)


def _save_traces(results, out_dir: Path) -> None:
    for trace, _ in results:
        trace.save(out_dir / "traces" / f"trace-{trace.task}-{trace.mode}-{trace.seed}.jsonl")


def summarize(records: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Per task x mode means of the per-rollout metrics (rates as percentages)."""
    grouped = records.groupby(["task", "mode"], sort=False)
    table = grouped.agg(
        rollouts=("seed", "count"),
        subgoal_completion=("subgoal_completion_rate", "mean"),
        task_completion=("task_completion_rate", "mean"),
        failures=("failures", "mean"),
        prevented=("failures_prevented", "mean"),
        recovered=("failures_recovered", "mean"),
        avg_actions=("avg_actions", "mean"),
    ).reset_index()
    table["subgoal_completion"] *= 100.0
    table["task_completion"] *= 100.0
    table.insert(0, "schema_version", CSV_SCHEMA_VERSION)
    return {"completion": table[COMPLETION_COLUMNS].round(2),
            "failures": table[FAILURE_COLUMNS].round(2)}


def run_suite(cfg: SuiteConfig, assets: Assets, progress: bool = False) -> Dict[str, pd.DataFrame]:
    """
    Run every task x mode x rollout and write completion.csv and failures.csv.

    Returns:
        Dict with the "completion", "failures" and per-rollout "records" tables
    """
    configs = [cfg.rollout(task, mode, k)
               for task in cfg.tasks for mode in cfg.modes for k in range(cfg.rollouts)]
    logger.info("running %d rollouts (%d tasks, modes: %s)", len(configs), len(cfg.tasks),
                ", ".join(cfg.modes))
    results = run_many(configs, assets, cfg.workers, progress, "suite")
    records = _records(results)
    tables = summarize(records)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables["completion"].to_csv(out / "completion.csv", index=False)
    tables["failures"].to_csv(out / "failures.csv", index=False)
    if cfg.save_traces:
        _save_traces(results, out)
    logger.info("wrote %s and %s", out / "completion.csv", out / "failures.csv")
    tables["records"] = records
    return tables


def multiplier_sweep(cfg: SuiteConfig, assets: Assets, progress: bool = False) -> pd.DataFrame:
    """Mean failure counts per task and reward multiplier (ours mode); writes sweep.csv."""
    if len(cfg.multipliers) < 3:
        raise ConfigError("the multiplier grid needs at least three values")
    configs = [cfg.rollout(task, OURS, k, multiplier=lam)
               for task in cfg.tasks for lam in cfg.multipliers for k in range(cfg.rollouts)]
    logger.info("sweeping %d multipliers over %d tasks", len(cfg.multipliers), len(cfg.tasks))
    results = run_many(configs, assets, cfg.workers, progress, "sweep")
    records = _records(results)
    table = records.groupby(["task", "multiplier"], sort=False).agg(
        rollouts=("seed", "count"),
        failures=("failures", "mean"),
        prevented=("failures_prevented", "mean"),
        recovered=("failures_recovered", "mean"),
    ).reset_index()
    table.insert(0, "schema_version", CSV_SCHEMA_VERSION)
    table = table[SWEEP_COLUMNS].round(3)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "sweep.csv", index=False)
    if cfg.save_traces:
        _save_traces(results, out)
    return table


def interior_minima(sweep: pd.DataFrame) -> List[str]:
    """Tasks whose lowest mean failure count sits strictly inside the multiplier grid."""
    tasks = []
    for task, rows in sweep.groupby("task", sort=False):
        rows = rows.sort_values("multiplier")
        best = rows["failures"].to_numpy().argmin()
        if 0 < best < len(rows) - 1:
            tasks.append(task)
    return tasks


# ---------------------------------------------------------------- asset report

def describe_assets(assets: Assets) -> Dict[str, object]:
    """Inventory counts for a sanity check of the shipped assets."""
    report: Dict[str, object] = {
        "tasks": len(assets.space),
        "sequences": len(assets.history.sequences),
        "templates": len(assets.goals.templates),
        "categories": {name: len(objs) for name, objs in assets.scene.categories.items()},
        "rooms": {room: len(objs) for room, objs in assets.scene.rooms.items()},
        "instances": {},
    }
    for name in sorted(assets.instances):
        inst = assets.instances[name]
        world = assets.world(name)
        report["instances"][name] = {
            "objects": {t: len(inst.objects_of(t)) for t in assets.domain.types},
            "fluents": len(world.fluents),
            "robot_actions": len(world.robot_actions),
            "human_actions": len(world.human_actions),
            "goal": len(world.goal),
            "horizon": world.horizon,
        }
    return report
