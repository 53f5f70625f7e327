"""
Reporter - console summaries for rollouts, suites, sweeps and asset reports
"""

from typing import Any, Callable, Dict, Optional

import click
import pandas as pd


class Reporter:
    """Render results as plain-text console reports."""

    def __init__(self, echo: Optional[Callable[[str], None]] = None):
        self.echo = echo or click.echo

    def _header(self, title: str):
        self.echo(f"\n{'=' * 50}")
        self.echo(title)
        self.echo('=' * 50)

    def print_rollout(self, trace, metrics, trace_path: Optional[str] = None):
        """
        Print one rollout: per-task outcome, failure events and metrics.

        Args:
            trace: ExecutionTrace of the rollout
            metrics: MetricsRecord computed from it
            trace_path: Where the JSON-lines trace was written, if anywhere
        """
        self._header("Collaboration Rollout")
        self.echo(f"Instance: {trace.task}")
        self.echo(f"Mode:     {trace.mode}")
        self.echo(f"Seed:     {trace.seed}")
        self.echo(f"Lambda:   {trace.multiplier:g}")

        self.echo("\nTasks:")
        for t in trace.tasks:
            status = '[OK]' if t.completed else '[X]'
            nxt = f" (anticipated: {t.predicted})" if t.predicted else ""
            self.echo(f"  {status} {t.task:<14} {t.steps:3d} steps, "
                      f"{t.subgoals_met}/{t.subgoals} subgoals, {t.replans} plans{nxt}")

        if trace.failures:
            self.echo("\nFailure events:")
            for ev in trace.failures:
                where = f" at {ev.location}" if ev.location else ""
                what = f" {ev.item}" if ev.item else ""
                self.echo(f"  step {ev.step:3d}  {ev.kind:<12}{what}{where}  -> {ev.handled}")

        self.echo("\nMetrics:")
        self.echo(f"  Task completion:    {metrics.task_completion_rate * 100:.1f}%")
        self.echo(f"  Subgoal completion: {metrics.subgoal_completion_rate * 100:.1f}%")
        self.echo(f"  Failures:           {metrics.failures}")
        self.echo(f"  Prevented:          {metrics.failures_prevented}")
        self.echo(f"  Recovered:          {metrics.failures_recovered}")
        self.echo(f"  Avg actions:        {metrics.avg_actions:.1f}")
        if trace_path:
            self.echo(f"\nTrace saved: {trace_path}")
        self.echo('=' * 50)

    def print_suite(self, tables: Dict[str, pd.DataFrame]):
        """Print the completion and failure tables side by side per task and mode."""
        self._header("Suite Summary")
        merged = tables['completion'].merge(tables['failures'],
                                            on=['schema_version', 'task', 'mode', 'rollouts'])
        self.echo(f"{'task':<16}{'mode':<15}{'subgoal%':>9}{'task%':>8}"
                  f"{'fail':>7}{'prev':>7}{'recov':>7}{'actions':>9}")
        for row in merged.itertuples(index=False):
            self.echo(f"{row.task:<16}{row.mode:<15}{row.subgoal_completion:>9.1f}"
                      f"{row.task_completion:>8.1f}{row.failures:>7.2f}{row.prevented:>7.2f}"
                      f"{row.recovered:>7.2f}{row.avg_actions:>9.1f}")

        means = merged.groupby('mode', sort=False)['task_completion'].mean()
        self.echo("\nMean task completion:")
        for mode, value in means.items():
            self.echo(f"  {mode:<15}{value:6.1f}%")
        self.echo('=' * 50)

    def print_sweep(self, sweep: pd.DataFrame, interior=()):
        self._header("Reward Multiplier Sweep")
        table = sweep.pivot(index='task', columns='multiplier', values='failures')
        self.echo(f"{'task':<16}" + "".join(f"{f'l={lam:g}':>9}" for lam in table.columns))
        for task, row in table.iterrows():
            mark = ' *' if task in interior else ''
            self.echo(f"{task:<16}" + "".join(f"{v:>9.2f}" for v in row.values) + mark)
        if interior:
            self.echo("\n* minimum at an interior multiplier")
        self.echo('=' * 50)

    def print_assets(self, report: Dict[str, Any]):
        self._header("Asset Inventory")
        self.echo(f"Tasks in sample space: {report['tasks']}")
        self.echo(f"User sequences:        {report['sequences']}")
        self.echo(f"Goal templates:        {report['templates']}")

        self.echo("\nObject categories:")
        for name, count in report['categories'].items():
            self.echo(f"  {name:<12} {count}")

        self.echo("\nInstances:")
        for name, info in report['instances'].items():
            objs = ", ".join(f"{t} {n}" for t, n in info['objects'].items())
            self.echo(f"  {name}: {info['fluents']} fluents, {info['robot_actions']} robot / "
                      f"{info['human_actions']} human actions, goal {info['goal']} literals, "
                      f"horizon {info['horizon']}")
            self.echo(f"    objects: {objs}")
        self.echo('=' * 50)
