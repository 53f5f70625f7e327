#!/usr/bin/env python3
"""
CollabCLI - anticipatory human-robot collaboration planner
Runs rollouts, experiment suites and the reward multiplier sweep
"""

import logging
import sys
from pathlib import Path

import click

try:
    from core.errors import CollabError
    from core.reporter import Reporter
except ImportError:
    # For development, add current directory to path
    sys.path.insert(0, str(Path(__file__).parent))
    from core.errors import CollabError
    from core.reporter import Reporter

from core.simulator import AGENT_MODES, RolloutConfig, run_rollout
from core.suite import describe_assets, interior_minima, multiplier_sweep, run_suite
from utils.config import load_config, noise_config, planner_config, suite_config
from utils.io_handler import IOHandler

__version__ = "1.0.0"

BASE_DIR = Path(__file__).resolve().parent


def setup_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='[%(levelname)s] %(message)s', force=True)


def _load(ctx):
    config = load_config(ctx.obj['config'])
    assets = IOHandler.load_assets(config['assets'], BASE_DIR, noise_config(config))
    return config, assets


def _fail(exc: Exception):
    click.echo(f"Error: {exc}", err=True)
    sys.exit(1)


@click.group(invoke_without_command=True)
@click.pass_context
@click.version_option(version=__version__, prog_name="CollabCLI")
@click.option('--config', 'config_path', type=click.Path(), default=None,
              help='Config file (default: ./config.yaml if present)')
@click.option('--verbose', is_flag=True, help='Debug logging and progress bars')
@click.option('--quiet', is_flag=True, help='Warnings and errors only')
def cli(ctx, config_path, verbose, quiet):
    """
    CollabCLI - plan and evaluate robot assistance for an error-prone human.

    Examples:
        collab-cli rollout --task toast_coffee --seed 3     # One rollout with trace
        collab-cli suite --rollouts 5 --out results         # completion + failure CSVs
        collab-cli sweep --rollouts 5                       # Multiplier sweep CSV
        collab-cli assets                                   # Inventory report
    """
    if quiet and verbose:
        click.echo("Error: Cannot use --quiet and --verbose together", err=True)
        sys.exit(1)
    setup_logging(verbose, quiet)
    ctx.obj = {'config': config_path, 'verbose': verbose, 'quiet': quiet}
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit()


@cli.command()
@click.pass_context
@click.option('--task', default='toast_coffee', help='Instance to run (default: toast_coffee)')
@click.option('--mode', type=click.Choice(AGENT_MODES), default='ours', help='Agent mode')
@click.option('--seed', default=0, type=int, help='Random seed (default: 0)')
@click.option('--lambda', 'multiplier', type=float, default=None, help='Reward multiplier')
@click.option('--out', type=click.Path(), default=None, help='Directory for trace-<seed>.jsonl')
@click.option('--model-cache', type=click.Path(dir_okay=False), default=None,
              help='Behaviour model JSON to load and update')
def rollout(ctx, task, mode, seed, multiplier, out, model_cache):
    """
    Run a single rollout and print its trace summary.

    \b
    Examples:
        collab-cli rollout --task salmon_water --mode rddl_baseline
        collab-cli rollout --seed 7 --lambda 2 --out traces/
    """
    try:
        config, assets = _load(ctx)
        suite = suite_config(config)
        if task not in suite.tasks:
            raise CollabError(f"no task sequence configured for instance '{task}'")
        cfg = RolloutConfig(
            task=task, tasks=tuple(suite.tasks[task]), agent_mode=mode, seed=seed,
            max_steps=suite.max_steps,
            multiplier=suite.multiplier if multiplier is None else multiplier,
            planner=planner_config(config, seed), noise=suite.noise,
            strategy=suite.strategy, bootstrap_trials=suite.bootstrap_trials,
            remote_predictor=suite.remote_predictor, remote_endpoint=suite.remote_endpoint,
            model_cache=model_cache or suite.model_cache)
        trace, metrics = run_rollout(cfg, assets)
        path = None
        if out:
            path = trace.save(IOHandler.create_output_path(out, f"trace-{seed}", ".jsonl"))
        if not ctx.obj['quiet']:
            Reporter().print_rollout(trace, metrics, str(path) if path else None)
    except CollabError as exc:
        _fail(exc)


@cli.command()
@click.pass_context
@click.option('--rollouts', type=int, default=None, help='Rollouts per task and mode')
@click.option('--mode', 'modes', type=click.Choice(AGENT_MODES), multiple=True,
              help='Agent mode (repeatable; default: all)')
@click.option('--lambda', 'multiplier', type=float, default=None, help='Reward multiplier')
@click.option('--seed', type=int, default=None, help='Seed of the first rollout')
@click.option('--out', 'out_dir', type=click.Path(), default=None, help='Output directory')
@click.option('--workers', type=int, default=None, help='Parallel worker processes')
@click.option('--traces', is_flag=True, help='Also write per-rollout traces')
@click.option('--model-cache', type=click.Path(dir_okay=False), default=None,
              help='Behaviour model JSON to load and update')
def suite(ctx, rollouts, modes, multiplier, seed, out_dir, workers, traces, model_cache):
    """
    Run every task in every mode and write completion.csv and failures.csv.

    \b
    Examples:
        collab-cli suite
        collab-cli suite --mode ours --rollouts 1 --out /tmp/results
    """
    try:
        config, assets = _load(ctx)
        cfg = suite_config(config, rollouts=rollouts, modes=tuple(modes) or None,
                           multiplier=multiplier, seed=seed, out_dir=out_dir, workers=workers,
                           save_traces=traces or None, model_cache=model_cache)
        tables = run_suite(cfg, assets, progress=ctx.obj['verbose'])
        if not ctx.obj['quiet']:
            Reporter().print_suite(tables)
            click.echo(f"Tables saved to: {cfg.out_dir}")
    except CollabError as exc:
        _fail(exc)


@cli.command()
@click.pass_context
@click.option('--rollouts', type=int, default=None, help='Rollouts per task and multiplier')
@click.option('--task', 'tasks', multiple=True, help='Restrict to instance (repeatable)')
@click.option('--seed', type=int, default=None, help='Seed of the first rollout')
@click.option('--out', 'out_dir', type=click.Path(), default=None, help='Output directory')
@click.option('--workers', type=int, default=None, help='Parallel worker processes')
def sweep(ctx, rollouts, tasks, seed, out_dir, workers):
    """
    Sweep the reward multiplier and write sweep.csv.

    \b
    Examples:
        collab-cli sweep --rollouts 10
        collab-cli sweep --task toast_coffee --rollouts 1
    """
    try:
        config, assets = _load(ctx)
        cfg = suite_config(config, rollouts=rollouts, seed=seed, out_dir=out_dir,
                           workers=workers)
        if tasks:
            unknown = [t for t in tasks if t not in cfg.tasks]
            if unknown:
                raise CollabError(f"unknown tasks: {', '.join(unknown)}")
            cfg = suite_config(config, rollouts=rollouts, seed=seed, out_dir=out_dir,
                               workers=workers, tasks={t: cfg.tasks[t] for t in tasks})
        table = multiplier_sweep(cfg, assets, progress=ctx.obj['verbose'])
        if not ctx.obj['quiet']:
            Reporter().print_sweep(table, interior_minima(table))
            click.echo(f"Sweep saved to: {Path(cfg.out_dir) / 'sweep.csv'}")
    except CollabError as exc:
        _fail(exc)


@cli.command()
@click.pass_context
def assets(ctx):
    """
    Report the inventory of the shipped assets.

    \b
    Examples:
        collab-cli assets
        collab-cli --config other.yaml assets
    """
    try:
        _, loaded = _load(ctx)
        Reporter().print_assets(describe_assets(loaded))
    except CollabError as exc:
        _fail(exc)


if __name__ == '__main__':
    cli()
