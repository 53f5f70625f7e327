"""
IO Handler - asset loading and output paths for the collaboration planner
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import pandas as pd

from core.anticipation import load_goal_table, load_history, load_scene, load_task_space
from core.errors import AssetLoadError
from core.human_model import GroundTruthHumanModel, NoiseConfig
from core.rddl_lite import load_domain, load_instance
from core.simulator import Assets

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class IOHandler:
    """Handle file operations for the shipped assets and the result tables."""

    DEFAULT_PATHS = {
        'domain': 'data/household.rddl',
        'instances': 'data/instances',
        'tasks': 'data/master_tasks.json',
        'history': 'data/sequence.json',
        'scene': 'data/virtualhome_categories.json',
        'goals': 'data/rddl_goals.json',
        'ground_truth': 'data/human_ground_truth.yaml',
    }

    @staticmethod
    def validate_input(file_path: PathLike, what: str = "asset", directory: bool = False) -> Path:
        """
        Check that an asset path exists.

        Args:
            file_path: Path to check
            what: Asset kind used in the error message
            directory: Expect a directory instead of a file

        Returns:
            The path as a Path

        Raises:
            AssetLoadError: if the path is missing or of the wrong kind
        """
        path = Path(file_path)
        if not path.exists():
            raise AssetLoadError(f"{what} not found: {path}")
        if directory and not path.is_dir():
            raise AssetLoadError(f"{what} is not a directory: {path}")
        if not directory and not path.is_file():
            raise AssetLoadError(f"{what} is not a file: {path}")
        return path

    @staticmethod
    def resolve_paths(paths: Optional[Mapping[str, PathLike]] = None,
                      base_dir: Optional[PathLike] = None) -> Dict[str, Path]:
        """Default asset paths overlaid with ``paths``; relative ones resolve against ``base_dir``."""
        merged = dict(IOHandler.DEFAULT_PATHS)
        merged.update({k: v for k, v in (paths or {}).items() if v})
        unknown = sorted(set(merged) - set(IOHandler.DEFAULT_PATHS))
        if unknown:
            raise AssetLoadError(f"unknown asset keys: {', '.join(unknown)}")
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        return {k: (Path(v) if Path(v).is_absolute() else base / v) for k, v in merged.items()}

    @staticmethod
    def load_assets(paths: Optional[Mapping[str, PathLike]] = None,
                    base_dir: Optional[PathLike] = None,
                    noise: Optional[NoiseConfig] = None) -> Assets:
        """
        Load the domain, every instance and the anticipation / human assets.

        Raises:
            AssetLoadError: missing or malformed files (the message names the path)
            RddlError: domain or instance files that do not parse or check
        """
        p = IOHandler.resolve_paths(paths, base_dir)
        domain = load_domain(IOHandler.validate_input(p['domain'], "domain file"))
        inst_dir = IOHandler.validate_input(p['instances'], "instance directory", directory=True)
        instances = {}
        for path in sorted(inst_dir.glob("*.rddl")):
            inst = load_instance(path, domain)
            if inst.name in instances:
                raise AssetLoadError(f"instance '{inst.name}' is defined twice ({path})")
            instances[inst.name] = inst
        if not instances:
            raise AssetLoadError(f"no instance files in {inst_dir}")

        space = load_task_space(IOHandler.validate_input(p['tasks'], "task sample space"))
        goals = load_goal_table(IOHandler.validate_input(p['goals'], "goal template table"))
        missing = [t for t in space.tasks if not goals.matches(t)]
        if missing:
            raise AssetLoadError(f"no goal template for tasks: {', '.join(missing)}")

        assets = Assets(
            domain=domain,
            instances=instances,
            space=space,
            history=load_history(IOHandler.validate_input(p['history'], "sequence history")),
            scene=load_scene(IOHandler.validate_input(p['scene'], "scene graph")),
            goals=goals,
            ground_truth=GroundTruthHumanModel.from_yaml(
                IOHandler.validate_input(p['ground_truth'], "human ground truth"), noise),
            paths={k: str(v) for k, v in p.items()},
        )
        logger.debug("loaded %d instances and %d tasks", len(instances), len(space))
        return assets

    @staticmethod
    def create_output_path(out_dir: PathLike, name: str, extension: str = ".csv") -> Path:
        """
        Create the output directory and return the path of ``name`` inside it.

        Args:
            out_dir: Output directory
            name: File stem
            extension: File extension

        Returns:
            Output file path
        """
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        return directory / f"{name}{extension}"

    @staticmethod
    def read_table(file_path: PathLike) -> pd.DataFrame:
        return pd.read_csv(IOHandler.validate_input(file_path, "result table"))
