"""
Task anticipation - prompt building, next-task prediction and goal composition

A predictor sees a rendered prompt (task space, user history, scene, current
task) and returns upcoming task descriptors. Predictions are filtered against
the task space and the scene, and the current plus the first predicted task
are mapped to one joint goal through the goal template table.
"""

import json
import logging
import re
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import (AssetLoadError, MalformedResponse, NoTemplateMatch, PredictorUnavailable,
                     UnknownCurrentTask)
from .human_model import TaskScript
from .rddl_ast import Literal
from .rddl_lite import parse_literal

try:
    from typing import Protocol
except ImportError:  # pragma: no cover
    from typing_extensions import Protocol

logger = logging.getLogger(__name__)

FEW_SHOT = "few-shot"
CHAIN_OF_THOUGHT = "chain-of-thought"
STRATEGIES = (FEW_SHOT, CHAIN_OF_THOUGHT)

MAX_HISTORY = 3
PREDICTIONS = 4

# worked examples embedded in chain-of-thought prompts
COT_EXAMPLES = (
    ("serve salmon",
     "Salmon is a main course, so a drink usually follows; after the meal the "
     "plates are dirty, so washing follows the drink.",
     ["serve water", "wash dishes", "serve coffee", "clean sink"]),
    ("serve toast",
     "Toast is breakfast; breakfast is normally served with coffee, and the "
     "table is cleared afterwards.",
     ["serve coffee", "wash dishes", "serve juice", "set table"]),
)


# ---------------------------------------------------------------- assets

@dataclass(frozen=True)
class TaskSampleSpace:
    tasks: Tuple[str, ...]

    def __contains__(self, task: str) -> bool:
        return task in self.tasks

    def __len__(self) -> int:
        return len(self.tasks)


@dataclass(frozen=True)
class UserSequenceHistory:
    sequences: Tuple[Tuple[str, ...], ...] = ()  # most recent first

    def __post_init__(self):
        if len(self.sequences) > MAX_HISTORY:
            object.__setattr__(self, "sequences", tuple(self.sequences[:MAX_HISTORY]))


@dataclass(frozen=True)
class SceneGraph:
    rooms: Mapping[str, Tuple[str, ...]]
    agents: Mapping[str, str] = field(default_factory=dict)
    categories: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)

    def objects(self) -> Tuple[str, ...]:
        return tuple(o for objs in self.rooms.values() for o in objs)

    def room_of(self, obj: str) -> Optional[str]:
        for room, objs in self.rooms.items():
            if obj in objs:
                return room
        return None


@dataclass(frozen=True)
class GoalTemplate:
    pattern: str
    goal: Tuple[str, ...]

    @property
    def regex(self) -> "re.Pattern":
        parts = re.split(r"\{(\w+)\}", self.pattern)
        out = []
        for k, part in enumerate(parts):
            out.append(f"(?P<{part}>\\S+)" if k % 2 else re.escape(part))
        return re.compile("".join(out))

    def instantiate(self, task: str) -> Optional[Tuple[str, ...]]:
        m = self.regex.fullmatch(task)
        if m is None:
            return None
        return tuple(g.format(**m.groupdict()) for g in self.goal)


@dataclass(frozen=True)
class GoalTemplateTable:
    templates: Tuple[GoalTemplate, ...]
    steps: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)

    def goal_for(self, task: str) -> Tuple[Literal, ...]:
        for template in self.templates:
            literals = template.instantiate(task)
            if literals is not None:
                return tuple(parse_literal(text) for text in literals)
        raise NoTemplateMatch(f"no goal template matches task '{task}'")

    def matches(self, task: str) -> bool:
        return any(t.instantiate(task) is not None for t in self.templates)

    def script(self, task: str) -> TaskScript:
        if task not in self.steps:
            raise NoTemplateMatch(f"no step list for task '{task}'")
        return TaskScript.from_strings(task, self.steps[task])


def _read_json(path: Union[str, Path], what: str):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise AssetLoadError(f"cannot read {what} file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise AssetLoadError(f"{what} file {path} is not valid JSON: {exc}") from exc


def load_task_space(path: Union[str, Path]) -> TaskSampleSpace:
    data = _read_json(path, "task space")
    try:
        tasks = [" ".join([entry["verb"], *entry.get("args", [])]) for entry in data]
    except (TypeError, KeyError) as exc:
        raise AssetLoadError(f"malformed task space {path}: {exc}") from exc
    dupes = sorted(t for t, n in Counter(tasks).items() if n > 1)
    if dupes:
        raise AssetLoadError(f"duplicate tasks in {path}: {', '.join(dupes)}")
    return TaskSampleSpace(tuple(tasks))


def load_history(path: Union[str, Path]) -> UserSequenceHistory:
    data = _read_json(path, "sequence history")
    if not isinstance(data, list) or not all(isinstance(seq, list) for seq in data):
        raise AssetLoadError(f"{path} must hold an array of task sequences")
    return UserSequenceHistory(tuple(tuple(seq) for seq in data))


def load_scene(path: Union[str, Path]) -> SceneGraph:
    data = _read_json(path, "scene graph")
    try:
        rooms = {room: tuple(objs) for room, objs in data["rooms"].items()}
    except (TypeError, KeyError, AttributeError) as exc:
        raise AssetLoadError(f"malformed scene graph {path}: {exc}") from exc
    seen: Dict[str, str] = {}
    for room, objs in rooms.items():
        for obj in objs:
            if obj in seen:
                raise AssetLoadError(f"object '{obj}' is placed in both {seen[obj]} and {room}")
            seen[obj] = room
    categories = {k: tuple(v) for k, v in data.get("categories", {}).items()}
    return SceneGraph(rooms, dict(data.get("agents", {})), categories)


def load_goal_table(path: Union[str, Path]) -> GoalTemplateTable:
    data = _read_json(path, "goal template")
    try:
        templates = tuple(GoalTemplate(t["pattern"], tuple(t["goal"])) for t in data["templates"])
        steps = {task: tuple(s) for task, s in data.get("steps", {}).items()}
    except (TypeError, KeyError) as exc:
        raise AssetLoadError(f"malformed goal template table {path}: {exc}") from exc
    return GoalTemplateTable(templates, steps)


# ---------------------------------------------------------------- prompts

@dataclass(frozen=True)
class Prompt:
    strategy: str
    text: str
    current_task: str
    history: UserSequenceHistory
    space: TaskSampleSpace
    max_tokens: int = 500
    temperature: float = 0.2


def build_prompt(strategy: str, space: TaskSampleSpace, history: UserSequenceHistory,
                 scene: SceneGraph, current_task: str) -> Prompt:
    """Render the four prompt sections in fixed order: tasks, examples, scene, current task."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown prompt strategy '{strategy}'")
    if current_task not in space:
        raise UnknownCurrentTask(f"'{current_task}' is not in the task sample space")

    lines = ["### Task sample space"]
    lines += [f"- {task}" for task in space.tasks]

    if strategy == FEW_SHOT:
        lines += ["", "### Previous user sequences"]
        if history.sequences:
            for k, seq in enumerate(history.sequences, 1):
                lines.append(f"Example {k}: " + " -> ".join(seq))
        else:
            lines.append("(no previous sequences; answer zero-shot)")
    else:
        lines += ["", "### Worked examples"]
        for k, (task, reasoning, answer) in enumerate(COT_EXAMPLES, 1):
            lines.append(f"Example {k}: current task '{task}'.")
            lines.append(f"Reasoning: {reasoning}")
            lines.append(f"Answer: {json.dumps(answer)}")

    lines += ["", "### Scene"]
    for room, objs in scene.rooms.items():
        lines.append(f"{room}: {', '.join(objs)}")
    for agent, room in scene.agents.items():
        lines.append(f"{agent} is in the {room}")

    lines += ["", "### Current task", current_task, "",
              f"Predict the next {PREDICTIONS} tasks as a JSON array of task names "
              f"taken from the task sample space."]
    if strategy == CHAIN_OF_THOUGHT:
        lines.append("Think step by step, then give the answer array on the last line.")
    return Prompt(strategy, "\n".join(lines), current_task, history, space)


# ---------------------------------------------------------------- predictors

class TaskPredictor(Protocol):
    def predict(self, prompt: Prompt) -> List[str]:
        ...

    def plan_actions(self, prompt: Prompt, goal_tasks: Sequence[str]) -> List[str]:
        ...


class MockFrequencyPredictor:
    """
    Deterministic frequency model over the prompt's history.

    Ranks the tasks that follow the current task in the history sequences by
    how many sequences they follow it in, then by their mean distance from
    it, then by name. Fewer than four are padded with the task space in
    lexicographic order.
    """

    def __init__(self, table: Optional[GoalTemplateTable] = None):
        self.table = table

    def predict(self, prompt: Prompt) -> List[str]:
        counts: Counter = Counter()
        distance: Counter = Counter()
        for seq in prompt.history.sequences:
            if prompt.current_task not in seq:
                continue
            start = seq.index(prompt.current_task)
            seen = set()
            for gap, task in enumerate(seq[start + 1:], 1):
                if task == prompt.current_task or task in seen:
                    continue
                seen.add(task)
                counts[task] += 1
                distance[task] += gap

        chosen = sorted(counts, key=lambda t: (-counts[t], distance[t] / counts[t], t))
        chosen = chosen[:PREDICTIONS]
        for task in sorted(prompt.space.tasks):
            if len(chosen) >= PREDICTIONS:
                break
            if task not in chosen:
                chosen.append(task)
        return chosen

    def plan_actions(self, prompt: Prompt, goal_tasks: Sequence[str]) -> List[str]:
        if self.table is None:
            raise ValueError("mock action planning needs a goal template table")
        steps: List[str] = []
        for task in goal_tasks:
            steps.extend(str(step) for step in self.table.script(task).nominal().steps)
        return steps


class RemoteLLMPredictor:
    """Posts prompts to an HTTP JSON endpoint that answers with a JSON array of strings."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None, timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def _post(self, text: str, prompt: Prompt) -> List[str]:
        body = json.dumps({"prompt": text, "temperature": prompt.temperature,
                           "max_tokens": prompt.max_tokens}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                raw = response.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise PredictorUnavailable(f"predictor at {self.endpoint} unavailable: {exc}") from exc
        return parse_response(raw)

    def predict(self, prompt: Prompt) -> List[str]:
        return self._post(prompt.text, prompt)[:PREDICTIONS]

    def plan_actions(self, prompt: Prompt, goal_tasks: Sequence[str]) -> List[str]:
        text = (prompt.text + "\n\n### Goal tasks\n" + "\n".join(goal_tasks) +
                "\nInstead of predicting, list the robot steps for the goal tasks as a JSON "
                "array of strings of the form 'verb item location'.")
        return self._post(text, prompt)


def parse_response(raw: str) -> List[str]:
    """Parse a predictor answer; it must be a JSON array of strings."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"predictor answer is not JSON: {raw[:80]!r}") from exc
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise MalformedResponse("predictor answer is not a JSON array of strings")
    return data


def predict_tasks(predictor: TaskPredictor, prompt: Prompt,
                  fallback: Optional[TaskPredictor] = None) -> List[str]:
    """Up to four predicted tasks; remote failures fall back to ``fallback`` when given."""
    try:
        return list(predictor.predict(prompt))[:PREDICTIONS]
    except (PredictorUnavailable, MalformedResponse) as exc:
        if fallback is None:
            raise
        logger.warning("predictor failed (%s); using fallback", exc)
        return list(fallback.predict(prompt))[:PREDICTIONS]


def filter_valid(predicted: Sequence[str], space: TaskSampleSpace,
                 scene: SceneGraph) -> List[str]:
    """Keep predictions from the task space whose arguments exist in the scene, in order."""
    present = set(scene.objects())
    kept = []
    for task in predicted:
        if task not in space:
            continue
        if all(arg in present for arg in task.split()[1:]):
            kept.append(task)
    return kept


def compose_joint_goal(current_task: str, next_task: Optional[str],
                       table: GoalTemplateTable) -> Tuple[Literal, ...]:
    """Conjunction of the current and next task goals, duplicates removed."""
    literals = list(table.goal_for(current_task))
    if next_task:
        literals += table.goal_for(next_task)
    return tuple(dict.fromkeys(literals))
