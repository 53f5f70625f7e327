"""
Rollout harness - the predict, plan, act, observe loop

One rollout plays a sequence of household tasks in one instance. The hidden
ground-truth human works through the current task's script while the robot
follows its plan for the joint goal (current task plus the predicted next
one). Failures are read off fluent deltas and classified as prevented,
recovered or unhandled once the trace is complete.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .anticipation import (FEW_SHOT, GoalTemplateTable, MockFrequencyPredictor,
                           RemoteLLMPredictor, SceneGraph, TaskPredictor, TaskSampleSpace,
                           UserSequenceHistory, build_prompt, compose_joint_goal, filter_valid,
                           predict_tasks)
from .errors import ConfigError, InapplicableAction, NoTemplateMatch, UnreachableGoal
from .grounding import ground, ground_name
from .human_model import (GroundTruthHumanModel, LearnedHumanModel, NoiseConfig, TaskInstance,
                          ScriptStep, TaskScript, UniformHumanModel, agent_object, agent_room,
                          bootstrap_model, scripted_action, script_policy, simulate_trial,
                          step_action, step_room, update_online)
from .landmarks import derive_subgoals, drop_subgoals, validate_subgoals
from .mdp import (HUMAN, NOOP, ROBOT, GroundLiteral, GroundMdp, JointAction, State, SubgoalSet,
                  goal_satisfied, is_applicable, resolve_joint_action, reward_breakdown,
                  successor, with_goal)
from .planner import Plan, PlannerConfig, plan
from .rddl_ast import DomainSpec, InstanceSpec, Literal

logger = logging.getLogger(__name__)

OURS = "ours"
RDDL_BASELINE = "rddl_baseline"
LLM_BASELINE = "llm_baseline"
AGENT_MODES = (OURS, RDDL_BASELINE, LLM_BASELINE)

ON_DEVIATION = "on_deviation"
EVERY_STEP = "every_step"
REPLAN_POLICIES = (ON_DEVIATION, EVERY_STEP)

DROP_FRAGILE = "drop_fragile"
SPILL = "spill"
DEVIATION = "deviation"

PREVENTED = "prevented"
RECOVERED = "recovered"
UNHANDLED = "unhandled"


# ---------------------------------------------------------------- assets

@dataclass
class Assets:
    """Everything a rollout reads from disk; grounded worlds are cached per instance."""

    domain: DomainSpec
    instances: Mapping[str, InstanceSpec]
    space: TaskSampleSpace
    history: UserSequenceHistory
    scene: SceneGraph
    goals: GoalTemplateTable
    ground_truth: GroundTruthHumanModel
    paths: Mapping[str, str] = field(default_factory=dict)
    _worlds: Dict[str, GroundMdp] = field(default_factory=dict, repr=False)

    def world(self, name: str) -> GroundMdp:
        if name not in self._worlds:
            if name not in self.instances:
                raise KeyError(f"unknown instance '{name}'")
            self._worlds[name] = ground(self.domain, self.instances[name])
        return self._worlds[name]


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class RolloutConfig:
    task: str                      # instance name
    tasks: Tuple[str, ...]         # task sequence the human performs
    agent_mode: str = OURS
    seed: int = 0
    max_steps: int = 60            # per task
    multiplier: float = 1.0
    replan: str = ON_DEVIATION
    planner: PlannerConfig = PlannerConfig()
    noise: Optional[NoiseConfig] = None  # None keeps the ground truth's own noise
    strategy: str = FEW_SHOT
    bootstrap_trials: int = 10
    remote_predictor: bool = False
    remote_endpoint: Optional[str] = None  # falls back to $COLLAB_LLM_ENDPOINT
    model_cache: Optional[str] = None      # behaviour model JSON reused across rollouts

    def __post_init__(self):
        if self.agent_mode not in AGENT_MODES:
            raise ConfigError(f"unknown agent mode '{self.agent_mode}'")
        if self.replan not in REPLAN_POLICIES:
            raise ConfigError(f"unknown replan policy '{self.replan}'")
        if not self.tasks:
            raise ConfigError("a rollout needs at least one task")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.multiplier < 0:
            raise ConfigError("reward multiplier must be non-negative")
        if self.bootstrap_trials < 1:
            raise ConfigError("bootstrap_trials must be at least 1")


# ---------------------------------------------------------------- trace records

@dataclass(frozen=True)
class FailureEvent:
    step: int
    kind: str
    item: str
    location: str
    task: str = ""
    handled: str = UNHANDLED


@dataclass(frozen=True)
class TraceStep:
    step: int
    task: str
    robot: str
    human: str
    outcome: str  # success | failure | none
    reward: float
    parts: Mapping[str, float]
    added: Tuple[str, ...]
    removed: Tuple[str, ...]
    fired: Tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskOutcome:
    task: str
    completed: bool
    reason: str  # goal | step_limit | unreachable
    steps: int
    actions: int
    subgoals: int
    subgoals_met: int
    predicted: Optional[str] = None
    replans: int = 0

    @property
    def subgoal_rate(self) -> float:
        return self.subgoals_met / self.subgoals if self.subgoals else 0.0


@dataclass
class ExecutionTrace:
    task: str
    mode: str
    seed: int
    multiplier: float
    steps: List[TraceStep] = field(default_factory=list)
    tasks: List[TaskOutcome] = field(default_factory=list)
    failures: List[FailureEvent] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"record": "rollout", "task": self.task, "mode": self.mode,
                             "seed": self.seed, "multiplier": self.multiplier}, sort_keys=True)]
        lines += [json.dumps({"record": "step", **asdict(st)}, sort_keys=True) for st in self.steps]
        lines += [json.dumps({"record": "task", **asdict(t)}, sort_keys=True) for t in self.tasks]
        lines += [json.dumps({"record": "failure", **asdict(ev)}, sort_keys=True)
                  for ev in self.failures]
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionTrace":
        trace = None
        for line in text.splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            kind = row.pop("record")
            if kind == "rollout":
                trace = cls(row["task"], row["mode"], row["seed"], row["multiplier"])
            elif kind == "step":
                for key in ("added", "removed", "fired"):
                    row[key] = tuple(row[key])
                trace.steps.append(TraceStep(**row))
            elif kind == "task":
                trace.tasks.append(TaskOutcome(**row))
            elif kind == "failure":
                trace.failures.append(FailureEvent(**row))
        if trace is None:
            raise ValueError("trace has no rollout header")
        return trace

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExecutionTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class MetricsRecord:
    avg_actions: float
    failures: int
    failures_prevented: int
    failures_recovered: int
    task_completion_rate: float
    subgoal_completion_rate: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


# ---------------------------------------------------------------- failures

def _set_bits(bits: int):
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def _fluent_delta(mdp: GroundMdp, prev: State, nxt: State) -> Tuple[List[int], List[int]]:
    changed = prev.assignment ^ nxt.assignment
    added = [i for i in _set_bits(changed & nxt.assignment)]
    removed = [i for i in _set_bits(changed & prev.assignment)]
    return added, removed


def detect_failure(mdp: GroundMdp, prev: State, nxt: State,
                   task_rooms: Optional[Set[str]] = None, task: str = "") -> List[FailureEvent]:
    """Failure events between two consecutive states."""
    added, _ = _fluent_delta(mdp, prev, nxt)
    broken, messes = [], []
    for i in added:
        name, args = mdp.fluent_atoms[i]
        if name == "broken":
            broken.append(args[0])
        elif name == "mess":
            messes.append(args[0])

    events: List[FailureEvent] = []
    claimed = set()
    for item in broken:
        location = next((l for l in messes if _located(mdp, nxt, item, l)), None)
        if location is None:
            location = next((l for l in mdp.objects_of("location") if _located(mdp, nxt, item, l)),
                            messes[0] if messes else "")
        claimed.add(location)
        events.append(FailureEvent(prev.step, DROP_FRAGILE, item, location, task))
    for location in messes:
        if location in claimed:
            continue
        events.append(FailureEvent(prev.step, SPILL, _spilled_item(mdp, prev, location), location,
                                   task))

    if task_rooms:
        before, after = agent_room(mdp, prev, HUMAN), agent_room(mdp, nxt, HUMAN)
        if before in task_rooms and after is not None and after not in task_rooms:
            events.append(FailureEvent(prev.step, DEVIATION, "", after, task))
    return events


def _located(mdp: GroundMdp, s: State, item: str, location: str) -> bool:
    i = mdp.fluent_index.get(ground_name("obj-loc", (item, location)))
    return i is not None and s.holds(i)


def _spilled_item(mdp: GroundMdp, prev: State, location: str) -> str:
    human = agent_object(mdp, HUMAN)
    for item in mdp.objects_of("item"):
        i = mdp.fluent_index.get(ground_name("human-holding", (human, item)))
        if i is not None and prev.holds(i):
            return item
    for item in mdp.objects_of("item"):
        if mdp.non_fluent("liquid", item) and _located(mdp, prev, item, location):
            return item
    return ""


def classify_handling(trace: ExecutionTrace) -> List[FailureEvent]:
    """
    Label every failure event of a finished trace.

    Detected failures are recovered when a later robot mop of the same
    location in the same task clears the mess, unhandled otherwise. Every
    first firing of the prevention pattern for an item that never breaks in
    that task adds a prevented event.
    """
    completed = {t.task: t.completed for t in trace.tasks}
    by_task: Dict[str, List[TraceStep]] = {}
    for st in trace.steps:
        by_task.setdefault(st.task, []).append(st)

    labelled: List[FailureEvent] = []
    for ev in trace.failures:
        if ev.handled == PREVENTED:
            continue
        if ev.kind == DEVIATION:
            handled = RECOVERED if completed.get(ev.task) else UNHANDLED
        else:
            mess = ground_name("mess", (ev.location,))
            handled = UNHANDLED
            for st in by_task.get(ev.task, ()):
                if st.step > ev.step and st.robot.startswith("robot_mop(") and mess in st.removed:
                    handled = RECOVERED
                    break
        labelled.append(replace(ev, handled=handled))

    for task, steps in by_task.items():
        seen = set()
        for st in steps:
            for key in st.fired:
                if not key.startswith("r1_prevent["):
                    continue
                item = key[len("r1_prevent["):-1]
                broke = ground_name("broken", (item,))
                if item in seen or any(broke in other.added for other in steps):
                    continue
                seen.add(item)
                location = st.robot[st.robot.find("(") + 1:-1].split(",")[-1]
                labelled.append(FailureEvent(st.step, DROP_FRAGILE, item, location, task,
                                             PREVENTED))
    return sorted(labelled, key=lambda ev: (ev.step, ev.kind, ev.item, ev.handled))


def metrics_from_trace(trace: ExecutionTrace) -> MetricsRecord:
    done = [t for t in trace.tasks if t.completed]
    counted = [ev for ev in trace.failures if ev.kind != DEVIATION]
    n = len(trace.tasks)
    return MetricsRecord(
        avg_actions=float(np.mean([t.actions for t in done])) if done else 0.0,
        failures=sum(1 for ev in counted if ev.handled != PREVENTED),
        failures_prevented=sum(1 for ev in counted if ev.handled == PREVENTED),
        failures_recovered=sum(1 for ev in counted if ev.handled == RECOVERED),
        task_completion_rate=len(done) / n if n else 0.0,
        subgoal_completion_rate=float(np.mean([t.subgoal_rate for t in trace.tasks])) if n else 0.0,
    )


# ---------------------------------------------------------------- helpers

def ground_goal(mdp: GroundMdp, literals: Sequence[Literal]) -> Optional[Tuple[GroundLiteral, ...]]:
    """Ground goal literals; None when some fluent does not exist in this world."""
    out = []
    for lit in literals:
        i = mdp.fluent_index.get(ground_name(lit.name, lit.args))
        if i is None:
            return None
        out.append((i, lit.positive))
    return tuple(dict.fromkeys(out))


def task_rooms(mdp: GroundMdp, script: TaskScript) -> Set[str]:
    rooms = {step_room(mdp, step) for step in script.nominal().steps}
    rooms.discard(None)
    return rooms


def validate_subgoals_by_rollout(mdp: GroundMdp, subgoals: SubgoalSet,
                                 script: Union[TaskScript, Sequence[TaskScript]],
                                 max_steps: Optional[int] = None,
                                 start: Optional[State] = None) -> List[str]:
    """
    Subgoals a noiseless human working alone never reaches (empty when all are met).

    Several scripts are played back to back, each from where the previous one
    stopped, so a joint goal is checked against the current and the next task.
    """
    scripts = [script] if isinstance(script, TaskScript) else list(script)
    gt = GroundTruthHumanModel.noiseless()
    rng = np.random.default_rng(0)
    s = start or mdp.initial_state
    states = [s]
    for sc in scripts:
        trajectory = simulate_trial(TaskInstance(sc.task, replace(mdp, initial_state=s), sc),
                                    gt, rng, max_steps)
        states += [st.next_state for st in trajectory]
        s = states[-1]
    return validate_subgoals(subgoals, states)


def make_predictor(cfg: RolloutConfig, assets: Assets) -> Tuple[TaskPredictor, TaskPredictor]:
    """(predictor, fallback) for a rollout."""
    mock = MockFrequencyPredictor(assets.goals)
    endpoint = cfg.remote_endpoint or os.environ.get("COLLAB_LLM_ENDPOINT")
    if cfg.remote_predictor and endpoint:
        return RemoteLLMPredictor(endpoint, os.environ.get("COLLAB_LLM_API_KEY")), mock
    if cfg.remote_predictor:
        logger.warning("remote predictor requested without an endpoint; using the mock")
    return mock, mock


# ---------------------------------------------------------------- rollout

class _Rollout:
    """State shared by the task loop of one rollout."""

    def __init__(self, cfg: RolloutConfig, assets: Assets):
        self.cfg = cfg
        self.assets = assets
        self.world = assets.world(cfg.task)
        self.gt = assets.ground_truth
        if cfg.noise is not None:
            self.gt = replace(self.gt, noise=cfg.noise)
        boot, human, _ = np.random.SeedSequence(cfg.seed).spawn(3)
        self.boot_rng = np.random.default_rng(boot)
        self.rng = np.random.default_rng(human)
        self.predictor, self.fallback = make_predictor(cfg, assets)
        self.trace = ExecutionTrace(cfg.task, cfg.agent_mode, cfg.seed, self.multiplier)
        self.behavior = self._behavior()
        self.planned = 0

    @property
    def multiplier(self) -> float:
        return 0.0 if self.cfg.agent_mode == RDDL_BASELINE else self.cfg.multiplier

    def _behavior(self) -> Optional[LearnedHumanModel]:
        if self.cfg.agent_mode == RDDL_BASELINE:
            return UniformHumanModel()
        if self.cfg.agent_mode == LLM_BASELINE:
            return None
        cache = self.cfg.model_cache
        if cache and Path(cache).exists():
            logger.debug("behaviour model loaded from %s", cache)
            return LearnedHumanModel.load(cache)
        tasks = []
        for name in self.cfg.tasks:
            goal = ground_goal(self.world, self.assets.goals.goal_for(name))
            if goal is None:
                continue
            tasks.append(TaskInstance(name, with_goal(self.world, goal, focus=False),
                                      self.assets.goals.script(name)))
        return bootstrap_model(tasks, self.gt, self.boot_rng, self.cfg.bootstrap_trials)

    # -- anticipation
    def anticipate(self, task: str) -> Tuple[Optional[str], List[str]]:
        a = self.assets
        prompt = build_prompt(self.cfg.strategy, a.space, a.history, a.scene, task)
        predicted = predict_tasks(self.predictor, prompt, self.fallback)
        candidates = [t for t in filter_valid(predicted, a.space, a.scene) if t != task]
        return (candidates[0] if candidates else None), candidates

    def joint_goal(self, task: str, candidates: Sequence[str], s: State
                   ) -> Tuple[Tuple[GroundLiteral, ...], Optional[str], SubgoalSet]:
        """First candidate whose joint goal grounds and is reachable; else the task alone."""
        table = self.assets.goals
        for nxt in list(candidates) + [None]:
            try:
                goal = ground_goal(self.world, compose_joint_goal(task, nxt, table))
                if goal is None:
                    continue
                return goal, nxt, self.validated(goal, derive_subgoals(self.world, goal, s),
                                                 [task] + ([nxt] if nxt else []), s)
            except (NoTemplateMatch, UnreachableGoal) as exc:
                logger.debug("joint goal %s + %s rejected: %s", task, nxt, exc)
        raise UnreachableGoal(f"goal of '{task}' is unreachable from the current state")

    def validated(self, goal: Tuple[GroundLiteral, ...], subgoals: SubgoalSet,
                  tasks: Sequence[str], s: State) -> SubgoalSet:
        """Drop subgoals a lone human following the task scripts never reaches."""
        scripts = [self.assets.goals.script(t) for t in tasks]
        mdp = with_goal(self.world, goal, focus=False)
        missed = [name for name in validate_subgoals_by_rollout(mdp, subgoals, scripts,
                                                                self.cfg.max_steps, s)
                  if name != "goal"]
        if missed:
            logger.warning("%s: dropping subgoals no simulated run reaches: %s",
                           " + ".join(tasks), ", ".join(missed))
            subgoals = drop_subgoals(subgoals, missed)
        return subgoals

    def plan_from(self, mdp: GroundMdp, s: State, forecast) -> Plan:
        pcfg = replace(self.cfg.planner, seed=self.cfg.seed * 1009 + self.planned)
        self.planned += 1
        return plan(mdp, self.behavior, s, pcfg, forecast)

    # -- one environment step
    def step(self, mdp: GroundMdp, s: State, robot: str, human: str, task: str
             ) -> Tuple[State, TraceStep, bool]:
        world = self.world
        a = resolve_joint_action(world, s, JointAction(robot, human))
        ok = True
        if a.human != NOOP:
            ok = self.gt.outcome(world, a.human, self.rng)
        nxt = successor(mdp, s, a, ok, self.rng)
        parts = reward_breakdown(mdp, s, a, nxt)
        added, removed = _fluent_delta(world, s, nxt)
        record = TraceStep(
            step=s.step, task=task, robot=a.robot, human=a.human,
            outcome="none" if a.human == NOOP else ("success" if ok else "failure"),
            reward=round(sum(v for k, v in parts.items()
                             if k not in ("r1_prevent", "r2_prepare", "r3_penalty")), 6),
            parts={k: round(v, 6) for k, v in sorted(parts.items())},
            added=tuple(world.fluents[i] for i in added),
            removed=tuple(world.fluents[i] for i in removed),
            fired=tuple(sorted(nxt.milestones - s.milestones)))
        if self.cfg.agent_mode == OURS and a.human != NOOP:
            update_online(self.behavior, (s, a.human, nxt), world)
        return nxt, record, a != JointAction()

    def run(self) -> ExecutionTrace:
        s = self.world.initial_state
        for task in self.cfg.tasks:
            s = self.run_task(task, State(s.assignment, s.step))
        self.trace.failures = classify_handling(self.trace)
        if self.cfg.model_cache and self.cfg.agent_mode == OURS:
            path = Path(self.cfg.model_cache)
            path.parent.mkdir(parents=True, exist_ok=True)
            partial = path.with_name(f"{path.name}.{os.getpid()}")
            self.behavior.save(partial)
            os.replace(partial, path)
        return self.trace

    def human_action(self, script: TaskScript, s: State, state: Dict) -> str:
        if state["left"]:
            away = self.gt.away_room
            if away and agent_room(self.world, s, HUMAN) != away:
                move = ground_name("human_move", (agent_object(self.world, HUMAN), away))
                return move if is_applicable(self.world, s, move) else NOOP
            return NOOP
        action = scripted_action(self.world, script, s)
        if action != NOOP and self.gt.deviates(state["acted"], self.rng):
            logger.debug("human walks away from the task at step %d", s.step)
            state["left"] = True
            return self.human_action(script, s, state)
        if action != NOOP:
            state["acted"] += 1
        return action

    def run_task(self, task: str, s: State) -> State:
        world, cfg = self.world, self.cfg
        script_table = self.assets.goals.script(task)
        script = self.gt.choose_script(script_table, world, self.rng)
        rooms = task_rooms(world, script_table)
        task_goal = ground_goal(world, self.assets.goals.goal_for(task))
        predicted, candidates = self.anticipate(task)
        try:
            if task_goal is None:
                raise UnreachableGoal(f"task '{task}' refers to objects missing from {world.name}")
            measured = derive_subgoals(world, task_goal, s)
            goal, predicted, subgoals = self.joint_goal(task, candidates, s)
        except UnreachableGoal as exc:
            logger.debug("%s: %s", task, exc)
            self.trace.tasks.append(TaskOutcome(task, False, "unreachable", 0, 0, 1, 0, predicted))
            return s
        mdp = with_goal(world, goal, self.multiplier, subgoals=subgoals)

        pending = {k: sg for k, sg in enumerate(measured.subgoals)}
        human = {"left": False, "acted": 0}
        steps = actions = replans = 0
        opener = _OpenLoop(self, task, predicted, s) if cfg.agent_mode == LLM_BASELINE else None
        forecast = script_policy(world, script_table)
        current: Optional[Plan] = None
        cursor = 0
        reason = "step_limit"

        while steps < cfg.max_steps:
            for k in [k for k, sg in pending.items() if goal_satisfied(s, sg.literals)]:
                del pending[k]
            if goal_satisfied(s, task_goal):
                reason = "goal"
                break
            if opener is not None:
                robot = opener.next_action(s)
            else:
                if current is None or cursor >= len(current) or cfg.replan == EVERY_STEP:
                    current, cursor = self.plan_from(mdp, s, forecast), 0
                    replans += 1
                robot = current.steps[cursor].action.robot if len(current) else NOOP
                if not is_applicable(world, s, robot):
                    robot, current = NOOP, None
            try:
                nxt, record, acted = self.step(mdp, s, robot, self.human_action(script, s, human),
                                               task)
            except InapplicableAction:
                nxt, record, acted = self.step(mdp, s, NOOP, NOOP, task)
            self.trace.steps.append(record)
            self.trace.failures.extend(detect_failure(world, s, nxt, rooms, task))
            steps += 1
            actions += int(acted)
            if current is not None:
                cursor += 1
                expected = current.steps[cursor].state if cursor < len(current) else None
                if expected is None or expected.assignment != nxt.assignment:
                    current = None
            s = nxt
        else:
            for k in [k for k, sg in pending.items() if goal_satisfied(s, sg.literals)]:
                del pending[k]
            if goal_satisfied(s, task_goal):
                reason = "goal"

        met = len(measured.subgoals) - len(pending)
        self.trace.tasks.append(TaskOutcome(task, reason == "goal", reason, steps, actions,
                                            len(measured.subgoals), met, predicted, replans))
        logger.debug("%s [%s] %s after %d steps (%d/%d subgoals, %d plans)", task,
                     cfg.agent_mode, reason, steps, met, len(measured.subgoals), replans)
        return s


class _OpenLoop:
    """Robot side of the LLM baseline: one flat step list, executed without replanning."""

    def __init__(self, rollout: _Rollout, task: str, predicted: Optional[str], s: State):
        a = rollout.assets
        prompt = build_prompt(rollout.cfg.strategy, a.space, a.history, a.scene, task)
        goal_tasks = [task] + ([predicted] if predicted else [])
        try:
            steps = rollout.predictor.plan_actions(prompt, goal_tasks)
        except Exception as exc:  # remote failures fall back to the mock
            logger.warning("action planning failed (%s); using fallback", exc)
            steps = rollout.fallback.plan_actions(prompt, goal_tasks)
        self.world = rollout.world
        self.steps = [ScriptStep.parse(text) for text in steps if text.strip()]
        self.cursor = 0

    def next_action(self, s: State) -> str:
        while self.cursor < len(self.steps):
            step = self.steps[self.cursor]
            room = step_room(self.world, step)
            if room is not None and agent_room(self.world, s, ROBOT) != room:
                return ground_name("robot_move", (agent_object(self.world, ROBOT), room))
            self.cursor += 1
            try:
                action = step_action(self.world, step, ROBOT)
            except (IndexError, KeyError):
                continue
            if is_applicable(self.world, s, action):
                return action
        return NOOP


def run_rollout(cfg: RolloutConfig, assets: Assets) -> Tuple[ExecutionTrace, MetricsRecord]:
    """Run one seeded rollout in the mode named by ``cfg.agent_mode``."""
    if cfg.task not in assets.instances:
        raise ConfigError(f"unknown task instance '{cfg.task}'")
    horizon = assets.world(cfg.task).horizon
    if cfg.max_steps < horizon:
        raise ConfigError(f"max_steps {cfg.max_steps} is below the horizon {horizon} "
                          f"of '{cfg.task}'")
    trace = _Rollout(cfg, assets).run()
    return trace, metrics_from_trace(trace)


def run_baseline_llm(cfg: RolloutConfig, assets: Assets) -> Tuple[ExecutionTrace, MetricsRecord]:
    return run_rollout(replace(cfg, agent_mode=LLM_BASELINE), assets)


def run_baseline_rddl(cfg: RolloutConfig, assets: Assets) -> Tuple[ExecutionTrace, MetricsRecord]:
    return run_rollout(replace(cfg, agent_mode=RDDL_BASELINE), assets)
