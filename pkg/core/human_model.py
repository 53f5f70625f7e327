"""
Human behaviour: the hidden ground-truth agent used by the simulator and the
behaviour model the robot learns from observed trials.

The two sides only share the task scripts and the ``TrialStep`` record; the
planner never sees ``GroundTruthHumanModel``.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .errors import AssetLoadError, EmptyTrajectorySet
from .grounding import ground_name
from .mdp import (HUMAN, NOOP, GroundMdp, JointAction, State, goal_satisfied,
                  is_applicable, successor)

logger = logging.getLogger(__name__)

SUCCESS = "success"
FAILURE = "failure"
OUTCOMES = (SUCCESS, FAILURE)

HANDLING_VERBS = ("pick", "place", "put_in")

Context = Tuple[str, str, Tuple[str, ...], bool]  # (room, schema, parameter types, fragile)


# ---------------------------------------------------------------- noise

@dataclass(frozen=True)
class NoiseConfig:
    mean: float = 0.0
    stddev: float = 0.1
    threshold_ratio: float = 0.5
    fragile_scale: float = 1.5
    verb_scale: Mapping[str, float] = field(default_factory=dict)
    enabled: bool = True

    def __post_init__(self):
        if self.stddev <= 0:
            raise ValueError("noise stddev must be > 0")
        if self.threshold_ratio <= 0:
            raise ValueError("noise threshold ratio must be > 0")

    @property
    def failure_threshold(self) -> float:
        return self.threshold_ratio * self.stddev

    def complexity_scale(self, verb: str, fragile: bool) -> float:
        scale = float(self.verb_scale.get(verb, 1.0))
        if fragile and verb in HANDLING_VERBS:
            scale *= self.fragile_scale
        return scale


def effective_probability(p: float, noise: float, threshold: float) -> float:
    """Noise beyond the threshold scales ``p`` by ``1 + noise``; smaller noise is filtered out."""
    if abs(noise) <= threshold:
        return p
    return min(1.0, max(0.0, p * (1.0 + noise)))


def perturb_outcome(p: float, config: NoiseConfig, rng: np.random.Generator,
                    scale: float = 1.0) -> bool:
    """
    Draw a success/failure outcome for a nominal success probability.

    Args:
        p: Nominal success probability
        config: Noise settings
        rng: Random source
        scale: Task complexity multiplier on the noise spread

    Returns:
        True on success
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"not a probability: {p}")
    if config.enabled:
        noise = rng.normal(config.mean, config.stddev * scale)
        p = effective_probability(p, noise, config.failure_threshold * scale)
    return bool(rng.random() < p)


# ---------------------------------------------------------------- task scripts

@dataclass(frozen=True)
class ScriptStep:
    verb: str
    args: Tuple[Tuple[str, ...], ...]  # alternatives per argument

    @classmethod
    def parse(cls, text: str) -> "ScriptStep":
        verb, *args = text.split()
        return cls(verb, tuple(tuple(a.split("|")) for a in args))

    @property
    def options(self) -> int:
        return max((len(a) for a in self.args), default=1)

    def resolve(self, choice: int) -> "ScriptStep":
        return ScriptStep(self.verb, tuple((a[min(choice, len(a) - 1)],) for a in self.args))

    @property
    def concrete_args(self) -> Tuple[str, ...]:
        return tuple(a[0] for a in self.args)

    def __str__(self) -> str:
        return " ".join([self.verb] + ["|".join(a) for a in self.args])


@dataclass(frozen=True)
class TaskScript:
    """Nominal step list of one task; moves between rooms are implicit."""

    task: str
    steps: Tuple[ScriptStep, ...]

    @classmethod
    def from_strings(cls, task: str, steps: Sequence[str]) -> "TaskScript":
        return cls(task, tuple(ScriptStep.parse(s) for s in steps))

    @property
    def options(self) -> int:
        return max((s.options for s in self.steps), default=1)

    def resolve(self, choice: int) -> "TaskScript":
        return TaskScript(self.task, tuple(s.resolve(choice) for s in self.steps))

    def nominal(self) -> "TaskScript":
        return self.resolve(0)

    def alternative_items(self) -> List[Tuple[str, ...]]:
        return [s.args[0] for s in self.steps if s.verb in HANDLING_VERBS and len(s.args[0]) > 1]


@dataclass(frozen=True)
class TaskInstance:
    name: str
    mdp: GroundMdp
    script: TaskScript


def agent_object(mdp: GroundMdp, agent: str) -> str:
    return mdp.objects_of(agent)[0]


def agent_room(mdp: GroundMdp, s: State, agent: str = HUMAN) -> Optional[str]:
    who = agent_object(mdp, agent)
    for room in mdp.objects_of("room"):
        if s.holds(mdp.index(ground_name(f"{agent}-loc", (who, room)))):
            return room
    return None


def step_action(mdp: GroundMdp, step: ScriptStep, agent: str = HUMAN) -> str:
    return ground_name(f"{agent}_{step.verb}", (agent_object(mdp, agent),) + step.concrete_args)


def step_room(mdp: GroundMdp, step: ScriptStep) -> Optional[str]:
    args = step.concrete_args
    if step.verb == "move":
        return args[0]
    return mdp.room_of(args[-1]) if args else None


def step_effect(mdp: GroundMdp, step: ScriptStep, agent: str = HUMAN) -> Tuple[int, bool]:
    args = step.concrete_args
    who = agent_object(mdp, agent)
    if step.verb == "pick":
        name = ground_name(f"{agent}-holding", (who, args[0]))
    elif step.verb in ("place", "put_in"):
        name = ground_name("obj-loc", args)
    elif step.verb == "switch":
        name = ground_name("switched_on", args)
    elif step.verb == "open":
        name = ground_name("opened", args)
    elif step.verb == "move":
        name = ground_name(f"{agent}-loc", (who, args[0]))
    else:
        raise ValueError(f"unknown step verb '{step.verb}'")
    return mdp.literal(name)


def next_step(mdp: GroundMdp, script: TaskScript, s: State,
              agent: str = HUMAN) -> Optional[ScriptStep]:
    """The step after the latest one whose effect already holds (None when done)."""
    done = -1
    for k in range(len(script.steps) - 1, -1, -1):
        i, v = step_effect(mdp, script.steps[k], agent)
        if s.holds(i) == v:
            done = k
            break
    if done + 1 >= len(script.steps):
        return None
    return script.steps[done + 1]


def scripted_action(mdp: GroundMdp, script: TaskScript, s: State, agent: str = HUMAN) -> str:
    """Action the scripted agent takes in ``s``: walk to the step's room, then do the step."""
    step = next_step(mdp, script, s, agent)
    if step is None:
        return NOOP
    room = step_room(mdp, step)
    if room is not None and agent_room(mdp, s, agent) != room:
        action = ground_name(f"{agent}_move", (agent_object(mdp, agent), room))
    else:
        action = step_action(mdp, step, agent)
    return action if is_applicable(mdp, s, action) else NOOP


def script_policy(mdp: GroundMdp, script: TaskScript) -> Callable[[State], str]:
    """Forecast of the human's next action used by the planner."""
    nominal = script.nominal()
    return lambda s: scripted_action(mdp, nominal, s, HUMAN)


def context_of(mdp: GroundMdp, action: str, s: Optional[State] = None) -> Context:
    """
    Abstract context an outcome is counted under.

    Moves are keyed on their destination room whatever the start. Other
    actions are keyed on the room the human stands in when ``s`` is given,
    and on the room of the target location otherwise.
    """
    act = mdp.action(action)
    if act.schema.endswith("_move"):
        room = act.args[-1]
    else:
        room = (agent_room(mdp, s, HUMAN) if s is not None else None) \
            or mdp.room_of(act.args[-1]) or ""
    fragile = bool(act.item and mdp.non_fluent("fragile", act.item))
    return (room, act.schema, tuple(act.types), fragile)


def infer_outcome(mdp: GroundMdp, s: State, action: str, s_next: State) -> bool:
    """Whether an observed human action succeeded, judged on the fluents it can change."""
    expected = successor(mdp, s, JointAction(NOOP, action), True)
    for i in mdp.affected_by.get(action, ()):
        if expected.holds(i) != s_next.holds(i):
            return False
    return True


# ---------------------------------------------------------------- ground truth

@dataclass(frozen=True)
class TrialStep:
    state: State
    action: str
    next_state: State
    context: Context
    success: bool


@dataclass(frozen=True)
class GroundTruthHumanModel:
    success: Mapping[str, Mapping[str, float]]
    deviation_probability: float = 0.0
    away_room: Optional[str] = None
    fragile_preference: float = 0.5
    noise: NoiseConfig = NoiseConfig()

    def __post_init__(self):
        probs = [p for table in self.success.values() for p in table.values()]
        probs += [self.deviation_probability, self.fragile_preference]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("ground-truth probabilities must lie in [0, 1]")

    @classmethod
    def from_yaml(cls, path: Union[str, Path], noise: Optional[NoiseConfig] = None
                  ) -> "GroundTruthHumanModel":
        path = Path(path)
        try:
            with path.open(encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise AssetLoadError(f"cannot read human ground truth {path}: {exc}") from exc
        try:
            return cls(success={k: {t: float(p) for t, p in v.items()}
                                for k, v in data.get("success", {}).items()},
                       deviation_probability=float(data.get("deviation_probability", 0.0)),
                       away_room=data.get("away_room"),
                       fragile_preference=float(data.get("fragile_preference", 0.5)),
                       noise=noise or NoiseConfig())
        except (AttributeError, TypeError, ValueError) as exc:
            raise AssetLoadError(f"malformed human ground truth {path}: {exc}") from exc

    @classmethod
    def noiseless(cls) -> "GroundTruthHumanModel":
        return cls(success={}, deviation_probability=0.0, fragile_preference=0.0,
                   noise=NoiseConfig(enabled=False))

    def success_probability(self, mdp: GroundMdp, action: str) -> float:
        act = mdp.action(action)
        table = self.success.get(act.schema, {})
        target = act.item or act.args[-1]
        if target in table:
            return table[target]
        if act.item and mdp.non_fluent("fragile", act.item) and "fragile" in table:
            return table["fragile"]
        return table.get("default", 1.0)

    def outcome(self, mdp: GroundMdp, action: str, rng: np.random.Generator) -> bool:
        act = mdp.action(action)
        verb = act.schema.split("_", 1)[1]
        fragile = bool(act.item and mdp.non_fluent("fragile", act.item))
        scale = self.noise.complexity_scale(verb, fragile)
        return perturb_outcome(self.success_probability(mdp, action), self.noise, rng, scale)

    def choose_script(self, script: TaskScript, mdp: GroundMdp,
                      rng: np.random.Generator) -> TaskScript:
        """Resolve step alternatives; a fragile option is preferred with ``fragile_preference``."""
        if script.options <= 1:
            return script
        options = script.alternative_items()[0]
        fragile = [k for k, item in enumerate(options) if mdp.non_fluent("fragile", item)]
        other = [k for k in range(len(options)) if k not in fragile]
        if fragile and other:
            pool = fragile if rng.random() < self.fragile_preference else other
        else:
            pool = list(range(len(options)))
        return script.resolve(pool[int(rng.integers(len(pool)))])

    def deviates(self, step_index: int, rng: np.random.Generator) -> bool:
        return step_index >= 1 and self.deviation_probability > 0 \
            and bool(rng.random() < self.deviation_probability)


def simulate_trial(task: TaskInstance, gt: GroundTruthHumanModel, rng: np.random.Generator,
                   max_steps: Optional[int] = None) -> List[TrialStep]:
    """
    Let the ground-truth human perform ``task`` alone (the robot idles).

    The trajectory ends when the task goal holds, when the human deviates, or
    at the horizon. Steps where the scripted action is not yet possible pass
    with the human waiting and are not recorded.
    """
    mdp = task.mdp
    script = gt.choose_script(task.script, mdp, rng)
    s = mdp.initial_state
    trajectory: List[TrialStep] = []
    for _ in range(max_steps or mdp.horizon):
        if mdp.goal and goal_satisfied(s, mdp.goal):
            break
        action = scripted_action(mdp, script, s)
        if action == NOOP:
            if next_step(mdp, script, s) is None:
                break
            s = successor(mdp, s, JointAction(), True)
            continue
        if gt.deviates(len(trajectory), rng):
            logger.debug("%s: human deviates after %d actions", task.name, len(trajectory))
            break
        ok = gt.outcome(mdp, action, rng)
        nxt = successor(mdp, s, JointAction(NOOP, action), ok)
        trajectory.append(TrialStep(s, action, nxt, context_of(mdp, action, s), ok))
        s = nxt
    return trajectory


# ---------------------------------------------------------------- learned model

class LearnedHumanModel:
    """
    Laplace-smoothed success/failure counts per abstract context.

    Single writer: only ``update``/``update_online`` mutate the counts.
    """

    def __init__(self, counts: Optional[Mapping[Context, Sequence[int]]] = None):
        self.counts: Dict[Context, List[int]] = {
            ctx: [int(c[0]), int(c[1])] for ctx, c in (counts or {}).items()
        }

    def update(self, context: Context, success: bool) -> None:
        pair = self.counts.setdefault(context, [0, 0])
        pair[0 if success else 1] += 1

    def probability(self, context: Context) -> float:
        pair = self.counts.get(context)
        if pair is None:
            return 0.5
        return (pair[0] + 1) / (pair[0] + pair[1] + 2)

    def outcome_dist(self, context: Context) -> Dict[str, float]:
        p = self.probability(context)
        return {SUCCESS: p, FAILURE: 1.0 - p}

    def success_table(self, mdp: GroundMdp) -> Dict[str, float]:
        return {a.name: self.probability(context_of(mdp, a.name)) for a in mdp.human_actions}

    def copy(self) -> "LearnedHumanModel":
        return LearnedHumanModel(self.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, LearnedHumanModel) and self.counts == other.counts

    # -- persistence
    def to_json(self) -> str:
        rows = []
        for (room, schema, types, fragile), (ok, failed) in sorted(self.counts.items()):
            ctx = {"room": room, "types": list(types), "fragile": fragile}
            rows.append({"context": ctx, "action": schema, "outcome": SUCCESS, "count": ok})
            rows.append({"context": ctx, "action": schema, "outcome": FAILURE, "count": failed})
        return json.dumps(rows, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LearnedHumanModel":
        model = cls()
        for row in json.loads(text):
            ctx = row["context"]
            key = (ctx["room"], row["action"], tuple(ctx["types"]), bool(ctx["fragile"]))
            pair = model.counts.setdefault(key, [0, 0])
            pair[0 if row["outcome"] == SUCCESS else 1] += int(row["count"])
        return model

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "LearnedHumanModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


class UniformHumanModel(LearnedHumanModel):
    """Uniform outcome prior; never learns."""

    def update(self, context: Context, success: bool) -> None:
        pass

    def probability(self, context: Context) -> float:
        return 0.5


def fit_from_trials(trajectories: Iterable[Sequence[TrialStep]]) -> LearnedHumanModel:
    """Fit outcome counts from trial trajectories (add-1 smoothing on read)."""
    trajectories = list(trajectories)
    if not trajectories:
        raise EmptyTrajectorySet("need at least one trajectory to fit the behaviour model")
    model = LearnedHumanModel()
    for trajectory in trajectories:
        for step in trajectory:
            model.update(step.context, step.success)
    return model


Observation = Union[TrialStep, Tuple[State, str, State]]


def update_online(model: LearnedHumanModel, obs: Observation,
                  mdp: Optional[GroundMdp] = None) -> LearnedHumanModel:
    """Add one observed human step to ``model`` (in place) and return it."""
    if isinstance(obs, TrialStep):
        model.update(obs.context, obs.success)
        return model
    s, action, s_next = obs
    if action == NOOP:
        return model
    if mdp is None:
        raise ValueError("an MDP is needed to interpret a raw observation")
    model.update(context_of(mdp, action, s), infer_outcome(mdp, s, action, s_next))
    return model


def predict_outcome_dist(model: LearnedHumanModel, mdp: GroundMdp, s: State,
                         action: str) -> Dict[str, float]:
    return model.outcome_dist(context_of(mdp, action, s))


def bootstrap_model(tasks: Sequence[TaskInstance], gt: GroundTruthHumanModel,
                    rng: np.random.Generator, trials: int = 10) -> LearnedHumanModel:
    """Initial behaviour model from ``trials`` noisy runs of every task."""
    runs = [simulate_trial(task, gt, rng) for task in tasks for _ in range(trials)]
    model = fit_from_trials(runs)
    logger.debug("bootstrapped behaviour model from %d trials: %d contexts",
                 len(runs), len(model.counts))
    return model
