"""Local search environment: action decoding, episode loop, state features.

The environment is a sequential accept/reject loop over neighborhood moves.
Each step first applies the acceptance decision to the previous move, then
takes the chosen operator's best neighbor (or a random perturbation jump)
from the resulting solution. Rewards are clipped makespan improvements.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .dispatch import fdd_mwkr_schedule
from .instances import Instance, lower_bound
from .neighborhoods import NEIGHBORHOOD_OPERATORS, OperatorId, best_neighbor, perturb
from .schedule import Solution
from .trajectories import ContextWindow, FeatureVector, TrajectoryRecord


class ActionSet(enum.Enum):
    """Action vocabularies: accept-only, with operator choice, with jumps."""

    A = "A"
    AN = "AN"
    ANP = "ANP"

    @property
    def operators(self) -> tuple[OperatorId, ...]:
        if self is ActionSet.A:
            return (OperatorId.CT,)
        if self is ActionSet.AN:
            return NEIGHBORHOOD_OPERATORS
        return NEIGHBORHOOD_OPERATORS + (OperatorId.PERTURB,)

    @property
    def action_count(self) -> int:
        return 2 * len(self.operators)


def decode_action(action_id: int, action_set: ActionSet) -> tuple[int, OperatorId]:
    """Split an id into (accept bit, operator): id = 2 * op_index + accept."""
    if not 0 <= action_id < action_set.action_count:
        raise ValueError(
            f"action id {action_id} out of range for {action_set.value} "
            f"({action_set.action_count} actions)"
        )
    return action_id & 1, action_set.operators[action_id >> 1]


def rtg_prior(m_init: int, m_lb: int, factor: float = 1.0) -> int:
    """Optimistic initial return-to-go: round(m_init - factor * m_lb)."""
    if factor <= 0:
        raise ValueError("rtg factor must be positive")
    return round(m_init - factor * m_lb)


@dataclass(frozen=True)
class EngineConfig:
    action_set: ActionSet = ActionSet.ANP
    episode_len: int = 200
    seed: int = 0
    perturb_strength: int = 5
    rtg_factor: float = 1.0
    context_length: int = 50

    def __post_init__(self):
        if self.episode_len < 0:
            raise ValueError("episode_len must be >= 0")
        if self.perturb_strength < 1:
            raise ValueError("perturb_strength must be >= 1")
        if self.context_length < 1:
            raise ValueError("context_length must be >= 1")
        if self.rtg_factor <= 0:
            raise ValueError("rtg_factor must be positive")


@dataclass
class SearchState:
    step: int
    current: Solution
    incumbent_before_last: Solution
    best: Solution
    last_accept: int
    last_operator: OperatorId | None
    no_improve_steps: int
    perturb_count: int
    rtg: int


class EpisodeAbortError(RuntimeError):
    """A policy failed mid-episode; the partial trajectory is discarded."""

    def __init__(self, step: int, message: str):
        super().__init__(f"episode aborted at step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class EpisodeInfo:
    """Episode header handed to a policy before the first act request."""

    instance_id: str
    num_jobs: int
    num_machines: int
    lower_bound: int
    initial_makespan: int
    action_set: ActionSet
    episode_len: int
    rtg: int
    context_length: int


@dataclass(frozen=True)
class ActRequest:
    """One decision point: raw features plus the model-ready context window."""

    step: int
    rtg: int
    features: FeatureVector
    window: ContextWindow
    action_set: ActionSet


class SearchEnv:
    """Accept/reject local search over one instance, gym-style reset/step."""

    def __init__(self, instance: Instance, config: EngineConfig | None = None):
        self.instance = instance
        self.config = config or EngineConfig()
        self.lower_bound = lower_bound(instance)
        self.state: SearchState | None = None
        self._rng: random.Random | None = None

    def reset(self) -> tuple[SearchState, FeatureVector]:
        init = fdd_mwkr_schedule(self.instance)
        self._rng = random.Random(self.config.seed)
        self.state = SearchState(
            step=0,
            current=init,
            incumbent_before_last=init,
            best=init,
            last_accept=0,
            last_operator=None,
            no_improve_steps=0,
            perturb_count=0,
            rtg=rtg_prior(init.makespan, self.lower_bound, self.config.rtg_factor),
        )
        return self.state, self.features()

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.step >= self.config.episode_len

    def step(self, action_id: int) -> tuple[SearchState, FeatureVector, int, bool]:
        st = self.state
        if st is None:
            raise RuntimeError("reset() must be called before step()")
        if st.step >= self.config.episode_len:
            raise RuntimeError("step() called on a finished episode")
        accept, op = decode_action(action_id, self.config.action_set)

        if accept == 0:
            st.current = st.incumbent_before_last
        m_prev = st.current.makespan
        st.incumbent_before_last = st.current

        if op is OperatorId.PERTURB:
            st.current = perturb(
                self.instance, st.current, self.config.perturb_strength, self._rng
            )
            st.perturb_count += 1
        else:
            st.current, _ = best_neighbor(self.instance, st.current, op)

        reward = max(m_prev - st.current.makespan, 0)
        if st.current.makespan < st.best.makespan:
            st.best = st.current
            st.no_improve_steps = 0
        else:
            st.no_improve_steps += 1
        st.last_accept = accept
        st.last_operator = op
        st.step += 1
        st.rtg -= reward
        return st, self.features(), reward, self.done

    def features(self, state: SearchState | None = None) -> FeatureVector:
        st = state or self.state
        if st is None:
            raise RuntimeError("no state: reset() the environment first")
        return FeatureVector(
            current_makespan=st.current.makespan,
            best_makespan=st.best.makespan,
            last_accept=st.last_accept,
            last_operator=None if st.last_operator is None else int(st.last_operator),
            step=st.step,
            no_improve_steps=st.no_improve_steps,
            perturb_count=st.perturb_count,
            lower_bound=self.lower_bound,
            episode_len=self.config.episode_len,
        )


def run_episode(
    instance: Instance,
    policy,
    config: EngineConfig | None = None,
    instance_id: str = "instance",
) -> tuple[list[TrajectoryRecord], Solution]:
    """Roll one policy-driven episode; returns raw records and the best found.

    The policy must expose act(ActRequest) -> action id and may expose
    begin_episode(EpisodeInfo). Any policy failure, including an out-of-range
    action id, aborts the episode and discards the partial trajectory.
    """
    config = config or EngineConfig()
    env = SearchEnv(instance, config)
    state, fv = env.reset()

    begin = getattr(policy, "begin_episode", None)
    if begin is not None:
        begin(EpisodeInfo(
            instance_id=instance_id,
            num_jobs=instance.num_jobs,
            num_machines=instance.num_machines,
            lower_bound=env.lower_bound,
            initial_makespan=state.current.makespan,
            action_set=config.action_set,
            episode_len=config.episode_len,
            rtg=state.rtg,
            context_length=config.context_length,
        ))

    records: list[TrajectoryRecord] = []
    history: list[tuple[int, FeatureVector, int]] = []
    while not env.done:
        window = ContextWindow.build(history, (state.rtg, fv), config.context_length)
        request = ActRequest(
            step=state.step, rtg=state.rtg, features=fv,
            window=window, action_set=config.action_set,
        )
        try:
            action = policy.act(request)
        except EpisodeAbortError:
            raise
        except Exception as exc:
            raise EpisodeAbortError(state.step, f"policy failure: {exc}") from exc
        if not isinstance(action, int) or not 0 <= action < config.action_set.action_count:
            raise EpisodeAbortError(state.step, f"invalid action {action!r}")
        rtg_before, fv_before, step_before = state.rtg, fv, state.step
        state, fv, reward, _ = env.step(action)
        records.append(TrajectoryRecord(
            instance_id=instance_id, step=step_before,
            features=fv_before, action=action, reward=reward,
        ))
        history.append((rtg_before, fv_before, action))
    return records, env.state.best
