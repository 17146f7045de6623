"""Built-in decision policies and action statistics.

Policies receive an ActRequest per step and return an action id valid for
the episode's action set. They are deliberately tiny: the interesting
policies live out of process behind the wire protocol (see wire.py).
"""

from __future__ import annotations

import random
from typing import Iterable

from .engine import ActRequest, ActionSet, rtg_prior  # noqa: F401  (rtg_prior re-exported)
from .neighborhoods import OperatorId
from .trajectories import TrajectoryRecord


class GreedyPolicy:
    """Accept iff the last step lowered the current makespan.

    The operator is fixed when given, otherwise round-robin over the action
    set's neighborhood operators. The first step has no previous move and
    accepts (reverting at step 0 is a no-op).
    """

    def __init__(self, operator: OperatorId | None = OperatorId.CT):
        self.operator = operator

    def act(self, request: ActRequest) -> int:
        window = request.window
        k = window.context_length
        if window.mask[k - 1]:
            accept = 1 if window.features[k][0] < window.features[k - 1][0] else 0
        else:
            accept = 1
        if self.operator is not None:
            op = self.operator
        else:
            choices = [o for o in request.action_set.operators if o is not OperatorId.PERTURB]
            op = choices[request.step % len(choices)]
        return 2 * request.action_set.operators.index(op) + accept


class RandomPolicy:
    """Uniform over the valid action ids, deterministic per seed."""

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def act(self, request: ActRequest) -> int:
        return self._rng.randrange(request.action_set.action_count)


def action_frequencies(
    records: Iterable[TrajectoryRecord | int],
    action_set: ActionSet = ActionSet.ANP,
) -> list[int]:
    """Histogram over action ids; accepts records or bare ids."""
    counts = [0] * action_set.action_count
    for item in records:
        action = item if isinstance(item, int) else item.action
        if not 0 <= action < len(counts):
            raise ValueError(f"action {action} outside {action_set.value}")
        counts[action] += 1
    return counts


def sweep_factors(
    start: float = 0.05, stop: float = 1.75, step: float = 0.05
) -> list[float]:
    """Return-to-go prior factors, inclusive endpoints, float-drift free."""
    scale = 100
    lo, hi, inc = round(start * scale), round(stop * scale), round(step * scale)
    if inc <= 0 or lo <= 0 or hi < lo:
        raise ValueError("factor range must be positive and increasing")
    return [v / scale for v in range(lo, hi + 1, inc)]
