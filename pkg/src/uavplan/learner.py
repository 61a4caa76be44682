"""Tabular Q-learning and SARSA with epsilon-greedy exploration.

Random numbers come from :class:`random.Random` (MT19937) seeded with the
run seed.  Only ``rng.random()`` (53-bit doubles, ``genrand_res53``) is
consumed, in a fixed order per action selection:

1. ``u = rng.random()``; explore iff ``u < epsilon``.
2. Exploring: action index ``floor(rng.random() * k)``.
3. Exploiting with ``m > 1`` tied maxima: tie ``floor(rng.random() * m)``
   among the tied indices in ascending order.  No draw when the max is
   unique.

Any MT19937 implementation seeded the same way replays a run exactly.
"""

from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .mdp import Action, Transition, action_set, apply_action, tabulate
from .metrics import PathResult, make_path_result
from .scenario import CoverageGrid, Scenario

SEED_MAX = 2**64 - 1


class Algorithm(str, Enum):
    Q_LEARNING = "qlearning"
    SARSA = "sarsa"


class HyperparamError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon: float = 1.0
    epsilon_decay: float = 0.999
    epsilon_min: float = 0.01
    episodes: int = 5000
    # None means 4 * (width + height), resolved per scenario.
    max_steps_per_episode: int | None = None
    seed: int = 0
    n_actions: int = 8

    def validate(self) -> None:
        if not 0 < self.alpha <= 1:
            raise HyperparamError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise HyperparamError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise HyperparamError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0 < self.epsilon_decay <= 1:
            raise HyperparamError(f"epsilon_decay must be in (0, 1], got {self.epsilon_decay}")
        if not 0 <= self.epsilon_min <= self.epsilon:
            raise HyperparamError(
                f"epsilon_min must be in [0, epsilon={self.epsilon}], got {self.epsilon_min}"
            )
        for name in ("episodes", "seed", "n_actions"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise HyperparamError(f"{name} must be an integer, got {value!r}")
        if self.episodes < 1:
            raise HyperparamError(f"episodes must be >= 1, got {self.episodes}")
        if self.max_steps_per_episode is not None and (
            not isinstance(self.max_steps_per_episode, int) or self.max_steps_per_episode < 1
        ):
            raise HyperparamError(
                f"max_steps_per_episode must be >= 1, got {self.max_steps_per_episode}"
            )
        if not 0 <= self.seed <= SEED_MAX:
            raise HyperparamError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_actions not in (4, 8):
            raise HyperparamError(f"n_actions must be 4 or 8, got {self.n_actions}")

    def resolved(self, scenario: Scenario) -> Hyperparams:
        if self.max_steps_per_episode is not None:
            return self
        return replace(
            self, max_steps_per_episode=4 * (scenario.width_cells + scenario.height_cells)
        )

    def to_dict(self) -> dict:
        return asdict(self)


# -- Q-table ----------------------------------------------------------------


@dataclass(eq=False)
class QTable:
    """Dense action values, shape ``(width * height, n_actions)``."""

    width_cells: int
    height_cells: int
    n_actions: int
    values: np.ndarray = field(repr=False, default=None)
    algorithm: str | None = None
    hyperparams: dict | None = None

    def __post_init__(self):
        shape = (self.width_cells * self.height_cells, self.n_actions)
        if self.values is None:
            self.values = np.zeros(shape)
        else:
            self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")

    @classmethod
    def zeros(cls, scenario: Scenario, n_actions: int = 8) -> QTable:
        return cls(scenario.width_cells, scenario.height_cells, n_actions)

    @property
    def actions(self) -> tuple[Action, ...]:
        return action_set(self.n_actions)

    def check_shape(self, scenario: Scenario) -> None:
        if (self.width_cells, self.height_cells) != (scenario.width_cells, scenario.height_cells):
            raise ValueError(
                f"Q-table is {self.width_cells}x{self.height_cells} but scenario is "
                f"{scenario.width_cells}x{scenario.height_cells}"
            )

    def index(self, state) -> int:
        x, y = state
        if not (0 <= x < self.width_cells and 0 <= y < self.height_cells):
            raise IndexError(f"state {tuple(state)} outside Q-table grid")
        return y * self.width_cells + x

    def row(self, state) -> np.ndarray:
        return self.values[self.index(state)]

    def __getitem__(self, key):
        state, action = key
        return self.values[self.index(state), self.actions.index(Action(action))]

    def __setitem__(self, key, value):
        state, action = key
        self.values[self.index(state), self.actions.index(Action(action))] = value

    def dumps(self) -> bytes:
        doc = {
            "format": "uavplan-qtable/1",
            "width_cells": self.width_cells,
            "height_cells": self.height_cells,
            "n_actions": self.n_actions,
            "algorithm": self.algorithm,
            "hyperparams": self.hyperparams,
            "values": [float(v) for v in self.values.ravel()],
        }
        return (json.dumps(doc) + "\n").encode("utf-8")

    @classmethod
    def loads(cls, data: bytes | str, scenario: Scenario | None = None) -> QTable:
        doc = json.loads(data)
        if doc.get("format") != "uavplan-qtable/1":
            raise ValueError(f"unsupported Q-table format {doc.get('format')!r}")
        w, h, k = doc["width_cells"], doc["height_cells"], doc["n_actions"]
        values = doc["values"]
        if len(values) != w * h * k:
            raise ValueError(f"expected {w}x{h}x{k} = {w * h * k} values, got {len(values)}")
        q = cls(w, h, k, np.array(values, dtype=float).reshape(w * h, k),
                doc.get("algorithm"), doc.get("hyperparams"))
        if scenario is not None:
            q.check_shape(scenario)
        return q


# -- action selection and updates -------------------------------------------


def _select(row, epsilon: float, draw: Callable[[], float], k: int) -> int:
    if draw() < epsilon:
        return int(draw() * k)
    best = max(row)
    ties = [i for i in range(k) if row[i] == best]
    if len(ties) == 1:
        return ties[0]
    return ties[int(draw() * len(ties))]


def select_action(q: QTable, state, epsilon: float, rng: random.Random) -> Action:
    """Epsilon-greedy choice; greedy ties are broken uniformly at random."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    row = q.row(state).tolist()
    return q.actions[_select(row, epsilon, rng.random, q.n_actions)]


def q_learning_update(q: QTable, t: Transition, h: Hyperparams) -> float:
    """Apply one off-policy TD update in place and return the new value."""
    s, a = q.index(t.state), q.actions.index(t.action)
    bootstrap = 0.0 if t.terminal else float(np.max(q.values[q.index(t.next_state)]))
    old = float(q.values[s, a])
    new = old + h.alpha * (t.reward + h.gamma * bootstrap - old)
    q.values[s, a] = new
    return new


def sarsa_update(q: QTable, t: Transition, next_action: Action, h: Hyperparams) -> float:
    """Apply one on-policy TD update in place and return the new value.

    ``next_action`` must be the action the behaviour policy will execute
    from ``t.next_state``.
    """
    s, a = q.index(t.state), q.actions.index(t.action)
    if t.terminal:
        bootstrap = 0.0
    else:
        bootstrap = float(q.values[q.index(t.next_state), q.actions.index(Action(next_action))])
    old = float(q.values[s, a])
    new = old + h.alpha * (t.reward + h.gamma * bootstrap - old)
    q.values[s, a] = new
    return new


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    cumulative_reward: float
    steps: int
    epsilon: float
    reached_goal: bool


@dataclass(frozen=True)
class TrainingTrace:
    algorithm: Algorithm
    seed: int
    records: tuple[EpisodeRecord, ...]

    @property
    def episode_rewards(self) -> list[float]:
        return [r.cumulative_reward for r in self.records]

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["episode", "cumulative_reward", "steps", "epsilon", "reached_goal"])
        for r in self.records:
            writer.writerow(
                [r.episode, repr(r.cumulative_reward), r.steps, repr(r.epsilon), int(r.reached_goal)]
            )
        return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class StepEvent:
    """Passed to the training hook after every update.

    ``values`` is the live table (list of per-state lists); do not mutate it.
    """

    episode: int
    step: int
    state: int
    action: int
    reward: float
    next_state: int
    next_action: int | None
    terminal: bool
    td_error: float
    values: list


def train(
    scenario: Scenario,
    coverage: CoverageGrid,
    algorithm: Algorithm | str,
    h: Hyperparams = Hyperparams(),
    hook: Callable[[StepEvent], None] | None = None,
) -> tuple[QTable, TrainingTrace]:
    algorithm = Algorithm(algorithm)
    h.validate()
    h = h.resolved(scenario)
    table = tabulate(scenario, coverage, h.n_actions)
    nxt, rew = table.next_state, table.reward
    start, goal, k = table.start, table.goal, table.n_actions
    alpha, gamma, cap = h.alpha, h.gamma, h.max_steps_per_episode
    q = [[0.0] * k for _ in range(table.n_states)]
    draw = random.Random(h.seed).random
    sarsa = algorithm is Algorithm.SARSA

    eps = h.epsilon
    records = []
    for episode in range(h.episodes):
        s = start
        total = 0.0
        steps = 0
        reached = False
        a = _select(q[s], eps, draw, k) if sarsa else -1
        while steps < cap:
            if not sarsa:
                a = _select(q[s], eps, draw, k)
            s2 = nxt[s][a]
            r = rew[s][a]
            steps += 1
            total += r
            row = q[s]
            a2 = None
            if s2 == goal:
                target = r
            elif sarsa:
                a2 = _select(q[s2], eps, draw, k)
                target = r + gamma * q[s2][a2]
            else:
                target = r + gamma * max(q[s2])
            td = target - row[a]
            row[a] = row[a] + alpha * td
            if hook is not None:
                hook(StepEvent(episode, steps, s, a, r, s2, a2, s2 == goal, td, q))
            if s2 == goal:
                reached = True
                break
            s = s2
            if sarsa:
                a = a2
        records.append(EpisodeRecord(episode, total, steps, eps, reached))
        eps = max(h.epsilon_min, eps * h.epsilon_decay)

    qt = QTable(
        scenario.width_cells,
        scenario.height_cells,
        k,
        np.array(q, dtype=float),
        algorithm.value,
        h.to_dict(),
    )
    return qt, TrainingTrace(algorithm, h.seed, tuple(records))


def greedy_rollout(
    scenario: Scenario, coverage: CoverageGrid, q: QTable, step_cap: int
) -> PathResult:
    """Follow argmax actions from the start (lowest index wins ties)."""
    q.check_shape(scenario)
    cell = scenario.start
    cells = [cell]
    rewards = []
    reached = False
    for _ in range(step_cap):
        a = q.actions[int(np.argmax(q.row(cell)))]
        t = apply_action(scenario, coverage, cell, a)
        cells.append(t.next_state)
        rewards.append(t.reward)
        cell = t.next_state
        if t.terminal:
            reached = True
            break
    return make_path_result(scenario, coverage, cells, rewards, reached)
