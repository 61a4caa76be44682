"""Grid MDP: states, compass actions, transitions and the reward table.

A state is the UAV's cell.  Moves that would leave the grid are absorbed:
the UAV stays where it is and pays the invalid-move penalty.  Only the goal
cell is terminal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .scenario import CellCoord, CoverageGrid, Scenario

REWARD_GOAL = 10.0
REWARD_INVALID = -10.0
REWARD_VALID = -1.0
REWARD_RELIABLE = -0.3
REWARD_VALUES = (REWARD_GOAL, REWARD_INVALID, REWARD_VALID, REWARD_RELIABLE)

# Row 0 is drawn at the top, so north decreases y.
State = CellCoord


class Action(IntEnum):
    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def diagonal(self) -> bool:
        dx, dy = _DELTAS[self]
        return dx != 0 and dy != 0


_DELTAS = {
    Action.N: (0, -1),
    Action.NE: (1, -1),
    Action.E: (1, 0),
    Action.SE: (1, 1),
    Action.S: (0, 1),
    Action.SW: (-1, 1),
    Action.W: (-1, 0),
    Action.NW: (-1, -1),
}

ACTIONS_8 = tuple(Action)
ACTIONS_4 = (Action.N, Action.E, Action.S, Action.W)


def action_set(n_actions: int) -> tuple[Action, ...]:
    """Ordered action set; Q-table column ``i`` is ``action_set(n)[i]``."""
    if n_actions == 8:
        return ACTIONS_8
    if n_actions == 4:
        return ACTIONS_4
    raise ValueError(f"action count must be 4 or 8, got {n_actions}")


@dataclass(frozen=True)
class Transition:
    state: State
    action: Action
    next_state: State
    reward: float
    terminal: bool

    @property
    def valid(self) -> bool:
        return self.next_state != self.state


def reward_of(
    scenario: Scenario, coverage: CoverageGrid, from_: State, to: State, valid: bool
) -> float:
    """Reward for arriving at ``to``.  Precedence: goal > invalid > reliable > valid."""
    if valid and to == scenario.goal:
        return REWARD_GOAL
    if not valid:
        return REWARD_INVALID
    if coverage[to]:
        return REWARD_RELIABLE
    return REWARD_VALID


def apply_action(
    scenario: Scenario, coverage: CoverageGrid, state: State, action: Action
) -> Transition:
    dx, dy = Action(action).delta
    target = CellCoord(state[0] + dx, state[1] + dy)
    valid = scenario.contains(target)
    next_state = target if valid else CellCoord(*state)
    reward = reward_of(scenario, coverage, state, next_state, valid)
    return Transition(
        state=CellCoord(*state),
        action=Action(action),
        next_state=next_state,
        reward=reward,
        terminal=next_state == scenario.goal,
    )


def state_index(scenario: Scenario, state: State) -> int:
    if not scenario.contains(CellCoord(*state)):
        raise IndexError(
            f"state {tuple(state)} outside {scenario.width_cells}x{scenario.height_cells} grid"
        )
    return state[1] * scenario.width_cells + state[0]


def state_of(scenario: Scenario, index: int) -> State:
    if not 0 <= index < scenario.n_states:
        raise IndexError(f"state index {index} out of range [0, {scenario.n_states})")
    return CellCoord(index % scenario.width_cells, index // scenario.width_cells)


def step_distance_m(scenario: Scenario, from_: State, to: State) -> float:
    dx = abs(to[0] - from_[0])
    dy = abs(to[1] - from_[1])
    if dx > 1 or dy > 1:
        raise ValueError(f"cells {tuple(from_)} and {tuple(to)} are not adjacent")
    if dx and dy:
        return scenario.cell_size_m * math.sqrt(2.0)
    if dx or dy:
        return scenario.cell_size_m
    return 0.0


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """All transitions of a scenario tabulated by (state index, action index).

    ``next_state[s][a]`` and ``reward[s][a]`` are plain lists so the training
    loops can index them without numpy scalar overhead.
    """

    n_states: int
    n_actions: int
    start: int
    goal: int
    next_state: list
    reward: list


def tabulate(scenario: Scenario, coverage: CoverageGrid, n_actions: int) -> TransitionTable:
    actions = action_set(n_actions)
    nxt, rew = [], []
    for s in range(scenario.n_states):
        cell = state_of(scenario, s)
        row_n, row_r = [], []
        for a in actions:
            t = apply_action(scenario, coverage, cell, a)
            row_n.append(state_index(scenario, t.next_state))
            row_r.append(t.reward)
        nxt.append(row_n)
        rew.append(row_r)
    return TransitionTable(
        n_states=scenario.n_states,
        n_actions=n_actions,
        start=state_index(scenario, scenario.start),
        goal=state_index(scenario, scenario.goal),
        next_state=nxt,
        reward=rew,
    )
