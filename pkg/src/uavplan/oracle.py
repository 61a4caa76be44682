"""Value iteration over the grid MDP, used as ground truth for the learners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import action_set, apply_action, state_index, state_of
from .scenario import CoverageGrid, Scenario

DEFAULT_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class ValueTable:
    values: np.ndarray
    policy: np.ndarray  # action index per state; -1 at the goal
    n_actions: int
    gamma: float
    sweeps: int
    residuals: tuple[float, ...] = field(repr=False, default=())

    def value(self, scenario: Scenario, cell) -> float:
        return float(self.values[state_index(scenario, cell)])


def _model(scenario: Scenario, coverage: CoverageGrid, n_actions: int):
    n = scenario.n_states
    nxt = np.empty((n, n_actions), dtype=np.intp)
    rew = np.empty((n, n_actions))
    for s in range(n):
        cell = state_of(scenario, s)
        for i, a in enumerate(action_set(n_actions)):
            t = apply_action(scenario, coverage, cell, a)
            nxt[s, i] = state_index(scenario, t.next_state)
            rew[s, i] = t.reward
    return nxt, rew


def value_iteration(
    scenario: Scenario,
    coverage: CoverageGrid,
    gamma: float,
    tolerance: float = DEFAULT_TOLERANCE,
    n_actions: int = 8,
    max_sweeps: int = 100_000,
) -> ValueTable:
    """Synchronous sweeps ``V <- max_a r(s, a) + gamma * V(s')`` with V(goal) fixed at 0.

    Stops when the largest change in a sweep drops below ``tolerance``.
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if not tolerance > 0:
        raise ValueError(f"tolerance must be > 0, got {tolerance}")
    nxt, rew = _model(scenario, coverage, n_actions)
    goal = state_index(scenario, scenario.goal)
    v = np.zeros(scenario.n_states)
    residuals = []
    for sweep in range(1, max_sweeps + 1):
        q = rew + gamma * v[nxt]
        v_new = q.max(axis=1)
        v_new[goal] = 0.0
        delta = float(np.max(np.abs(v_new - v)))
        residuals.append(delta)
        v = v_new
        if delta < tolerance:
            break
    else:
        raise RuntimeError(f"value iteration did not converge in {max_sweeps} sweeps")
    policy = np.argmax(rew + gamma * v[nxt], axis=1)
    policy[goal] = -1
    return ValueTable(v, policy, n_actions, gamma, sweep, tuple(residuals))


def optimal_return(v: ValueTable, scenario: Scenario) -> float:
    return v.value(scenario, scenario.start)


def policy_path(
    scenario: Scenario, coverage: CoverageGrid, v: ValueTable, step_cap: int | None = None
):
    """Cells and rewards from following the oracle policy from the start."""
    cap = step_cap if step_cap is not None else scenario.n_states
    actions = action_set(v.n_actions)
    cell = scenario.start
    cells, rewards = [cell], []
    for _ in range(cap):
        t = apply_action(scenario, coverage, cell, actions[v.policy[state_index(scenario, cell)]])
        cells.append(t.next_state)
        rewards.append(t.reward)
        cell = t.next_state
        if t.terminal:
            break
    return cells, rewards


_ARROWS_UNICODE = {"N": "↑", "NE": "↗", "E": "→", "SE": "↘", "S": "↓", "SW": "↙", "W": "←", "NW": "↖"}


def policy_map(scenario: Scenario, v: ValueTable) -> str:
    """One line per grid row: an arrow per cell, ``G`` at the goal, ``S`` at the start."""
    actions = action_set(v.n_actions)
    lines = []
    for y in range(scenario.height_cells):
        row = []
        for x in range(scenario.width_cells):
            s = y * scenario.width_cells + x
            if (x, y) == tuple(scenario.goal):
                row.append("G")
            elif (x, y) == tuple(scenario.start):
                row.append("S")
            else:
                row.append(_ARROWS_UNICODE[actions[v.policy[s]].name])
        lines.append("".join(row))
    return "\n".join(lines) + "\n"
