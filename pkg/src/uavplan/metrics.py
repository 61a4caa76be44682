"""Path and training-curve metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import step_distance_m
from .scenario import CellCoord, CoverageGrid, Scenario

UNDEFINED_PCT = "undefined (zero-length path)"

# Row labels used verbatim in stdout reports.
STEPS_LABEL = "No. of steps to reach the destination"
DISTANCE_LABEL = "Total travelled distance"
COVERAGE_LABEL = "Coverage reliability"


@dataclass(frozen=True)
class PathResult:
    cells: tuple[CellCoord, ...]
    rewards: tuple[float, ...]
    reached_goal: bool
    steps: int
    distance_m: float
    coverage_reliability_pct: float | None

    def discounted_return(self, gamma: float) -> float:
        return discounted_return(self.rewards, gamma)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def path_length_m(scenario: Scenario, cells: Sequence[CellCoord]) -> float:
    return float(sum(step_distance_m(scenario, a, b) for a, b in zip(cells, cells[1:])))


def coverage_reliability(
    cells: Sequence[CellCoord], coverage: CoverageGrid, scenario: Scenario
) -> float | None:
    """Percentage of path length spent on steps that land in a reliable cell.

    Returns ``None`` when the path has zero length.
    """
    total = 0.0
    reliable = 0.0
    for a, b in zip(cells, cells[1:]):
        d = step_distance_m(scenario, a, b)
        total += d
        if coverage[b]:
            reliable += d
    if total == 0.0:
        return None
    return reliable / total * 100.0


def format_pct(pct: float | None) -> str:
    return UNDEFINED_PCT if pct is None else f"{pct:.1f}%"


def make_path_result(
    scenario: Scenario,
    coverage: CoverageGrid,
    cells: Sequence[CellCoord],
    rewards: Sequence[float],
    reached_goal: bool,
) -> PathResult:
    cells = tuple(CellCoord(*c) for c in cells)
    if len(rewards) != len(cells) - 1:
        raise ValueError(f"{len(cells)} cells need {len(cells) - 1} rewards, got {len(rewards)}")
    return PathResult(
        cells=cells,
        rewards=tuple(float(r) for r in rewards),
        reached_goal=bool(reached_goal),
        steps=len(cells) - 1,
        distance_m=path_length_m(scenario, cells),
        coverage_reliability_pct=coverage_reliability(cells, coverage, scenario),
    )


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    # Folded from the tail, matching the Bellman recursion.
    g = 0.0
    for r in reversed(rewards):
        g = r + gamma * g
    return g


@dataclass(frozen=True)
class TrainingSummary:
    moving_average: np.ndarray
    final_mean: float
    window: int


def summarize_training(trace, window: int) -> TrainingSummary:
    """Trailing moving average of per-episode reward and the final-window mean.

    ``trace`` is a training trace or a plain sequence of episode rewards.
    The first ``window - 1`` entries of the moving average average over the
    episodes seen so far.
    """
    rewards = np.asarray(getattr(trace, "episode_rewards", trace), dtype=float)
    n = len(rewards)
    if not 1 <= window <= n:
        raise ValueError(f"window must be in [1, {n}], got {window}")
    csum = np.concatenate([[0.0], np.cumsum(rewards)])
    idx = np.arange(1, n + 1)
    lo = np.maximum(idx - window, 0)
    ma = (csum[idx] - csum[lo]) / (idx - lo)
    return TrainingSummary(
        moving_average=ma,
        final_mean=float(np.mean(rewards[n - window :])),
        window=window,
    )


def table_rows(path: PathResult) -> list[tuple[str, str]]:
    return [
        (STEPS_LABEL, str(path.steps)),
        (DISTANCE_LABEL, f"{path.distance_m / 1000:.2f} km"),
        (COVERAGE_LABEL, format_pct(path.coverage_reliability_pct)),
    ]
