"""Q-learning vs SARSA comparison campaigns over a list of seeds."""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import __version__
from .learner import Algorithm, Hyperparams, TrainingTrace, greedy_rollout, train
from .metrics import (
    COVERAGE_LABEL,
    DISTANCE_LABEL,
    STEPS_LABEL,
    PathResult,
    format_pct,
    summarize_training,
)
from .scenario import CellCoord, CoverageGrid, Scenario, build_coverage, scenario_digest

ALGORITHMS = (Algorithm.Q_LEARNING, Algorithm.SARSA)
DISPLAY_NAMES = {Algorithm.Q_LEARNING: "Q-Learning", Algorithm.SARSA: "SARSA"}

CSV_COLUMNS = (
    "algorithm",
    "seed",
    "reached_goal",
    "steps",
    "distance_m",
    "coverage_reliability_pct",
    "discounted_return",
    "final_window_mean_reward",
)


def default_window(episodes: int) -> int:
    return max(1, episodes // 10)


@dataclass(frozen=True)
class RunResult:
    algorithm: Algorithm
    seed: int
    path: PathResult
    discounted_return: float
    final_window_mean: float
    trace: TrainingTrace | None = None


@dataclass(frozen=True)
class Summary:
    """Medians across seeds for one algorithm."""

    algorithm: Algorithm
    reached_fraction: float
    steps: float
    distance_m: float
    coverage_reliability_pct: float | None
    discounted_return: float
    final_window_mean: float


@dataclass(frozen=True)
class ComparisonReport:
    scenario_sha256: str
    hyperparams: dict
    seeds: tuple[int, ...]
    window: int
    runs: tuple[RunResult, ...]
    summaries: dict

    def runs_for(self, algorithm: Algorithm) -> list[RunResult]:
        return [r for r in self.runs if r.algorithm is Algorithm(algorithm)]

    @property
    def final_reward_ratio(self) -> float | None:
        """Median final-window reward of Q-learning divided by SARSA's."""
        q = self.summaries[Algorithm.Q_LEARNING].final_window_mean
        s = self.summaries[Algorithm.SARSA].final_window_mean
        return None if s == 0 else q / s

    @property
    def final_reward_advantage_pct(self) -> float | None:
        """Relative gain of Q-learning over SARSA, ``(q - s) / |s| * 100``."""
        q = self.summaries[Algorithm.Q_LEARNING].final_window_mean
        s = self.summaries[Algorithm.SARSA].final_window_mean
        return None if s == 0 else (q - s) / abs(s) * 100.0

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.runs:
            pct = r.path.coverage_reliability_pct
            writer.writerow([
                r.algorithm.value,
                r.seed,
                int(r.path.reached_goal),
                r.path.steps,
                repr(r.path.distance_m),
                "" if pct is None else repr(pct),
                repr(r.discounted_return),
                repr(r.final_window_mean),
            ])
        for alg in ALGORITHMS:
            m = self.summaries[alg]
            pct = m.coverage_reliability_pct
            writer.writerow([
                alg.value,
                "median",
                repr(m.reached_fraction),
                repr(m.steps),
                repr(m.distance_m),
                "" if pct is None else repr(pct),
                repr(m.discounted_return),
                repr(m.final_window_mean),
            ])
        return buf.getvalue().encode("utf-8")

    def to_dict(self) -> dict:
        def path_dict(p: PathResult) -> dict:
            return {
                "reached_goal": p.reached_goal,
                "steps": p.steps,
                "distance_m": p.distance_m,
                "coverage_reliability_pct": p.coverage_reliability_pct,
                "cells": [list(c) for c in p.cells],
                "rewards": list(p.rewards),
            }

        return {
            "tool_version": __version__,
            "scenario_sha256": self.scenario_sha256,
            "hyperparams": self.hyperparams,
            "seeds": list(self.seeds),
            "window": self.window,
            "runs": [
                {
                    "algorithm": r.algorithm.value,
                    "seed": r.seed,
                    "discounted_return": r.discounted_return,
                    "final_window_mean_reward": r.final_window_mean,
                    "path": path_dict(r.path),
                }
                for r in self.runs
            ],
            "medians": {
                alg.value: {
                    "reached_fraction": m.reached_fraction,
                    "steps": m.steps,
                    "distance_m": m.distance_m,
                    "coverage_reliability_pct": m.coverage_reliability_pct,
                    "discounted_return": m.discounted_return,
                    "final_window_mean_reward": m.final_window_mean,
                }
                for alg, m in self.summaries.items()
            },
            "final_reward_ratio": self.final_reward_ratio,
            "final_reward_advantage_pct": self.final_reward_advantage_pct,
        }

    def to_json(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2) + "\n").encode("utf-8")

    def table(self) -> str:
        """Plain-text table with one row per metric and one column per algorithm."""
        q = self.summaries[Algorithm.Q_LEARNING]
        s = self.summaries[Algorithm.SARSA]
        rows = [
            ("", DISPLAY_NAMES[Algorithm.Q_LEARNING], DISPLAY_NAMES[Algorithm.SARSA]),
            (STEPS_LABEL, f"{q.steps:g}", f"{s.steps:g}"),
            (DISTANCE_LABEL, f"{q.distance_m / 1000:.2f} km", f"{s.distance_m / 1000:.2f} km"),
            (COVERAGE_LABEL, format_pct(q.coverage_reliability_pct), format_pct(s.coverage_reliability_pct)),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{a:<{width}}  {b:>12}  {c:>12}" for a, b, c in rows) + "\n"


def run_one(
    scenario: Scenario,
    coverage: CoverageGrid,
    algorithm: Algorithm | str,
    hyperparams: Hyperparams,
    seed: int,
    window: int | None = None,
) -> RunResult:
    h = replace(hyperparams, seed=seed).resolved(scenario)
    q, trace = train(scenario, coverage, algorithm, h)
    path = greedy_rollout(scenario, coverage, q, h.max_steps_per_episode)
    window = default_window(h.episodes) if window is None else window
    summary = summarize_training(trace.episode_rewards, window)
    return RunResult(
        Algorithm(algorithm), seed, path, path.discounted_return(h.gamma), summary.final_mean, trace
    )


def _run_task(args):
    scenario, algorithm, hyperparams, seed, window = args
    return run_one(scenario, build_coverage(scenario), algorithm, hyperparams, seed, window)


def _median(values):
    values = [v for v in values if v is not None]
    return statistics.median(values) if values else None


def summarize_runs(algorithm: Algorithm, runs: list[RunResult]) -> Summary:
    return Summary(
        algorithm=algorithm,
        reached_fraction=sum(r.path.reached_goal for r in runs) / len(runs),
        steps=_median([r.path.steps for r in runs]),
        distance_m=_median([r.path.distance_m for r in runs]),
        coverage_reliability_pct=_median([r.path.coverage_reliability_pct for r in runs]),
        discounted_return=_median([r.discounted_return for r in runs]),
        final_window_mean=_median([r.final_window_mean for r in runs]),
    )


def compare(
    scenario: Scenario,
    hyperparams: Hyperparams,
    seeds,
    window: int | None = None,
    workers: int = 1,
) -> ComparisonReport:
    """Train and roll out both algorithms for every seed.

    Runs may execute in parallel (``workers > 1``); results are always
    ordered by algorithm then ascending seed, so output does not depend on
    scheduling.
    """
    seeds = tuple(sorted(set(int(s) for s in seeds)))
    if not seeds:
        raise ValueError("at least one seed is required")
    hyperparams.validate()
    h = hyperparams.resolved(scenario)
    window = default_window(h.episodes) if window is None else window
    if not 1 <= window <= h.episodes:
        raise ValueError(f"window must be in [1, {h.episodes}], got {window}")
    tasks = [(scenario, alg, h, seed, window) for alg in ALGORITHMS for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_task, tasks))
    else:
        coverage = build_coverage(scenario)
        runs = [run_one(scenario, coverage, alg, hh, seed, w) for scenario, alg, hh, seed, w in tasks]
    summaries = {
        alg: summarize_runs(alg, [r for r in runs if r.algorithm is alg]) for alg in ALGORITHMS
    }
    hp = h.to_dict()
    hp.pop("seed")
    return ComparisonReport(scenario_digest(scenario), hp, seeds, window, tuple(runs), summaries)


def load_report(data: bytes | str) -> ComparisonReport:
    """Rebuild a report from its JSON form, recomputing the medians from the runs.

    Training traces are not persisted, so ``RunResult.trace`` is ``None``.
    """
    doc = json.loads(data)
    runs = []
    for r in doc["runs"]:
        p = r["path"]
        path = PathResult(
            cells=tuple(CellCoord(*c) for c in p["cells"]),
            rewards=tuple(p["rewards"]),
            reached_goal=p["reached_goal"],
            steps=p["steps"],
            distance_m=p["distance_m"],
            coverage_reliability_pct=p["coverage_reliability_pct"],
        )
        runs.append(
            RunResult(
                Algorithm(r["algorithm"]),
                r["seed"],
                path,
                r["discounted_return"],
                r["final_window_mean_reward"],
            )
        )
    summaries = {
        alg: summarize_runs(alg, [r for r in runs if r.algorithm is alg]) for alg in ALGORITHMS
    }
    return ComparisonReport(
        doc["scenario_sha256"],
        doc["hyperparams"],
        tuple(doc["seeds"]),
        doc["window"],
        tuple(runs),
        summaries,
    )
