"""Command-line interface: ``uavplan {gen-scenario,train,rollout,compare,oracle}``.

Exit codes: 0 success, 2 invalid input, 3 ``oracle --check`` mismatch, 4 I/O failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__
from .compare import DISPLAY_NAMES, compare
from .learner import Algorithm, HyperparamError, Hyperparams, QTable, greedy_rollout, train
from .mdp import action_set, step_distance_m
from .metrics import discounted_return, table_rows
from .oracle import DEFAULT_TOLERANCE, optimal_return, policy_map, policy_path, value_iteration
from .scenario import (
    BaseStation,
    CellCoord,
    Scenario,
    ScenarioError,
    build_coverage,
    load_scenario,
    save_scenario,
)
from .svg import render

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3
EXIT_IO = 4

RETURN_TOLERANCE = 1e-9
DEFAULT_MAX_STATES = 10_000
_DEFAULTS = Hyperparams()
_invocation: list[str] | None = None


def _argv() -> list[str]:
    return list(_invocation if _invocation is not None else sys.argv[1:])


class CliFailure(click.ClickException):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _invalid(message: str) -> CliFailure:
    return CliFailure(message, EXIT_INVALID)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    scenario_sha256: str | None = None
    hyperparams: dict | None = None
    seeds: list[int] = field(default_factory=list)
    algorithms: list[str] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "scenario_sha256": self.scenario_sha256,
            "hyperparams": self.hyperparams,
            "seeds": self.seeds,
            "algorithms": self.algorithms,
            "artifacts": self.artifacts,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }

    def content_digest(self) -> str:
        """Hash of everything except the timestamp."""
        doc = self.to_dict()
        doc.pop("timestamp")
        return _sha256(json.dumps(doc, sort_keys=True).encode("utf-8"))


def manifest_name(command: str, tag: str | None = None) -> str:
    return f"{tag}_{command}.manifest.json" if tag else f"{command}.manifest.json"


def _write_outputs(out_dir: Path, artifacts: dict[str, bytes], manifest: RunManifest, tag=None):
    """Write artifacts and the manifest; on failure remove anything written."""
    manifest.artifacts = {name: _sha256(data) for name, data in sorted(artifacts.items())}
    manifest.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload = dict(artifacts)
    payload[manifest_name(manifest.command, tag)] = (
        json.dumps(manifest.to_dict(), indent=2) + "\n"
    ).encode("utf-8")
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        staged = []
        for name, data in payload.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
            written.append(final)
    except OSError as exc:
        for path in written:
            path.unlink(missing_ok=True)
        for tmp in out_dir.glob(".tmp-*"):
            tmp.unlink(missing_ok=True)
        raise CliFailure(f"cannot write artifacts to {out_dir}: {exc}", EXIT_IO) from exc
    return payload


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliFailure(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _load_scenario(path: str) -> tuple[Scenario, str]:
    data = _read(path)
    try:
        return load_scenario(data), _sha256(data)
    except ScenarioError as exc:
        raise _invalid(f"{path}: {exc}") from exc


def _hyperparams(**kwargs) -> Hyperparams:
    h = Hyperparams(**kwargs)
    try:
        h.validate()
    except HyperparamError as exc:
        raise _invalid(str(exc)) from exc
    return h


def _hyperparam_options(f):
    options = [
        click.option("--episodes", type=int, default=_DEFAULTS.episodes, show_default=True),
        click.option("--alpha", type=float, default=_DEFAULTS.alpha, show_default=True),
        click.option("--gamma", type=float, default=_DEFAULTS.gamma, show_default=True),
        click.option("--epsilon", type=float, default=_DEFAULTS.epsilon, show_default=True),
        click.option("--epsilon-decay", type=float, default=_DEFAULTS.epsilon_decay, show_default=True),
        click.option("--epsilon-min", type=float, default=_DEFAULTS.epsilon_min, show_default=True),
        click.option(
            "--max-steps",
            type=int,
            default=None,
            help="Per-episode step cap  [default: 4 * (width + height)]",
        ),
        click.option("--actions", type=click.Choice(["4", "8"]), default=str(_DEFAULTS.n_actions), show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _hp_kwargs(episodes, alpha, gamma, epsilon, epsilon_decay, epsilon_min, max_steps, actions):
    return dict(
        episodes=episodes,
        alpha=alpha,
        gamma=gamma,
        epsilon=epsilon,
        epsilon_decay=epsilon_decay,
        epsilon_min=epsilon_min,
        max_steps_per_episode=max_steps,
        n_actions=int(actions),
    )


def _path_csv(scenario: Scenario, path) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "x", "y", "reward", "distance_m"])
    running = 0.0
    writer.writerow([0, path.cells[0].x, path.cells[0].y, "", repr(running)])
    for i, (prev, cell, r) in enumerate(zip(path.cells, path.cells[1:], path.rewards), start=1):
        running += step_distance_m(scenario, prev, cell)
        writer.writerow([i, cell.x, cell.y, repr(r), repr(running)])
    return buf.getvalue().encode("utf-8")


def _echo_table(title: str, path) -> None:
    click.echo(title)
    for label, value in table_rows(path):
        click.echo(f"{label}\t{value}")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="uavplan")
def cli():
    """Coverage-aware UAV path planning with tabular Q-learning and SARSA."""


@cli.command("gen-scenario")
@click.option("--width-km", type=float, default=10.0, show_default=True)
@click.option("--height-km", type=float, default=4.0, show_default=True)
@click.option("--cell-m", type=float, default=250.0, show_default=True)
@click.option("--bs-layout", type=click.Choice(["chain", "random"]), default="chain", show_default=True)
@click.option("--bs-count", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--altitude-m", type=float, default=60.0, show_default=True)
@click.option("--radius-m", type=float, default=500.0, show_default=True)
@click.option("--ceiling-m", type=float, default=85.0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def gen_scenario(width_km, height_km, cell_m, bs_layout, bs_count, seed, altitude_m, radius_m, ceiling_m, out_dir):
    """Write scenario.json: start on the west edge, goal on the east edge."""
    if cell_m <= 0:
        raise _invalid(f"--cell-m must be > 0, got {cell_m}")
    if bs_count < 0:
        raise _invalid(f"--bs-count must be >= 0, got {bs_count}")
    w = int(round(width_km * 1000 / cell_m))
    h = int(round(height_km * 1000 / cell_m))
    mid = h // 2
    if bs_layout == "chain":
        cells = [CellCoord(int(round((i + 1) * (w - 1) / (bs_count + 1))), mid) for i in range(bs_count)]
    else:
        rng = random.Random(seed)
        cells = [CellCoord(int(rng.random() * w), int(rng.random() * h)) for _ in range(bs_count)]
    try:
        scenario = Scenario(
            width_cells=w,
            height_cells=h,
            start=CellCoord(0, mid),
            goal=CellCoord(w - 1, mid),
            altitude_m=altitude_m,
            base_stations=tuple(BaseStation(c) for c in cells),
            cell_size_m=cell_m,
            coverage_radius_m=radius_m,
            coverage_ceiling_m=ceiling_m,
        )
    except ScenarioError as exc:
        raise _invalid(str(exc)) from exc
    data = save_scenario(scenario)
    manifest = RunManifest("gen-scenario", _argv(), scenario_sha256=_sha256(data), seeds=[seed])
    _write_outputs(Path(out_dir), {"scenario.json": data}, manifest)
    click.echo(f"wrote {Path(out_dir) / 'scenario.json'} ({w} x {h} cells, {bs_count} BSs)")


@cli.command("train")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--algo", type=click.Choice([a.value for a in Algorithm]), default="qlearning", show_default=True)
@_hyperparam_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def train_cmd(scenario_path, algo, seed, out_dir, **hp):
    """Train a Q-table; writes <algo>_qtable.json and <algo>_curve.csv."""
    scenario, digest = _load_scenario(scenario_path)
    h = _hyperparams(seed=seed, **_hp_kwargs(**hp)).resolved(scenario)
    q, trace = train(scenario, build_coverage(scenario), algo, h)
    artifacts = {f"{algo}_qtable.json": q.dumps(), f"{algo}_curve.csv": trace.to_csv()}
    manifest = RunManifest(
        "train", _argv(), digest, h.to_dict(), seeds=[seed], algorithms=[algo]
    )
    _write_outputs(Path(out_dir), artifacts, manifest, tag=algo)
    reached = sum(r.reached_goal for r in trace.records)
    click.echo(f"{algo}: {h.episodes} episodes, goal reached in {reached}; final epsilon {trace.records[-1].epsilon:.4g}")


@cli.command("rollout")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--qtable", "qtable_path", required=True, type=click.Path(dir_okay=False))
@click.option("--step-cap", type=int, default=None, help="[default: the table's training step cap]")
@click.option("--no-radius", is_flag=True, help="Omit the analytic coverage circles from the SVG.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def rollout_cmd(scenario_path, qtable_path, step_cap, no_radius, out_dir):
    """Greedy rollout of a trained table; writes <algo>_path.csv and <algo>_path.svg."""
    scenario, digest = _load_scenario(scenario_path)
    try:
        q = QTable.loads(_read(qtable_path), scenario)
    except (ValueError, KeyError) as exc:
        raise _invalid(f"{qtable_path}: {exc}") from exc
    if step_cap is None:
        step_cap = (q.hyperparams or {}).get("max_steps_per_episode") or 4 * (
            scenario.width_cells + scenario.height_cells
        )
    if step_cap < 1:
        raise _invalid(f"--step-cap must be >= 1, got {step_cap}")
    coverage = build_coverage(scenario)
    path = greedy_rollout(scenario, coverage, q, step_cap)
    tag = q.algorithm or "rollout"
    label = DISPLAY_NAMES.get(Algorithm(tag), tag) if tag in {a.value for a in Algorithm} else tag
    artifacts = {
        f"{tag}_path.csv": _path_csv(scenario, path),
        f"{tag}_path.svg": render(scenario, coverage, [(label, path.cells)], show_radius=not no_radius).encode("utf-8"),
    }
    manifest = RunManifest(
        "rollout", _argv(), digest, q.hyperparams, algorithms=[tag] if q.algorithm else []
    )
    _write_outputs(Path(out_dir), artifacts, manifest, tag=tag)
    if not path.reached_goal:
        click.echo(f"warning: goal not reached within {step_cap} steps", err=True)
    _echo_table(label, path)


@cli.command("compare")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@_hyperparam_options
@click.option("--seeds", default="1,2,3,4,5", show_default=True, help="Comma-separated seed list.")
@click.option("--window", type=int, default=None, help="Final-window size  [default: episodes / 10]")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def compare_cmd(scenario_path, seeds, window, workers, out_dir, **hp):
    """Q-learning vs SARSA over several seeds; writes comparison.csv, report.json, paths.svg."""
    scenario, digest = _load_scenario(scenario_path)
    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise _invalid(f"--seeds: {exc}") from exc
    if not seed_list:
        raise _invalid("--seeds: at least one seed is required")
    h = _hyperparams(**_hp_kwargs(**hp))
    try:
        report = compare(scenario, h, seed_list, window=window, workers=workers)
    except (ValueError, HyperparamError) as exc:
        raise _invalid(str(exc)) from exc
    first = report.seeds[0]
    overlay = [
        (f"{DISPLAY_NAMES[r.algorithm]} (seed {first})", r.path.cells)
        for r in report.runs
        if r.seed == first
    ]
    artifacts = {
        "comparison.csv": report.to_csv(),
        "report.json": report.to_json(),
        "paths.svg": render(scenario, build_coverage(scenario), overlay).encode("utf-8"),
    }
    manifest = RunManifest(
        "compare",
        _argv(),
        digest,
        report.hyperparams,
        seeds=list(report.seeds),
        algorithms=[a.value for a in report.summaries],
    )
    _write_outputs(Path(out_dir), artifacts, manifest)
    click.echo(report.table(), nl=False)
    adv = report.final_reward_advantage_pct
    click.echo(
        "Final-window mean reward (median): "
        + ", ".join(f"{DISPLAY_NAMES[a]} {m.final_window_mean:.4f}" for a, m in report.summaries.items())
        + ("" if adv is None else f"; Q-learning advantage {adv:+.1f}%")
    )


@cli.command("oracle")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False))
@click.option("--gamma", type=float, default=_DEFAULTS.gamma, show_default=True)
@click.option("--tolerance", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option("--actions", type=click.Choice(["4", "8"]), default=str(_DEFAULTS.n_actions), show_default=True)
@click.option("--max-states", type=int, default=DEFAULT_MAX_STATES, show_default=True)
@click.option("--check", "check_path", type=click.Path(dir_okay=False), default=None,
              help="Q-table whose greedy rollout return must match V*(start).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def oracle_cmd(scenario_path, gamma, tolerance, actions, max_states, check_path, out_dir):
    """Value iteration; writes values.csv and policy.txt and prints V*(start)."""
    scenario, digest = _load_scenario(scenario_path)
    if scenario.n_states > max_states:
        raise _invalid(
            f"scenario has {scenario.n_states} states, above the oracle cap of {max_states}; "
            "the oracle is a verification tool for small grids"
        )
    q = None
    if check_path is not None:
        try:
            q = QTable.loads(_read(check_path), scenario)
        except (ValueError, KeyError) as exc:
            raise _invalid(f"{check_path}: {exc}") from exc
        if q.n_actions != int(actions):
            raise _invalid(f"{check_path} has {q.n_actions} actions but --actions is {actions}")
    coverage = build_coverage(scenario)
    try:
        v = value_iteration(scenario, coverage, gamma, tolerance, n_actions=int(actions))
    except ValueError as exc:
        raise _invalid(str(exc)) from exc

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["state", "x", "y", "value", "action"])
    names = [a.name for a in action_set(int(actions))]
    for s, value in enumerate(v.values):
        a = int(v.policy[s])
        writer.writerow([s, s % scenario.width_cells, s // scenario.width_cells, repr(float(value)),
                         "" if a < 0 else names[a]])
    artifacts = {"values.csv": buf.getvalue().encode("utf-8"), "policy.txt": policy_map(scenario, v).encode("utf-8")}
    manifest = RunManifest(
        "oracle", _argv(), digest, {"gamma": gamma, "tolerance": tolerance, "n_actions": int(actions)}
    )
    _write_outputs(Path(out_dir), artifacts, manifest)
    v_start = optimal_return(v, scenario)
    click.echo(f"V*(start) = {v_start:.10g}  ({v.sweeps} sweeps)")
    cells, rewards = policy_path(scenario, coverage, v)
    click.echo(f"oracle path: {len(rewards)} steps, discounted return {discounted_return(rewards, gamma):.10g}")

    if q is not None:
        cap = (q.hyperparams or {}).get("max_steps_per_episode") or scenario.n_states
        path = greedy_rollout(scenario, coverage, q, cap)
        g = path.discounted_return(gamma)
        diff = abs(g - v_start)
        click.echo(f"check: rollout return {g:.10g}, |diff| = {diff:.3g}")
        if not path.reached_goal or diff > RETURN_TOLERANCE:
            raise CliFailure(
                f"rollout return {g:.12g} differs from V*(start) {v_start:.12g} by {diff:.3g} "
                f"(tolerance {RETURN_TOLERANCE:g}; reached goal: {path.reached_goal})",
                EXIT_CHECK_FAILED,
            )


def main(argv=None) -> int:
    global _invocation
    _invocation = list(argv) if argv is not None else sys.argv[1:]
    try:
        cli.main(args=argv, prog_name="uavplan", standalone_mode=False)
    except CliFailure as exc:
        click.echo(f"error: {exc.message}", err=True)
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
