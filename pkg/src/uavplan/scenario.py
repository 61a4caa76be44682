"""World model: grid geometry, base stations and the reliable-coverage mask.

Scenario files are JSON documents with a fixed key set.  Saving is
canonical (fixed key order, one key per line, trailing newline) so that
``save_scenario(load_scenario(b)) == b`` for any canonically written file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_CELL_SIZE_M = 250.0
DEFAULT_COVERAGE_RADIUS_M = 500.0
DEFAULT_COVERAGE_CEILING_M = 85.0


class ScenarioError(ValueError):
    """Invalid scenario content.  ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class CellCoord(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class BaseStation:
    cell: CellCoord


@dataclass(frozen=True)
class Scenario:
    width_cells: int
    height_cells: int
    start: CellCoord
    goal: CellCoord
    altitude_m: float
    base_stations: tuple[BaseStation, ...] = ()
    cell_size_m: float = DEFAULT_CELL_SIZE_M
    coverage_radius_m: float = DEFAULT_COVERAGE_RADIUS_M
    coverage_ceiling_m: float = DEFAULT_COVERAGE_CEILING_M

    def __post_init__(self):
        for name in ("altitude_m", "cell_size_m", "coverage_radius_m", "coverage_ceiling_m"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ScenarioError(f"expected a number, got {value!r}", name)
            object.__setattr__(self, name, float(value))
        object.__setattr__(self, "start", CellCoord(*self.start))
        object.__setattr__(self, "goal", CellCoord(*self.goal))
        object.__setattr__(
            self,
            "base_stations",
            tuple(
                bs if isinstance(bs, BaseStation) else BaseStation(CellCoord(*bs))
                for bs in self.base_stations
            ),
        )
        self.validate()

    @property
    def n_states(self) -> int:
        return self.width_cells * self.height_cells

    def contains(self, cell: CellCoord) -> bool:
        return 0 <= cell.x < self.width_cells and 0 <= cell.y < self.height_cells

    def validate(self) -> None:
        for name in ("width_cells", "height_cells"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ScenarioError(f"must be an integer, got {value!r}", name)
            if value < 2:
                raise ScenarioError(f"must be >= 2, got {value}", name)
        if not self.cell_size_m > 0:
            raise ScenarioError(f"must be > 0, got {self.cell_size_m!r}", "cell_size_m")
        for name in ("coverage_radius_m", "coverage_ceiling_m"):
            if not getattr(self, name) >= 0:
                raise ScenarioError(f"must be >= 0, got {getattr(self, name)!r}", name)
        if not np.isfinite(self.altitude_m):
            raise ScenarioError("must be finite", "altitude_m")
        for name in ("start", "goal"):
            cell = getattr(self, name)
            if not self.contains(cell):
                raise ScenarioError(
                    f"{tuple(cell)} outside {self.width_cells}x{self.height_cells} grid", name
                )
        if self.start == self.goal:
            raise ScenarioError("start and goal must differ", "goal")
        for i, bs in enumerate(self.base_stations):
            if not self.contains(bs.cell):
                raise ScenarioError(
                    f"{tuple(bs.cell)} outside {self.width_cells}x{self.height_cells} grid",
                    f"base_stations[{i}]",
                )

    def mirrored(self) -> Scenario:
        """Horizontal reflection (x -> width - 1 - x)."""
        w = self.width_cells - 1
        return Scenario(
            width_cells=self.width_cells,
            height_cells=self.height_cells,
            start=CellCoord(w - self.start.x, self.start.y),
            goal=CellCoord(w - self.goal.x, self.goal.y),
            altitude_m=self.altitude_m,
            base_stations=tuple(
                BaseStation(CellCoord(w - bs.cell.x, bs.cell.y)) for bs in self.base_stations
            ),
            cell_size_m=self.cell_size_m,
            coverage_radius_m=self.coverage_radius_m,
            coverage_ceiling_m=self.coverage_ceiling_m,
        )


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """Boolean reliability mask indexed ``reliable[y, x]`` (row-major)."""

    reliable: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.reliable, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "reliable", arr)

    def __eq__(self, other):
        if not isinstance(other, CoverageGrid):
            return NotImplemented
        return np.array_equal(self.reliable, other.reliable)

    def __getitem__(self, cell: CellCoord) -> bool:
        return bool(self.reliable[cell[1], cell[0]])

    @property
    def flat(self) -> np.ndarray:
        """Mask in state-index order (y * width + x)."""
        return self.reliable.ravel()

    def count(self) -> int:
        return int(self.reliable.sum())


def build_coverage(scenario: Scenario) -> CoverageGrid:
    """Mark every cell whose center lies within the reliable disk of some BS.

    The disk is closed.  Distances are compared squared, in integer cell
    units scaled by the cell size, so boundary cells are decided exactly.
    """
    scenario.validate()
    h, w = scenario.height_cells, scenario.width_cells
    mask = np.zeros((h, w), dtype=bool)
    if scenario.altitude_m > scenario.coverage_ceiling_m or not scenario.base_stations:
        return CoverageGrid(mask)
    ys, xs = np.mgrid[0:h, 0:w]
    r2 = float(scenario.coverage_radius_m) ** 2
    c2 = float(scenario.cell_size_m) ** 2
    for bs in scenario.base_stations:
        d2_cells = (xs - bs.cell.x) ** 2 + (ys - bs.cell.y) ** 2
        mask |= d2_cells * c2 <= r2
    return CoverageGrid(mask)


# -- serialization ----------------------------------------------------------

_KEYS = (
    "width_cells",
    "height_cells",
    "cell_size_m",
    "altitude_m",
    "coverage_radius_m",
    "coverage_ceiling_m",
    "start",
    "goal",
    "base_stations",
)
_REQUIRED = {"width_cells", "height_cells", "start", "goal", "altitude_m"}


def _as_cell(value, name: str) -> CellCoord:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ScenarioError(f"expected [x, y] integer pair, got {value!r}", name)
    return CellCoord(value[0], value[1])


def _as_number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", name)
    return float(value)


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "width_cells": scenario.width_cells,
        "height_cells": scenario.height_cells,
        "cell_size_m": scenario.cell_size_m,
        "altitude_m": scenario.altitude_m,
        "coverage_radius_m": scenario.coverage_radius_m,
        "coverage_ceiling_m": scenario.coverage_ceiling_m,
        "start": list(scenario.start),
        "goal": list(scenario.goal),
        "base_stations": [list(bs.cell) for bs in scenario.base_stations],
    }


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level must be an object")
    unknown = sorted(set(data) - set(_KEYS))
    if unknown:
        raise ScenarioError("unknown key", unknown[0])
    missing = sorted(_REQUIRED - set(data))
    if missing:
        raise ScenarioError("missing required key", missing[0])
    kwargs = {}
    for name in ("width_cells", "height_cells"):
        value = data[name]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"expected an integer, got {value!r}", name)
        kwargs[name] = value
    for name in ("cell_size_m", "altitude_m", "coverage_radius_m", "coverage_ceiling_m"):
        if name in data:
            kwargs[name] = _as_number(data[name], name)
    kwargs["start"] = _as_cell(data["start"], "start")
    kwargs["goal"] = _as_cell(data["goal"], "goal")
    stations = data.get("base_stations", [])
    if not isinstance(stations, list):
        raise ScenarioError("expected a list", "base_stations")
    kwargs["base_stations"] = tuple(
        BaseStation(_as_cell(v, f"base_stations[{i}]")) for i, v in enumerate(stations)
    )
    return Scenario(**kwargs)


def load_scenario(source: bytes | str) -> Scenario:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario) -> bytes:
    # One key per line, values inline, so files stay hand-editable.
    items = [f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in scenario_to_dict(scenario).items()]
    return ("{\n" + ",\n".join(items) + "\n}\n").encode("utf-8")


def scenario_digest(scenario: Scenario) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(save_scenario(scenario)).hexdigest()


def canonical_scenario() -> Scenario:
    """The bundled 40 x 16 scenario (10 km x 4 km at 250 m cells)."""
    from importlib.resources import files

    return load_scenario(files("uavplan").joinpath("data/canonical_40x16.json").read_bytes())
