import random

import pytest

from uavplan.scenario import BaseStation, CellCoord, Scenario, build_coverage

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    """Record a one-line pass/fail verdict printed in the terminal summary."""

    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}"
        if detail:
            line += f" -- {detail}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)

    return record


def make_scenario(width, height, start, goal, stations=(), altitude=60.0, cell=250.0, **kw):
    return Scenario(
        width_cells=width,
        height_cells=height,
        start=CellCoord(*start),
        goal=CellCoord(*goal),
        altitude_m=altitude,
        base_stations=tuple(BaseStation(CellCoord(*c)) for c in stations),
        cell_size_m=cell,
        **kw,
    )


def random_scenario(rng: random.Random, min_side=6, max_side=10, max_stations=3) -> Scenario:
    w = rng.randint(min_side, max_side)
    h = rng.randint(min_side, max_side)
    cells = [(x, y) for x in range(w) for y in range(h)]
    start, goal = rng.sample(cells, 2)
    stations = [rng.choice(cells) for _ in range(rng.randint(0, max_stations))]
    return make_scenario(w, h, start, goal, stations)


@pytest.fixture
def one_step():
    """Start directly west of the goal."""
    s = make_scenario(3, 3, (0, 1), (1, 1))
    return s, build_coverage(s)


@pytest.fixture
def two_step_unreliable():
    s = make_scenario(3, 2, (0, 0), (2, 0))
    return s, build_coverage(s)


@pytest.fixture
def two_step_reliable():
    s = make_scenario(3, 2, (0, 0), (2, 0), stations=[(1, 0)])
    return s, build_coverage(s)
