from __future__ import annotations

from functools import lru_cache

import pytest

from ultimax import ModelParams, TimeGrid, solve_boundary

ACCEPTANCE_LINES: list[str] = []


@lru_cache(maxsize=None)
def cached_curve(mu: float, n_steps: int = 200, sigma: float = 1.0, horizon: float = 1.0):
    params = ModelParams(mu, sigma, horizon)
    return solve_boundary(params, TimeGrid.uniform(horizon, n_steps))


@pytest.fixture(scope="session")
def curve_for():
    return cached_curve


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
