import numpy as np
import pytest

from fas_aris.ao import initialize, optimize
from fas_aris.baselines import run_baseline
from fas_aris.scenario import ScenarioConfig, sample_scenario

_RUNS = {}


def cached_run(scheme: str, seed: int, **overrides):
    """Session-wide cache of full optimization runs, keyed by scheme, seed and config overrides."""
    key = (scheme, seed, tuple(sorted(overrides.items())))
    if key not in _RUNS:
        cfg = ScenarioConfig().replace(**overrides)
        draw = sample_scenario(cfg, seed)
        if scheme == "proposed":
            _RUNS[key] = (cfg, draw, optimize(draw, cfg, seed))
        else:
            _RUNS[key] = (cfg, draw, run_baseline(scheme, draw, cfg, seed))
    return _RUNS[key]


@pytest.fixture(scope="session")
def run_cache():
    return cached_run


@pytest.fixture
def cfg():
    return ScenarioConfig()


@pytest.fixture
def point(cfg):
    """A feasible operating point (draw, state) on seed 7."""
    draw = sample_scenario(cfg, 7)
    return draw, initialize(draw, cfg, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion; printed in the terminal summary."""
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
