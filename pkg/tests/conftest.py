import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riemannian_minmax.games import closed_form_equilibrium, fig1_game

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=["example1", "example2", "example3"])
def fig1_variant(request):
    game = fig1_game(request.param)
    return game, closed_form_equilibrium(game)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
