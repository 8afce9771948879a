import time

import pytest

from etransport.config import initial_state, preset_section4
from etransport.solver import advance

ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {name}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


class WellsRun:
    def __init__(self, beta):
        self.config = preset_section4(beta)
        self.initial = initial_state(self.config.initial_condition, self.config.grid)
        start = time.perf_counter()
        self.result = advance(self.initial, self.config.model, self.config.grid, self.config.solver, keep_states=True)
        self.seconds = time.perf_counter() - start

    @property
    def states(self):
        return self.result.states


@pytest.fixture(scope="session")
def wells_runs():
    """The two Gaussian-well runs to t = 1, computed once per session."""
    return {beta: WellsRun(beta) for beta in (-0.25, 0.25)}
