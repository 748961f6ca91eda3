from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def fig4d() -> np.ndarray:
    """Two steps with A=0.3/blank=0.4 then A=0.3/blank=0.5; the rest spread over C, G, T."""
    return np.array(
        [
            [0.3, 0.1, 0.1, 0.1, 0.4],
            [0.3, 0.1, 0.05, 0.05, 0.5],
        ]
    )


def random_prob_matrix(rng: np.random.Generator, steps: int) -> np.ndarray:
    return rng.dirichlet(np.ones(5), size=steps)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
