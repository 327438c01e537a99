import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "vvlab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "vvlab"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """Isolated output root; also clears any inherited VVLAB_OUT."""
    monkeypatch.delenv("VVLAB_OUT", raising=False)
    return tmp_path / "out"


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Record and echo one acceptance line; the terminal summary repeats them in order."""

    def record(number: int, label: str, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {label}: {detail}"
        _CRITERIA[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
