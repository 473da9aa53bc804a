import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from terraseg import Config  # noqa: E402
from terraseg.kernels import backends  # noqa: E402


@pytest.fixture
def cfg():
    return Config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(backends()))
def backend(request):
    """Each available kernel module in turn."""
    return backends()[request.param]


acceptance_lines = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one acceptance line; shown again in the terminal summary."""
    lines = request.config.stash.setdefault(acceptance_lines, [])

    def emit(number, ok, text):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number}: {status} {text}"
        lines.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(acceptance_lines, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
