import numpy as np
import pytest

from pcnsim import kernels
from pcnsim.core import validate_config
from pcnsim.generators import Sequence

SMALL8 = [3, -2, -5, 14, 1, 1, 1, 1]


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.backend(request.param)


@pytest.fixture
def small8():
    return Sequence(np.array(SMALL8, dtype=float)), validate_config(B=10, m=14)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line, then assert."""

    def check(cid: str, ok: bool, detail: str):
        line = f"criterion {cid:<3} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
