import numpy as np
import pytest

from randbell import _fallback

try:
    from randbell import _kernels
except ImportError:  # extension not built
    _kernels = None

KERNELS = [_fallback] + ([_kernels] if _kernels is not None else [])


@pytest.fixture(params=KERNELS, ids=lambda k: k.BACKEND)
def kernels(request):
    """Each available kernel implementation in turn."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
