import numpy as np
import pytest

from armload.imaging import BinaryMask, ImageBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rgb(arr) -> ImageBuffer:
    return ImageBuffer(np.asarray(arr, dtype=np.uint8))


def gray(arr) -> ImageBuffer:
    return ImageBuffer(np.asarray(arr, dtype=np.uint8))


def mask(arr) -> BinaryMask:
    return BinaryMask(np.asarray(arr, dtype=bool))


def disk(size, cx, cy, r) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
