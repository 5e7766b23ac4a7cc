import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vesselgap.ais_model import AisRecord  # noqa: E402
from vesselgap.synthetic import Corridor, corridor_trips  # noqa: E402

T0 = 1_704_441_600_000  # 2024-01-05T08:00:00Z


def track(vessel="219000001", n=10, dt_s=60, lat0=55.5, lon0=11.0, dlat=0.0, dlon=0.002, sog=10.0, t0=T0):
    """Straight synthetic track, one record every ``dt_s`` seconds."""
    return [
        AisRecord(vessel, t0 + int(i * dt_s * 1000), lon0 + i * dlon, lat0 + i * dlat, sog, 90.0)
        for i in range(n)
    ]


@pytest.fixture(scope="session")
def corridor_corpus():
    return corridor_trips(200, Corridor(), seed=7)


@pytest.fixture(scope="session")
def small_corpus():
    return corridor_trips(40, Corridor(), seed=3)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    """Record (and print) the one-line verdict for an acceptance criterion."""

    def record(n: int, ok: bool, title: str, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title} | {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
