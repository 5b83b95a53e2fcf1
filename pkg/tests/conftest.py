import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES: dict[int, str] = {}
_KKT: dict[int, float] = {}


class Report:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        status = "PASS" if passed else "FAIL"
        _LINES[number] = f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        return passed

    def kkt(self, number: int, value: float) -> None:
        _KKT[number] = max(_KKT.get(number, 0.0), float(value))

    @property
    def kkt_by_criterion(self) -> dict[int, float]:
        return dict(_KKT)


@pytest.fixture(scope="session")
def report() -> Report:
    return Report()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
