import socket
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

BUDGET_SECONDS = 600
REPORT: dict[int, tuple[bool, str]] = {}
_state = {"start": 0.0, "failed": 0, "guard": False}


class NetworkBlocked(OSError):
    pass


def _blocked(*args, **kwargs):
    raise NetworkBlocked("network access is disabled during tests")


def pytest_sessionstart(session):
    _state["start"] = time.monotonic()
    socket.socket.connect = _blocked
    socket.socket.connect_ex = _blocked
    socket.create_connection = _blocked
    socket.getaddrinfo = _blocked
    _state["guard"] = True


def pytest_runtest_logreport(report):
    if report.failed:
        _state["failed"] += 1


def report(criterion: int, ok: bool, detail: str) -> None:
    REPORT[criterion] = (ok, detail)


@pytest.fixture
def acceptance():
    return report


def pytest_terminal_summary(terminalreporter):
    if not REPORT:
        return
    elapsed = time.monotonic() - _state["start"]
    ok8 = _state["guard"] and _state["failed"] == 0 and elapsed < BUDGET_SECONDS
    detail8 = (f"network blocked={_state['guard']}, {_state['failed']} failing test(s), "
               f"{elapsed:.1f} s of {BUDGET_SECONDS} s")
    prior = REPORT.get(8)
    if prior is not None and not prior[0]:
        ok8, detail8 = False, prior[1]
    REPORT[8] = (ok8, detail8)
    terminalreporter.section("acceptance criteria")
    for k in sorted(REPORT):
        ok, detail = REPORT[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
