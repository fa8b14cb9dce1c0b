import json
import time
from pathlib import Path

import pytest

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SUITE_LIMIT = 120.0

# filled by test_acceptance.py: criterion -> (ok, detail)
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_START = [time.perf_counter()]


@pytest.fixture
def load():
    def _load(name):
        return json.loads((CONFIGS / f"{name}.json").read_text(encoding="utf-8"))
    return _load


def pytest_sessionstart(session):
    _START[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    wall = time.perf_counter() - _START[0]
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    ok = wall < SUITE_LIMIT
    tr.write_line(f"suite wall-clock: {'PASS' if ok else 'FAIL'}  {wall:.1f} s (limit {SUITE_LIMIT:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    if ACCEPTANCE and time.perf_counter() - _START[0] >= SUITE_LIMIT and session.exitstatus == 0:
        session.exitstatus = 1
