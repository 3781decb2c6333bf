"""Shared paths and the acceptance-criteria summary hook.

Acceptance tests register one line per criterion through record_criterion;
the terminal summary prints them all, pass or fail, so a single glance at
the end of a pytest run shows where the gate stands.
"""

from __future__ import annotations

import pathlib

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO_ROOT / "configs"

# (criterion number, label, passed, detail), in registration order.
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


def record_criterion(num: int, label: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((num, label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, label, passed, detail in sorted(ACCEPTANCE_RESULTS):
        mark = "PASS" if passed else "FAIL"
        line = f"[{mark}] criterion {num}: {label}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
