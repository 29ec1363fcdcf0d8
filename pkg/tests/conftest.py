"""Shared pytest plumbing for the acceptance report.

Tests named ``test_criterion_*`` are collected into a summary block that
prints one [PASS]/[FAIL] line per criterion after the run, so the outcome
of the whole acceptance suite can be read at a glance.
"""

import re

import pytest


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def record_detail(request, pytestconfig):
    """Let a criterion test attach a short measurement string to its line."""

    def _set(text):
        entry = pytestconfig._acceptance.setdefault(request.node.name, {})
        entry["detail"] = str(text)

    return _set


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if item.name.startswith("test_criterion_"):
        entry = item.config._acceptance.setdefault(item.name, {})
        if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
            entry["outcome"] = rep.outcome
        doc = (item.function.__doc__ or "").strip().splitlines()
        entry.setdefault("desc", doc[0] if doc else item.name)
    return rep


def _criterion_key(name):
    m = re.search(r"criterion_(\d+)", name)
    return int(m.group(1)) if m else 99


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_acceptance", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(store, key=_criterion_key):
        entry = store[name]
        tag = "PASS" if entry.get("outcome") == "passed" else "FAIL"
        line = f"[{tag}] {entry.get('desc', name)}"
        detail = entry.get("detail")
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
