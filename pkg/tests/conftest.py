"""Shared fixtures and the acceptance-criterion summary."""
from __future__ import annotations

from collections import defaultdict

import numpy as np
import pytest

from rdode.receptor import FIGURE_PARAMS, PSTAR

CRITERIA = {
    1: "worked example A: Routh-Hurwitz regression",
    2: "worked example A: quasi-steady-state reduction",
    3: "worked example B: domain scaling",
    4: "receptor feasibility of both fixtures",
    5: "receptor steady states and their stability",
    6: "unstable mode set at (0.006, 0.017)",
    7: "Turing region grid",
    8: "simulation pattern selection",
    9: "far-from-equilibrium construction",
    10: "property suites",
}

_outcomes: dict[int, list[tuple[str, str]]] = defaultdict(list)
_criterion_of: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: long-running simulation test")


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "passed" if report.passed else ("skipped" if report.skipped else "failed")
        _outcomes[n].append((report.nodeid, status))


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = int(mark.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            tr.write_line(f"criterion {n:2d}: NOT RUN  ({CRITERIA[n]})")
            continue
        failed = [nid for nid, s in results if s != "passed"]
        verdict = "FAIL" if failed else "PASS"
        tr.write_line(f"criterion {n:2d}: {verdict}  ({CRITERIA[n]}, {len(results) - len(failed)}/{len(results)} checks)")
        for nid in failed:
            tr.write_line(f"    not passed: {nid.split('::', 1)[-1]}")


@pytest.fixture(scope="session")
def pstar():
    return PSTAR


@pytest.fixture(scope="session")
def figure_params():
    return FIGURE_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
