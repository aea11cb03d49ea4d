"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import numpy as np
import pytest

from krylov_distance.hamiltonian import zero_potential
from krylov_distance.lanczos import probe
from krylov_distance.lattice import LatticeSpec

# criterion number -> (title, outcome); filled by the hook below for tests
# marked with @pytest.mark.criterion(number, title)
_ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        entry = _ACCEPTANCE.setdefault(number, [title, []])
        entry[1].append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, checks = _ACCEPTANCE[number]
        statuses = [s for _, s in checks]
        if "FAIL" in statuses:
            overall = "FAIL"
        elif "PASS" in statuses:
            overall = "PASS"
        else:
            overall = "SKIP"
        detail = ", ".join(f"{name}={s}" for name, s in checks)
        tr.write_line(f"criterion {number:>2} {overall:<4} {title}  [{detail}]")


@pytest.fixture(scope="session")
def free_series_200():
    """c = 0, d = 3, n_max = 200 on a truncation-free cube (about 15 s, 2 GB)."""
    pot = zero_potential(LatticeSpec(3, 201))
    series = probe(pot, n_max=200)
    del pot
    return series


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
