import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "equidyn", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "equidyn"))

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, label): acceptance criterion a test decides")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.user_properties and dict(report.user_properties).get("criterion")
    if not marker:
        return
    key, label = marker
    entry = _criteria.setdefault(key, {"label": label, "ok": True, "n": 0})
    entry["n"] += 1
    entry["ok"] &= report.outcome == "passed"


@pytest.fixture(autouse=True)
def _record_criterion(request):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        request.node.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        e = _criteria[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if e['ok'] else 'FAIL'}  {e['label']}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
