import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> list of (test id, outcome, detail)
_CRITERIA: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test backs numbered acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if rep.skipped and not detail:
            detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else "skipped"
        if rep.failed and not detail:
            detail = rep.longreprtext.strip().splitlines()[-1][:160] if rep.longreprtext else "failed"
        _CRITERIA.setdefault(marker.args[0], []).append((item.name, rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        rows = _CRITERIA[num]
        outcomes = {o for _, o, _ in rows}
        verdict = "FAIL" if "failed" in outcomes else ("PASS" if outcomes == {"passed"} else "PASS (partial skip)" if "passed" in outcomes else "SKIP")
        terminalreporter.write_line(f"criterion {num}: {verdict}")
        for name, o, detail in rows:
            terminalreporter.write_line(f"    {o:7s} {name}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
