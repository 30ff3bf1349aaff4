import os

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("ci", deadline=None, max_examples=200)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LEVEL = os.environ.get("BOOLPERC_ACCEPTANCE", "").lower()
FULL_ACCEPTANCE = ACCEPTANCE_LEVEL in ("full", "all")
ALL_ACCEPTANCE = ACCEPTANCE_LEVEL == "all"

# criterion id -> list of (test id, outcome, detail)
CRITERIA: dict = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("infeasible")
        if marker is not None and not ALL_ACCEPTANCE:
            reason = marker.kwargs.get("reason", "infeasible acceptance item")
            item.add_marker(pytest.mark.skip(reason=f"{reason}; set BOOLPERC_ACCEPTANCE=all"))
            continue
        marker = item.get_closest_marker("heavy")
        if marker is not None and not FULL_ACCEPTANCE:
            reason = marker.kwargs.get("reason", "heavy acceptance item")
            item.add_marker(pytest.mark.skip(reason=f"{reason}; set BOOLPERC_ACCEPTANCE=full"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and (rep.skipped or rep.failed)):
        if rep.skipped:
            status, detail = "SKIP", str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        else:
            status = "PASS" if rep.passed else "FAIL"
            detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
            if rep.failed:
                crash = getattr(rep.longrepr, "reprcrash", None)
                msg = crash.message.splitlines()[0] if crash else str(rep.longrepr).splitlines()[-1]
                detail = f"{detail}; {msg}" if detail else msg
        CRITERIA.setdefault(int(marker.args[0]), []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(CRITERIA):
        rows = CRITERIA[crit]
        states = {s for _, s, _ in rows}
        overall = "FAIL" if "FAIL" in states else ("PASS" if states == {"PASS"} else
                                                   "PARTIAL" if "PASS" in states else "NOT RUN")
        tr.write_line(f"criterion {crit:2d}: {overall}")
        for name, status, detail in rows:
            tr.write_line(f"    {status:4s} {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
