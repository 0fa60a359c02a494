import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import sentsel.analysis
import sentsel.cli
import sentsel.evalmetrics
import sentsel.trainer

# every evaluation run anywhere in the suite is checked for acc_full <= acc_part <= accuracy
ORDERING = {"runs": 0, "violations": []}


def _checked(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        rep = fn(*args, **kwargs)
        ORDERING["runs"] += 1
        if not rep.acc_full <= rep.acc_part <= rep.accuracy:
            ORDERING["violations"].append((rep.acc_full, rep.acc_part, rep.accuracy))
            raise AssertionError(f"ordering violated: {rep.acc_full} {rep.acc_part} {rep.accuracy}")
        return rep
    return wrapper


_wrapped = _checked(sentsel.evalmetrics.evaluate_records)
for mod in (sentsel.evalmetrics, sentsel.trainer, sentsel.analysis, sentsel.cli):
    mod.evaluate_records = _wrapped


ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): primary acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        if ACCEPTANCE.get(name) != "FAIL":
            ACCEPTANCE[name] = status


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not ORDERING["runs"]:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, status in ACCEPTANCE.items():
        tr.write_line(f"{status}  {name}")
    ok = "PASS" if not ORDERING["violations"] else "FAIL"
    tr.write_line(f"{ok}  ordering acc_full <= acc_part <= accuracy over all "
                  f"{ORDERING['runs']} evaluation runs in this session")
