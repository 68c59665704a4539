"""Shared pytest configuration: the acceptance-gate summary.

Tests marked ``@pytest.mark.acceptance(k, "title")`` belong to headline
acceptance check k.  After the run, one PASS/FAIL line is printed per check so
the gate can be read off the terminal without scanning individual test ids.
"""
from collections import defaultdict

_registered: dict[str, tuple[int, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(criterion, title): headline acceptance-gate check",
    )


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            title = marker.args[1] if len(marker.args) > 1 else item.name
            _registered[item.nodeid] = (int(marker.args[0]), str(title))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _registered:
        return
    passed = {r.nodeid for r in terminalreporter.stats.get("passed", [])}
    not_ok = set()
    for status in ("failed", "error", "skipped"):
        not_ok.update(
            getattr(r, "nodeid", None) for r in terminalreporter.stats.get(status, [])
        )

    by_criterion: dict[int, tuple[str, list[bool]]] = defaultdict(lambda: ("", []))
    for nodeid, (criterion, title) in _registered.items():
        ok = nodeid in passed and nodeid not in not_ok
        _, outcomes = by_criterion[criterion]
        by_criterion[criterion] = (title, outcomes + [ok])

    terminalreporter.section("acceptance criteria")
    for criterion in sorted(by_criterion):
        title, outcomes = by_criterion[criterion]
        verdict = "PASS" if outcomes and all(outcomes) else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {criterion}: {verdict} - {title}")
