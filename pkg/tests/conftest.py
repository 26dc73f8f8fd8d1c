import pytest

# criterion number -> list of (status, name, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


def record(results):
    for r in results:
        ACCEPTANCE.setdefault(r.criterion, []).append((r.status, r.name, r.detail))


@pytest.fixture
def acceptance_log():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        entries = ACCEPTANCE[number]
        statuses = {s for s, _, _ in entries}
        overall = "FAIL" if "FAIL" in statuses else ("XFAIL" if "XFAIL" in statuses else "PASS")
        parts = "; ".join(f"{s} {n}: {d}" for s, n, d in entries)
        terminalreporter.write_line(f"criterion {number:2d}: {overall}  {parts}")
