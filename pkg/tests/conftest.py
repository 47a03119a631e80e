import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Collects one status line per acceptance criterion."""

    def record(number, title, checks, detail, seconds, limit):
        checks = dict(checks)
        checks[f"runtime<{limit:g}s"] = seconds < limit
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number:>2} {title}: {detail} ({seconds:.2f}s)"
        if failed:
            line += f" failed={failed}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
