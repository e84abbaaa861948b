import pytest

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record():
    def add(name, ok, detail=""):
        ACCEPTANCE.append((name, bool(ok), detail))
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
