import pytest

# (criterion number, title, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record():
    def _record(number, title, passed, detail=""):
        ACCEPTANCE.append((number, title, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number} ({title}): {detail}")
