import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the terminal summary."""

    def record(key, title, passed, detail=""):
        _CRITERIA[key] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[key]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} {key} {title}: {detail}")
