import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Call ``acceptance(k, passed, detail)`` once per criterion; prints and records one line."""
    def record(k: int, passed: bool, detail: str):
        line = f"ACCEPTANCE {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _RESULTS[k] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[k])
