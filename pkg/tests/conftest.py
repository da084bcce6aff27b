import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(label: str, ok: bool, detail: str, seconds: float):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail} ({seconds:.2f} s)"
        request.config.stash[_LINES].append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
