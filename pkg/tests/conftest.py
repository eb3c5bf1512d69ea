import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """report(criterion, passed, detail) -> passed; the line is printed now and
    repeated in the terminal summary."""
    results = request.config.stash.setdefault(_RESULTS, [])

    def report(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        print(line)
        results.append((criterion, line))
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results, key=lambda r: r[0]):
            terminalreporter.write_line(line)
