import pytest


@pytest.fixture
def verdict(request):
    """Print and remember one acceptance line: ``verdict(tag, ok, detail)``."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"[{tag}] {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
