import pytest

_VERDICTS = {}
_DIAGNOSTICS = []


class Criterion:
    """Collects one acceptance verdict; the summary prints it at session end."""

    def __init__(self):
        self.number = None

    def report(self, number, ok, detail):
        self.number = number
        _VERDICTS[number] = (bool(ok), detail)
        line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        assert ok, line

    def diagnostics(self, source, diag):
        """Register physicality diagnostics of one acceptance run."""
        _DIAGNOSTICS.append((source, dict(diag)))


@pytest.fixture
def criterion(request):
    c = Criterion()
    yield c
    number = getattr(request.node.function, "criterion_number", None)
    if number is not None and number not in _VERDICTS:
        _VERDICTS[number] = (False, "raised before reaching a verdict")


@pytest.fixture
def acceptance_diagnostics():
    return _DIAGNOSTICS


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
