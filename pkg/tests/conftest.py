import pytest

from sentprobe.experiments import DeskConfig, reconstruction_experiment

_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def desk():
    """Mean-pooling encoder + concat/softmax decoder trained on the synthetic corpus."""
    return reconstruction_experiment(DeskConfig())


@pytest.fixture
def criterion():
    """Record one acceptance line; the test asserts afterwards."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
