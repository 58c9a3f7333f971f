import pytest

from dualtable import faults


@pytest.fixture(autouse=True)
def no_leftover_fault_hook():
    yield
    faults.install(None)


@pytest.fixture
def data_dir(tmp_path):
    return str(tmp_path / "db")


_criterion_lines: list[str] = []


@pytest.fixture
def criterion_report():
    """Record one `criterion N: PASS/FAIL (...)` line and assert it.

    The lines are echoed in the terminal summary so the end-to-end verdicts
    stay visible even when output capture swallows in-test prints.
    """

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        _criterion_lines.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
