import pytest

# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance
ACCEPTANCE_LINES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def record_criterion():
    def record(k, ok, detail, seconds):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f} s)  {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return ok

    return record
