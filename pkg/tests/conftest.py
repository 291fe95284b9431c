import contextlib
import time

import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record a named acceptance check as PASS or FAIL and print one line for it."""

    @contextlib.contextmanager
    def check(label):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            line = f"FAIL  {label}  ({time.perf_counter() - t0:.2f} s): {exc}".splitlines()[0]
            _ACCEPTANCE.append(line)
            print("\n" + line)
            raise
        line = f"PASS  {label}  ({time.perf_counter() - t0:.2f} s)"
        _ACCEPTANCE.append(line)
        print("\n" + line)

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
