import contextlib

import pytest

_acceptance_key = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_acceptance_key] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage::

        with acceptance(3, "K-Means oracle") as note:
            ...
            note("50 instances")
    """
    lines = request.config.stash[_acceptance_key]

    @contextlib.contextmanager
    def check(number, title):
        details = []
        try:
            yield details.append
        except BaseException as exc:
            msg = f"FAIL criterion {number}: {title}"
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            lines.append(f"{msg} ({'; '.join(details + [reason])})")
            print(lines[-1])
            raise
        msg = f"PASS criterion {number}: {title}"
        if details:
            msg += f" ({'; '.join(details)})"
        lines.append(msg)
        print(msg)

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
