import os

import pytest

_ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption(
        "--extended",
        action="store_true",
        default=bool(os.environ.get("MIGRID_EXTENDED")),
        help="run full-dataset checks (network and long compute)",
    )


@pytest.fixture(scope="session")
def acceptance_report():
    """Callable recording one verdict line per acceptance criterion."""

    def record(number, passed, detail):
        verdict = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        line = f"criterion {number}: {verdict}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
