import pytest

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid or report.when != "call":
        return
    name = report.nodeid.split("::", 1)[1]
    _acceptance_results[name] = "PASS" if report.passed else (
        "SKIP" if report.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"{outcome:4s}  {name}")


@pytest.fixture
def rng():
    import random
    return random.Random(0xC0FFEE)
