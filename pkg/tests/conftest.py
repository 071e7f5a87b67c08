import pytest

_RESULTS: dict[str, tuple[str, str]] = {}


@pytest.fixture
def detail(request):
    """Collect a one-line measurement summary for the acceptance report."""
    parts: list[str] = []
    request.node.user_properties.append(("detail", parts))
    return parts.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    parts = dict(item.user_properties).get("detail", [])
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    _RESULTS[marker.args[0]] = (status, "; ".join(parts))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: (int(k.split("-")[0]), k)):
        status, text = _RESULTS[key]
        terminalreporter.write_line(f"criterion {key:<5} {status}  {text}")
