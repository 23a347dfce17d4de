from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"
_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite golden files instead of comparing")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def golden(request):
    """``golden(name, text)`` compares ``text`` byte-for-byte with tests/golden/<name>."""
    update = request.config.getoption("--update-golden")

    def check(name: str, text: str):
        path = GOLDEN / name
        if update or not path.exists():
            if not update:
                pytest.fail(f"golden file {name} missing; run with --update-golden")
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(text.encode("utf-8"))
            return
        assert text.encode("utf-8") == path.read_bytes(), f"output differs from golden file {name}"

    return check


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    num, title = mark.args
    _, results = _criteria.setdefault(num, (title, []))
    if rep.when == "call" or rep.failed:
        results.append("PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, results = _criteria[num]
        status = "PASS" if results and all(r == "PASS" for r in results) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")
