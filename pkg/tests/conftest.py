import numpy as np
import pytest

from pulseforge.sim.devices import cr_demo_backend, zx_test_backend


@pytest.fixture(scope="session")
def demo_backend():
    return cr_demo_backend()


@pytest.fixture(scope="session")
def zx_backend():
    return zx_test_backend()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance summary ----------------------------------------------------------

_OUTCOMES = pytest.StashKey[dict]()
_DETAILS = pytest.StashKey[dict]()
N_CRITERIA = 11


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.stash[_OUTCOMES] = {}
    config.stash[_DETAILS] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    ok = call.excinfo is None
    store = item.config.stash[_OUTCOMES].setdefault(mark.args[0], {})
    if call.when == "call" or not ok:
        store[item.name] = ok


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the current criterion."""
    mark = request.node.get_closest_marker("criterion")

    def note(text):
        request.config.stash[_DETAILS].setdefault(mark.args[0], []).append(f"{request.node.name}: {text}")

    return note


def pytest_terminal_summary(terminalreporter, config):
    outcomes = config.stash.get(_OUTCOMES, {})
    if not outcomes:
        return
    details = config.stash.get(_DETAILS, {})
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        tests = outcomes.get(n)
        if not tests:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
            continue
        failed = sorted(k for k, ok in tests.items() if not ok)
        status = "PASS" if not failed else "FAIL"
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n:2d}: {status}{extra}")
        for line in details.get(n, []):
            terminalreporter.write_line(f"    {line}")
