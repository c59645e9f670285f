import pytest

from pinning.excursion import SlowVariation, build_law


@pytest.fixture(scope="session")
def laws():
    """Shared laws keyed by c (constant phi)."""
    return {c: build_law(c, SlowVariation(), 4096) for c in (1.3, 1.5, 1.8, 2.0, 2.5)}


@pytest.fixture(scope="session")
def small_laws():
    return {c: build_law(c, SlowVariation(), 64) for c in (1.5, 1.8, 2.0, 2.5)}


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (len(k), k)):
        terminalreporter.write_line(mod.RESULTS[key])
