import functools

import pytest

from ftsoc.faultsim import Runner


@functools.lru_cache(maxsize=None)
def _runner(cfg):
    return Runner(cfg)


@pytest.fixture(scope="session")
def runner():
    """Cached per-config runner (SoC plus golden reference)."""
    return _runner


def pytest_configure(config):
    config.acceptance = {}


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    log = request.config.acceptance

    def record(k, ok, detail):
        log[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {k}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = getattr(config, "acceptance", {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(log):
        ok, detail = log[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
