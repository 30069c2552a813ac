import sys

import numpy as np
import pytest

from ifbm_persistence.model import make_grid
from ifbm_persistence.toeplitz import correlation_samples, schur_coefficients


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("IFBM_PERSISTENCE_CACHE", str(tmp_path / "cache"))


@pytest.fixture(scope="session")
def table_half():
    """Standard table at H = 0.5, n0 = 50, eps_L = 1e-4 (L = 508)."""
    return schur_coefficients(correlation_samples(make_grid(0.5, 50, 1e-4)))


@pytest.fixture(scope="session")
def small_table():
    """Short H = 0.5 table used for exhaustive path checks."""
    return schur_coefficients(correlation_samples(make_grid(0.5, 10, 0.05)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in sorted(mod.RESULTS.items(), key=lambda kv: kv[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
