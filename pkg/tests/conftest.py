import sys

import numpy as np
import pytest

from simplexshot import _backend


@pytest.fixture(params=_backend.available())
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    module = _backend.get(request.param)
    monkeypatch.setattr(_backend, "kernels", module)
    return module


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_weights(rng, n, k):
    W = rng.random((n, k)) + 0.05
    return W / W.sum(axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS):
        terminalreporter.write_line(line)
