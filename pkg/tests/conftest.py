import os

import numpy as np
import pytest

from salicon import kernels

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    os.environ.setdefault("SALICON_THREADS", "1")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        _criteria.append((marker.args[0], marker.args[1], rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, duration in sorted(_criteria):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({duration:.1f}s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = [pytest.param(kernels.python, id="python")]
if kernels.compiled is not None:
    BACKENDS.append(pytest.param(kernels.compiled, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel backend by swapping the dispatch table."""
    mod = request.param
    for name in ("im2col", "col2im_add", "maxpool_forward", "maxpool_backward", "resize_forward", "resize_adjoint"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod
