import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from vortexkit.flowgrid import FlowGrid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True, scope="session")
def _single_thread():
    # timing criteria are stated single-threaded; small matmuls are faster this way too
    with threadpool_limits(limits=1):
        yield


def make_grid(u, v=None, w=None, axes=None, dt=1.0):
    u = np.asarray(u, dtype=float)
    if u.ndim == 3:
        u = u[None]
    v = np.zeros_like(u) if v is None else np.asarray(v, dtype=float).reshape(u.shape)
    w = np.zeros_like(u) if w is None else np.asarray(w, dtype=float).reshape(u.shape)
    if axes is None:
        axes = [np.arange(n, dtype=float) for n in u.shape[1:]]
    return FlowGrid(x=axes[0], y=axes[1], z=axes[2], dt=dt, u=u, v=v, w=w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
