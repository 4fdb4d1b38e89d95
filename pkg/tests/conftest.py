import numpy as np
import pytest

from fmk.chart_core.domain import sample_points
from fmk.models import builtin_model

BUILTINS = ("semisimple2", "semisimple3", "kappa2d", "frob-cp1")


@pytest.fixture(scope="session")
def models():
    cache = {}

    def get(name, **params):
        key = (name, tuple(sorted(params.items())))
        if key not in cache:
            cache[key] = builtin_model(name, **params)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def points():
    def get(model, count=40, seed=42):
        return sample_points(model.domain, count, seed)

    return get


def sup(a):
    return float(np.max(np.abs(a)))


FD_STEP = 1e-5


def central_difference(fn, pts, h=FD_STEP):
    """Central differences of ``fn(pts)`` with the coordinate index appended last."""
    pts = np.asarray(pts, float)
    cols = []
    for e in np.eye(pts.shape[1]):
        cols.append((fn(pts + h * e) - fn(pts - h * e)) / (2 * h))
    return np.stack(cols, axis=-1)


def jet_fd_error(field, pts):
    """Worst |AD - FD| / (1 + |AD|) over orders one and two."""
    jet = field.jet(pts, 2)
    d1, d2 = jet.derivative_tensor(1), jet.derivative_tensor(2)
    fd1 = central_difference(field.values, pts)
    fd2 = central_difference(lambda q: field.jet(q, 1).derivative_tensor(1), pts)
    return max(float(np.max(np.abs(d1 - fd1) / (1 + np.abs(d1)))), float(np.max(np.abs(d2 - fd2) / (1 + np.abs(d2)))))


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
