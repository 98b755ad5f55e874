import math

import numpy as np
import pytest

from nstransition.field_core import FlowParams, Grid, VelocityField

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture
def grid64():
    return Grid(64, 64)


@pytest.fixture
def params():
    return FlowParams(nu=0.01)


def band_limited_modes(rng, kmax=4):
    """Random (mx, my, a_u, phase_u, a_v, phase_v) tuples with 0 < |m| <= kmax."""
    modes = []
    for mx in range(0, kmax + 1):
        for my in range(-kmax, kmax + 1):
            if (mx == 0 and my <= 0) or mx * mx + my * my > kmax * kmax:
                continue
            modes.append((mx, my, rng.normal(), rng.uniform(0, 2 * math.pi),
                          rng.normal(), rng.uniform(0, 2 * math.pi)))
    return modes


def eval_modes(modes, X, Y):
    u = np.zeros_like(X)
    v = np.zeros_like(X)
    for mx, my, au, pu, av, pv in modes:
        u += au * np.cos(mx * X + my * Y + pu)
        v += av * np.cos(mx * X + my * Y + pv)
    return u, v


@pytest.fixture
def random_field():
    def make(grid, seed):
        rng = np.random.default_rng(seed)
        X, Y = grid.coordinates()
        u, v = eval_modes(band_limited_modes(rng), X, Y)
        return VelocityField(grid, u, v)
    return make
