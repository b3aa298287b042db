import functools

import numpy as np
import pytest

from asyncwr.model import HeatProblemConfig
from asyncwr.relaxopt import relax_table
from asyncwr.timeint import implicit_euler, trapezoidal
from asyncwr.wr import WRProblem


@functools.lru_cache(maxsize=None)
def heat_problem(pair="air-steel", dx=1 / 16, N=10, Nw=None, dimension=1, integrator="cn", Tf=1.0e4):
    cfg = HeatProblemConfig(dimension=dimension, dx=dx, materials=pair, Tf=Tf, Nv=N, Nw=Nw or N)
    method = trapezoidal() if integrator == "cn" else implicit_euler()
    return WRProblem.from_config(cfg, method)


@functools.lru_cache(maxsize=None)
def optimal_relax(pair="air-steel", dx=1 / 16, N=10, Tf=1.0e4):
    return relax_table(HeatProblemConfig(dx=dx, materials=pair).materials, Tf / N, dx)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
