"""Shared fixtures: a hand-built 4-bus case and small cached datasets."""

import numpy as np
import pytest

from gridinertia.grid import Branch, Bus, Generator, PowerSystem
from gridinertia.pipeline import SimConfig, assemble_dataset
from gridinertia.rts24 import build_ieee24


def make_tiny_system():
    """4-bus ring with machines at buses 1 and 3 (bus 2 and 4 load-only)."""
    buses = (
        Bus(1, 138.0, load_p=0.0, has_generator=True),
        Bus(2, 138.0, load_p=0.05),
        Bus(3, 138.0, load_p=0.0, has_generator=True),
        Bus(4, 138.0, load_p=0.03),
    )
    branches = (
        Branch(1, 2, 0.003, 0.03),
        Branch(2, 3, 0.003, 0.03),
        Branch(3, 4, 0.003, 0.03),
        Branch(4, 1, 0.003, 0.03),
    )
    generators = (
        Generator(bus=1, s_rated=60.0, h=4.0, d=1.0, xd_t=0.25, p_set=0.05),
        Generator(bus=3, s_rated=40.0, h=3.0, d=1.0, xd_t=0.30, p_set=0.03),
    )
    return PowerSystem(name="tiny4", buses=buses, branches=branches,
                       generators=generators, s_base=100.0)


@pytest.fixture
def tiny_system():
    return make_tiny_system()


@pytest.fixture(scope="session")
def ieee24():
    return build_ieee24()


@pytest.fixture(scope="session")
def small_dataset(ieee24):
    """30-sample clean bundle on the full case (6 inertia x 5 amplitudes)."""
    return assemble_dataset(
        ieee24, sweep_h=np.linspace(3.0, 8.0, 6),
        sweep_pe=np.linspace(0.002, 0.01, 5), seed=0,
        sim=SimConfig(seed=0))


@pytest.fixture(scope="session")
def tiny_dataset():
    """12-sample bundle on the 4-bus case; fastest end-to-end data."""
    system = make_tiny_system()
    return assemble_dataset(
        system, sweep_h=np.linspace(3.0, 6.0, 4),
        sweep_pe=np.linspace(0.004, 0.01, 3), seed=0,
        sim=SimConfig(seed=0))
