"""Shared fixtures. The full-device sweep fixtures are session-scoped and
lazy: only the acceptance module pays for them."""
from __future__ import annotations

import dataclasses
import logging
import time

import pytest

from etsp import default_spec
from etsp.coupler import Simulator

logging.getLogger("etsp").setLevel(logging.WARNING)

SWEEP_TIMES: dict[str, float] = {}


def small_spec(**overrides):
    """Coarse, fast device for unit tests (same geometry, small grids)."""
    base = dict(N_x=10, N_z=10, n_modes=4, V_DS_max=0.04)
    base.update(overrides)
    return dataclasses.replace(default_spec(), **base).validate()


def _run_sweep(name: str, **overrides):
    spec = dataclasses.replace(default_spec(), **overrides).validate()
    t0 = time.time()
    result = Simulator(spec).sweep()
    SWEEP_TIMES[name] = time.time() - t0
    return result


@pytest.fixture(scope="session")
def sweep_et_vg0():
    return _run_sweep("et_vg0")


@pytest.fixture(scope="session")
def sweep_et_vg02():
    return _run_sweep("et_vg02", V_G=0.2)


@pytest.fixture(scope="session")
def sweep_dd_vg0():
    spec = default_spec()
    return _run_sweep("dd_vg0", phi_ph=1e5 / spec.phi0)


@pytest.fixture(scope="session")
def sweep_dd_vg02():
    spec = default_spec()
    return _run_sweep("dd_vg02", V_G=0.2, phi_ph=1e5 / spec.phi0)
