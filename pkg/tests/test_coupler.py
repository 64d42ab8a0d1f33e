import dataclasses

import numpy as np
import pytest

from conftest import small_spec
from etsp.coupler import Simulator
from etsp.device_config import default_spec


def test_equilibrium_field_mirror_symmetric():
    # symmetric geometry, doping and boundary data: the converged potential
    # must be symmetric about x = L/2 (the mesh is built mirror-symmetric)
    sim = Simulator(default_spec())
    V, ladder, state, trace = sim.thermal_equilibrium()
    assert trace.converged
    scale = np.abs(V).max()
    assert np.abs(V - V[::-1, :]).max() <= 1e-6 * scale
    assert np.abs(ladder.energies - ladder.energies[::-1]).max() <= 1e-6


def test_equilibrium_state_is_boundary_constant():
    sim = Simulator(small_spec())
    _, _, state, _ = sim.thermal_equilibrium()
    assert np.all(state.u == state.u[0])
    assert np.all(state.v == state.v[0])
    assert state.v[0] < 0.0


def test_doubling_tolerance_does_not_increase_iterations():
    spec = small_spec()
    n_tight = Simulator(spec).thermal_equilibrium()[3].iterations
    loose = dataclasses.replace(
        spec, tol=dataclasses.replace(spec.tol, tol_gummel=2 * spec.tol.tol_gummel))
    n_loose = Simulator(loose).thermal_equilibrium()[3].iterations
    assert n_loose <= n_tight


def test_charge_neutral_device_has_flat_potential():
    spec = dataclasses.replace(
        default_spec(), N_x=6, N_z=6, n_modes=3, N_plus=0.0, N_minus=0.0)
    sim = Simulator(spec)
    V, _, state, trace = sim.thermal_equilibrium()
    assert trace.converged
    assert np.abs(V).max() < 1e-8
    assert state.u[0] == -np.inf  # empty contact: no carriers anywhere


def test_zero_bias_transport_is_exact_equilibrium():
    sim = Simulator(small_spec())
    V, ladder, state, _ = sim.thermal_equilibrium()
    V1, ladder1, sol, trace = sim.outer_gummel(V, state, V_DS=0.0)
    assert trace.iterations == 1  # already at the coupled fixed point
    assert sol.J1 == 0.0
    assert np.all(sol.J1_intervals == 0.0)
    assert np.abs(sol.T - 300.0).max() < 1e-8


def test_rerunning_converged_bias_reproduces_fields():
    spec = small_spec(
        tol=dataclasses.replace(small_spec().tol, tol_gummel=1e-12))
    sim = Simulator(spec)
    V, ladder, state, _ = sim.thermal_equilibrium()
    V1, lad1, sol1, _ = sim.outer_gummel(V, state, V_DS=0.02)
    V2, lad2, sol2, trace2 = sim.outer_gummel(V1, sol1.state, V_DS=0.02)
    assert np.abs(V2 - V1).max() < 1e-10
    assert np.abs(sol2.state.u - sol1.state.u).max() < 1e-10
    assert np.abs(sol2.state.v - sol1.state.v).max() < 1e-10
    assert np.abs(lad2.energies - lad1.energies).max() < 1e-10


def test_first_bias_step_trace_converges_on_default_device():
    sim = Simulator(default_spec())
    V, ladder, state, _ = sim.thermal_equilibrium()
    V1, _, sol, trace = sim.outer_gummel(V, state, V_DS=0.02)
    assert trace.converged
    assert trace.iterations <= 200
    assert trace.dv_norms[-1] < trace.dv_norms[0]
    assert trace.dv_norms[-1] < sim.spec.tol.tol_gummel


def test_sweep_point_count():
    res = Simulator(small_spec(V_DS_max=0.04)).sweep()
    assert not res.aborted
    assert [p.V_DS for p in res.points] == pytest.approx([0.0, 0.02, 0.04])


def test_sweep_zero_max_gives_single_equilibrium_point():
    res = Simulator(small_spec(V_DS_max=0.0)).sweep()
    assert len(res.points) == 1
    assert res.points[0].I == 0.0
    assert np.abs(res.points[0].T - 300.0).max() < 1e-8


def test_bias_point_payload_is_consistent():
    res = Simulator(small_spec()).sweep()
    p = res.points[-1]
    assert p.Ne.shape == (11, 11)
    assert p.V.shape == (11, 11)
    assert p.energies.shape == (11, 4)
    assert np.all(p.Ne >= 0.0)
    assert np.all(p.T > 0.0)
    assert p.I > 0.0
    assert len(p.x) == 11
    # effective potential tracks the lowest subband within a few kT
    assert np.all(p.V_s <= p.energies[:, 0] + 1e-12)


def test_gate_bias_enters_through_dirichlet_data():
    res0 = Simulator(small_spec()).sweep()
    res2 = Simulator(small_spec(V_G=0.2)).sweep()
    # a positive gate voltage pulls the channel subbands down and raises
    # the current (the contact-slice ladders stay pinned by V = 0 there)
    assert res2.points[-1].I > res0.points[-1].I
    mid = len(res0.points[0].x) // 2
    assert res2.points[0].energies[mid, 0] < res0.points[0].energies[mid, 0]
