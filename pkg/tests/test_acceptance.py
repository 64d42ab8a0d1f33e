"""
Acceptance gate: every criterion checked at its stated tolerance, one
PASS/FAIL line each (run with -s to see them all). The four full-device
sweeps (energy-transport and strong-scattering regimes at V_G = 0 and
0.2 V) are session fixtures shared across criteria.
"""
import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import SWEEP_TIMES
from etsp import moment_kernels as mk
from etsp.device_config import default_spec, scale_device
from etsp.et_solver import assemble, ladder_provider, EtState
from etsp.mesh import SliceGrid, build_grids
from etsp.poisson2d import assemble_poisson
from etsp.schrodinger1d import solve_slice

from test_et_solver import dense_jacobian, numeric_jacobian, synthetic_ladder
from test_moment_kernels import quad_diffusion, quad_relaxation
from test_poisson2d import manufactured_error


def check(num: int, label: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {num:2d} ({label}): {detail}")
    assert passed, f"criterion {num}: {label}: {detail}"


def test_criterion_01_dd_limit_temperature_flatness(sweep_dd_vg0):
    assert not sweep_dd_vg0.aborted
    p = sweep_dd_vg0.points[-1]
    assert p.V_DS == pytest.approx(0.5)
    spread = float(p.T.max() - p.T.min())
    check(1, "DD-limit temperature flatness", spread <= 1e-5,
          f"max T - min T = {spread:.4e} K (bound 1e-5 K)")


def test_criterion_02_et_exceeds_dd_current(sweep_et_vg02, sweep_dd_vg02):
    i_et = sweep_et_vg02.points[-1].I
    i_dd = sweep_dd_vg02.points[-1].I
    check(2, "ET vs DD current ordering", i_et > i_dd,
          f"I_ET(0.5 V) = {i_et:.6e}, I_DD(0.5 V) = {i_dd:.6e} at V_G = 0.2 V")


def test_criterion_03_equilibrium_suite(sweep_et_vg0):
    p0 = sweep_et_vg0.points[0]
    i_scale = max(abs(p.I) for p in sweep_et_vg0.points)
    ok_current = abs(p0.I) <= 1e-10 * i_scale
    ok_temp = np.abs(p0.T - 300.0).max() <= 1e-8
    ne = p0.Ne
    mirror = ne[::-1, :]
    mask = ne > 1e-6 * ne.max()
    rel = np.abs(ne - mirror)[mask] / ne[mask]
    ok_sym = rel.max() <= 0.01
    check(3, "equilibrium suite", ok_current and ok_temp and ok_sym,
          f"|I| = {abs(p0.I):.2e} (<= {1e-10 * i_scale:.2e}), "
          f"max|T-300| = {np.abs(p0.T - 300.0).max():.2e} K, "
          f"density asymmetry = {rel.max():.2e}")


def test_criterion_04_current_saturation(sweep_et_vg0):
    iv = {round(p.V_DS, 4): p.I for p in sweep_et_vg0.points}
    low = iv[0.1] - iv[0.0]
    high = iv[0.5] - iv[0.4]
    check(4, "current saturation", high < low,
          f"I(0.5)-I(0.4) = {high:.3e} < I(0.1)-I(0.0) = {low:.3e}")


def test_criterion_05_velocity_overshoot_location(sweep_et_vg0):
    p = sweep_et_vg0.points[-1]
    x_peak = float(p.x[np.argmax(p.velocity)])
    check(5, "velocity overshoot location", 35.0 <= x_peak <= 45.0,
          f"argmax velocity at x = {x_peak:.1f} nm (window [35, 45] nm)")


def test_criterion_06_spd_property_suite():
    rng = np.random.default_rng(1234)
    worst = np.inf
    ok = True
    for _ in range(1000):
        n = rng.integers(1, 9)
        E = np.sort(rng.uniform(0.01, 2.0, size=n))
        u = rng.uniform(-30.0, 5.0)
        v = -math.exp(rng.uniform(math.log(0.5), math.log(60.0)))
        D = mk.diffusion_moments(u, v, E, s=0.5, check_tail=False)
        det = D[0] * D[2] - D[1] ** 2
        worst = min(worst, det / (D[0] * D[2]))
        ok = ok and D[0] > 0.0 and det > 0.0
    check(6, "SPD diffusion matrix", ok,
          f"1000 random states; min normalised determinant = {worst:.3e}")


def test_criterion_07_relaxation_sign_suite():
    rng = np.random.default_rng(4321)
    k_ev = 8.617333262e-5
    ok = True
    for _ in range(1000):
        n = rng.integers(1, 9)
        E = np.sort(rng.uniform(0.01, 2.0, size=n))
        u = rng.uniform(-30.0, 5.0)
        v = -math.exp(rng.uniform(math.log(0.5), math.log(60.0)))
        w0, _ = mk.relaxation(u, v, E, 0.5, prefactor=3.1, check_tail=False)
        W = -w0 * (1.0 + (k_ev * 300.0) * v)
        T = -1.0 / (k_ev * v)
        ok = ok and (W * (T - 300.0) <= 0.0)
    check(7, "relaxation sign", ok, "W (T - T_L) <= 0 on 1000 random states")


def test_criterion_08a_moment_kernels_vs_quadrature():
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(100):
        n = rng.integers(1, 6)
        E = np.sort(rng.uniform(0.03, 1.2, size=n))
        u = rng.uniform(-4.0, 3.0)
        v = rng.uniform(-45.0, -6.0)
        D = mk.diffusion_moments(u, v, E, s=0.5, check_tail=False)
        p = int(rng.integers(0, 4))
        ref = quad_diffusion(u, v, E, 0.5, p)
        worst = max(worst, abs(D[p] - ref) / abs(ref))
        w0, _ = mk.relaxation(u, v, E, 0.5, 1.7, check_tail=False)
        ref_w = quad_relaxation(u, v, E, 0.5, 1.7)
        worst = max(worst, abs(w0 - ref_w) / abs(ref_w))
    check(8, "moment kernels vs quadrature", worst <= 1e-9,
          f"100 random ladders; worst relative deviation = {worst:.2e}")


def test_criterion_08b_eigensolver_vs_dense_oracle():
    spec = dataclasses.replace(default_spec(), N_z=20, n_modes=6)
    sc = scale_device(spec)
    grid = SliceGrid(z=np.linspace(0.0, sc.ell, 21), hz=sc.ell / 20)
    rng = np.random.default_rng(99)
    worst = 0.0
    from etsp.schrodinger1d import assemble_slice
    for _ in range(10):
        v = rng.normal(scale=0.25, size=21)
        w, _ = solve_slice(v, grid, sc, 6)
        K, M = assemble_slice(v, grid, sc)
        ev = np.sort(np.linalg.eig(np.linalg.solve(M, K))[0].real)[:6]
        worst = max(worst, np.max(np.abs(w - ev) / np.abs(ev)))
    check(8, "eigensolver vs dense oracle", worst <= 1e-10,
          f"N_z = 20 random slices; worst relative deviation = {worst:.2e}")


def test_criterion_08c_square_well_spectrum():
    # conforming P1 with consistent mass: the n-th eigenvalue error is
    # (n pi / N_z)^2 / 12 + O(h^4); at N_z = 50 that is 0.527% for n = 4,
    # so the 0.5% bound is not attainable for the fourth mode (see the
    # decisions ledger); modes 1..3 sit at 0.033%, 0.13%, 0.30%.
    spec = dataclasses.replace(
        default_spec(), ell_ox=1e-15, ell_Si=5e-9 - 2e-15, N_z=50, n_modes=4)
    sc = scale_device(spec)
    grid = SliceGrid(z=np.linspace(0.0, sc.ell, 51), hz=sc.ell / 50)
    w, _ = solve_slice(np.zeros(51), grid, sc, 4)
    exact = sc.kin_Si * (np.arange(1, 5) * math.pi / 5.0) ** 2
    rel = np.abs(w - exact) / exact
    check(8, "square-well spectrum within 0.5% for n <= 4", bool(np.all(rel < 5e-3)),
          "relative errors " + ", ".join(f"{r:.3%}" for r in rel))


def test_criterion_09_jacobian_vs_finite_differences():
    sc = scale_device(dataclasses.replace(default_spec(), N_x=8))
    x = np.linspace(0.0, sc.L, 9)
    ladder = synthetic_ladder(x) + 0.05
    provider = ladder_provider(0.5 * (ladder[:-1] + ladder[1:]), sc)
    rng = np.random.default_rng(2024)
    h = sc.L / 8
    worst = 0.0
    for _ in range(20):
        state = EtState(
            rng.uniform(-2.0, 2.5, size=9),
            -np.exp(rng.uniform(math.log(10.0), math.log(45.0), size=9)))
        system = assemble(state, provider, h, sc.kTL)
        J = dense_jacobian(system)
        J_fd, _ = numeric_jacobian(state, provider, h, sc.kTL)
        worst = max(worst, np.abs(J - J_fd).max() / np.abs(J).max())
    check(9, "assembled Jacobian vs central differences", worst <= 1e-5,
          f"20 random interior states; worst relative deviation = {worst:.2e}")


def test_criterion_10_discrete_current_conservation(sweep_et_vg0):
    spreads = [p.J1_spread for p in sweep_et_vg0.points if p.V_DS > 0]
    worst = max(spreads)
    check(10, "discrete current conservation", worst <= 1e-10,
          f"interval-wise J1 spread over the sweep: worst = {worst:.2e}")


def test_criterion_11_poisson_convergence_order():
    e20 = manufactured_error(20)
    e40 = manufactured_error(40)
    ratio = e20 / e40
    check(11, "Poisson second-order convergence", 3.5 <= ratio <= 4.5,
          f"L2 error ratio (h -> h/2) = {ratio:.3f}")


def test_criterion_12_full_reproduction_run(sweep_et_vg0, sweep_et_vg02):
    ok = True
    detail = []
    for name, sweep in (("V_G=0", sweep_et_vg0), ("V_G=0.2", sweep_et_vg02)):
        converged = (not sweep.aborted) and len(sweep.points) == 26 \
            and all(p.trace.converged for p in sweep.points)
        ok = ok and converged
        detail.append(f"{name}: {len(sweep.points)} points, "
                      f"converged = {converged}")
    elapsed = SWEEP_TIMES.get("et_vg0", 0.0) + SWEEP_TIMES.get("et_vg02", 0.0)
    ok = ok and elapsed < 600.0
    detail.append(f"runtime {elapsed:.0f} s (budget 600 s)")
    check(12, "full reproduction run", ok, "; ".join(detail))
