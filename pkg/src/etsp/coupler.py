"""
Self-consistent coupling of the confinement eigenproblem, the transport
system and the electrostatics, plus the drain-bias continuation sweep.

The solve proceeds in the standard staged way:

1. thermal equilibrium (no drain bias): temperature and Fermi level are
   uniform, so only Schrodinger + damped Poisson iterate, with the Fermi
   level recomputed from the contact-slice ladder each pass;
2. outer (Gummel) loop at fixed bias: per pass, diagonalise every slice,
   refresh the contact boundary data, run the transport Newton solve with
   the ladder frozen, rebuild the nodal density, take one damped Poisson
   update; stop when ||V_old - V_new||_inf drops below tolerance;
3. bias continuation: V_DS = 0, dV, 2 dV, ... with each step warm-started
   from the previous converged state.

One sweep owns all mutable state; slice eigensolves may run in parallel,
the loops themselves are sequential.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import moment_kernels as mk
from .device_config import DeviceSpec, build_doping, scale_device
from .et_solver import ConvergenceError, EtSolution, EtState, newton_solve
from .mesh import build_grids
from .poisson2d import assemble_poisson, device_dirichlet, gummel_poisson_step
from .schrodinger1d import SubbandLadder, solve_ladder

log = logging.getLogger(__name__)

__all__ = [
    "GummelTrace",
    "BiasPoint",
    "SweepResult",
    "Simulator",
    "thermal_equilibrium",
    "outer_gummel",
    "bias_sweep",
]

_KB_EV = 8.617333262e-5  # Boltzmann constant (eV/K)


@dataclass
class GummelTrace:
    """Convergence record of one outer loop."""

    dv_norms: list[float] = field(default_factory=list)
    newton_iterations: list[int] = field(default_factory=list)
    newton_residuals: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.dv_norms)


@dataclass
class BiasPoint:
    """Converged state and derived profiles at one (V_G, V_DS) point."""

    V_G: float
    V_DS: float
    I: float                    # e * J1, output current units (see README)
    J1_model: float             # particle current before unit conversion
    J1_spread: float
    x: np.ndarray               # transport nodes (nm)
    T: np.ndarray               # K
    mu: np.ndarray              # eV
    u: np.ndarray
    v: np.ndarray               # 1/eV
    velocity: np.ndarray        # output velocity units
    rho: np.ndarray             # nm^-2
    V_s: np.ndarray             # effective potential (eV)
    Ne: np.ndarray              # nodal density (nm^-3), shape (N_x+1, N_z+1)
    V: np.ndarray               # potential (V), shape (N_x+1, N_z+1)
    energies: np.ndarray        # subband ladder (eV), shape (N_x+1, n_modes)
    E_ref: float
    trace: GummelTrace


@dataclass
class SweepResult:
    spec: DeviceSpec
    points: list[BiasPoint]
    aborted: bool = False
    abort_reason: str | None = None

    @property
    def iv(self) -> np.ndarray:
        return np.array([[p.V_G, p.V_DS, p.I] for p in self.points])


class Simulator:
    """Owns grids, assembled operators and the mutable sweep state."""

    def __init__(self, spec: DeviceSpec):
        self.spec = spec.validate()
        self.scaled = scale_device(spec)
        self.transport, self.slice_grid, self.mesh = build_grids(spec)
        self.doping = build_doping(spec, self.mesh)
        self.poisson = assemble_poisson(self.mesh, self.scaled)
        self.shape = (spec.N_x + 1, spec.N_z + 1)

    # -- pieces ------------------------------------------------------------

    def ladder(self, V: np.ndarray) -> SubbandLadder:
        return solve_ladder(V, self.slice_grid, self.scaled,
                            self.spec.n_modes, workers=self.spec.workers)

    def contact_values(self, ladder: SubbandLadder) -> tuple[float, float, float]:
        """(u_b at x=0, u_b at x=L, v_b) from the local contact ladders."""
        sc = self.scaled
        ub0, vb = mk.boundary_values(ladder.energies[0], sc.Nsb, sc.dos2d, sc.kTL)
        ubL, _ = mk.boundary_values(ladder.energies[-1], sc.Nsb, sc.dos2d, sc.kTL)
        return ub0, ubL, vb

    def nodal_density(self, u: np.ndarray, v: np.ndarray,
                      ladder: SubbandLadder) -> np.ndarray:
        """
        N_e(x_i, z_j) = dos2d * kT_i * sum_n exp(u_i + E_n(x_i) v_i)
                        * |chi_n(x_i, z_j)|^2   (nm^-3).
        """
        occ = np.exp(u[:, None] + ladder.energies * v[:, None])  # (Nx+1, modes)
        kT = -1.0 / v
        dens = np.einsum("in,inj->ij", occ, ladder.wavefunctions**2)
        return self.scaled.dos2d * kT[:, None] * dens

    def initial_potential(self, V_DS: float) -> np.ndarray:
        mask, values = device_dirichlet(self.mesh, V_DS, self.spec.V_G)
        return values.reshape(self.shape).copy()

    # -- stages ------------------------------------------------------------

    def thermal_equilibrium(self) -> tuple[np.ndarray, SubbandLadder, EtState, GummelTrace]:
        """
        Zero-drain-bias solve with uniform temperature and Fermi level:
        iterate Schrodinger -> equilibrium density -> damped Poisson until
        the potential update stalls below tolerance.
        """
        sc, tol = self.scaled, self.spec.tol
        V = self.initial_potential(0.0)
        trace = GummelTrace()
        ladder = self.ladder(V)
        for _ in range(tol.max_gummel):
            ub, vb = mk.boundary_values(ladder.energies[0], sc.Nsb, sc.dos2d, sc.kTL)
            u = np.full(self.shape[0], ub)
            v = np.full(self.shape[0], vb)
            Ne = self.nodal_density(u, v, ladder)
            V_new = gummel_poisson_step(self.poisson, V, Ne, self.doping,
                                        0.0, self.spec.V_G)
            dv = float(np.max(np.abs(V_new - V)))
            trace.dv_norms.append(dv)
            V = V_new
            ladder = self.ladder(V)
            if dv < tol.tol_gummel:
                trace.converged = True
                break
        if not trace.converged:
            raise ConvergenceError(
                f"thermal equilibrium did not converge in {tol.max_gummel} "
                f"iterations (last |dV| = {trace.dv_norms[-1]:.3e} V)")
        ub, vb = mk.boundary_values(ladder.energies[0], sc.Nsb, sc.dos2d, sc.kTL)
        state = EtState(np.full(self.shape[0], ub), np.full(self.shape[0], vb))
        return V, ladder, state, trace

    def outer_gummel(self, V: np.ndarray, et_state: EtState, V_DS: float
                     ) -> tuple[np.ndarray, SubbandLadder, EtSolution, GummelTrace]:
        """
        Outer fixed-point loop at one bias; `V` and `et_state` warm-start
        from the previous bias point. All coefficients within one pass use
        the same frozen ladder.
        """
        tol = self.spec.tol
        trace = GummelTrace()
        state = et_state.copy()
        ladder = sol = None
        for _ in range(tol.max_gummel):
            ladder = self.ladder(V)
            ub0, ubL, vb = self.contact_values(ladder)
            state.u[0], state.u[-1] = ub0, ubL
            state.v[0], state.v[-1] = vb, vb
            sol = newton_solve(state, ladder.energies, self.scaled, k_B_eV=_KB_EV)
            state = sol.state.copy()
            Ne = self.nodal_density(state.u, state.v, ladder)
            V_new = gummel_poisson_step(self.poisson, V, Ne, self.doping,
                                        V_DS, self.spec.V_G)
            dv = float(np.max(np.abs(V_new - V)))
            trace.dv_norms.append(dv)
            trace.newton_iterations.append(sol.iterations)
            trace.newton_residuals.append(sol.residual)
            V = V_new
            if dv < tol.tol_gummel:
                trace.converged = True
                break
        if not trace.converged:
            raise ConvergenceError(
                f"outer loop at V_DS={V_DS:.3f} V did not converge in "
                f"{tol.max_gummel} iterations (last |dV| = {trace.dv_norms[-1]:.3e} V)")
        return V, ladder, sol, trace

    def bias_point(self, V: np.ndarray, ladder: SubbandLadder, sol: EtSolution,
                   V_DS: float, trace: GummelTrace) -> BiasPoint:
        sc = self.scaled
        q = self.spec.constants.e_charge
        Ne = self.nodal_density(sol.state.u, sol.state.v, ladder)
        return BiasPoint(
            V_G=self.spec.V_G, V_DS=V_DS,
            I=q * sc.current_unit * sol.J1,
            J1_model=sol.J1, J1_spread=sol.J1_spread,
            x=self.transport.x.copy(), T=sol.T, mu=sol.mu,
            u=sol.state.u, v=sol.state.v,
            velocity=sc.current_unit * sol.velocity * 1e-18,  # rho nm^-2 -> m^-2
            rho=sol.rho,
            V_s=mk.effective_potential(ladder.energies, sc.kTL),
            Ne=Ne, V=V.copy(), energies=ladder.energies.copy(),
            E_ref=sol.E_ref, trace=trace,
        )

    def sweep(self) -> SweepResult:
        """Equilibrium, then V_DS = 0, dV, ..., V_DS_max with warm starts."""
        spec = self.spec
        result = SweepResult(spec=spec, points=[])
        log.info("thermal equilibrium (V_G = %.3f V)", spec.V_G)
        V, ladder, state, eq_trace = self.thermal_equilibrium()
        n_steps = int(round(spec.V_DS_max / spec.dV_DS)) if spec.V_DS_max > 0 else 0
        for k in range(n_steps + 1):
            v_ds = k * spec.dV_DS
            try:
                V, ladder, sol, trace = self.outer_gummel(V, state, v_ds)
            except ConvergenceError as exc:
                log.warning("aborting sweep at V_DS = %.3f V: %s", v_ds, exc)
                result.aborted = True
                result.abort_reason = str(exc)
                return result
            state = sol.state.copy()
            point = self.bias_point(V, ladder, sol, v_ds, trace)
            result.points.append(point)
            log.info("V_DS = %5.3f V: I = %.6e, %d outer iterations",
                     v_ds, point.I, trace.iterations)
        return result


# -- module-level conveniences mirroring the stage names ---------------------


def thermal_equilibrium(spec: DeviceSpec):
    """Equilibrium triple (V, ladder, EtState) plus the convergence trace."""
    return Simulator(spec).thermal_equilibrium()


def outer_gummel(spec: DeviceSpec, V: np.ndarray, et_state: EtState, V_DS: float):
    return Simulator(spec).outer_gummel(V, et_state, V_DS)


def bias_sweep(spec: DeviceSpec) -> SweepResult:
    return Simulator(spec).sweep()
