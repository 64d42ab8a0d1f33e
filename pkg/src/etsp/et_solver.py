"""
Stationary energy-transport solver on the transport grid.

In the entropy variables U = (u, v) = (mu/kT, -1/kT) the stationary system
is div(D(U) grad U) = W(U) with the SPD diffusion matrix
D = [[D0,D1],[D1,D2]] and W(U) = (0, W0(U)(1 + kT_L v)). The
lowest-order mixed finite element discretisation in hybridised form, after
static condensation, couples only the nodal values: for each interior node

    R_i = D(Ub_i)(U_i - U_{i-1}) - D(Ub_{i+1})(U_{i+1} - U_i)
          + (h^2/2) (W(Ub_i) + W(Ub_{i+1})) = 0,

with interval-midpoint states Ub_i = (U_{i-1}+U_i)/2 and the discrete
current on interval I_i

    Jh|_Ii = D(Ub_i)(U_i - U_{i-1})/h + W(Ub_i)(x - x_Bi),

whose first component is globally constant at convergence. The Jacobian is
exact: since every moment carries exp(u + eps v), d/du reproduces the
moment and d/dv shifts its energy power by one, so midpoint derivatives are
dD_kl/du = D_kl/2 and dD_kl/dv = D_{k,l+1}/2 (similarly for W via W1).
The resulting 2x2-block tridiagonal system is solved by block Thomas
elimination inside a damped Newton iteration (step halving on any v >= 0 or
residual growth).

Energies are shifted by a per-solve reference (see moment_kernels) so the
eps^s weights stay in-domain; the state is shifted consistently and shifted
back on exit. Coefficients are phi0-normalised; `ScaledDevice.current_unit`
converts interval currents to the output unit system.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import moment_kernels as mk
from .device_config import ScaledDevice

__all__ = [
    "EtState",
    "MomentTable",
    "EtSystem",
    "EtSolution",
    "ConvergenceError",
    "ladder_provider",
    "assemble",
    "solve_block_tridiagonal",
    "newton_solve",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass
class EtState:
    """Entropy variables at the transport nodes; v < 0, endpoints pinned."""

    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "EtState":
        return EtState(self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class MomentTable:
    """
    Per-interval moment evaluations: D (N,4), W0/W1 (N,).

    `exponential_family` states that every entry carries the factor
    exp(u + eps*v) of the Boltzmann closure, which is what makes the
    Jacobian identities dD/du = D, dD/dv = (next energy power) exact.
    Prescribed-coefficient providers (tests) set it False to get the
    plain constant-coefficient Jacobian.
    """

    D: np.ndarray
    W0: np.ndarray
    W1: np.ndarray
    exponential_family: bool = True


# provider(ubar, vbar) -> MomentTable, vectorised over intervals
Provider = Callable[[np.ndarray, np.ndarray], MomentTable]


def ladder_provider(mid_energies: np.ndarray, scaled: ScaledDevice) -> Provider:
    """Default coefficient provider backed by the interval-midpoint ladder."""
    tail_tol = scaled.spec.tol.tail_tol

    def provider(ubar: np.ndarray, vbar: np.ndarray) -> MomentTable:
        D = mk.diffusion_moments(ubar, vbar, mid_energies, scaled.s,
                                 phi0=1.0, tail_tol=tail_tol)
        W0, W1 = mk.relaxation(ubar, vbar, mid_energies, scaled.s,
                               prefactor=scaled.relax_const, tail_tol=tail_tol)
        return MomentTable(D=D, W0=W0, W1=W1)

    return provider


@dataclass
class EtSystem:
    """Assembled residual, block-tridiagonal Jacobian and coefficient cache."""

    residual: np.ndarray       # (N-1, 2)
    lower: np.ndarray          # (N-1, 2, 2) blocks dR_i/dU_{i-1}
    diag: np.ndarray           # (N-1, 2, 2)
    upper: np.ndarray          # (N-1, 2, 2)
    table: MomentTable         # per-interval moments (N, ...)
    flux: np.ndarray           # (N, 2): D(Ub_i)(U_i - U_{i-1})


def _interval_quantities(u, v, provider, kTL):
    ubar = 0.5 * (u[:-1] + u[1:])
    vbar = 0.5 * (v[:-1] + v[1:])
    table = provider(ubar, vbar)
    D = table.D
    A = np.empty((len(ubar), 2, 2))
    A[:, 0, 0] = D[:, 0]
    A[:, 0, 1] = D[:, 1]
    A[:, 1, 0] = D[:, 1]
    A[:, 1, 1] = D[:, 2]
    B = np.empty_like(A)
    B[:, 0, 0] = D[:, 1]
    B[:, 0, 1] = D[:, 2]
    B[:, 1, 0] = D[:, 2]
    B[:, 1, 1] = D[:, 3]
    dU = np.stack([np.diff(u), np.diff(v)], axis=1)
    flux = np.einsum("ikl,il->ik", A, dU)
    relax_factor = 1.0 + kTL * vbar
    w2 = table.W0 * relax_factor
    if table.exponential_family:
        dw2_du = 0.5 * w2
    else:
        dw2_du = np.zeros_like(w2)
    dw2_dv = 0.5 * (table.W1 * relax_factor + table.W0 * kTL)
    return table, A, B, dU, flux, w2, dw2_du, dw2_dv


def assemble(state: EtState, provider: Provider, h: float, kTL: float) -> EtSystem:
    """
    Build residual and exact Jacobian at `state` (already in the shifted
    energy frame used by `provider`). Moment-kernel domain errors propagate
    with the interval index attached.
    """
    u, v = state.u, state.v
    try:
        table, A, B, dU, flux, w2, dw2_du, dw2_dv = _interval_quantities(
            u, v, provider, kTL)
    except mk.DomainError as exc:
        vbar = 0.5 * (v[:-1] + v[1:])
        bad = int(np.argmax(vbar >= 0.0)) if np.any(vbar >= 0.0) else -1
        raise mk.DomainError(f"transport assembly (interval {bad}): {exc}") from exc

    n_int = len(w2)
    W_vec = np.zeros((n_int, 2))
    W_vec[:, 1] = w2
    residual = flux[:-1] - flux[1:] + 0.5 * h * h * (W_vec[:-1] + W_vec[1:])

    # midpoint-derivative blocks: G = d(D ΔU)/d(node) (same for both nodes),
    # H = dW/d(node); rows (u-eq, v-eq), columns (du, dv).
    G = np.zeros((n_int, 2, 2))
    if table.exponential_family:
        G[:, :, 0] = 0.5 * np.einsum("ikl,il->ik", A, dU)
        G[:, :, 1] = 0.5 * np.einsum("ikl,il->ik", B, dU)
    H = np.zeros((n_int, 2, 2))
    H[:, 1, 0] = dw2_du
    H[:, 1, 1] = dw2_dv

    hh = 0.5 * h * h
    lower = -A[:-1] + G[:-1] + hh * H[:-1]
    diag = A[:-1] + A[1:] + G[:-1] - G[1:] + hh * (H[:-1] + H[1:])
    upper = -A[1:] - G[1:] + hh * H[1:]
    return EtSystem(residual=residual, lower=lower, diag=diag, upper=upper,
                    table=table, flux=flux)


def solve_block_tridiagonal(lower: np.ndarray, diag: np.ndarray,
                            upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Block Thomas elimination for 2x2-block tridiagonal systems."""
    n = len(rhs)
    C = np.empty_like(upper)
    d = np.empty_like(rhs)
    denom = diag[0]
    C[0] = np.linalg.solve(denom, upper[0])
    d[0] = np.linalg.solve(denom, rhs[0])
    for i in range(1, n):
        denom = diag[i] - lower[i] @ C[i - 1]
        C[i] = np.linalg.solve(denom, upper[i])
        d[i] = np.linalg.solve(denom, rhs[i] - lower[i] @ d[i - 1])
    x = np.empty_like(rhs)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - C[i] @ x[i + 1]
    return x


@dataclass
class EtSolution:
    """Converged transport solution (physical, unshifted variables)."""

    state: EtState
    J1: float                  # particle current, positive source -> drain (model units)
    J1_intervals: np.ndarray   # scheme current first component per interval
    J1_spread: float           # (max-min)/|mean| of J1_intervals
    J2_intervals: np.ndarray   # (N, 2) energy-current endpoints per interval
    T: np.ndarray              # K
    mu: np.ndarray             # eV
    rho: np.ndarray            # nm^-2
    velocity: np.ndarray       # J1 / rho (model units)
    E_ref: float               # energy shift used during the solve (eV)
    iterations: int
    residual: float            # final scaled residual norm
    residual_scales: tuple[float, float]


_MAX_HALVINGS = 20
_POLISH_STEPS = 3


def _residual_scales(system: EtSystem, h: float) -> tuple[float, float]:
    """
    Componentwise residual scales. The particle equation is measured against
    the diffusion-moment magnitude (that is what pins discrete current
    conservation); the energy equation additionally carries the relaxation
    term, whose floating-point floor is eps * (h^2/2) * W0 and dwarfs the
    diffusion scale in the strong-scattering regime.
    """
    scale_u = float(np.max(np.abs(system.table.D[:, :3]))) or 1.0
    scale_v = max(scale_u, 0.5 * h * h * float(np.max(np.abs(system.table.W0))))
    return scale_u, scale_v


def _resnorm(system: EtSystem, scales: tuple[float, float]) -> float:
    if not len(system.residual):
        return 0.0
    r = np.abs(system.residual)
    return float(max(r[:, 0].max() / scales[0], r[:, 1].max() / scales[1]))


def newton_solve(initial: EtState, ladder_energies: np.ndarray,
                 scaled: ScaledDevice, provider: Provider | None = None,
                 k_B_eV: float = 8.617333262e-5) -> EtSolution:
    """
    Damped Newton iteration on the condensed nodal system.

    `initial` carries the boundary data in its endpoints (kept fixed) and
    must satisfy v < 0 everywhere. `ladder_energies` is the unshifted nodal
    ladder (N+1, n_modes); interval coefficients use midpoint-averaged
    energies. A custom `provider` (already in the shifted frame) overrides
    the ladder-backed default, for testing against prescribed coefficients.
    """
    tol = scaled.spec.tol.tol_newton
    max_iter = scaled.spec.tol.max_newton
    if np.any(initial.v >= 0.0):
        raise mk.DomainError("initial state violates v < 0")

    grid_n = len(initial.u) - 1
    h = scaled.L / grid_n
    E_ref = mk.reference_shift(float(ladder_energies[:, 0].min()), scaled.kTL)
    shifted = ladder_energies + E_ref
    if provider is None:
        provider = ladder_provider(0.5 * (shifted[:-1] + shifted[1:]), scaled)

    # shifted frame: exp(u + E v) invariant under (E, u) -> (E+E_ref, u-E_ref*v)
    state = EtState(initial.u - E_ref * initial.v, initial.v.copy())

    system = assemble(state, provider, h, scaled.kTL)
    scales = _residual_scales(system, h)
    res = _resnorm(system, scales)
    iterations = 0
    converged = res < tol

    while not converged and iterations < max_iter:
        delta = solve_block_tridiagonal(system.lower, system.diag, system.upper,
                                        -system.residual)
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            trial = state.copy()
            trial.u[1:-1] += step * delta[:, 0]
            trial.v[1:-1] += step * delta[:, 1]
            if np.all(trial.v < 0.0):
                try:
                    trial_system = assemble(trial, provider, h, scaled.kTL)
                except (mk.DomainError, FloatingPointError):
                    step *= 0.5
                    continue
                trial_res = _resnorm(trial_system, scales)
                if np.isfinite(trial_res) and trial_res <= res:
                    state, system, res = trial, trial_system, trial_res
                    accepted = True
                    break
            step *= 0.5
        iterations += 1
        if not accepted:
            raise ConvergenceError(
                f"transport Newton stalled after {iterations} iterations "
                f"(scaled residual {res:.3e}, tolerance {tol:.3e})", residual=res)
        if res < tol:
            converged = True

    if not converged:
        raise ConvergenceError(
            f"transport Newton did not converge in {max_iter} iterations "
            f"(scaled residual {res:.3e}, tolerance {tol:.3e})", residual=res)

    # polish: a few undamped steps push the residual to the roundoff floor,
    # which is what makes the discrete current interval-wise constant to
    # near machine precision.
    for _ in range(_POLISH_STEPS):
        if res == 0.0:
            break
        delta = solve_block_tridiagonal(system.lower, system.diag, system.upper,
                                        -system.residual)
        trial = state.copy()
        trial.u[1:-1] += delta[:, 0]
        trial.v[1:-1] += delta[:, 1]
        if np.any(trial.v >= 0.0):
            break
        try:
            trial_system = assemble(trial, provider, h, scaled.kTL)
        except mk.DomainError:
            break
        trial_res = _resnorm(trial_system, scales)
        if not np.isfinite(trial_res) or trial_res >= res:
            break
        state, system, res = trial, trial_system, trial_res

    # physical (unshifted) state
    u_phys = state.u + E_ref * state.v
    v_phys = state.v

    J1_int = system.flux[:, 0] / h
    mean_J1 = float(np.mean(J1_int))
    denom = max(abs(mean_J1), np.finfo(float).tiny)
    spread = float((J1_int.max() - J1_int.min()) / denom) if abs(mean_J1) > 0 else \
        float(J1_int.max() - J1_int.min())

    relax_factor = 1.0 + scaled.kTL * 0.5 * (state.v[:-1] + state.v[1:])
    w2 = system.table.W0 * relax_factor
    J2_left = system.flux[:, 1] / h - 0.5 * h * w2
    J2_right = system.flux[:, 1] / h + 0.5 * h * w2

    T = -1.0 / (k_B_eV * v_phys)
    mu = -u_phys / v_phys
    rho, _ = mk.densities(u_phys, v_phys, ladder_energies, scaled.dos2d)
    J1_particle = -mean_J1  # particles flow down the chemical-potential slope
    velocity = J1_particle / np.maximum(rho, np.finfo(float).tiny)

    return EtSolution(
        state=EtState(u_phys, v_phys), J1=J1_particle, J1_intervals=J1_int,
        J1_spread=spread, J2_intervals=np.column_stack([J2_left, J2_right]),
        T=T, mu=mu, rho=rho, velocity=velocity, E_ref=E_ref,
        iterations=iterations, residual=res, residual_scales=scales,
    )
