"""
Per-slice confinement eigenproblem.

On every transport node x_i the confined direction carries the generalized
eigenproblem

    -(1/2) d/dz( (hbar^2/m*(z)) dchi/dz ) + U(z) chi = E chi,
    chi(0) = chi(ell) = 0,   integral chi_n chi_m dz = delta_nm,

with potential energy U = -e V(z) plus the Si/SiO2 barrier in the oxide
layers. Conforming P1 elements on the slice grid give a symmetric
tridiagonal pair (K, M); the lowest modes are extracted with a
Cholesky-reduction generalized eigensolver (LAPACK *sygvd via scipy).

Internal units: z in nm, energies in eV, wavefunctions in nm^-1/2.
Slice solves are pure functions of (V_slice, spec); `solve_ladder` may run
them in parallel across slices and is deterministic either way.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .device_config import ScaledDevice
from .mesh import SliceGrid, slice_kinetic_coefficients

__all__ = ["SubbandLadder", "SolverError", "assemble_slice", "solve_slice", "solve_ladder"]


class SolverError(RuntimeError):
    """Eigensolver or linear-solver failure, with location context."""


@dataclass(frozen=True)
class SubbandLadder:
    """
    energies[i, n]      : E_n(x_i), ascending in n (eV)
    wavefunctions[i, n, j]: chi_n(x_i, z_j) (nm^-1/2), zero on the walls
    """

    energies: np.ndarray
    wavefunctions: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.energies.shape[1]

    def midpoint_energies(self) -> np.ndarray:
        """Ladder at interval midpoints: arithmetic mean of the nodal ladders."""
        return 0.5 * (self.energies[:-1] + self.energies[1:])


def assemble_slice(V_slice: np.ndarray, grid: SliceGrid,
                   scaled: ScaledDevice) -> tuple[np.ndarray, np.ndarray]:
    """
    Assemble the P1 operator pair (K, M) on the interior nodes of one slice.

    V_slice holds the electrostatic potential (V) at the N_z+1 slice nodes.
    The potential energy -e*V enters through its nodal interpolant
    (integrated exactly), the oxide barrier as a per-element constant, and
    the kinetic term uses the per-element 1/m*.
    """
    z = grid.z
    hz = np.diff(z)
    kin, barrier = slice_kinetic_coefficients(scaled, z)
    u_node = -np.asarray(V_slice, dtype=float)  # eV: charge -e times potential

    n = len(z)
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    e = np.arange(n - 1)
    # kinetic: kin/hz * [[1,-1],[-1,1]]
    np.add.at(K, (e, e), kin / hz)
    np.add.at(K, (e + 1, e + 1), kin / hz)
    np.add.at(K, (e, e + 1), -kin / hz)
    np.add.at(K, (e + 1, e), -kin / hz)
    # nodal-linear potential: exact P1 integrals
    ua, ub = u_node[:-1], u_node[1:]
    np.add.at(K, (e, e), hz * (3.0 * ua + ub) / 12.0)
    np.add.at(K, (e + 1, e + 1), hz * (ua + 3.0 * ub) / 12.0)
    off_lin = hz * (ua + ub) / 12.0
    np.add.at(K, (e, e + 1), off_lin)
    np.add.at(K, (e + 1, e), off_lin)
    # constant barrier: mass-matrix weighting
    np.add.at(K, (e, e), barrier * hz / 3.0)
    np.add.at(K, (e + 1, e + 1), barrier * hz / 3.0)
    np.add.at(K, (e, e + 1), barrier * hz / 6.0)
    np.add.at(K, (e + 1, e), barrier * hz / 6.0)
    # mass
    np.add.at(M, (e, e), hz / 3.0)
    np.add.at(M, (e + 1, e + 1), hz / 3.0)
    np.add.at(M, (e, e + 1), hz / 6.0)
    np.add.at(M, (e + 1, e), hz / 6.0)
    return K[1:-1, 1:-1], M[1:-1, 1:-1]


def _fix_signs(chi: np.ndarray) -> np.ndarray:
    """Make the first nonzero component of each column positive."""
    for col in range(chi.shape[1]):
        c = chi[:, col]
        nz = np.flatnonzero(np.abs(c) > 1e-14 * np.max(np.abs(c)))
        if nz.size and c[nz[0]] < 0.0:
            chi[:, col] = -c
    return chi


def solve_slice(V_slice: np.ndarray, grid: SliceGrid, scaled: ScaledDevice,
                n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest n_modes eigenpairs of one slice; chi includes the wall zeros."""
    K, M = assemble_slice(V_slice, grid, scaled)
    try:
        w, vecs = scipy.linalg.eigh(K, M)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SolverError(f"slice eigensolver failed: {exc}") from exc
    w = w[:n_modes]
    vecs = _fix_signs(vecs[:, :n_modes])
    chi = np.zeros((n_modes, len(grid.z)))
    chi[:, 1:-1] = vecs.T
    return w, chi


def solve_ladder(V: np.ndarray, grid: SliceGrid, scaled: ScaledDevice,
                 n_modes: int, workers: int = 1) -> SubbandLadder:
    """
    Solve the confinement problem on every slice of a nodal potential field
    V[i, j] (V at node (x_i, z_j)).
    """
    V = np.asarray(V, dtype=float)
    n_slices = V.shape[0]
    energies = np.empty((n_slices, n_modes))
    chis = np.empty((n_slices, n_modes, V.shape[1]))

    def run(i):
        try:
            return solve_slice(V[i], grid, scaled, n_modes)
        except SolverError as exc:
            raise SolverError(f"slice {i}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(n_slices)))
    else:
        results = [run(i) for i in range(n_slices)]
    for i, (w, chi) in enumerate(results):
        energies[i] = w
        chis[i] = chi
    return SubbandLadder(energies=energies, wavefunctions=chis)
