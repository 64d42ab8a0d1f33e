"""
Conforming P1 finite elements for the 2D Poisson equation on the device
cross-section, with the damped (Gummel) linearisation used by the outer
coupling loop.

The electrostatic problem is div(eps_R grad V) = (e/eps0)(N_e - N_D) with
Dirichlet data on the ohmic contacts (x = 0 grounded, x = L at V_DS) and on
the gate segments (V_Gate), homogeneous Neumann elsewhere. Solving it as-is
inside a fixed-point loop diverges because the density responds
exponentially to V, so each outer pass solves the damped linearisation

    div(eps_R grad V_new) - (e/eps0) N_e V_new/V_ref
        = (e/eps0) (N_e (1 - V_old/V_ref) - N_D),     V_ref = kT_L/e,

which (i) has the exact solution of the undamped equation as its fixed
point and (ii) adds a nonnegative zeroth-order term, keeping the system
matrix positive definite whenever N_e >= 0. The density terms use lumped P1
mass (the same lumping on both sides preserves the fixed point exactly);
doping is piecewise constant per element.

Internal units: nm, V; densities enter in nm^-3. The sparse system is
solved with a direct factorisation (SuperLU) -- at the default mesh it has
a few thousand unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .device_config import DopingProfile, ScaledDevice
from .mesh import Mesh2D, NodeTag
from .schrodinger1d import SolverError

__all__ = [
    "PotentialField",
    "PoissonSystem",
    "element_stiffness",
    "assemble_poisson",
    "device_dirichlet",
    "gummel_poisson_step",
]


PotentialField = np.ndarray  # nodal V, shape (N_x+1, N_z+1), volts


def element_stiffness(coords: np.ndarray, eps_r: float = 1.0) -> np.ndarray:
    """P1 stiffness of a single triangle with vertex coords (3, 2)."""
    b = np.array([coords[1, 1] - coords[2, 1],
                  coords[2, 1] - coords[0, 1],
                  coords[0, 1] - coords[1, 1]])
    c = np.array([coords[2, 0] - coords[1, 0],
                  coords[0, 0] - coords[2, 0],
                  coords[1, 0] - coords[0, 0]])
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    if area <= 0.0:
        raise ValueError("triangle must be counterclockwise with positive area")
    return eps_r * (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)


@dataclass
class PoissonSystem:
    """Mesh-bound assembly: raw Neumann stiffness plus mass/load helpers."""

    mesh: Mesh2D
    scaled: ScaledDevice
    stiffness: sp.csr_matrix     # integral eps_R grad phi_i . grad phi_j
    lumped_mass: np.ndarray      # integral phi_i (row sums of P1 mass)
    eps_elements: np.ndarray

    def solve(self, sigma: np.ndarray, source_nodal: np.ndarray,
              source_elements: np.ndarray, dirichlet_mask: np.ndarray,
              dirichlet_values: np.ndarray) -> np.ndarray:
        """
        Solve div(eps_R grad V) - sigma V = g with g given by nodal values
        (`source_nodal`, lumped) plus per-element constants
        (`source_elements`). Weak form: (eps grad V, grad w) + (sigma V, w)
        = -(g, w); Dirichlet rows eliminated symmetrically.
        """
        mesh = self.mesh
        if np.any(sigma < 0.0):
            raise ValueError("damping coefficient sigma must be nonnegative")
        A = self.stiffness + sp.diags(self.lumped_mass * sigma)
        b = -(self.lumped_mass * source_nodal)
        if np.any(source_elements):
            areas = mesh.areas()
            contrib = source_elements * areas / 3.0
            load = np.zeros(mesh.n_nodes)
            np.add.at(load, mesh.triangles.ravel(), np.repeat(contrib, 3))
            b -= load

        free = ~dirichlet_mask
        A_free = A.tocsr()[free]
        b_free = b[free] - A_free[:, dirichlet_mask] @ dirichlet_values[dirichlet_mask]
        A_ff = A_free[:, free].tocsc()
        try:
            x_free = spla.spsolve(A_ff, b_free)
        except RuntimeError as exc:  # pragma: no cover - defensive
            raise SolverError(f"Poisson linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(x_free)):
            raise SolverError("Poisson linear solve produced non-finite values")
        out = dirichlet_values.copy()
        out[free] = x_free
        return out


def assemble_poisson(mesh: Mesh2D, scaled: ScaledDevice) -> PoissonSystem:
    """Assemble the per-material-permittivity stiffness and mass lumps."""
    eps_el = np.where(mesh.materials == 0, scaled.spec.eps_Si, scaled.spec.eps_ox)
    p = mesh.nodes[mesh.triangles]
    b = np.stack([p[:, 1, 1] - p[:, 2, 1],
                  p[:, 2, 1] - p[:, 0, 1],
                  p[:, 0, 1] - p[:, 1, 1]], axis=1)
    c = np.stack([p[:, 2, 0] - p[:, 1, 0],
                  p[:, 0, 0] - p[:, 2, 0],
                  p[:, 1, 0] - p[:, 0, 0]], axis=1)
    areas = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        * (eps_el / (4.0 * areas))[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((ke.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    lumped = np.zeros(mesh.n_nodes)
    np.add.at(lumped, mesh.triangles.ravel(), np.repeat(areas / 3.0, 3))
    return PoissonSystem(mesh=mesh, scaled=scaled, stiffness=A,
                         lumped_mass=lumped, eps_elements=eps_el)


def device_dirichlet(mesh: Mesh2D, V_DS: float, V_G: float) -> tuple[np.ndarray, np.ndarray]:
    """Contact/gate Dirichlet data: source grounded, drain at V_DS, gates at V_G."""
    tags = mesh.node_tags
    mask = (tags == NodeTag.CONTACT_SOURCE) | (tags == NodeTag.CONTACT_DRAIN) \
        | (tags == NodeTag.GATE)
    values = np.zeros(mesh.n_nodes)
    values[tags == NodeTag.CONTACT_DRAIN] = V_DS
    values[tags == NodeTag.GATE] = V_G
    return mask, values


def gummel_poisson_step(system: PoissonSystem, V_old: PotentialField,
                        Ne_nodal: np.ndarray, doping: DopingProfile,
                        V_DS: float, V_G: float) -> PotentialField:
    """
    One damped Poisson update. `V_old` and `Ne_nodal` (nm^-3, >= 0) are
    nodal fields shaped (N_x+1, N_z+1); returns V_new with the same shape
    and the Dirichlet data imposed exactly.
    """
    mesh = system.mesh
    sc = system.scaled
    Ne = np.asarray(Ne_nodal, dtype=float).reshape(-1)
    if np.any(Ne < 0.0):
        raise ValueError("electron density must be nonnegative")
    v_old = np.asarray(V_old, dtype=float).reshape(-1)
    coupling = sc.e_over_eps0
    sigma = coupling * Ne / sc.V_ref
    source_nodal = coupling * Ne * (1.0 - v_old / sc.V_ref)
    source_elem = -coupling * doping.values_nm3
    mask, values = device_dirichlet(mesh, V_DS, V_G)
    V_new = system.solve(sigma, source_nodal, source_elem, mask, values)
    return V_new.reshape(V_old.shape)
