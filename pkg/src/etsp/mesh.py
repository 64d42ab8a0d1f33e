"""
Structured grids for the simulator: the uniform 1D transport grid, the 1D
confinement (slice) grid, and the 2D right-triangle mesh of the device
cross-section with boundary and material classification.

All coordinates are in nm (internal units). Rectangles are split into
triangles with the diagonal alternating by cell parity, which keeps the
triangulation mirror-symmetric about the device midplane for even N_x/N_z;
a symmetric device then yields a symmetric discrete solution to solver
precision instead of O(h^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .device_config import DeviceSpec, scale_device

__all__ = [
    "NodeTag",
    "Material",
    "TransportGrid",
    "SliceGrid",
    "Mesh2D",
    "build_grids",
]


class NodeTag(IntEnum):
    INTERIOR = 0
    CONTACT_SOURCE = 1
    CONTACT_DRAIN = 2
    GATE = 3
    NEUMANN = 4


class Material(IntEnum):
    SI = 0
    SIO2 = 1


@dataclass(frozen=True)
class TransportGrid:
    """Uniform nodes x_0..x_{N_x} spanning [0, L] (nm)."""

    x: np.ndarray
    h: float

    @property
    def n_intervals(self) -> int:
        return len(self.x) - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.x[:-1] + self.x[1:])


@dataclass(frozen=True)
class SliceGrid:
    """Uniform nodes z_0..z_{N_z} spanning [0, ell] (nm)."""

    z: np.ndarray
    hz: float


@dataclass(frozen=True)
class Mesh2D:
    """
    Triangulation of [0,L] x [0,ell] from an (N_x x N_z) rectangle grid.

    nodes     : (n_nodes, 2) coordinates; node (i,j) has index i*(N_z+1)+j
    triangles : (n_tri, 3) vertex indices, counterclockwise
    node_tags : per-node NodeTag
    materials : per-element Material
    """

    xs: np.ndarray
    zs: np.ndarray
    nodes: np.ndarray
    triangles: np.ndarray
    node_tags: np.ndarray
    materials: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.xs), len(self.zs))

    def node_index(self, i: int, j: int) -> int:
        return i * len(self.zs) + j

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.nodes[self.triangles]
        c = p.mean(axis=1)
        return c[:, 0], c[:, 1]


def _classify_nodes(xs: np.ndarray, zs: np.ndarray, L: float, ell: float,
                    gate_span: tuple[float, float]) -> np.ndarray:
    nx, nz = len(xs), len(zs)
    x = np.repeat(xs, nz)
    z = np.tile(zs, nx)
    tol = 1e-9 * max(L, ell)
    tags = np.full(nx * nz, NodeTag.INTERIOR, dtype=np.int8)
    on_left = np.abs(x) <= tol
    on_right = np.abs(x - L) <= tol
    on_horiz = (np.abs(z) <= tol) | (np.abs(z - ell) <= tol)
    in_gate = (x >= gate_span[0] - tol) & (x <= gate_span[1] + tol)
    tags[on_horiz] = NodeTag.NEUMANN
    tags[on_horiz & in_gate] = NodeTag.GATE
    # Ohmic contacts span the full vertical edges, oxide included, and win
    # over any other tag at the corners.
    tags[on_left] = NodeTag.CONTACT_SOURCE
    tags[on_right] = NodeTag.CONTACT_DRAIN
    return tags


def build_grids(spec: DeviceSpec) -> tuple[TransportGrid, SliceGrid, Mesh2D]:
    """Build the transport grid, slice grid, and 2D mesh for a device."""
    sc = scale_device(spec)
    nx, nz = spec.N_x, spec.N_z
    xs = np.linspace(0.0, sc.L, nx + 1)
    zs = np.linspace(0.0, sc.ell, nz + 1)
    transport = TransportGrid(x=xs, h=sc.L / nx)
    conf = SliceGrid(z=zs, hz=sc.ell / nz)

    nodes = np.column_stack([np.repeat(xs, nz + 1), np.tile(zs, nx + 1)])

    def nid(i, j):
        return i * (nz + 1) + j

    tris = np.empty((2 * nx * nz, 3), dtype=np.int64)
    k = 0
    for i in range(nx):
        for j in range(nz):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris[k] = (n00, n10, n01)
                tris[k + 1] = (n10, n11, n01)
            else:
                tris[k] = (n00, n10, n11)
                tris[k + 1] = (n00, n11, n01)
            k += 2

    tags = _classify_nodes(xs, zs, sc.L, sc.ell, sc.gate_span)

    cz = nodes[tris].mean(axis=1)[:, 1]
    materials = np.where(
        (cz > sc.ell_ox) & (cz < sc.ell_ox + sc.ell_Si), Material.SI, Material.SIO2
    ).astype(np.int8)

    mesh = Mesh2D(xs=xs, zs=zs, nodes=nodes, triangles=tris,
                  node_tags=tags, materials=materials)
    return transport, conf, mesh


def slice_kinetic_coefficients(spec_scaled, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-element hbar^2/(2 m*) (eV nm^2) and barrier energy (eV) along a
    confinement slice; element e spans [z_e, z_{e+1}].
    """
    zc = 0.5 * (zs[:-1] + zs[1:])
    in_si = (zc > spec_scaled.ell_ox) & (zc < spec_scaled.ell_ox + spec_scaled.ell_Si)
    kin = np.where(in_si, spec_scaled.kin_Si, spec_scaled.kin_ox)
    barrier = np.where(in_si, 0.0, spec_scaled.U_c)
    return kin, barrier
