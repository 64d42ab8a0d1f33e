"""
CSV emission and the run manifest.

Every CSV is deterministic: fixed column order, rows lexicographic in the
coordinates, floats printed with 17 significant digits (so identical runs
are byte-identical and files round-trip through text exactly). External
units are SI; the current/velocity columns are in the model's own unit
system (see README). File set per converged bias point:

    iv.csv                 V_G, V_DS, I  (one row per bias point)
    profiles_<VDS>.csv     x, T, mu, u, v, velocity, rho, V_s
    density_<VDS>.csv      x, z, N_e
    potential_<VDS>.csv    x, z, V
    subbands_<VDS>.csv     x, n, E_n

An equilibrium-only run writes the unsuffixed variants potential.csv,
ladder.csv, density.csv and profiles.csv.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coupler import BiasPoint, SweepResult
from .device_config import CONFIG_KEYS, DeviceSpec
from .mesh import Mesh2D, NodeTag

__all__ = ["RunManifest", "write_outputs", "write_equilibrium_outputs",
           "write_mesh_csv", "format_bias"]

_NM = 1e-9
_Q = 1.602176634e-19  # eV -> J


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def format_bias(v_ds: float) -> str:
    return f"{v_ds:.4f}"


@dataclass
class RunManifest:
    """Record of one run: config echo, outputs, convergence summaries."""

    version: str
    mode: str
    config: dict[str, object]
    files: list[str] = field(default_factory=list)
    energy_shifts: list[float] = field(default_factory=list)
    convergence: list[dict[str, object]] = field(default_factory=list)

    def add_file(self, name: str) -> None:
        if name in self.files:
            raise ValueError(f"output file {name!r} emitted twice")
        self.files.append(name)

    def save(self, out_dir: Path) -> Path:
        path = out_dir / "run_manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2,
                                   sort_keys=True) + "\n")
        return path


def _config_echo(spec: DeviceSpec) -> dict[str, object]:
    echo: dict[str, object] = {}
    for key, (fld, _) in CONFIG_KEYS.items():
        if fld.startswith("tol."):
            echo[key] = getattr(spec.tol, fld[4:])
        else:
            echo[key] = getattr(spec, fld)
    return echo


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _profile_rows(p: BiasPoint):
    # x (m), T (K), mu (J), u (-), v (1/J), velocity/rho/V_s per README units
    for i in range(len(p.x)):
        yield (p.x[i] * _NM, p.T[i], p.mu[i] * _Q, p.u[i], p.v[i] / _Q,
               p.velocity[i], p.rho[i] * 1e18, p.V_s[i] * _Q)


_PROFILE_HEADER = ["x", "T", "mu", "u", "v", "velocity", "rho", "V_s"]


def _field_rows(x: np.ndarray, z: np.ndarray, values: np.ndarray, scale: float):
    for i in range(len(x)):
        for j in range(len(z)):
            yield (x[i] * _NM, z[j] * _NM, values[i, j] * scale)


def _subband_rows(x: np.ndarray, energies: np.ndarray):
    for i in range(len(x)):
        for n in range(energies.shape[1]):
            yield (x[i] * _NM, float(n + 1), energies[i, n] * _Q)


def _point_files(point: BiasPoint, out_dir: Path, suffix: str,
                 manifest: RunManifest, zs: np.ndarray) -> None:
    names = {
        f"profiles{suffix}.csv": (_PROFILE_HEADER, _profile_rows(point)),
        f"density{suffix}.csv": (["x", "z", "N_e"],
                                 _field_rows(point.x, zs, point.Ne, 1e27)),
        f"potential{suffix}.csv": (["x", "z", "V"],
                                   _field_rows(point.x, zs, point.V, 1.0)),
        f"subbands{suffix}.csv": (["x", "n", "E_n"],
                                  _subband_rows(point.x, point.energies)),
    }
    for name, (header, rows) in names.items():
        _write_csv(out_dir / name, header, rows)
        manifest.add_file(name)
    manifest.energy_shifts.append(point.E_ref)
    manifest.convergence.append({
        "V_DS": point.V_DS,
        "outer_iterations": point.trace.iterations,
        "last_dV": point.trace.dv_norms[-1] if point.trace.dv_norms else 0.0,
        "converged": point.trace.converged,
        "J1_spread": point.J1_spread,
    })


def write_outputs(sweep: SweepResult, out_dir: str | Path,
                  zs: np.ndarray) -> RunManifest:
    """Emit iv.csv plus the per-bias-point files for a sweep."""
    if not sweep.points:
        raise ValueError("sweep produced no converged bias points")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(version=__version__, mode="sweep",
                           config=_config_echo(sweep.spec))
    _write_csv(out_dir / "iv.csv", ["V_G", "V_DS", "I"],
               ((p.V_G, p.V_DS, p.I) for p in sweep.points))
    manifest.add_file("iv.csv")
    for point in sweep.points:
        _point_files(point, out_dir, f"_{format_bias(point.V_DS)}", manifest, zs)
    manifest.save(out_dir)
    return manifest


def write_equilibrium_outputs(point: BiasPoint, spec: DeviceSpec,
                              out_dir: str | Path, zs: np.ndarray) -> RunManifest:
    """Emit the unsuffixed equilibrium file set (plus ladder.csv alias)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(version=__version__, mode="equilibrium",
                           config=_config_echo(spec))
    _point_files(point, out_dir, "", manifest, zs)
    _write_csv(out_dir / "ladder.csv", ["x", "n", "E_n"],
               _subband_rows(point.x, point.energies))
    manifest.add_file("ladder.csv")
    manifest.save(out_dir)
    return manifest


def write_mesh_csv(mesh: Mesh2D, path: str | Path) -> None:
    """Node coordinates (m) and boundary tags."""
    rows = []
    for n in range(mesh.n_nodes):
        rows.append(f"{_fmt(mesh.nodes[n, 0] * _NM)},{_fmt(mesh.nodes[n, 1] * _NM)},"
                    f"{NodeTag(mesh.node_tags[n]).name.lower()}")
    Path(path).write_text("\n".join(["x,z,tag"] + rows) + "\n")
