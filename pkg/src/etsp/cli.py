"""
Command-line entry point.

    etsp --config device.cfg --sweep [--out-dir out] [--dd-limit] [--no-plots]
    etsp --config device.cfg --equilibrium-only
    etsp --config device.cfg --dump-mesh

Exit codes: 0 success, 2 usage error (argparse), 3 bad configuration,
4 solver failure, 5 output I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .coupler import Simulator
from .device_config import ConfigError, load_config
from .et_solver import ConvergenceError
from .output import write_equilibrium_outputs, write_mesh_csv, write_outputs
from .schrodinger1d import SolverError

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_SOLVER = 4
EXIT_IO = 5

log = logging.getLogger("etsp")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="etsp",
        description="Subband energy-transport simulator for a double-gate MOSFET.")
    p.add_argument("--config", required=True, help="device config file (key=value)")
    p.add_argument("--out-dir", default="out", help="output directory (default: out)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--sweep", action="store_true",
                      help="run the V_DS continuation sweep (default mode)")
    mode.add_argument("--equilibrium-only", action="store_true",
                      help="stop after the thermal-equilibrium solve")
    p.add_argument("--dd-limit", action="store_true",
                   help="override phi_ph to 1e5/phi0 (drift-diffusion regime)")
    p.add_argument("--dump-mesh", action="store_true",
                   help="also write mesh.csv (node coordinates and tags)")
    p.add_argument("--no-plots", action="store_true",
                   help="skip PNG rendering, write CSVs only")
    p.add_argument("--quiet", action="store_true", help="suppress progress logging")
    return p


def _equilibrium_point(sim: Simulator):
    """Solve equilibrium and package it like a V_DS = 0 bias point."""
    V, ladder, state, trace = sim.thermal_equilibrium()
    V, ladder, sol, trace2 = sim.outer_gummel(V, state, 0.0)
    trace.newton_iterations = trace2.newton_iterations
    trace.newton_residuals = trace2.newton_residuals
    return sim.bias_point(V, ladder, sol, 0.0, trace)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")

    try:
        spec = load_config(args.config)
    except FileNotFoundError:
        log.error("config file not found: %s", args.config)
        return EXIT_CONFIG
    except ConfigError as exc:
        log.error("bad configuration: %s", exc)
        return EXIT_CONFIG

    if args.dd_limit:
        spec = dataclasses.replace(spec, phi_ph=1e5 / spec.phi0).validate()

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out_dir, exc)
        return EXIT_IO

    sim = Simulator(spec)
    try:
        if args.dump_mesh:
            write_mesh_csv(sim.mesh, out_dir / "mesh.csv")
            log.info("wrote %s", out_dir / "mesh.csv")

        if args.equilibrium_only:
            point = _equilibrium_point(sim)
            manifest = write_equilibrium_outputs(point, spec, out_dir, sim.mesh.zs)
            if not args.no_plots:
                from . import plots
                for f in plots.render_equilibrium_figures(point, out_dir, sim.mesh.zs):
                    manifest.add_file(f.name)
                manifest.save(out_dir)
        else:
            sweep = sim.sweep()
            if not sweep.points:
                log.error("no bias point converged: %s", sweep.abort_reason)
                return EXIT_SOLVER
            manifest = write_outputs(sweep, out_dir, sim.mesh.zs)
            if not args.no_plots:
                from . import plots
                for f in plots.render_sweep_figures(sweep, out_dir, sim.mesh.zs):
                    manifest.add_file(f.name)
                manifest.save(out_dir)
            if sweep.aborted:
                log.error("sweep aborted early: %s", sweep.abort_reason)
                return EXIT_SOLVER
    except (ConvergenceError, SolverError) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("output failure: %s", exc)
        return EXIT_IO

    log.info("outputs written to %s", out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
