"""
Figure rendering for the report path: the same quantities the CSVs carry,
drawn to PNG files next to them. Figures are a convenience view; the CSVs
remain the canonical (byte-deterministic) output.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .coupler import BiasPoint, SweepResult  # noqa: E402

__all__ = ["render_sweep_figures", "render_equilibrium_figures"]


def _heatmap(ax, point: BiasPoint, zs, values, label):
    pm = ax.pcolormesh(point.x, zs, values.T, shading="gouraud", cmap="viridis")
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("z (nm)")
    plt.colorbar(pm, ax=ax, label=label)


def _save(fig, path: Path, made: list[Path]):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    made.append(path)


def render_sweep_figures(sweep: SweepResult, out_dir: str | Path, zs) -> list[Path]:
    out_dir = Path(out_dir)
    made: list[Path] = []
    points = sweep.points
    if not points:
        return made

    fig, ax = plt.subplots(figsize=(5.5, 4))
    iv = sweep.iv
    ax.plot(iv[:, 1], iv[:, 2], "o-", ms=3)
    ax.set_xlabel(r"$V_{DS}$ (V)")
    ax.set_ylabel("I (model units)")
    ax.set_title(f"I-V, $V_G$ = {points[0].V_G:g} V")
    ax.grid(alpha=0.3)
    _save(fig, out_dir / "iv.png", made)

    # temperature and velocity profiles for a few biases
    picks = sorted({0, len(points) // 2, len(points) - 1})
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for k in picks:
        p = points[k]
        axes[0].plot(p.x, p.T, label=f"$V_{{DS}}$={p.V_DS:g} V")
        axes[1].plot(p.x, p.velocity, label=f"$V_{{DS}}$={p.V_DS:g} V")
    axes[0].set_xlabel("x (nm)")
    axes[0].set_ylabel("T (K)")
    axes[1].set_xlabel("x (nm)")
    axes[1].set_ylabel("mean velocity (model units)")
    for ax in axes:
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    _save(fig, out_dir / "profiles.png", made)

    last = points[-1]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    _heatmap(axes[0], last, zs, last.Ne * 1e27, r"$N_e$ (m$^{-3}$)")
    _heatmap(axes[1], last, zs, last.V, "V (V)")
    fig.suptitle(f"$V_{{DS}}$ = {last.V_DS:g} V")
    _save(fig, out_dir / "fields.png", made)
    return made


def render_equilibrium_figures(point: BiasPoint, out_dir: str | Path, zs) -> list[Path]:
    out_dir = Path(out_dir)
    made: list[Path] = []
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    _heatmap(axes[0], point, zs, point.Ne * 1e27, r"$N_e$ (m$^{-3}$)")
    _heatmap(axes[1], point, zs, point.V, "V (V)")
    fig.suptitle("thermal equilibrium")
    _save(fig, out_dir / "fields.png", made)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for n in range(point.energies.shape[1]):
        ax.plot(point.x, point.energies[:, n], label=f"n={n + 1}")
    ax.set_xlabel("x (nm)")
    ax.set_ylabel(r"$E_n$ (eV)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, out_dir / "subbands.png", made)
    return made
