"""Matplotlib figure rendering for the report path.

Figures are written next to the CSV artifacts: initial/terminal density in
cartesian and semilog axes, node trajectories, diagnostic overlays and
residual-convergence plots.  Everything renders off-screen (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def render_density_figures(snapshots, out_dir: Path) -> list[Path]:
    """Initial vs terminal reconstructed density, cartesian and semilog."""
    first, last = snapshots[0], snapshots[-1]
    written = []
    for semilog, stem in ((False, "density"), (True, "density_semilog")):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for snap, style, label in ((first, "o-", f"t = {first.t:g}"), (last, "s-", f"t = {last.t:g}")):
            xs, ps = snap.density_samples()
            ax.plot(xs, ps, style, ms=2.5, lw=1.0, label=label)
        if semilog:
            ax.set_yscale("log")
        ax.set_xlabel("x")
        ax.set_ylabel("p(x, t)")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / f"{stem}.png"
        fig.savefig(path, dpi=_DPI)
        plt.close(fig)
        written.append(path)
    return written


def render_trajectory_figure(times, positions, out_dir: Path, max_nodes: int = 60) -> Path:
    """Node trajectories t vs X_k(t); positions is (n_times, n_nodes)."""
    times = np.asarray(times)
    positions = np.asarray(positions)
    n_nodes = positions.shape[1]
    stride = max(1, n_nodes // max_nodes)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for k in range(0, n_nodes, stride):
        ax.plot(positions[:, k], times, "-", lw=0.6, color="tab:blue", alpha=0.7)
    ax.plot(positions[:, -1], times, "-", lw=1.4, color="tab:red", label="rightmost node")
    ax.set_xlabel("X_k(t)")
    ax.set_ylabel("t")
    ax.legend(frameon=False, loc="lower right")
    fig.tight_layout()
    path = out_dir / "trajectories.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_overlay_figure(samples, labels, out_dir: Path, stem: str) -> Path:
    """Overlay of (x, p) density samples from different solvers."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (xs, ps), label in zip(samples, labels):
        ax.plot(xs, ps, lw=1.0, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("p(x, T)")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out_dir / f"{stem}.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_convergence_figure(rows, out_dir: Path, stem: str = "residual_convergence") -> Path:
    """log-log residual-vs-h curves; rows are (family, h, max_norm) triples."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    families = sorted({r[0] for r in rows})
    for family in families:
        hs = np.array([r[1] for r in rows if r[0] == family])
        res = np.array([r[2] for r in rows if r[0] == family])
        ax.loglog(hs, res, "o-", label=family)
    ref_h = np.array(sorted({r[1] for r in rows}))
    scale = max(r[2] for r in rows) / ref_h.max() ** 2
    ax.loglog(ref_h, scale * ref_h**2, "k--", lw=0.8, label="h^2")
    ax.set_xlabel("h")
    ax.set_ylabel("max residual")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out_dir / f"{stem}.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
