"""Figure rendering for the CLI report path.

Each renderer takes already-computed data (the same data the CSV writers
receive) and writes a PNG next to the delimited output. The library's data
producers stay plot-free; only the CLI imports this module.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle as CirclePatch


def _obstacle_patches(ax, lattice, radius, window):
    """Shade every obstacle translate that intersects the window."""
    x0, x1, y0, y1 = window
    reach = max(x1 - x0, y1 - y0) / min(abs(lattice.omega1), abs(lattice.omega2)) + 2
    k = int(math.ceil(reach))
    for m in range(-k, k + 1):
        for n in range(-k, k + 1):
            c = m * lattice.omega1 + n * lattice.omega2
            if x0 - radius <= c.real <= x1 + radius and y0 - radius <= c.imag <= y1 + radius:
                ax.add_patch(
                    CirclePatch((c.real, c.imag), radius, facecolor="0.75", edgecolor="0.3", zorder=3)
                )


def render_field(samples, nx, ny, window, lattice, radius, path) -> None:
    """Stream-function contour map; contours of psi are the streamlines."""
    psi = np.array([s.psi for s in samples]).reshape(ny, nx)
    xs = np.array([s.x for s in samples]).reshape(ny, nx)
    ys = np.array([s.y for s in samples]).reshape(ny, nx)
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    finite = np.isfinite(psi)
    levels = np.linspace(np.min(psi[finite]), np.max(psi[finite]), 25)
    ax.contour(xs, ys, np.ma.masked_invalid(psi), levels=levels, colors="tab:blue", linewidths=0.8)
    _obstacle_patches(ax, lattice, radius, window)
    ax.set_xlim(window[0], window[1])
    ax.set_ylim(window[2], window[3])
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_streamlines(lines, window, lattice, radius, path) -> None:
    """Traced streamline polylines over the obstacle array."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    for line in lines:
        if len(line.points) > 1:
            ax.plot(line.points.real, line.points.imag, color="tab:blue", linewidth=0.9)
    _obstacle_patches(ax, lattice, radius, window)
    ax.set_xlim(window[0], window[1])
    ax.set_ylim(window[2], window[3])
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_convergence(records, fit, path) -> None:
    """Boundary error versus charge count on a log scale, with the fit."""
    n = np.array([r.n_charges for r in records])
    eps = np.array([r.epsilon for r in records])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.semilogy(n, eps, "o", color="tab:red", label="measured")
    if fit is not None:
        grid = np.linspace(n.min(), n.max(), 100)
        ax.semilogy(grid, fit.prefactor * fit.rate**grid, "-", color="0.4",
                    label=f"fit {fit.rate:.3f}^N")
        ax.legend()
    ax.set_xlabel("N")
    ax.set_ylabel("boundary error")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
