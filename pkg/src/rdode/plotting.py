"""SVG figures via matplotlib with reproducible output."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write  # noqa: E402

plt.rcParams["svg.hashsalt"] = "rdode"
plt.rcParams["svg.fonttype"] = "none"
COMPONENTS = ("u", "v", "w")


def _save(fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def region_figure(grid, boundaries: dict[int, list[np.ndarray]], path, mark=None):
    """Heat map of the number of unstable modes with mode boundaries overlaid."""
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    counts = grid.mode_count.T.astype(float)
    counts[counts == 0] = np.nan
    mesh = ax.pcolormesh(grid.dv_axis, grid.dw_axis, counts, shading="nearest", cmap="viridis",
                         rasterized=True)
    fig.colorbar(mesh, ax=ax, label="number of unstable modes")
    for j, lines in sorted(boundaries.items()):
        for k, ln in enumerate(lines):
            ax.plot(ln[:, 0], ln[:, 1], color="k", lw=0.7)
            if k == 0 and len(ln):
                mid = ln[len(ln) // 2]
                ax.annotate(str(j), mid, fontsize=7, color="crimson")
    if mark is not None:
        ax.plot([mark[0]], [mark[1]], "o", color="red", ms=4)
    if grid.log_scale:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("D_v")
    ax.set_ylabel("D_w")
    ax.set_title("Turing-unstable set")
    return _save(fig, path)


def sweep_figure(panels, path, mark: dict | None = None):
    """Grid of feasibility panels; each panel shows the intersection mask."""
    n = len(panels)
    cols = 3 if n >= 3 else n
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.8 * rows), squeeze=False)
    for ax, pm in zip(axes.ravel(), panels):
        ax.pcolormesh(pm.axis1, pm.axis2, pm.intersection.T.astype(float), shading="nearest",
                      cmap="Greys", vmin=0, vmax=1.6, rasterized=True)
        if mark is not None:
            ax.plot([mark[pm.axis1_name]], [mark[pm.axis2_name]], "o", color="k", ms=3)
        ax.set_xlabel(pm.axis1_name)
        ax.set_ylabel(pm.axis2_name)
    for ax in axes.ravel()[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, path)


def profile_figure(x, final, path, initial=None, title: str = "", marks=()):
    """Stacked ``u, v, w`` profiles; dotted initial state when given."""
    m = final.shape[0]
    fig, axes = plt.subplots(m, 1, figsize=(6.4, 1.9 * m), sharex=True, squeeze=False)
    for i, ax in enumerate(axes[:, 0]):
        if initial is not None:
            ax.plot(x, initial[i], ":", color="0.6", lw=1)
        ax.plot(x, final[i], color="k", lw=1)
        for p in marks:
            ax.axvline(p, ls="--", color="k", lw=0.6)
        ax.set_ylabel(COMPONENTS[i] if i < 3 else f"x{i}")
    axes[-1, 0].set_xlabel("x")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    return _save(fig, path)
