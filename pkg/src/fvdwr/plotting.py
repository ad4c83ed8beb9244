"""Matplotlib figures for study and adaptive runs (rendered to files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 4.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
    "savefig.dpi": 120,
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def _positive(values):
    v = np.abs(np.asarray(values, dtype=float))
    return np.where(v > 0, v, np.nan)


def plot_convergence(rows, path, title=None):
    """Errors and estimator sums against h on log-log axes, with an O(h) guide."""
    h = np.array([r["h"] for r in rows], dtype=float)
    series = [
        ("err_V", r"$\|Iu-u_T\|_V$", "o-"),
        ("err_L2", r"$\|u-u_T\|_0$", "s-"),
        ("j_error", r"$|j(u)-j(u_T)|$", "^-"),
        ("sum_eta_l", r"$\sum_l \eta_l$", "d--"),
    ]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for key, label, style in series:
            vals = [r.get(key) for r in rows]
            if any(v is None for v in vals):
                continue
            ax.loglog(h, _positive(vals), style, label=label)
        if len(h) > 1:
            ref = rows[0].get("err_V") or 1.0
            ax.loglog(h, abs(ref) * h / h[0], "k:", lw=0.8, label=r"$O(h)$")
        ax.set_xlabel("h")
        ax.set_ylabel("error / estimate")
        ax.invert_xaxis()
        ax.legend(fontsize=8)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_indicators(mesh, indicators, path, title=None):
    """Element indicators on the mesh, log colour scale where possible."""
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.elements)
    eta = np.asarray(indicators, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pos = eta[eta > 0]
        if pos.size:
            floor = max(pos.min(), pos.max() * 1e-8)
            norm = matplotlib.colors.LogNorm(vmin=floor, vmax=pos.max())
            pc = ax.tripcolor(tri, facecolors=np.maximum(eta, floor), norm=norm, cmap="viridis",
                              edgecolors="k", linewidth=0.1)
        else:
            pc = ax.tripcolor(tri, facecolors=eta, cmap="viridis", edgecolors="k", linewidth=0.1)
        fig.colorbar(pc, ax=ax, label="element indicator")
        ax.set_aspect("equal")
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_adaptive_history(rows, path, title=None):
    """|total estimate| and |true error| against the number of vertices."""
    nv = np.array([r["vertices"] for r in rows], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(nv, _positive([r["total"] for r in rows]), "o-", label="|estimate|")
        if all(r.get("true_error") is not None for r in rows):
            ax.loglog(nv, _positive([r["true_error"] for r in rows]), "s--", label="|true error|")
        ax.set_xlabel("vertices")
        ax.set_ylabel("goal error")
        ax.legend(fontsize=8)
        if title:
            ax.set_title(title)
        return _save(fig, path)
