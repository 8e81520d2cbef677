"""Matplotlib figures for the report path (rendered off-screen to files)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from .assembly import Discretization, State  # noqa: E402
from .benchmark import REFERENCE_LABEL  # noqa: E402


def _save(fig, path, echo: Optional[str]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Description": echo} if echo else None
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=meta)
    plt.close(fig)
    return path


def p2_triangulation(disc: Discretization) -> mtri.Triangulation:
    """Each quadratic triangle split into four linear ones through its midpoints."""
    c = disc.cells  # vertices 0..2, then midpoints of edges 01, 12, 20
    sub = np.concatenate([c[:, [0, 3, 5]], c[:, [3, 1, 4]], c[:, [5, 4, 2]], c[:, [3, 4, 5]]])
    xy = disc.mesh.p2_coordinates
    return mtri.Triangulation(xy[:, 0], xy[:, 1], sub)


def plot_fields(state: State, disc: Discretization, path, title: str = "", echo: Optional[str] = None):
    """Speed with velocity arrows (left) and temperature (right)."""
    tri = p2_triangulation(disc)
    n = disc.n
    vx, vy = state.v[:n], state.v[n:]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), constrained_layout=True)
    speed = np.hypot(vx, vy)
    cs = axes[0].tripcolor(tri, speed, shading="gouraud", cmap="viridis")
    fig.colorbar(cs, ax=axes[0], label="|v|")
    verts = np.arange(disc.mesh.n_vertices)
    step = max(1, len(verts) // 600)
    xy = disc.mesh.p2_coordinates
    axes[0].quiver(xy[verts[::step], 0], xy[verts[::step], 1], vx[verts[::step]], vy[verts[::step]],
                   color="white", scale=None, width=0.002)
    cs = axes[1].tripcolor(tri, state.u, shading="gouraud", cmap="coolwarm", vmin=0.0, vmax=1.0)
    fig.colorbar(cs, ax=axes[1], label="u")
    for ax, name in zip(axes, ("velocity", "temperature")):
        ax.set_aspect("equal")
        ax.set_title(f"{name} {title}".strip())
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    return _save(fig, path, echo)


def plot_profiles(profiles: dict, path, title: str = "", echo: Optional[str] = None):
    """Normal velocity and temperature along the open side, one curve per label."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), constrained_layout=True)
    for label, (x2, vn, u) in profiles.items():
        style = dict(color="black", lw=2.2) if label == REFERENCE_LABEL else dict(lw=1.2)
        axes[0].plot(vn, x2, label=label, **style)
        axes[1].plot(u, x2, label=label, **style)
    axes[0].axvline(0.0, color="grey", lw=0.6)
    axes[0].set_xlabel("v . n")
    axes[1].set_xlabel("u")
    for ax in axes:
        ax.set_ylabel("x2")
        ax.grid(alpha=0.3)
    axes[1].legend(fontsize=8, loc="best")
    if title:
        fig.suptitle(title)
    return _save(fig, path, echo)


def plot_residual_bars(results, path, title: str = "", echo: Optional[str] = None):
    """Both residuals of one (Re, Gr) cell as bars per boundary combination."""
    labels = [r.bc.label for r in results]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), constrained_layout=True)
    for ax, metric in zip(axes, ("res_omega", "res_gamma")):
        vals = [getattr(r, metric) for r in results]
        ax.bar(range(len(vals)), vals, color="tab:blue")
        ax.set_xticks(range(len(vals)))
        ax.set_xticklabels(labels, rotation=35, ha="right", fontsize=8)
        ax.set_title(metric)
        ax.grid(axis="y", alpha=0.3)
    if title:
        fig.suptitle(title)
    return _save(fig, path, echo)


def plot_sweep(results, path, echo: Optional[str] = None):
    """Residuals against Gr, one panel per (metric, Re), one line per combination."""
    res = sorted({r.re for r in results})
    combos = list(dict.fromkeys(r.bc.label for r in results))
    fig, axes = plt.subplots(2, len(res), figsize=(3.6 * len(res), 6.5), squeeze=False, constrained_layout=True)
    for j, re in enumerate(res):
        for i, metric in enumerate(("res_omega", "res_gamma")):
            ax = axes[i, j]
            for label in combos:
                pts = sorted((r.gr, getattr(r, metric)) for r in results if r.re == re and r.bc.label == label)
                if pts:
                    ax.plot(*zip(*pts), marker="o", ms=3, label=label)
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_title(f"{metric}, Re={re:g}", fontsize=9)
            ax.set_xlabel("Gr")
            ax.grid(alpha=0.3, which="both")
    axes[0, -1].legend(fontsize=7)
    return _save(fig, path, echo)


def plot_convergence(report, path, echo: Optional[str] = None):
    """Log-log errors against mesh size from a convergence report."""
    h = 1.0 / np.asarray(report.ns, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4.2), constrained_layout=True)
    for name, errs in report.errors.items():
        ax.loglog(h, errs, marker="o", label=f"{name} (order {report.fitted[name]:.2f})")
    ref = np.asarray(report.errors["velocity_h1"])[0] * (h / h[0]) ** 2
    ax.loglog(h, ref, "k--", lw=0.8, label="slope 2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    return _save(fig, path, echo)
