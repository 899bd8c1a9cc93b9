"""Figure rendering for report artifacts.

Every plotting function reads the delimited files written by the library
(or the CLI) and renders an SVG next to them, so figures can always be
regenerated from artifacts alone.  Output is deterministic: fixed hash
salt, no embedded creation date.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "vortexnav"

_VORTEX_STYLE = {"marker": "x", "color": "black", "s": 60, "zorder": 5}
_START_STYLE = {"marker": "o", "color": "tab:red", "s": 25, "zorder": 5}


def _load(csv_path, *required: str) -> np.ndarray:
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    names = data.dtype.names or ()
    for column in required:
        if column not in names:
            raise KeyError(f"{csv_path}: missing column {column!r}")
    return np.atleast_1d(data)


def _save(fig, svg_path) -> None:
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _decorate_plane(ax, mu: float, x0, *, reeb: bool = True) -> None:
    """Vortex and start markers plus the circular steady orbit of radius 2|mu|."""
    ax.scatter([0.0], [0.0], **_VORTEX_STYLE)
    ax.scatter([x0[0]], [x0[1]], **_START_STYLE)
    if reeb and mu != 0.0:
        phi = np.linspace(0.0, 2.0 * math.pi, 256)
        ax.plot(
            2.0 * abs(mu) * np.cos(phi),
            2.0 * abs(mu) * np.sin(phi),
            linestyle="--",
            color="0.6",
            linewidth=0.8,
        )
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")


def plot_trajectory(csv_path, svg_path, *, mu: float, x0) -> None:
    """Planar geodesic path from a trajectory file."""
    data = _load(csv_path, "x1", "x2")
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    ax.plot(data["x1"], data["x2"], color="tab:blue", linewidth=1.2)
    ax.scatter([data["x1"][-1]], [data["x2"][-1]], marker="s", color="tab:blue", s=20)
    _decorate_plane(ax, mu, x0)
    ax.set_title("geodesic")
    _save(fig, svg_path)


def plot_radius_history(csv_path, svg_path) -> None:
    """Radius versus time, for oscillation and escape behaviour."""
    data = _load(csv_path, "t", "r")
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.plot(data["t"], data["r"], color="tab:blue", linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("r")
    ax.set_title("radius along the geodesic")
    _save(fig, svg_path)


def plot_wavefront(csv_paths, svg_path, *, mu: float, x0) -> None:
    """One or several equal-time fronts; dead directions break the line."""
    if isinstance(csv_paths, (str, bytes)) or hasattr(csv_paths, "__fspath__"):
        csv_paths = [csv_paths]
    fig, ax = plt.subplots(figsize=(5.6, 5.6))
    cmap = plt.get_cmap("viridis")
    for k, path in enumerate(csv_paths):
        data = _load(path, "x1", "x2")
        x1 = np.append(data["x1"], data["x1"][0])
        x2 = np.append(data["x2"], data["x2"][0])
        color = cmap(0.15 + 0.7 * k / max(1, len(csv_paths) - 1)) if len(csv_paths) > 1 else "tab:blue"
        ax.plot(x1, x2, linewidth=1.0, color=color)
    _decorate_plane(ax, mu, x0)
    ax.set_title("wavefronts")
    _save(fig, svg_path)


def plot_scan(csv_path, svg_path) -> None:
    """Smallest singular value against time, one curve per direction."""
    data = _load(csv_path, "alpha", "t", "sigma_min")
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for alpha in np.unique(data["alpha"]):
        rows = data[data["alpha"] == alpha]
        ax.plot(rows["t"], rows["sigma_min"], linewidth=0.4, alpha=0.35, color="tab:blue")
    ax.set_xlabel("t")
    ax.set_ylabel("smallest singular value")
    ax.set_ylim(bottom=0.0)
    ax.set_title("conjugate-point scan")
    _save(fig, svg_path)


def plot_splitting(csv_paths, svg_path, *, mu: float, x0, view: str = "plane") -> None:
    """Splitting curves, either in the plane or as time against the angle."""
    if isinstance(csv_paths, (str, bytes)) or hasattr(csv_paths, "__fspath__"):
        csv_paths = [csv_paths]
    fig, ax = plt.subplots(figsize=(5.6, 4.4))
    for k, path in enumerate(csv_paths):
        data = _load(path, "lambda", "t", "x1", "x2")
        if view == "plane":
            ax.plot(data["x1"], data["x2"], linewidth=1.2, label=f"curve {k + 1}")
        else:
            ax.plot(data["lambda"], data["t"], linewidth=1.2, label=f"curve {k + 1}")
    if view == "plane":
        _decorate_plane(ax, mu, x0)
    else:
        ax.set_xlabel("second angle")
        ax.set_ylabel("t")
    if len(csv_paths) > 1:
        ax.legend(loc="best", fontsize=8)
    ax.set_title("splitting curves")
    _save(fig, svg_path)


def plot_sphere(csv_path, svg_path, *, mu: float, x0, cut_csv=None) -> None:
    """Truncated front pieces, optionally with the cut curve overlaid."""
    data = _load(csv_path, "piece", "x1", "x2")
    fig, ax = plt.subplots(figsize=(5.6, 5.6))
    for piece in np.unique(data["piece"]):
        rows = data[data["piece"] == piece]
        ax.plot(rows["x1"], rows["x2"], linewidth=1.2, color="tab:blue")
    if cut_csv is not None:
        cut = _load(cut_csv, "x1", "x2")
        ax.plot(cut["x1"], cut["x2"], linewidth=1.0, color="tab:orange")
    _decorate_plane(ax, mu, x0)
    ax.set_title("sphere and cut")
    _save(fig, svg_path)
