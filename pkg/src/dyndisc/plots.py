"""Figure rendering for experiment reports.

Every runner that writes a results CSV also drops a PNG next to it with
the matching view (log-log error decay, root maps, condition growth,
trajectory overlays, region profiles).  Rendering is headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_MARKERS = "osD^vP*X"


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def error_decay_figure(path, series, title, xlabel="h", ylabel="relative $\\ell^2$ error"):
    """Log-log error curves; `series` maps label -> list of (h, error)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, (label, pts) in enumerate(series.items()):
        pts = sorted(pts)
        hs = [p[0] for p in pts]
        es = [p[1] for p in pts]
        ax.loglog(hs, es, marker=_MARKERS[i % len(_MARKERS)], ms=5, label=label)
    ax.grid(True, which="both", alpha=0.3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def stability_figure(path, roots, scheme_label):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    theta = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(theta), np.sin(theta), "k--", lw=0.8, label="unit circle")
    if len(roots):
        ax.plot(np.real(roots), np.imag(roots), "ro", label="roots")
    ax.set_aspect("equal")
    ax.grid(alpha=0.3)
    ax.set_title(f"window polynomial roots: {scheme_label}")
    ax.legend(fontsize=8)
    return _save(fig, path)


def condition_growth_figure(path, samples_by_label, title):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, (label, samples) in enumerate(samples_by_label.items()):
        Ns = [s[0] for s in samples]
        ks = [s[1] for s in samples]
        ax.loglog(Ns, ks, marker=_MARKERS[i % len(_MARKERS)], ms=5, label=label)
    ax.grid(True, which="both", alpha=0.3)
    ax.set_xlabel("N")
    ax.set_ylabel("$\\kappa_2$")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def history_figure(path, history_rows, title):
    """history_rows: (epoch, loss, grid_error, test_error) tuples."""
    epochs = [r[0] for r in history_rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    axes[0].semilogy(epochs, [max(r[1], 1e-300) for r in history_rows])
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("loss")
    axes[0].grid(alpha=0.3)
    ge = [r[2] for r in history_rows]
    if np.all(np.isfinite(ge)):
        axes[1].semilogy(epochs, ge)
        axes[1].set_ylabel("grid error")
    else:
        axes[1].text(0.5, 0.5, "no truth field", ha="center", va="center")
    axes[1].set_xlabel("epoch")
    axes[1].grid(alpha=0.3)
    fig.suptitle(title)
    return _save(fig, path)


def trajectory_compare_figure(path, times, truth, predictions, labels, title, component=0):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(times, truth[:, component], "k-", lw=1.4, label="true")
    for i, (pred, label) in enumerate(zip(predictions, labels)):
        n = min(len(times), len(pred))
        ax.plot(times[:n], pred[:n, component], "--", lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(f"$x_{component + 1}$")
    ax.grid(alpha=0.3)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def region_profile_figure(path, lattice_points, approx_vals, true_vals, title):
    """Side-by-side scatter profiles of each component and its error."""
    d = true_vals.shape[1]
    fig, axes = plt.subplots(d, 3, figsize=(11, 3.2 * d), squeeze=False)
    for j in range(d):
        panels = [
            (approx_vals[:, j], "recovered"),
            (true_vals[:, j], "true"),
            (np.abs(approx_vals[:, j] - true_vals[:, j]), "|error|"),
        ]
        for k, (vals, name) in enumerate(panels):
            ax = axes[j][k]
            sc = ax.scatter(
                lattice_points[:, 0], lattice_points[:, 1], c=vals, s=8, cmap="viridis"
            )
            fig.colorbar(sc, ax=ax)
            ax.set_title(f"component {j + 1}: {name}", fontsize=9)
    fig.suptitle(title)
    return _save(fig, path)


def netsize_figure(path, rows, title):
    """rows: (width, depth, e_train, e_test)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    depths = sorted({r[1] for r in rows})
    for i, L in enumerate(depths):
        pts = sorted((r[0], r[2]) for r in rows if r[1] == L)
        ax.loglog([p[0] for p in pts], [p[1] for p in pts],
                  marker=_MARKERS[i % len(_MARKERS)], ms=5, label=f"L={L}")
    ax.set_xlabel("width W")
    ax.set_ylabel("grid error")
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)
