"""Figures written next to the CSV outputs (Agg backend, files only)."""

from __future__ import annotations

import contextlib
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "eodiffusion",
}


@contextlib.contextmanager
def figure(path, ncols: int = 1, width: float = 4.5, height: Optional[float] = None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    height = height or width * golden
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height))
        try:
            yield fig, axes
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, metadata={"Software": None})
        finally:
            plt.close(fig)


def plot_snapshots(snapshots, path, title: str = ""):
    with figure(path) as (fig, ax):
        for s in snapshots:
            ax.plot(s.grid.centers, s.values, label=f"t = {s.time:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.set_title(title)
        ax.legend(frameon=False)
    return path


def plot_convergence(report, path, published: Optional[Sequence[float]] = None,
                     ylabel: str = "error"):
    h = report.dx if report.dx is not None else [1.0 / n for n in report.grid_sizes]
    with figure(path) as (fig, ax):
        ax.loglog(h, report.errors, "o-", label=f"computed (rate {report.fitted_rate:.2f})")
        if published is not None:
            ax.loglog(h, published, "s--", mfc="none", label="published")
        h = np.asarray(h)
        ax.loglog(h, report.errors[0] * h / h[0], ":", color="0.5", label="slope 1")
        ax.set_xlabel(r"$\Delta x$")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
    return path


def plot_figure1(history, coarse, reference, initial, path):
    """Left: ``u`` over the (x, t) plane.  Right: coarse run, reference, initial data at t=1."""
    with figure(path, ncols=2, width=4.0, height=3.2) as (fig, (ax0, ax1)):
        x = history.snapshots[0].grid.centers
        t = np.array([s.time for s in history.snapshots])
        U = np.array([s.values for s in history.snapshots])
        im = ax0.pcolormesh(x, t, U, shading="nearest", cmap="viridis")
        fig.colorbar(im, ax=ax0, label="u")
        ax0.set_xlabel("x")
        ax0.set_ylabel("t")
        fig.subplots_adjust(wspace=0.5)
        ax1.plot(reference.grid.centers, reference.values, "-", label=f"N={reference.grid.n_cells}")
        ax1.plot(coarse.grid.centers, coarse.values, "o-", ms=3, label=f"N={coarse.grid.n_cells}")
        ax1.plot(initial.grid.centers, initial.values, "--", color="0.5", label="initial")
        ax1.set_xlabel("x")
        ax1.set_ylabel("u")
        ax1.set_title(f"t = {reference.time:g}")
        ax1.legend(frameon=False)
    return path


def plot_eta_sweep(sweep, path):
    with figure(path) as (fig, ax):
        for eta in sweep.etas:
            ax.loglog(sweep.dx, sweep.errors(eta), "o-",
                      label=rf"$\eta$={eta:g} (rate {sweep.fitted_rate(eta):.2f})")
        h = np.asarray(sweep.dx)
        e0 = sweep.errors(sweep.etas[0])[0]
        ax.loglog(h, e0 * np.sqrt(h / h[0]), ":", color="0.5", label="slope 1/2")
        ax.set_xlabel(r"$\Delta x$")
        ax.set_ylabel("cone L1 error")
        ax.legend(frameon=False)
    return path


def plot_eta_gap(gap, path):
    with figure(path) as (fig, ax):
        ax.loglog(gap.etas, gap.gaps, "o-", label=f"exponent {gap.exponent:.2f}")
        e = np.asarray(gap.etas)
        ax.loglog(e, gap.gaps[0] * np.sqrt(e / e[0]), ":", color="0.5", label=r"$\sqrt{\eta}$")
        ax.set_xlabel(r"$\eta$")
        ax.set_ylabel(r"$\|u - u^\eta\|_{L^1}$")
        ax.legend(frameon=False)
    return path
