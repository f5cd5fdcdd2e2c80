"""Figures for run reports (Agg backend, PNG files next to the CSV data)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_spectrum(S, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(S.x, S.potential.values, "k-", lw=1, label="V(x)")
    for j in range(S.n):
        ax.plot(S.x, S.phi[j] / np.max(np.abs(S.phi[j])), lw=1, label=f"phi_{j}, omega={S.omega[j]:.4f}")
    ax.set_xlabel("x")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_scan(scan, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(scan.values, scan.gamma, "o", ms=4, label="gamma_mu")
    xs = np.linspace(scan.values.min(), scan.values.max(), 200)
    ax.plot(xs, np.polyval(scan.fit, xs), "-", lw=1, label="quadratic fit")
    ax.set_xlabel(f"beta^({scan.order})(0)")
    ax.set_ylabel("gamma")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_energy(t, series: dict, path, loglog: bool = False):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, y in series.items():
        tt, yy = np.asarray(t), np.asarray(y)
        if loglog:
            sel = (tt > 0) & (yy > 0)
            ax.loglog(tt[sel], yy[sel], lw=1, label=label)
        else:
            ax.plot(tt, yy, lw=1, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("discrete energy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
