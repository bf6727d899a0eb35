"""Figures for the CLI report path: shell spectra and convergence studies.

Figures are rendered with the Agg backend and saved without metadata so
repeated runs produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import shell_spectrum  # noqa: E402

_SAVE = {"dpi": 100, "metadata": {"Software": None}}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="png", **_SAVE)
    plt.close(fig)
    return path


def plot_spectrum(path, fields, expected_slope=None):
    """Integer-shell averages of |coefficient| on log-log axes.

    ``fields`` maps a label to a spectral field.  With ``expected_slope``
    a reference power law through the first point of the first field is
    drawn.
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    first = None
    for label, f in fields.items():
        r, a = shell_spectrum(f, shells="integer")
        keep = a > 0
        if not np.any(keep):
            continue
        ax.loglog(r[keep], a[keep], marker="o", ms=3, lw=1, label=label)
        if first is None:
            first = (r[keep], a[keep])
    if expected_slope is not None and first is not None:
        r, a = first
        ax.loglog(r, a[0] * (r / r[0]) ** (-expected_slope), "k--", lw=0.8,
                  label=f"rho^-{expected_slope:g}")
    ax.set_xlabel("rho")
    ax.set_ylabel("shell mean |coefficient|")
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_study(path, rows):
    """Norm, residual and decay slope against truncation radius M."""
    M = [r["M"] for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(10.0, 3.2))
    axes[0].plot(M, [r["norm_u_Hs"] for r in rows], marker="o")
    axes[0].set_ylabel("||u||_Hs")
    res = np.array([r["residual"] for r in rows], dtype=float)
    axes[1].semilogy(M, np.maximum(res, 1e-300), marker="o")
    axes[1].set_ylabel("relative residual")
    axes[2].plot(M, [r["decay_slope"] for r in rows], marker="o")
    axes[2].set_ylabel("decay exponent")
    for ax in axes:
        ax.set_xlabel("M")
        ax.grid(True, lw=0.3)
    fig.tight_layout()
    return _save(fig, path)
