"""Figures rendered to files (non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .modeshape import IdentifiedModes  # noqa: E402

_META = {"Software": None}  # keep PNG bytes independent of the matplotlib version


def plot_shapes(modes: IdentifiedModes, truth: np.ndarray, path) -> Path:
    """Identified shapes (markers) over the reference curves, one panel per mode."""
    n = modes.n_modes
    fig, axes = plt.subplots(n, 1, figsize=(6, 1.8 * n), sharex=True, squeeze=False)
    for k, ax in enumerate(axes[:, 0]):
        ax.plot(modes.x, truth[k], color="0.5", lw=1.5, label="reference")
        ax.plot(modes.x, modes.shapes[k], ".", ms=2.5, color="C0", label=modes.estimator)
        f_hz = modes.omegas[k] / (2 * np.pi)
        ax.set_ylabel(f"mode {k + 1}")
        ax.set_title(f"{f_hz:.3f} Hz", fontsize=8, loc="right")
        if not modes.excited[k]:
            ax.set_title("unexcited", fontsize=8, loc="left")
    axes[0, 0].legend(fontsize=7, loc="lower right")
    axes[-1, 0].set_xlabel("x (m)")
    fig.tight_layout()
    return _save(fig, path)


def plot_psd(omega, power, path, markers=None) -> Path:
    """Log PSD against frequency in Hz, with optional reference lines (rad/s)."""
    fig, ax = plt.subplots(figsize=(6, 3))
    f = np.asarray(omega) / (2 * np.pi)
    ax.semilogy(f[1:], np.asarray(power)[1:], lw=0.8)
    for w in markers if markers is not None else ():
        ax.axvline(w / (2 * np.pi), color="0.6", ls="--", lw=0.8)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("PSD ((m/s²)²/Hz)")
    fig.tight_layout()
    return _save(fig, path)


def plot_record(times, acc, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 2.5))
    ax.plot(times, acc, lw=0.5)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("acceleration (m/s²)")
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path
