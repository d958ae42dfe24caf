"""Figures for the CLI reports, written next to the CSV tables."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def new_figure(width=5.0, aspect=0.62, nrows=1, ncols=1):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=(width, width * aspect))
    return fig, ax


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_epe(curves: dict, path, title="Endpoint error"):
    """One line per method; ``curves`` maps label -> per-frame mean EPE."""
    fig, ax = new_figure()
    with plt.rc_context(STYLE):
        for label, epe in curves.items():
            ax.plot(np.arange(len(epe)), epe, label=label)
        ax.set_xlabel("frame")
        ax.set_ylabel("mean EPE (px)")
        ax.set_title(title)
        ax.set_xlim(left=0)
        ax.set_ylim(bottom=0)
        if len(curves) > 1:
            ax.legend(frameon=False)
    return save(fig, path)


def plot_quality(psnr, ssim, path):
    fig, (a1, a2) = new_figure(width=6.0, aspect=0.4, ncols=2)
    frames = np.arange(len(psnr))
    with plt.rc_context(STYLE):
        a1.plot(frames, psnr, color="C0")
        a1.set_xlabel("frame")
        a1.set_ylabel("PSNR (dB)")
        a2.plot(frames, ssim, color="C1")
        a2.set_xlabel("frame")
        a2.set_ylabel("SSIM")
        a2.set_ylim(top=1.0)
    return save(fig, path)


def plot_seam(diff: np.ndarray, path):
    """Heat map of the per-pixel first/last frame difference (max over channels)."""
    fig, ax = new_figure(width=4.0, aspect=diff.shape[0] / diff.shape[1])
    with plt.rc_context(STYLE):
        im = ax.imshow(diff, cmap="magma", vmin=0, vmax=max(float(diff.max()), 1 / 255))
        ax.set_axis_off()
        ax.set_title("first/last frame difference")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    return save(fig, path)
