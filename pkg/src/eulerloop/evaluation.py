"""Trajectory tracking, endpoint error, time-scale fitting and image metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .fields import MotionField, bilinear_sample

PSNR_CAP = 99.0
SCALE_GRID = np.geomspace(0.25, 4.0, 64)


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """Positions of tracked seeds, shape ``(seeds, frames, 2)``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 2 or pts.shape[1] < 1:
            raise ValueError(f"TrajectorySet: expected shape (seeds, frames, 2), got {pts.shape}")
        object.__setattr__(self, "points", pts)

    @property
    def seeds(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def frames(self) -> int:
        return self.points.shape[1]


def seed_grid(width: int, height: int, step: int = 4) -> np.ndarray:
    """Every ``step``-th pixel in both axes, as ``(n, 2)`` (x, y) points."""
    ys, xs = np.mgrid[0:height:step, 0:width:step]
    return np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(np.float64)


def track(motion, seeds, T: int) -> TrajectorySet:
    """Advect ``seeds`` for ``T`` frames.

    ``motion`` is either one static field (Euler steps through the same field)
    or a sequence of per-frame flows, where step ``t`` uses ``motion[t]``.
    """
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if isinstance(motion, MotionField):
        flows = [motion] * T
    else:
        flows = list(motion)
        if len(flows) < T:
            raise ValueError(f"need {T} flows to track {T} frames, got {len(flows)}")
        if len({f.shape for f in flows}) > 1:
            raise ValueError("dimension mismatch across flow sequence")
    p = np.array(seeds, dtype=np.float64).reshape(-1, 2)
    out = np.empty((p.shape[0], T + 1, 2))
    out[:, 0] = p
    for t in range(T):
        p = p + bilinear_sample(flows[t].data, p[:, 0], p[:, 1])
        out[:, t + 1] = p
    return TrajectorySet(out)


def endpoint_error(pred: TrajectorySet, gt: TrajectorySet) -> np.ndarray:
    """Mean Euclidean distance between matching trajectories, per frame."""
    if pred.points.shape != gt.points.shape:
        raise ValueError(f"trajectory shape mismatch: {pred.points.shape} vs {gt.points.shape}")
    return np.linalg.norm(pred.points - gt.points, axis=-1).mean(axis=0)


def fit_time_scale(M_pred: MotionField, gt: TrajectorySet, grid=SCALE_GRID) -> float:
    """Scale of ``M_pred`` that minimizes final-frame EPE against ``gt``.

    Log-spaced grid search over [0.25, 4]; ties go to the smaller scale.
    """
    T = gt.frames - 1
    best_s, best_err = None, np.inf
    for s in grid:
        err = endpoint_error(track(M_pred.scaled(s), gt.seeds, T), gt)[-1]
        if err < best_err:
            best_s, best_err = float(s), err
    return best_s


def _pair(a, b):
    a = np.asarray(getattr(a, "data", a), dtype=np.float64)
    b = np.asarray(getattr(b, "data", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB for images in [0, 1]; identical inputs give 99."""
    a, b = _pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10 * np.log10(1.0 / mse)))


def _gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b, data_range: float = 1.0) -> float:
    """Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5).

    Averaged over valid window positions per channel, then over channels.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < 11:
        raise ValueError(f"SSIM needs images of at least 11x11, got {a.shape[1]}x{a.shape[0]}")
    win = _gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    scores = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mx = fftconvolve(x, win, mode="valid")
        my = fftconvolve(y, win, mode="valid")
        sxx = fftconvolve(x * x, win, mode="valid") - mx * mx
        syy = fftconvolve(y * y, win, mode="valid") - my * my
        sxy = fftconvolve(x * y, win, mode="valid") - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def seam_score(clip) -> float:
    """Largest absolute per-pixel, per-channel difference between first and last frame."""
    frames = clip.frames if hasattr(clip, "frames") else clip
    first, last = _pair(frames[0], frames[-1])
    return float(np.abs(first - last).max())
