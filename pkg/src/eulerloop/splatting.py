"""Forward softmax splatting, symmetric looping splats and warp baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fields import (
    DisplacementField,
    NumericalError,
    bilinear_sample,
    check_same_shape,
    pixel_grid,
)

Z_LIMIT = 20.0
COVERAGE_EPS = 1e-8
FILL_TOL = 1e-4
FILL_MAX_ITERS = 500
MAGENTA = (1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """``(H, W, C)`` float32 raster plus a per-pixel importance ``Z``.

    ``Z`` defaults to zero and is clamped to ``[-20, 20]``.
    """

    data: np.ndarray
    importance: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim == 2:
            data = data[..., None]
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"FeatureMap: expected shape (height, width, channels), got {data.shape}")
        if not np.isfinite(data).all():
            raise NumericalError("FeatureMap: data contains non-finite values")
        if self.importance is None:
            z = np.zeros(data.shape[:2], np.float32)
        else:
            z = np.array(self.importance, dtype=np.float32, copy=True)
            if z.shape != data.shape[:2]:
                raise ValueError(f"FeatureMap: importance shape {z.shape} != {data.shape[:2]}")
            if not np.isfinite(z).all():
                raise NumericalError("FeatureMap: importance contains non-finite values")
            np.clip(z, -Z_LIMIT, Z_LIMIT, out=z)
        data.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "importance", z)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def with_importance(self, importance) -> "FeatureMap":
        return FeatureMap(self.data, importance)


@dataclass(frozen=True)
class LoopSpec:
    N: int = 200
    fps: float = 30

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"loop length N must be an integer >= 1, got {self.N}")
        if not self.fps >= 1:
            raise ValueError(f"fps must be >= 1, got {self.fps}")

    def alphas(self, t: int) -> tuple[float, float]:
        """Splat weights ``(forward, backward)`` for frame ``t``."""
        return 1.0 - t / self.N, t / self.N


class SplatAccumulator:
    """Weighted feature sums for one destination frame.

    Weights are stored relative to ``exp(z_ref)``; ``z_ref`` only ever grows,
    and existing sums are rescaled when it does.
    """

    def __init__(self, width: int, height: int, channels: int):
        self.width = width
        self.height = height
        self.channels = channels
        self.numerator = np.zeros((height, width, channels), np.float64)
        self.denominator = np.zeros((height, width), np.float64)
        self.z_ref: float | None = None

    @classmethod
    def like(cls, D: FeatureMap) -> "SplatAccumulator":
        return cls(D.width, D.height, D.channels)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def coverage(self) -> np.ndarray:
        return self.denominator > COVERAGE_EPS

    def _rebase(self, z_max: float) -> None:
        if self.z_ref is None:
            self.z_ref = z_max
        elif z_max > self.z_ref:
            scale = np.exp(self.z_ref - z_max)
            self.numerator *= scale
            self.denominator *= scale
            self.z_ref = z_max


def splat_into(acc: SplatAccumulator, D: FeatureMap, F: DisplacementField, alpha: float = 1.0) -> SplatAccumulator:
    """Softmax-splat ``D`` through ``F`` into ``acc`` with temporal weight ``alpha``.

    Each source contributes ``alpha * exp(Z - z_ref) * b`` to the (at most four)
    bilinear neighbors of its destination. ``z_ref`` is the maximum of ``D``'s
    importance, which cancels in the normalized quotient.
    """
    if D.shape != acc.shape or F.shape != acc.shape or D.channels != acc.channels:
        raise ValueError(
            f"dimension mismatch: accumulator {acc.shape}x{acc.channels}, "
            f"features {D.shape}x{D.channels}, displacement {F.shape}"
        )
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    z = D.importance.astype(np.float64)
    acc._rebase(float(z.max()))
    if alpha == 0:
        return acc
    weight = alpha * np.exp(z - acc.z_ref)
    _kernels.splat(acc.numerator, acc.denominator, D.data, weight, F.data)
    return acc


def normalize(acc: SplatAccumulator) -> tuple[FeatureMap, np.ndarray]:
    """Quotient of the accumulated sums; returns ``(features, hole_mask)``."""
    covered = acc.coverage
    out = np.zeros_like(acc.numerator)
    np.divide(acc.numerator, acc.denominator[..., None], out=out, where=covered[..., None])
    return FeatureMap(out.astype(np.float32)), ~covered


def fill_holes(D: FeatureMap, hole_mask: np.ndarray) -> FeatureMap:
    """Diffuse known values into ``hole_mask`` pixels.

    Jacobi iteration over the hole pixels only: each hole takes the mean of
    its known 4-neighbors, where a hole becomes known once it has been filled.
    Stops when every hole is known and the largest per-channel change drops
    below 1e-4, or after 500 sweeps.
    """
    hole_mask = np.asarray(hole_mask, dtype=bool)
    if hole_mask.shape != D.shape:
        raise ValueError(f"hole mask shape {hole_mask.shape} != feature shape {D.shape}")
    if not hole_mask.any():
        return D
    if hole_mask.all():
        raise ValueError("cannot fill holes: every pixel is a hole")
    h, w = D.shape
    vals = D.data.reshape(h * w, -1).astype(np.float64)
    known = ~hole_mask
    holes = np.flatnonzero(hole_mask)
    _kernels.diffuse_fill(vals, known, holes, FILL_MAX_ITERS, FILL_TOL)
    unreached = holes[~known.ravel()[holes]]
    if unreached.size:
        vals[unreached] = vals[known.ravel()].mean(axis=0)
    return FeatureMap(vals.reshape(h, w, -1).astype(np.float32), D.importance)


def joint_splat(
    D0: FeatureMap,
    F_fwd: DisplacementField,
    F_bwd: DisplacementField,
    t: int,
    spec: LoopSpec,
    DN: FeatureMap | None = None,
) -> SplatAccumulator:
    """Accumulate the forward and backward splats for loop frame ``t``.

    ``D0`` is splatted through ``F_fwd`` with weight ``1 - t/N`` and ``DN``
    (``D0`` itself when omitted) through ``F_bwd`` with weight ``t/N``.
    """
    if not 0 <= t <= spec.N:
        raise ValueError(f"frame index t={t} outside [0, {spec.N}]")
    if F_fwd.frame_offset != t:
        raise ValueError(f"forward displacement offset {F_fwd.frame_offset} != t={t}")
    if F_bwd.frame_offset != t - spec.N:
        raise ValueError(f"backward displacement offset {F_bwd.frame_offset} != t-N={t - spec.N}")
    a_fwd, a_bwd = spec.alphas(t)
    acc = SplatAccumulator.like(D0)
    splat_into(acc, D0, F_fwd, a_fwd)
    splat_into(acc, D0 if DN is None else DN, F_bwd, a_bwd)
    return acc


def symmetric_splat_frame(
    D0: FeatureMap,
    F_fwd: DisplacementField,
    F_bwd: DisplacementField,
    t: int,
    spec: LoopSpec,
    DN: FeatureMap | None = None,
) -> FeatureMap:
    """Loop frame ``t``: joint splat, normalize, then fill the remaining holes."""
    features, holes = normalize(joint_splat(D0, F_fwd, F_bwd, t, spec, DN))
    return fill_holes(features, holes)


def forward_splat(D: FeatureMap, F: DisplacementField, alpha: float = 1.0) -> tuple[FeatureMap, np.ndarray]:
    """One-directional splat; returns ``(features, hole_mask)`` without filling."""
    return normalize(splat_into(SplatAccumulator.like(D), D, F, alpha))


def invert_displacement(F: DisplacementField) -> DisplacementField:
    """Approximate inverse field: ``F_inv(x + F(x)) ~= -F(x)``.

    Uniform-weight splat of ``-F`` to each destination, normalized, with the
    uncovered destinations diffusion-filled.
    """
    neg = FeatureMap(-F.data)
    features, holes = forward_splat(neg, F)
    if holes.all():
        return DisplacementField.zeros(F.width, F.height, -F.frame_offset)
    data = fill_holes(features, holes).data
    if F.frame_offset == 0:
        data = np.zeros_like(data)
    return DisplacementField(data, -F.frame_offset)


def backward_warp(D: FeatureMap, F_back: DisplacementField) -> FeatureMap:
    """Gather ``D`` at ``x + F_back(x)`` for every output pixel."""
    check_same_shape(D, F_back)
    pos = pixel_grid(*D.shape) + F_back.data
    out = bilinear_sample(D.data, pos[..., 0], pos[..., 1])
    return FeatureMap(out.astype(np.float32), D.importance)


def gradient_importance(D: FeatureMap, scale: float = 4.0) -> np.ndarray:
    """Luminance-gradient magnitude normalized to ``[0, scale]``."""
    data = D.data.astype(np.float64)
    if D.channels == 3:
        lum = data @ np.array([0.299, 0.587, 0.114])
    else:
        lum = data.mean(axis=-1)
    if min(lum.shape) < 2:
        return np.zeros(D.shape, np.float32)
    gy, gx = np.gradient(lum)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros(D.shape, np.float32)
    return (scale * mag / peak).astype(np.float32)


def paint_holes(D: FeatureMap, hole_mask: np.ndarray, color=MAGENTA) -> FeatureMap:
    """Mark holes with a sentinel color (magenta for RGB, 1.0 otherwise)."""
    data = np.array(D.data)
    fill = np.asarray(color, np.float32) if D.channels == len(color) else np.float32(1.0)
    data[hole_mask] = fill
    return FeatureMap(data, D.importance)
