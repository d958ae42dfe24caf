"""Motion and displacement fields, bilinear sampling and Euler integration.

Coordinates follow the raster: pixel centers sit on integer (x, y), +x to the
right, +y down, and arrays are stored row-major as ``(height, width, 2)`` with
the last axis holding ``(u, v)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels

FORWARD = "forward"
BACKWARD = "backward"


class NumericalError(ValueError):
    """A field or intermediate result contains NaN or Inf."""


def _as_vector_grid(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, copy=True)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name}: expected shape (height, width, 2), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name}: width and height must be >= 1, got {arr.shape[1]}x{arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise NumericalError(f"{name}: contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MotionField:
    """Static Eulerian velocity map in pixels/frame."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_vector_grid(self.data, "MotionField"))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @classmethod
    def zeros(cls, width: int, height: int) -> "MotionField":
        return cls(np.zeros((height, width, 2), np.float32))

    @classmethod
    def constant(cls, width: int, height: int, u: float, v: float) -> "MotionField":
        data = np.empty((height, width, 2), np.float32)
        data[..., 0] = u
        data[..., 1] = v
        return cls(data)

    def max_speed(self) -> float:
        return float(np.sqrt((self.data.astype(np.float64) ** 2).sum(-1)).max())

    def scaled(self, s: float) -> "MotionField":
        return MotionField(self.data * np.float32(s))


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Accumulated displacement from frame 0 to frame ``frame_offset``."""

    data: np.ndarray
    frame_offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "data", _as_vector_grid(self.data, "DisplacementField"))
        object.__setattr__(self, "frame_offset", int(self.frame_offset))
        if self.frame_offset == 0 and np.any(self.data != 0):
            raise ValueError("DisplacementField: frame_offset 0 requires an all-zero field")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @classmethod
    def zeros(cls, width: int, height: int, frame_offset: int = 0) -> "DisplacementField":
        return cls(np.zeros((height, width, 2), np.float32), frame_offset)


def pixel_grid(height: int, width: int) -> np.ndarray:
    """Integer pixel-center coordinates as a ``(height, width, 2)`` float64 array."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([xs, ys], axis=-1)


def bilinear_sample(values: np.ndarray, x, y) -> np.ndarray:
    """Sample a ``(H, W, C)`` raster at continuous positions.

    Positions are clamped to the raster before interpolation (clamp-to-edge).
    Returns float64 values with shape ``x.shape + (C,)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), x.shape)
    vals = values if values.ndim == 3 else values[..., None]
    out = np.empty((x.size, vals.shape[2]), np.float64)
    _kernels.bilinear_gather(vals, np.ascontiguousarray(x).ravel(), np.ascontiguousarray(y).ravel(), out)
    return out.reshape(x.shape + (vals.shape[2],))


def sample_bilinear(field: MotionField | DisplacementField, p) -> np.ndarray:
    """Interpolated 2-vector(s) of ``field`` at point(s) ``p`` with shape ``(..., 2)``."""
    p = np.asarray(p, dtype=np.float64)
    if not np.isfinite(p).all():
        raise NumericalError("sample position is not finite")
    return bilinear_sample(field.data, p[..., 0], p[..., 1])


def euler_step(M: MotionField, p) -> np.ndarray:
    """One Euler step: ``p + M(p)``."""
    p = np.asarray(p, dtype=np.float64)
    return p + sample_bilinear(M, p)


def negate(M: MotionField) -> MotionField:
    return MotionField(-M.data)


class Integrator:
    """Resumable Euler integration of ``M`` (or ``-M`` when ``direction`` is backward).

    The running displacement is kept in float64 and emitted as float32.
    Particle positions are never clamped; only the field lookup clamps, so
    particles that leave the frame keep moving with the border velocity.
    """

    def __init__(self, M: MotionField, direction: str = FORWARD):
        if direction not in (FORWARD, BACKWARD):
            raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}, got {direction!r}")
        if not np.isfinite(M.data).all():
            raise NumericalError("motion field contains non-finite values")
        self.velocity = np.ascontiguousarray(M.data if direction == FORWARD else -M.data)
        self.sign = 1 if direction == FORWARD else -1
        self.steps = 0
        self.disp = np.zeros(M.shape + (2,), np.float64)

    @property
    def offset(self) -> int:
        return self.sign * self.steps

    def step(self) -> None:
        self.steps += 1
        if not _kernels.advect_step(self.velocity, self.disp):
            raise NumericalError(f"displacement became non-finite at step {self.steps}")

    def advance_to(self, steps: int) -> None:
        if steps < self.steps:
            raise ValueError(f"cannot integrate backwards in time from {self.steps} to {steps}")
        while self.steps < steps:
            self.step()

    def field(self) -> DisplacementField:
        return DisplacementField(self.disp.astype(np.float32), self.offset)

    def checkpoint(self) -> tuple[int, np.ndarray]:
        return self.steps, self.disp.copy()

    def restore(self, state: tuple[int, np.ndarray]) -> None:
        self.steps, disp = state
        self.disp = disp.copy()


def iter_displacements(M: MotionField, direction: str = FORWARD) -> Iterator[DisplacementField]:
    """Yield F_0->0, F_0->1, ... (or F_0->0, F_0->-1, ... backward) indefinitely."""
    integ = Integrator(M, direction)
    while True:
        yield integ.field()
        integ.step()


def integrate_displacements(M: MotionField, frames: int, direction: str = FORWARD) -> list[DisplacementField]:
    """Displacement fields for offsets 0..frames (forward) or 0..-frames (backward)."""
    if frames < 0:
        raise ValueError(f"frames must be >= 0, got {frames}")
    out = []
    for field in iter_displacements(M, direction):
        out.append(field)
        if len(out) == frames + 1:
            break
    return out


def displacement_at(M: MotionField, offset: int) -> DisplacementField:
    """Integrate to a single signed frame offset, discarding the intermediates."""
    direction = FORWARD if offset >= 0 else BACKWARD
    for field in iter_displacements(M, direction):
        if abs(field.frame_offset) == abs(offset):
            return field
    raise AssertionError("unreachable")


def check_same_shape(*fields) -> None:
    shapes = {f.shape for f in fields}
    if len(shapes) > 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")
