"""Looping-video generation and the one-way / crossfade / warp baselines."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .fields import (
    BACKWARD,
    FORWARD,
    DisplacementField,
    Integrator,
    MotionField,
    displacement_at,
)
from .splatting import (
    FeatureMap,
    LoopSpec,
    backward_warp,
    fill_holes,
    forward_splat,
    invert_displacement,
    paint_holes,
    symmetric_splat_frame,
)

MODES = ("loop", "oneway", "naive", "backward")


@dataclass(eq=False)
class VideoClip:
    frames: list[FeatureMap]
    fps: float = 30
    loop: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = list(self.frames)
        if not self.frames:
            raise ValueError("VideoClip needs at least one frame")
        shapes = {(f.shape, f.channels) for f in self.frames}
        if len(shapes) != 1:
            raise ValueError(f"VideoClip frames differ in size: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape


def _check_dims(D: FeatureMap, M: MotionField) -> None:
    if D.shape != M.shape:
        raise ValueError(f"dimension mismatch: image {D.width}x{D.height}, motion {M.width}x{M.height}")


def _default_threads() -> int:
    return os.cpu_count() or 1


def iter_loop_frames(
    D0: FeatureMap,
    M: MotionField,
    spec: LoopSpec = LoopSpec(),
    threads: int | None = None,
    block: int = 16,
) -> Iterator[FeatureMap]:
    """Yield the N+1 loop frames in order without holding every displacement field.

    Backward integration runs once to record a checkpoint every ``block``
    steps, then each block of frames re-integrates its slice of backward
    fields from the nearest checkpoint. Frames inside a block are built
    concurrently; each frame is computed by one worker, so the output does not
    depend on the thread count.
    """
    _check_dims(D0, M)
    N = spec.N
    threads = threads or _default_threads()
    back = Integrator(M, BACKWARD)
    checkpoints = {0: back.checkpoint()}
    for k in range(block, N + 1, block):
        back.advance_to(k)
        checkpoints[k] = back.checkpoint()
    fwd = Integrator(M, FORWARD)

    def build(args):
        t, f_fwd, f_bwd = args
        return symmetric_splat_frame(D0, f_fwd, f_bwd, t, spec)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for t0 in range(0, N + 1, block):
            ts = range(t0, min(t0 + block, N + 1))
            k_lo = N - ts[-1]
            back.restore(checkpoints[(k_lo // block) * block])
            back_fields = {}
            for k in range(k_lo, N - t0 + 1):
                back.advance_to(k)
                back_fields[k] = back.field()
            jobs = []
            for t in ts:
                fwd.advance_to(t)
                jobs.append((t, fwd.field(), back_fields[N - t]))
            yield from pool.map(build, jobs)


def animate_loop(D0: FeatureMap, M: MotionField, spec: LoopSpec = LoopSpec(), threads: int | None = None) -> VideoClip:
    """Seamless loop of N+1 frames whose first and last frame equal ``D0``."""
    frames = list(iter_loop_frames(D0, M, spec, threads))
    return VideoClip(frames, spec.fps, loop=True)


def build_loop_frame(D0: FeatureMap, M: MotionField, t: int, spec: LoopSpec = LoopSpec()) -> FeatureMap:
    """Frame ``t`` of the loop, computed in isolation."""
    _check_dims(D0, M)
    return symmetric_splat_frame(D0, displacement_at(M, t), displacement_at(M, t - spec.N), t, spec)


def _oneway_frame(D: FeatureMap, F: DisplacementField, mode: str) -> FeatureMap:
    if mode == "backward":
        return backward_warp(D, invert_displacement(F))
    features, holes = forward_splat(D, F)
    if mode == "deep":
        return fill_holes(features, holes)
    if mode == "naive_color":
        return paint_holes(features, holes)
    raise ValueError(f"unknown one-way mode {mode!r}; expected deep, naive_color or backward")


def iter_oneway_frames(D: FeatureMap, M: MotionField, T: int, mode: str = "deep", threads: int | None = None) -> Iterator[FeatureMap]:
    """Frames 0..T warped forward only (no looping weights)."""
    _check_dims(D, M)
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if mode not in ("deep", "naive_color", "backward"):
        raise ValueError(f"unknown one-way mode {mode!r}; expected deep, naive_color or backward")
    fwd = Integrator(M, FORWARD)

    def fields():
        for t in range(T + 1):
            fwd.advance_to(t)
            yield fwd.field()

    with ThreadPoolExecutor(max_workers=threads or _default_threads()) as pool:
        yield from pool.map(lambda F: _oneway_frame(D, F, mode), fields())


def animate_oneway(D: FeatureMap, M: MotionField, T: int, mode: str = "deep", fps: float = 30, threads: int | None = None) -> VideoClip:
    """Forward-only animation.

    ``deep`` diffusion-fills holes, ``naive_color`` paints them magenta and
    ``backward`` gathers through the inverted displacement (always dense).
    """
    return VideoClip(list(iter_oneway_frames(D, M, T, mode, threads)), fps, loop=False)


def crossfade_loop(clip: VideoClip, overlap: int) -> VideoClip:
    """Blend the clip's tail into its head so the result cycles.

    With ``L`` input frames and overlap ``o`` the output has ``L - o`` frames:
    frames ``0..o-1`` blend ``frames[L-o-1+j]`` toward ``frames[j]`` with
    weight ``(j+1)/(o+1)``, the middle is copied, and the last frame is a copy
    of the first. Input frame ``L-1`` is dropped.
    """
    L = len(clip)
    if overlap < 0 or not overlap < L / 2:
        raise ValueError(f"overlap must be in [0, {L}/2), got {overlap}")
    frames = list(clip.frames)
    if overlap == 0:
        out = frames[:-1] + [frames[0]] if L > 1 else frames
        return VideoClip(out, clip.fps, loop=True, params={**clip.params, "crossfade_overlap": 0})
    out = []
    for j in range(overlap):
        tail = frames[L - overlap - 1 + j].data
        head = frames[j].data
        w = np.float32((j + 1) / (overlap + 1))
        out.append(FeatureMap(tail + w * (head - tail)))
    out.extend(frames[overlap : L - overlap - 1])
    out.append(out[0])
    return VideoClip(out, clip.fps, loop=True, params={**clip.params, "crossfade_overlap": overlap})


def linear_motion_baseline(F_N: DisplacementField, t: int, N: int) -> DisplacementField:
    """Displacement ``(t/N) * F_N``: straight-line motion toward the frame-N position."""
    if not 0 <= t <= N:
        raise ValueError(f"t={t} outside [0, {N}]")
    return DisplacementField(F_N.data * np.float32(t / N), t)


def iter_mode_frames(D: FeatureMap, M: MotionField, mode: str, frames: int, fps: float = 30, threads: int | None = None) -> tuple[Iterator[FeatureMap], int, bool]:
    """Frame iterator, frame count and loop flag for a CLI animation mode."""
    if mode == "loop":
        return iter_loop_frames(D, M, LoopSpec(frames, fps), threads), frames + 1, True
    one = {"oneway": "deep", "naive": "naive_color", "backward": "backward"}.get(mode)
    if one is None:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    return iter_oneway_frames(D, M, frames, one, threads), frames + 1, False

