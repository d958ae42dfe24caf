"""Animate a still image into a seamless loop from a static Eulerian motion field."""
from .evaluation import TrajectorySet, endpoint_error, fit_time_scale, psnr, seam_score, ssim, track
from .fields import (
    DisplacementField,
    MotionField,
    NumericalError,
    euler_step,
    integrate_displacements,
    negate,
    sample_bilinear,
)
from .motiongen import average_flows, gen_field
from .pipeline import (
    VideoClip,
    animate_loop,
    animate_oneway,
    build_loop_frame,
    crossfade_loop,
    linear_motion_baseline,
)
from .splatting import (
    FeatureMap,
    LoopSpec,
    SplatAccumulator,
    backward_warp,
    fill_holes,
    invert_displacement,
    normalize,
    splat_into,
    symmetric_splat_frame,
)

__version__ = "0.1.0"

__all__ = [
    "TrajectorySet",
    "endpoint_error",
    "fit_time_scale",
    "psnr",
    "seam_score",
    "ssim",
    "track",
    "DisplacementField",
    "MotionField",
    "NumericalError",
    "euler_step",
    "integrate_displacements",
    "negate",
    "sample_bilinear",
    "average_flows",
    "gen_field",
    "VideoClip",
    "animate_loop",
    "animate_oneway",
    "build_loop_frame",
    "crossfade_loop",
    "linear_motion_baseline",
    "FeatureMap",
    "LoopSpec",
    "SplatAccumulator",
    "backward_warp",
    "fill_holes",
    "invert_displacement",
    "normalize",
    "splat_into",
    "symmetric_splat_frame",
]
