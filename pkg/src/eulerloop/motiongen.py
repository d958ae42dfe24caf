"""Synthetic Eulerian motion fields and flow averaging.

The generators stand in for a learned motion predictor: they give
deterministic stimuli with known structure (rotation, sources, sinks,
falling bands, smooth turbulence).
"""
from __future__ import annotations

import numpy as np

from .fields import MotionField, pixel_grid

MAX_SPEED = 10.0
KINDS = ("uniform", "vortex", "source", "sink", "waterfall", "smooth_noise")


def _center(params, width, height):
    c = params.get("center")
    if c is None:
        return (width - 1) / 2.0, (height - 1) / 2.0
    return float(c[0]), float(c[1])


def _uniform(width, height, u=0.0, v=0.0):
    return MotionField.constant(width, height, u, v).data.astype(np.float64)


def _vortex(width, height, omega=0.05, center=None, radius=None):
    cx, cy = _center({"center": center}, width, height)
    d = pixel_grid(height, width) - (cx, cy)
    if radius is not None:
        if radius <= 0:
            raise ValueError(f"vortex radius must be > 0, got {radius}")
        r = np.hypot(d[..., 0], d[..., 1])
        d *= np.minimum(1.0, radius / np.maximum(r, 1e-12))[..., None]
    return omega * np.stack([-d[..., 1], d[..., 0]], axis=-1)


def _radial(width, height, speed=1.0, center=None, sign=1.0):
    cx, cy = _center({"center": center}, width, height)
    d = pixel_grid(height, width) - (cx, cy)
    r = np.maximum(np.hypot(d[..., 0], d[..., 1]), 1.0)
    return sign * speed * d / r[..., None]


def _waterfall(width, height, speed=2.0, center=None, radius=None, sigma=4.0):
    cx, _ = _center({"center": center}, width, height)
    half = width / 8.0 if radius is None else float(radius)
    if half < 0 or sigma <= 0:
        raise ValueError(f"waterfall needs radius >= 0 and sigma > 0, got {half}, {sigma}")
    xs = np.arange(width, dtype=np.float64)
    outside = np.maximum(np.abs(xs - cx) - half, 0.0)
    profile = np.exp(-0.5 * (outside / sigma) ** 2)
    out = np.zeros((height, width, 2))
    out[..., 1] = speed * profile[None, :]
    return out


def _smooth_noise(width, height, speed=2.0, seed=0, modes=6, potential=0.0, min_wavelength=32.0):
    """Sum of random plane-wave modes.

    Solenoidal modes come from a stream function ``a cos(k.x + phi)`` whose
    velocity is its central-difference curl, so the central-difference
    divergence of those modes is zero up to rounding. ``potential`` adds the
    matching gradient (curl-free) modes with that relative weight.
    """
    if modes < 1:
        raise ValueError(f"smooth_noise needs modes >= 1, got {modes}")
    if min_wavelength < 32:
        raise ValueError(f"smooth_noise wavelengths must be >= 32 px, got {min_wavelength}")
    rng = np.random.default_rng(seed)
    max_wavelength = max(2 * min_wavelength, float(min(width, height)))
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((height, width, 2))
    for _ in range(modes):
        wavelength = rng.uniform(min_wavelength, max_wavelength)
        angle = rng.uniform(0, 2 * np.pi)
        kx, ky = 2 * np.pi / wavelength * np.cos(angle), 2 * np.pi / wavelength * np.sin(angle)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal()
        c = amp * np.cos(kx * xs + ky * ys + phase)
        out[..., 0] += c * np.sin(ky)
        out[..., 1] -= c * np.sin(kx)
        if potential:
            out[..., 0] += potential * c * np.sin(kx)
            out[..., 1] += potential * c * np.sin(ky)
    peak = np.hypot(out[..., 0], out[..., 1]).max()
    if peak > 0:
        out *= speed / peak
    return out


_GENERATORS = {
    "uniform": _uniform,
    "vortex": _vortex,
    "source": lambda w, h, **p: _radial(w, h, sign=1.0, **p),
    "sink": lambda w, h, **p: _radial(w, h, sign=-1.0, **p),
    "waterfall": _waterfall,
    "smooth_noise": _smooth_noise,
}


def gen_field(kind: str, width: int, height: int, **params) -> MotionField:
    """Build a synthetic motion field.

    ``uniform(u, v)``, ``vortex(omega, center, radius)`` (solid rotation whose
    lever arm is capped at ``radius``), ``source``/``sink(speed, center)``,
    ``waterfall(speed, center, radius, sigma)`` (downward band of half-width
    ``radius`` with Gaussian falloff ``sigma``) and
    ``smooth_noise(speed, seed, modes, potential)``.

    Raises ``ValueError`` for unknown kinds, bad parameters or a field faster
    than 10 px/frame.
    """
    kind = kind.replace("-", "_")
    if kind not in _GENERATORS:
        raise ValueError(f"unknown field kind {kind!r}; expected one of {', '.join(KINDS)}")
    if width < 1 or height < 1:
        raise ValueError(f"field size must be >= 1x1, got {width}x{height}")
    params = {k: v for k, v in params.items() if v is not None}
    try:
        data = _GENERATORS[kind](width, height, **params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None
    field = MotionField(data)
    if field.max_speed() > MAX_SPEED + 1e-6:
        raise ValueError(f"{kind} field reaches {field.max_speed():.3g} px/frame, above the {MAX_SPEED} cap")
    return field


def average_flows(flows) -> MotionField:
    """Per-pixel mean of a sequence of flow fields."""
    flows = list(flows)
    if not flows:
        raise ValueError("average_flows needs at least one field")
    shapes = {f.shape for f in flows}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")
    total = np.zeros(flows[0].data.shape, np.float64)
    for f in flows:
        total += f.data
    return MotionField(total / len(flows))


def flow_to_color(M: MotionField, max_speed: float | None = None) -> np.ndarray:
    """Color-wheel visualization (hue = direction, saturation = speed) as ``(H, W, 3)`` in [0, 1]."""
    from matplotlib.colors import hsv_to_rgb

    u = M.data[..., 0].astype(np.float64)
    v = M.data[..., 1].astype(np.float64)
    mag = np.hypot(u, v)
    scale = max_speed or mag.max() or 1.0
    hsv = np.stack([(np.arctan2(-v, -u) / np.pi + 1) / 2, np.clip(mag / scale, 0, 1), np.ones_like(mag)], -1)
    return hsv_to_rgb(hsv)
