"""File formats: Middlebury ``.flo``, EFMF feature tensors, 8-bit images, clip directories."""
from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .fields import MotionField
from .pipeline import VideoClip
from .splatting import Z_LIMIT, FeatureMap

FLO_MAGIC = b"PIEH"  # float32 202021.25, little-endian
EFMF_MAGIC = b"EFMF"
EFMF_VERSION = 1
_EFMF_HEADER = struct.Struct("<4sHIIIB")
MANIFEST = "manifest.json"
# Guard against headers that declare absurd sizes before allocating anything.
MAX_PIXELS = 1 << 28


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


def _floats(buf: bytes, offset: int, count: int, what: str) -> np.ndarray:
    need = offset + 4 * count
    if len(buf) < need:
        raise FormatError(f"{what}: truncated payload, expected {4 * count} bytes, got {max(len(buf) - offset, 0)}")
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    if not np.isfinite(arr).all():
        raise FormatError(f"{what}: non-finite value in payload")
    return arr


def _check_size(width: int, height: int, what: str, channels: int = 1) -> None:
    if width < 1:
        raise FormatError(f"{what}: width must be >= 1, got {width}")
    if height < 1:
        raise FormatError(f"{what}: height must be >= 1, got {height}")
    if channels < 1:
        raise FormatError(f"{what}: channels must be >= 1, got {channels}")
    if width * height * channels > MAX_PIXELS:
        raise FormatError(f"{what}: declared size {width}x{height}x{channels} is too large")


def read_flo(buf: bytes) -> MotionField:
    buf = bytes(buf)
    if len(buf) < 4 or buf[:4] != FLO_MAGIC:
        raise FormatError("not a flow file: bad magic (expected 'PIEH')")
    if len(buf) < 12:
        raise FormatError("flo header: truncated, missing width/height")
    width, height = struct.unpack_from("<ii", buf, 4)
    _check_size(width, height, "flo header", 2)
    data = _floats(buf, 12, width * height * 2, "flo")
    if len(buf) != 12 + 8 * width * height:
        raise FormatError(f"flo: {len(buf) - 12 - 8 * width * height} trailing bytes after payload")
    return MotionField(data.reshape(height, width, 2))


def write_flo(M: MotionField) -> bytes:
    return FLO_MAGIC + struct.pack("<ii", M.width, M.height) + M.data.astype("<f4").tobytes()


def read_efmf(buf: bytes) -> tuple[FeatureMap, bool]:
    """Decode an EFMF tensor; returns ``(features, has_importance)``."""
    buf = bytes(buf)
    if len(buf) < 4 or buf[:4] != EFMF_MAGIC:
        raise FormatError("not a feature tensor file: bad magic (expected 'EFMF')")
    if len(buf) < _EFMF_HEADER.size:
        raise FormatError("efmf header: truncated")
    _, version, width, height, channels, flag = _EFMF_HEADER.unpack_from(buf)
    if version != EFMF_VERSION:
        raise FormatError(f"efmf header: unsupported version {version}")
    if flag not in (0, 1):
        raise FormatError(f"efmf header: has_importance flag must be 0 or 1, got {flag}")
    _check_size(width, height, "efmf header", channels)
    n = width * height
    offset = _EFMF_HEADER.size
    data = _floats(buf, offset, n * channels, "efmf data")
    offset += 4 * n * channels
    z = None
    if flag:
        z = _floats(buf, offset, n, "efmf importance").reshape(height, width)
        offset += 4 * n
    if len(buf) != offset:
        raise FormatError(f"efmf: {len(buf) - offset} trailing bytes after payload")
    return FeatureMap(data.reshape(height, width, channels), z), bool(flag)


def write_efmf(D: FeatureMap, with_importance: bool = True) -> bytes:
    header = _EFMF_HEADER.pack(EFMF_MAGIC, EFMF_VERSION, D.width, D.height, D.channels, int(with_importance))
    body = D.data.astype("<f4").tobytes()
    if with_importance:
        body += np.clip(D.importance, -Z_LIMIT, Z_LIMIT).astype("<f4").tobytes()
    return header + body


def quantize(data) -> np.ndarray:
    """Floats in [0, 1] to uint8: scale by 255, clamp, round half away from zero."""
    scaled = np.clip(np.asarray(data, dtype=np.float64) * 255.0, 0.0, 255.0)
    return np.floor(scaled + 0.5).astype(np.uint8)


def decode_image(buf: bytes) -> FeatureMap:
    try:
        with Image.open(io.BytesIO(bytes(buf))) as im:
            im.load()
            if im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except Exception as exc:  # Pillow raises a zoo of types on corrupt input
        raise FormatError(f"image: cannot decode ({type(exc).__name__}: {exc})") from None
    return FeatureMap(arr.astype(np.float32) / 255.0)


def encode_png(D: FeatureMap) -> bytes:
    if D.channels not in (1, 3):
        raise ValueError(f"PNG output needs 1 or 3 channels, got {D.channels}")
    q = quantize(D.data)
    im = Image.fromarray(q[..., 0] if D.channels == 1 else q, "L" if D.channels == 1 else "RGB")
    out = io.BytesIO()
    im.save(out, format="PNG", compress_level=1)
    return out.getvalue()


def read_image(path) -> FeatureMap:
    return decode_image(Path(path).read_bytes())


def write_image(D: FeatureMap, path) -> None:
    Path(path).write_bytes(encode_png(D))


def read_motion(path) -> MotionField:
    return read_flo(Path(path).read_bytes())


def write_motion(M: MotionField, path) -> None:
    Path(path).write_bytes(write_flo(M))


def _frame_bytes(D: FeatureMap) -> tuple[str, bytes]:
    if D.channels == 3:
        return "png", encode_png(D)
    return "efmf", write_efmf(D, with_importance=False)


def write_clip(frames: Iterable[FeatureMap], out_dir, fps: float = 30, loop: bool = False, params: dict | None = None) -> dict:
    """Write ``frame_%04d`` files plus ``manifest.json``; returns the manifest.

    ``frames`` may be a ``VideoClip`` or any iterable, consumed lazily.
    3-channel frames are stored as PNG, other channel counts as EFMF.
    """
    if isinstance(frames, VideoClip):
        fps, loop = frames.fps, frames.loop
        params = {**frames.params, **(params or {})}
        frames = frames.frames
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    shape = None
    for i, D in enumerate(frames):
        if shape is None:
            shape = (D.width, D.height, D.channels)
        elif shape != (D.width, D.height, D.channels):
            raise ValueError(f"frame {i} is {D.width}x{D.height}x{D.channels}, expected {'x'.join(map(str, shape))}")
        ext, blob = _frame_bytes(D)
        name = f"frame_{i:04d}.{ext}"
        (out / name).write_bytes(blob)
        entries.append({"file": name, "sha256": hashlib.sha256(blob).hexdigest()})
    if shape is None:
        raise ValueError("write_clip: no frames")
    manifest = {
        "frame_count": len(entries),
        "fps": fps,
        "width": shape[0],
        "height": shape[1],
        "channels": shape[2],
        "loop": bool(loop),
        "params": params or {},
        "frames": entries,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_manifest(clip_dir) -> dict:
    path = Path(clip_dir) / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{path}: manifest not found") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: invalid manifest ({exc})") from None
    if not isinstance(manifest, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    for key in ("frame_count", "fps", "frames"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing {key!r}")
    frames = manifest["frames"]
    if not isinstance(frames, list) or not all(isinstance(e, dict) and isinstance(e.get("file"), str) for e in frames):
        raise FormatError(f"{path}: 'frames' must be a list of {{file, sha256}} entries")
    if len(manifest["frames"]) != manifest["frame_count"]:
        raise FormatError(f"{path}: frame_count {manifest['frame_count']} != {len(manifest['frames'])} listed frames")
    return manifest


def read_clip(clip_dir, verify: bool = True) -> VideoClip:
    """Load a directory written by ``write_clip``, checking frame checksums."""
    clip_dir = Path(clip_dir)
    manifest = read_manifest(clip_dir)
    frames = []
    for entry in manifest["frames"]:
        blob = (clip_dir / entry["file"]).read_bytes()
        if verify and hashlib.sha256(blob).hexdigest() != entry.get("sha256"):
            raise FormatError(f"{entry['file']}: checksum mismatch with manifest")
        if entry["file"].endswith(".efmf"):
            frames.append(read_efmf(blob)[0])
        else:
            frames.append(decode_image(blob))
    return VideoClip(frames, manifest["fps"], loop=manifest.get("loop", False), params=manifest.get("params", {}))
