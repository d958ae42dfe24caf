"""Command-line interface.

Exit codes: 0 success, 2 bad arguments, 3 malformed input file,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import formats, motiongen
from .evaluation import endpoint_error, fit_time_scale, psnr, seed_grid, ssim, track
from .fields import MotionField, NumericalError
from .pipeline import MODES, crossfade_loop, iter_mode_frames
from .splatting import FeatureMap, gradient_importance

log = logging.getLogger("eulerloop")

EXIT_ARGS = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}") from None


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = text.split(",")
        return float(x), float(y)
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must look like X,Y, got {text!r}") from None


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _emit(rows, header=("metric", "value")):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


# -- gen-motion -------------------------------------------------------------

GEN_KEYS = ("u", "v", "omega", "center", "radius", "speed", "sigma", "seed", "modes")


def cmd_gen_motion(args) -> int:
    params = {}
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise formats.FormatError(f"{args.config}: invalid config ({exc})") from None
        if not isinstance(loaded, dict):
            raise formats.FormatError(f"{args.config}: config must be a mapping")
        params.update(loaded)
    for key in GEN_KEYS:
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    kind = args.kind or params.get("kind")
    size = args.size
    if size is None and "size" in params:
        try:
            size = _size(str(params["size"]))
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
    params.pop("kind", None)
    params.pop("size", None)
    if kind is None or size is None:
        raise UsageError("gen-motion needs --kind and --size (or both in --config)")
    M = motiongen.gen_field(kind, size[0], size[1], **params)
    formats.write_motion(M, args.output)
    if args.preview:
        formats.write_image(FeatureMap(motiongen.flow_to_color(M)), args.preview)
    log.info("wrote %s (%dx%d, max speed %.3f px/frame)", args.output, M.width, M.height, M.max_speed())
    return 0


# -- animate ----------------------------------------------------------------


def cmd_animate(args) -> int:
    image = formats.read_image(args.image)
    M = formats.read_motion(args.motion)
    source = image
    has_z = False
    if args.features:
        source, has_z = formats.read_efmf(Path(args.features).read_bytes())
        if source.shape != image.shape:
            raise UsageError(f"features are {source.width}x{source.height}, image is {image.width}x{image.height}")
    if source.shape != M.shape:
        raise UsageError(f"motion is {M.width}x{M.height}, image is {source.width}x{source.height}")
    if args.z_mode == "zero":
        source = source.with_importance(None)
    elif args.z_mode == "gradient":
        source = source.with_importance(gradient_importance(image))
    elif not has_z:
        raise UsageError("--z-mode file needs --features with an importance plane")
    frames, _, loop = iter_mode_frames(source, M, args.mode, args.frames, args.fps, args.threads)
    params = {
        "mode": args.mode,
        "frames": args.frames,
        "z_mode": args.z_mode,
        "image": Path(args.image).name,
        "motion": Path(args.motion).name,
    }
    if args.features:
        params["features"] = Path(args.features).name
    manifest = formats.write_clip(frames, args.output, args.fps, loop, params)
    log.info("wrote %d frames to %s", manifest["frame_count"], args.output)
    return 0


# -- crossfade --------------------------------------------------------------


def cmd_crossfade(args) -> int:
    clip = formats.read_clip(args.input)
    overlap = args.overlap if args.overlap is not None else (len(clip) - 1) // 5
    try:
        out = crossfade_loop(clip, overlap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    formats.write_clip(out, args.output)
    return 0


# -- eval -------------------------------------------------------------------


def _read_flow_dir(path) -> list[MotionField]:
    files = sorted(Path(path).glob("*.flo"))
    if not files:
        raise formats.FormatError(f"{path}: no .flo files")
    return [formats.read_motion(f) for f in files]


def cmd_eval_epe(args) -> int:
    M_pred = formats.read_motion(args.pred)
    flows = _read_flow_dir(args.gt_flows)
    if len(flows) < args.frames:
        raise UsageError(f"{args.gt_flows} has {len(flows)} flows, need {args.frames}")
    if any(f.shape != M_pred.shape for f in flows):
        raise UsageError("ground-truth flows and prediction differ in size")
    seeds = seed_grid(M_pred.width, M_pred.height, args.seed_step)
    gt = track(flows[: args.frames], seeds, args.frames)
    scale = fit_time_scale(M_pred, gt) if args.fit_scale else 1.0
    epe = endpoint_error(track(M_pred.scaled(scale), seeds, args.frames), gt)
    _write_rows(args.output, ("frame", "epe"), [(t, f"{e:.6f}") for t, e in enumerate(epe)])
    figure = Path(args.output).with_suffix(".png")
    from .plotting import plot_epe

    plot_epe({"Eulerian integration": epe}, figure)
    _emit([("time_scale", f"{scale:.6f}"), ("mean_epe", f"{epe.mean():.6f}"), ("final_epe", f"{epe[-1]:.6f}")])
    return 0


def cmd_eval_quality(args) -> int:
    a = formats.read_clip(args.a)
    b = formats.read_clip(args.b)
    if len(a) != len(b) or a.shape != b.shape:
        raise UsageError(f"clips differ: {len(a)} vs {len(b)} frames, {a.shape} vs {b.shape}")
    rows, ps, ss = [], [], []
    for t, (fa, fb) in enumerate(zip(a.frames, b.frames)):
        p, s = psnr(fa, fb), ssim(fa, fb)
        ps.append(p)
        ss.append(s)
        rows.append((t, f"{p:.6f}", f"{s:.6f}"))
    _write_rows(args.output, ("frame", "psnr", "ssim"), rows)
    from .plotting import plot_quality

    plot_quality(ps, ss, Path(args.output).with_suffix(".png"))
    _emit([("psnr_mean", f"{np.mean(ps):.6f}"), ("ssim_mean", f"{np.mean(ss):.6f}")])
    return 0


def cmd_eval_seam(args) -> int:
    clip = formats.read_clip(args.input)
    first, last = clip.frames[0].data, clip.frames[-1].data
    diff = np.abs(first.astype(np.float64) - last)
    score = float(diff.max())
    if args.plot:
        from .plotting import plot_seam

        plot_seam(diff.max(axis=-1), args.plot)
    _emit([("seam", f"{score:.9f}"), ("seam_levels", f"{round(score * 255)}"), ("frames", len(clip))])
    return 0


# -- entry ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eulerloop", description="Animate a still image into a seamless loop from a static motion field.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-motion", help="write a synthetic motion field (.flo)")
    g.add_argument("--kind", choices=[k.replace("_", "-") for k in motiongen.KINDS] + list(motiongen.KINDS))
    g.add_argument("--u", type=float)
    g.add_argument("--v", type=float)
    g.add_argument("--omega", type=float)
    g.add_argument("--center", type=_point)
    g.add_argument("--radius", type=float)
    g.add_argument("--speed", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--modes", type=int)
    g.add_argument("--size", type=_size)
    g.add_argument("--config", help="YAML/JSON mapping of generator parameters")
    g.add_argument("--preview", help="also write a color-wheel PNG of the field")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen_motion)

    a = sub.add_parser("animate", help="render an animation into a frame directory")
    a.add_argument("--image", required=True)
    a.add_argument("--motion", required=True)
    a.add_argument("--features")
    a.add_argument("--frames", type=int, default=200)
    a.add_argument("--fps", type=float, default=30)
    a.add_argument("--z-mode", choices=("zero", "gradient", "file"), default="zero")
    a.add_argument("--mode", choices=MODES, default="loop")
    a.add_argument("--threads", type=int)
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_animate)

    c = sub.add_parser("crossfade", help="loop a clip by crossfading its ends")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--overlap", type=int)
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_crossfade)

    e = sub.add_parser("eval", help="metrics")
    esub = e.add_subparsers(dest="metric", required=True)
    ee = esub.add_parser("epe", help="endpoint error of a motion field against tracked flows")
    ee.add_argument("--pred", required=True)
    ee.add_argument("--gt-flows", required=True)
    ee.add_argument("--fit-scale", action="store_true")
    ee.add_argument("--frames", type=int, default=60)
    ee.add_argument("--seed-step", type=int, default=4)
    ee.add_argument("-o", "--output", required=True)
    ee.set_defaults(func=cmd_eval_epe)
    eq = esub.add_parser("quality", help="per-frame PSNR/SSIM between two clips")
    eq.add_argument("--a", required=True)
    eq.add_argument("--b", required=True)
    eq.add_argument("-o", "--output", required=True)
    eq.set_defaults(func=cmd_eval_quality)
    es = esub.add_parser("seam", help="first/last frame difference of a clip")
    es.add_argument("--in", dest="input", required=True)
    es.add_argument("--plot")
    es.set_defaults(func=cmd_eval_seam)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (formats.FormatError, OSError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
