"""End-to-end acceptance checks; each prints one PASS/FAIL line in the summary."""
import csv
import struct
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from eulerloop.cli import main
from eulerloop.evaluation import SCALE_GRID, TrajectorySet, endpoint_error, fit_time_scale, psnr, seed_grid, track
from eulerloop.fields import DisplacementField, MotionField, displacement_at, integrate_displacements
from eulerloop.formats import (
    FormatError,
    decode_image,
    encode_png,
    quantize,
    read_efmf,
    read_flo,
    write_efmf,
    write_flo,
    write_image,
    write_motion,
)
from eulerloop.motiongen import gen_field
from eulerloop.splatting import (
    FeatureMap,
    LoopSpec,
    SplatAccumulator,
    fill_holes,
    forward_splat,
    joint_splat,
    normalize,
    paint_holes,
    splat_into,
    symmetric_splat_frame,
)


def report(name, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def _random_scene(r, w, h):
    kind = r.choice(["smooth_noise", "smooth_noise", "vortex", "source", "sink", "waterfall", "uniform"])
    if kind == "smooth_noise":
        params = dict(seed=int(r.integers(1 << 30)), speed=float(r.uniform(0.5, 4)), potential=float(r.uniform(0, 1)))
    elif kind == "vortex":
        params = dict(omega=float(r.uniform(-0.05, 0.05)), center=(float(r.uniform(0, w)), float(r.uniform(0, h))), radius=60.0)
    elif kind in ("source", "sink"):
        params = dict(speed=float(r.uniform(0.5, 3)))
    elif kind == "waterfall":
        params = dict(speed=float(r.uniform(1, 4)))
    else:
        params = dict(u=float(r.uniform(-3, 3)), v=float(r.uniform(-3, 3)))
    ys, xs = np.mgrid[0:h, 0:w]
    img = 0.7 * oracles.texture(xs, ys, int(r.integers(1 << 30))) + 0.3 * r.random((h, w, 3))
    return FeatureMap(img), gen_field(kind, w, h, **params), kind


def test_ac1_loop_closure(tmp_path, capsys):
    r = np.random.default_rng(2024)
    worst, kinds = 0.0, []
    t0 = time.perf_counter()
    for i in range(20):
        D, M, kind = _random_scene(r, 256, 256)
        kinds.append(kind)
        write_image(D, tmp_path / f"img{i}.png")
        write_motion(M, tmp_path / f"m{i}.flo")
        out = tmp_path / f"clip{i}"
        assert main(["animate", "--image", str(tmp_path / f"img{i}.png"), "--motion", str(tmp_path / f"m{i}.flo"), "--frames", "60", "-o", str(out)]) == 0
        capsys.readouterr()
        assert main(["eval", "seam", "--in", str(out)]) == 0
        rows = dict(csv.reader(capsys.readouterr().out.splitlines()))
        worst = max(worst, float(rows["seam"]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1 / 255 and elapsed < 120
    report("AC1 loop closure", ok, f"20 pairs ({len(set(kinds))} field kinds), worst seam {worst:.3g} <= {1 / 255:.4f}, {elapsed:.1f}s < 120s")


def test_ac2_constant_field_integration():
    M = MotionField.constant(256, 256, 0.73, -0.41)
    u, v = M.data[0, 0].astype(np.float64)
    worst = 0.0
    for F in integrate_displacements(M, 200):
        t = F.frame_offset
        worst = max(worst, float(np.abs(F.data[..., 0] - t * u).max()), float(np.abs(F.data[..., 1] - t * v).max()))
    report("AC2 constant-field integration", worst <= 1e-4, f"max |F_t - t*M| over t<=200 = {worst:.2e} <= 1e-4")


def test_ac3_linear_field_oracle():
    w = h = 96
    A = np.array([[0.01, -0.045], [0.048, -0.012]])
    c = np.array([47.3, 46.8])
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    pts = np.stack([xs.ravel(), ys.ravel()], -1)
    M = MotionField(((pts - c) @ A.T).reshape(h, w, 2))
    traj = np.stack([pts + oracles.linear_displacement(A, c, pts, t) for t in range(21)], 1)
    inside = ((traj >= 2) & (traj <= np.array([w - 3, h - 3]))).all(axis=(1, 2))
    worst = 0.0
    for F in integrate_displacements(M, 20):
        exact = oracles.linear_displacement(A, c, pts, F.frame_offset)
        worst = max(worst, float(np.abs(F.data.reshape(-1, 2) - exact)[inside].max()))
    ok = worst < 1e-2 and inside.sum() > 1000
    report("AC3 linear-field oracle", ok, f"||A||={np.linalg.norm(A, 2):.3f}, {inside.sum()} interior pixels, max error {worst:.2e} px < 1e-2")


def _row(values, z=None):
    return FeatureMap(np.array(values, np.float32).reshape(1, -1, 1), None if z is None else np.array(z).reshape(1, -1))


def _shift(dx):
    dx = np.asarray(dx, np.float32).reshape(1, -1)
    return DisplacementField(np.stack([dx, np.zeros_like(dx)], -1), 1)


def _splat(D, F):
    return splat_into(SplatAccumulator.like(D), D, F, 1.0)


def test_ac4_splat_micro_cases():
    collide = _shift([1.0, 10.0, -1.0])
    equal = normalize(_splat(_row([1.0, 0.0, 3.0]), collide))[0].data[0, 1, 0]
    soft = normalize(_splat(_row([1.0, 0.0, 3.0], z=[np.log(3.0), 0.0, 0.0]), collide))[0].data[0, 1, 0]
    acc = _splat(_row([1.0, 0.0, 0.0]), _shift([0.5, 10.0, 10.0]))
    errs = [abs(equal - 2.0), abs(soft - 1.5), float(np.abs(acc.denominator[0, :2] - 0.5).max())]
    report("AC4 splat micro-cases", max(errs) <= 1e-6, f"2.0 -> {equal:.7f}, 1.5 -> {soft:.7f}, split {acc.denominator[0, :2].tolist()}; max error {max(errs):.1e}")


def test_ac5_hole_complementarity():
    w = h = 128
    N, t = 60, 30
    M = gen_field("waterfall", w, h, speed=2.0)
    ys, xs = np.mgrid[0:h, 0:w]
    D = FeatureMap(oracles.texture(xs, ys, 0))
    F_f, F_b = displacement_at(M, t), displacement_at(M, t - N)
    _, holes_f = forward_splat(D, F_f)
    _, holes_b = forward_splat(D, F_b)
    _, holes_j = normalize(joint_splat(D, F_f, F_b, t, LoopSpec(N)))
    subset = not (holes_j & ~holes_f).any() and not (holes_j & ~holes_b).any()
    ratio = holes_j.sum() / holes_f.sum()
    ok = subset and holes_f.sum() > 0 and ratio < 0.25
    report("AC5 hole complementarity", ok, f"joint {holes_j.sum()} / forward {holes_f.sum()} / backward {holes_b.sum()} holes, inclusion {subset}, ratio {ratio:.3f} < 0.25")


AC6_SCENES = [("smooth_noise", dict(seed=s, speed=1.5)) for s in range(4)] + [
    ("vortex", dict(omega=0.04)),
    ("source", dict(speed=1.0)),
    ("sink", dict(speed=1.0)),
    ("waterfall", dict(speed=1.5)),
    ("uniform", dict(u=1.0, v=0.5)),
    ("smooth_noise", dict(seed=9, speed=2.0, potential=0.5)),
]


def test_ac6_synthesis_quality_ordering():
    w = h = 96
    N, t = 30, 15
    spec = LoopSpec(N)
    sym_wins, naive_ok, rows = 0, 0, []
    for i, (kind, params) in enumerate(AC6_SCENES):
        M = gen_field(kind, w, h, **params)
        I0 = FeatureMap(oracles.advected_frame(M.data, 0, seed=i))
        IN = FeatureMap(oracles.advected_frame(M.data, N, seed=i))
        gt = oracles.advected_frame(M.data, t, seed=i)
        F_f, F_b = displacement_at(M, t), displacement_at(M, t - N)
        full = psnr(symmetric_splat_frame(I0, F_f, F_b, t, spec, DN=IN), gt)
        splat, holes = forward_splat(I0, F_f)
        fwd = psnr(fill_holes(splat, holes), gt)
        naive = psnr(paint_holes(splat, holes), gt)
        sym_wins += full >= fwd
        naive_ok += full >= naive and fwd >= naive
        rows.append(f"{kind}:{full:.1f}/{fwd:.1f}/{naive:.1f}")
    ok = sym_wins >= 8 and naive_ok == 10
    report("AC6 synthesis quality ordering", ok, f"symmetric >= forward on {sym_wins}/10 (need 8), both >= naive on {naive_ok}/10; PSNR {' '.join(rows)}")


def test_ac7_motion_representation_ordering():
    w = h = 128
    T = 60
    seeds = seed_grid(w, h)
    ramp = np.arange(T + 1) / T
    margins = []
    for omega in (0.03, 0.05):
        M = gen_field("vortex", w, h, omega=omega)
        gt = TrajectorySet(oracles.rk4_track(M.data, seeds, T, substeps=8))
        euler = endpoint_error(track(M, seeds, T), gt).mean()
        end = gt.points[:, -1] - seeds
        linear = TrajectorySet(seeds[:, None] + ramp[None, :, None] * end[:, None])
        margins.append((omega, euler, endpoint_error(linear, gt).mean()))
    step = SCALE_GRID[1] / SCALE_GRID[0]
    M = gen_field("vortex", 96, 96, omega=0.01)
    grid = seed_grid(96, 96)
    planted = [0.3, 0.45, 0.7, 1.0, 1.3, 1.9, 2.6, 3.5]
    fitted = [fit_time_scale(M, track(M.scaled(s), grid, 30)) for s in planted]
    recovered = sum(abs(np.log(f / s)) <= np.log(step) + 1e-12 for f, s in zip(fitted, planted))
    ok = all(lin - eu > 0.5 for _, eu, lin in margins) and recovered == len(planted)
    epe = ", ".join(f"w={o}: euler {eu:.2f} vs linear {lin:.2f}" for o, eu, lin in margins)
    report("AC7 motion representation ordering", ok, f"mean EPE over t<=60 {epe} (margin > 0.5); scale fit {recovered}/{len(planted)} within one step")


def test_ac8_fuzzed_partition_and_shift():
    r = np.random.default_rng(8)
    pou, shift = 0.0, 0.0
    for _ in range(1000):
        w, h = r.integers(1, 7, size=2)
        disp = DisplacementField(r.uniform(-3, 3, size=(h, w, 2)), 1)
        z = r.uniform(-5, 5, size=(h, w))
        alpha = r.uniform(0.01, 1.0)
        value = r.uniform(-5, 5)
        out, holes = normalize(splat_into(SplatAccumulator(w, h, 1), FeatureMap(np.full((h, w, 1), value), z), disp, alpha))
        if (~holes).any():
            pou = max(pou, float(np.abs(out.data[~holes] - np.float32(value)).max()))
        data = r.random((h, w, 3))
        off = r.uniform(-10, 10)
        a, _ = normalize(splat_into(SplatAccumulator(w, h, 3), FeatureMap(data, z), disp, alpha))
        b, _ = normalize(splat_into(SplatAccumulator(w, h, 3), FeatureMap(data, z + off), disp, alpha))
        shift = max(shift, float(np.abs(a.data - b.data).max()))
    ok = pou <= 1e-6 and shift <= 1e-5
    report("AC8 fuzzed splat properties", ok, f"1000 cases, partition-of-unity error {pou:.1e} <= 1e-6, shift-invariance error {shift:.1e} <= 1e-5")


def _mutations(r, blob):
    """Yield malformed variants of a valid file."""
    b = bytearray(blob)
    kind = r.integers(6)
    if kind == 0:
        return bytes(b[: r.integers(0, len(b))])
    if kind == 1:
        for _ in range(r.integers(1, 8)):
            i = r.integers(len(b))
            b[i] ^= 1 << r.integers(8)
        return bytes(b)
    if kind == 2:
        return bytes(b) + r.bytes(int(r.integers(1, 16)))
    if kind == 3:
        i = r.integers(4, min(len(b), 20))
        b[i : i + 4] = struct.pack("<I", int(r.choice([0, 1, 2**31 - 1, 2**32 - 1, r.integers(2**32)])))
        return bytes(b[: len(blob)])
    if kind == 4:
        return r.bytes(int(r.integers(0, 64)))
    i = r.integers(len(b))
    b[i : i + 4] = struct.pack("<f", float(r.choice([np.nan, np.inf, -np.inf])))
    return bytes(b[: len(blob)])


def test_ac9_format_round_trips_and_fuzz():
    r = np.random.default_rng(9)
    exact = 0
    for _ in range(300):
        w, h, c = r.integers(1, 9, size=3)
        flow = MotionField(r.normal(scale=20, size=(h, w, 2)).astype(np.float32))
        exact += np.array_equal(read_flo(write_flo(flow)).data, flow.data) and write_flo(read_flo(write_flo(flow))) == write_flo(flow)
        feats = FeatureMap(r.normal(size=(h, w, c)).astype(np.float32), r.uniform(-20, 20, size=(h, w)).astype(np.float32))
        back, _ = read_efmf(write_efmf(feats))
        exact += np.array_equal(back.data, feats.data) and np.array_equal(back.importance, feats.importance)
        pixels = r.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        img = FeatureMap(pixels / 255.0)
        exact += np.array_equal(quantize(decode_image(encode_png(img)).data), pixels)
    valid = {
        read_flo: write_flo(MotionField(r.normal(size=(5, 4, 2)))),
        read_efmf: write_efmf(FeatureMap(r.normal(size=(4, 3, 2)), r.normal(size=(4, 3)))),
        decode_image: encode_png(FeatureMap(r.random((6, 5, 3)))),
    }
    readers = list(valid)
    diagnosed, accepted, crashes = 0, 0, []
    for i in range(10_000):
        reader = readers[i % 3]
        bad = _mutations(r, valid[reader])
        try:
            reader(bad)
            accepted += 1
        except FormatError as exc:
            diagnosed += bool(str(exc))
        except Exception as exc:  # anything else is a crash
            crashes.append(f"{reader.__name__}: {type(exc).__name__}: {exc}")
    ok = exact == 900 and not crashes
    report(
        "AC9 format round trips and fuzzing",
        ok,
        f"{exact}/900 bit-exact round trips; 10000 malformed inputs: {diagnosed} diagnosed, {accepted} still valid, {len(crashes)} crashes {crashes[:2]}",
    )


@pytest.mark.slow
def test_ac10_throughput_720p(tmp_path, capsys):
    w, h = 1280, 720
    ys, xs = np.mgrid[0:h, 0:w]
    write_image(FeatureMap(oracles.texture(xs, ys, 0)), tmp_path / "hd.png")
    assert main(["gen-motion", "--kind", "smooth-noise", "--speed", "3", "--seed", "1", "--size", f"{w}x{h}", "-o", str(tmp_path / "hd.flo")]) == 0
    t0 = time.perf_counter()
    code = main(["animate", "--image", str(tmp_path / "hd.png"), "--motion", str(tmp_path / "hd.flo"), "--frames", "200", "-o", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    frames = len(list((tmp_path / "out").glob("frame_*.png")))
    ok = code == 0 and frames == 201 and elapsed < 300
    report("AC10 throughput", ok, f"1280x720, N=200 -> {frames} frames in {elapsed:.1f}s < 300s on {__import__('os').cpu_count()} CPU(s)")
