"""otc-track: texture-histogram mean-shift tracking from the command line."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import otc
from ..codebook import CodebookError, load_codebook, save_codebook
from ..imaging import BBox, ImageError, PatchSample, draw_bbox, list_sequence, load_frame, save_frame, to_gray
from ..tracker import (
    TrackConfig,
    TrackingError,
    TrajectoryRow,
    build_target_model,
    similarity_at,
    track_sequence,
    write_trajectory,
    read_trajectory,
)
from .config import ConfigError, load_config
from .metrics import DEFAULT_TAU, EvaluationError, evaluate, read_ground_truth
from .synth import SynthError, SynthParams, synth_generate

log = logging.getLogger("otctrack")

RENDER_COLOR = (255, 255, 255)


class CLIError(Exception):
    pass


def _floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = text.replace("x", ",").replace("X", ",").split(",")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {what} {text!r}") from None


def _box_arg(text):
    return _floats(text, 4, "box")


def _pair_arg(text):
    return _floats(text, 2, "pair")


def _size_arg(text):
    w, h = _floats(text, 2, "size")
    if w != int(w) or h != int(h) or w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive integers WxH, got {text!r}")
    return int(w), int(h)


def _resolve_config(args) -> TrackConfig:
    cfg = load_config(args.config) if args.config else TrackConfig()
    try:
        return cfg.updated(max_iters=args.max_iters, epsilon=args.epsilon, clamp=args.clamp,
                           patch_size=args.patch_size, stride=args.stride, k=args.k,
                           seed=args.seed, mode=args.mode)
    except ValueError as e:
        raise CLIError(str(e)) from None


def cli_track(args) -> int:
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise CLIError(f"frames directory not found: {frames_dir}")
    paths = list_sequence(frames_dir, args.prefix, args.ext)
    if not paths:
        raise CLIError(f"no frames found in {frames_dir}")
    cfg = _resolve_config(args)
    cx, cy, w, h = args.init
    try:
        init = BBox(cx, cy, w, h)
    except ValueError as e:
        raise CLIError(f"bad init box: {e}") from None

    frames = [load_frame(p) for p in paths]
    first = frames[0]
    if w > first.width or h > first.height or not (0 <= cx <= first.width and 0 <= cy <= first.height):
        raise CLIError(f"init box {args.init} does not fit the {first.width}x{first.height} first frame")
    # the numeric suffix is the frame index; list_sequence already sorted by it
    indices = [_frame_index(p) for p in paths]

    try:
        model = build_target_model(first, init, cfg)
    except TrackingError as e:
        raise CLIError(f"bad init box: {e}") from None
    log.info("vocabulary: %d words", model.codebook.k)
    if args.save_codebook:
        save_codebook(model.codebook, args.save_codebook)

    rows = [TrajectoryRow(indices[0], init.cx, init.cy, init.w, init.h,
                          similarity_at(model, first, (init.cx, init.cy)), 0, False)]
    rows += track_sequence(model, frames[1:], init, cfg, indices=indices[1:])
    write_trajectory(rows, args.out)

    if args.render:
        out_dir = Path(args.render_dir) if args.render_dir else frames_dir.with_name(frames_dir.name + "_tracked")
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, frame, row in zip(paths, frames, rows):
            save_frame(draw_bbox(frame, BBox(row.cx, row.cy, row.w, row.h), RENDER_COLOR), out_dir / path.name)
    lost = sum(r.lost for r in rows)
    print(f"tracked {len(rows)} frames ({lost} lost) -> {args.out}")
    return 0


def _frame_index(path: Path) -> int:
    digits = ""
    for ch in reversed(path.stem):
        if not ch.isdigit():
            break
        digits = ch + digits
    return int(digits)


def cli_synth(args) -> int:
    n = args.frames
    params = SynthParams(n_frames=n, size=args.size, target=args.target, velocity=args.vel,
                         seed=args.seed, distractors=args.distractors, start=args.start)
    gt = synth_generate(params, args.out, args.gt, ext=args.ext)
    print(f"wrote {len(gt)} frames to {args.out}" + (f", ground truth {args.gt}" if args.gt else ""))
    return 0


def cli_eval(args) -> int:
    traj = read_trajectory(args.traj)
    gt = read_ground_truth(args.gt)
    m = evaluate(traj, gt, args.tau)
    print(f"frames            {m.n_frames}")
    print(f"mean_center_error {m.mean_center_error:.6f}")
    print(f"success_rate      {m.success_rate:.6f}  (tau={m.tau:g})")
    print(f"lost_frames       {m.lost_frames}")
    return 0


def cli_describe(args) -> int:
    frame = load_frame(args.patch)
    if frame.width != frame.height or frame.width < 3 or frame.width % 2 == 0:
        raise CLIError(f"patch must be square with odd side >= 3, got {frame.width}x{frame.height}")
    gray = to_gray(frame)
    patch = PatchSample(((frame.width) / 2.0, (frame.height) / 2.0), gray.luma, frame.pixels.astype(np.float64))
    curves = otc.compute_curves(patch)
    out = sys.stdout
    for j, theta in enumerate(otc.ORIENTATIONS_DEG):
        out.write(f"# curve theta={theta:g} gray\n")
        for v in curves.gray[j]:
            out.write(f"{v:.10g}\n")
    out.write(f"# descriptor mode={args.mode} length={otc.descriptor_length(frame.width)}\n")
    for v in otc.assemble_descriptor(curves, args.mode):
        out.write(f"{v:.10g}\n")
    return 0


def cli_codebook_inspect(args) -> int:
    cb = load_codebook(args.file)
    print(f"magic OTCB version 1 k {cb.k} d {cb.d} seed {cb.seed}")
    for j, n in enumerate(np.linalg.norm(cb.centroids, axis=1)):
        print(f"{j} {n:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otc-track", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track a target through a frame directory")
    t.add_argument("--frames", required=True, help="directory of <prefix><index><ext> frames")
    t.add_argument("--init", required=True, type=_box_arg, metavar="CX,CY,W,H")
    t.add_argument("--out", required=True, help="trajectory CSV to write")
    t.add_argument("--config", help="key = value file with tracker settings")
    t.add_argument("--render", action="store_true", help="write frames with the tracked box drawn")
    t.add_argument("--render-dir", help="output directory for --render (default: <frames>_tracked)")
    t.add_argument("--prefix")
    t.add_argument("--ext")
    t.add_argument("--save-codebook", metavar="FILE")
    for name, typ in (("max-iters", int), ("epsilon", float), ("clamp", float), ("patch-size", int),
                      ("stride", int), ("k", int), ("seed", int)):
        t.add_argument(f"--{name}", type=typ, default=None)
    t.add_argument("--mode", choices=otc.MODES, default=None)
    t.set_defaults(func=cli_track)

    s = sub.add_parser("synth", help="generate a synthetic sequence with ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, default=60)
    s.add_argument("--size", type=_size_arg, default=(128, 128), metavar="WxH")
    s.add_argument("--target", type=_size_arg, default=(24, 24), metavar="WxH")
    s.add_argument("--vel", type=_pair_arg, default=(2.0, 0.0), metavar="DX,DY")
    s.add_argument("--start", type=_pair_arg, default=None, metavar="CX,CY")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--distractors", type=int, default=0)
    s.add_argument("--gt")
    s.add_argument("--ext", default=".ppm", choices=(".ppm", ".png"))
    s.set_defaults(func=cli_synth)

    e = sub.add_parser("eval", help="score a trajectory against ground truth")
    e.add_argument("--traj", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--tau", type=float, default=DEFAULT_TAU)
    e.set_defaults(func=cli_eval)

    d = sub.add_parser("describe", help="print the curves and descriptor of one patch image")
    d.add_argument("--patch", required=True)
    d.add_argument("--mode", choices=otc.MODES, default=otc.RGB)
    d.set_defaults(func=cli_describe)

    c = sub.add_parser("codebook", help="codebook utilities")
    csub = c.add_subparsers(dest="action", required=True)
    ci = csub.add_parser("inspect")
    ci.add_argument("file")
    ci.set_defaults(func=cli_codebook_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CLIError, ImageError, ConfigError, CodebookError, EvaluationError, SynthError, TrackingError) as e:
        print(f"otc-track: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
