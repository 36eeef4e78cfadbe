"""Synthetic sequences with exact ground truth.

A textured target translates at constant velocity over a static textured
background. Optional distractors are flat squares painted in the target's mean
color; each one crosses the target's path and passes underneath it at a
scheduled frame.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..imaging import BBox, Frame, save_frame
from .metrics import GTRow, write_ground_truth


# low-frequency background, finer target texture
BG_RADIUS = 8
BG_CONTRAST = 20.0
TARGET_RADIUS = 3
TARGET_CONTRAST = 45.0


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthParams:
    n_frames: int = 60
    size: tuple[int, int] = (128, 128)
    target: tuple[int, int] = (24, 24)
    velocity: tuple[float, float] = (2.0, 0.0)
    seed: int = 0
    distractors: int = 0
    start: tuple[float, float] | None = None


def _box_blur(a: np.ndarray, r: int, axis: int) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r + 1, r)
    c = np.cumsum(np.pad(a, pad, mode="reflect"), axis=axis)
    hi = np.take(c, np.arange(2 * r + 1, c.shape[axis]), axis=axis)
    lo = np.take(c, np.arange(0, c.shape[axis] - 2 * r - 1), axis=axis)
    return (hi - lo) / (2 * r + 1)


def smooth_texture(rng: np.random.Generator, h: int, w: int, radius: int, mean, contrast: float) -> np.ndarray:
    """Blurred RGB noise with the given per-channel mean and std, as uint8."""
    a = rng.standard_normal((h, w, 3))
    for _ in range(2):
        a = _box_blur(_box_blur(a, radius, 0), radius, 1)
    a = (a - a.mean(axis=(0, 1))) / (a.std(axis=(0, 1)) + 1e-12)
    a = np.asarray(mean, dtype=np.float64) + contrast * a
    return np.clip(np.rint(a), 0, 255).astype(np.uint8)


def _positions(p: SynthParams) -> list[tuple[int, int]]:
    """Integer top-left corners of the target in every frame."""
    W, H = p.size
    tw, th = p.target
    vx, vy = p.velocity
    if p.start is None:
        sx = W / 2.0 - vx * (p.n_frames - 1) / 2.0
        sy = H / 2.0 - vy * (p.n_frames - 1) / 2.0
    else:
        sx, sy = p.start
    out = []
    for t in range(p.n_frames):
        x0 = int(np.floor(sx + vx * t - tw / 2.0 + 0.5))
        y0 = int(np.floor(sy + vy * t - th / 2.0 + 0.5))
        if x0 < 0 or y0 < 0 or x0 + tw > W or y0 + th > H:
            raise SynthError(f"target leaves the {W}x{H} frame at frame {t} (top-left {x0},{y0})")
        out.append((x0, y0))
    return out


def _paint(canvas: np.ndarray, x0: int, y0: int, patch: np.ndarray) -> None:
    H, W = canvas.shape[:2]
    ph, pw = patch.shape[:2]
    ax0, ay0 = max(x0, 0), max(y0, 0)
    ax1, ay1 = min(x0 + pw, W), min(y0 + ph, H)
    if ax0 >= ax1 or ay0 >= ay1:
        return
    canvas[ay0:ay1, ax0:ax1] = patch[ay0 - y0:ay1 - y0, ax0 - x0:ax1 - x0]


def synth_sequence(p: SynthParams):
    """Render the sequence in memory. Returns ``(frames, ground_truth, target_texture)``."""
    if p.n_frames < 1:
        raise SynthError("need at least one frame")
    W, H = p.size
    tw, th = p.target
    if tw < 1 or th < 1 or W < 1 or H < 1:
        raise SynthError("sizes must be positive")
    corners = _positions(p)

    bg_rng, tg_rng, ds_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(p.seed).spawn(3))
    background = smooth_texture(bg_rng, H, W, BG_RADIUS, (110, 115, 105), BG_CONTRAST)
    hue = tg_rng.uniform(0, 1, 3)
    base = 70 + 120 * hue
    target = smooth_texture(tg_rng, th, tw, TARGET_RADIUS, base, TARGET_CONTRAST)
    mean_color = np.rint(target.reshape(-1, 3).mean(axis=0)).astype(np.uint8)
    blob = np.broadcast_to(mean_color, (th, tw, 3))

    vx, vy = p.velocity
    speed = float(np.hypot(vx, vy)) or 2.0
    # distractors move perpendicular to the target
    if vx == 0 and vy == 0:
        perp = np.array([0.0, 1.0])
    else:
        perp = np.array([-vy, vx]) / np.hypot(vx, vy)
    meetings = []
    for k in range(p.distractors):
        t_meet = (k + 1) * p.n_frames / (p.distractors + 1)
        side = 1.0 if ds_rng.uniform() < 0.5 else -1.0
        meetings.append((t_meet, side * perp * speed))

    frames, gt = [], []
    for t, (x0, y0) in enumerate(corners):
        canvas = background.copy()
        for t_meet, dv in meetings:
            # coincides with the target position at t_meet
            dx = corners[0][0] + vx * t_meet + dv[0] * (t - t_meet)
            dy = corners[0][1] + vy * t_meet + dv[1] * (t - t_meet)
            _paint(canvas, int(np.floor(dx + 0.5)), int(np.floor(dy + 0.5)), blob)
        _paint(canvas, x0, y0, target)
        frames.append(Frame(canvas))
        gt.append(GTRow(t, x0 + tw / 2.0, y0 + th / 2.0, float(tw), float(th)))
    return frames, gt, target


def target_box(gt_row: GTRow) -> BBox:
    return BBox(gt_row.cx, gt_row.cy, gt_row.w, gt_row.h)


def synth_generate(p: SynthParams, out_dir, gt_path=None, ext: str = ".ppm", prefix: str = "frame_"):
    """Render and write frames plus the ground-truth CSV. Nothing is written on error."""
    frames, gt, _ = synth_sequence(p)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(p.n_frames - 1)))
    for t, fr in enumerate(frames):
        save_frame(fr, out / f"{prefix}{t:0{digits}d}{ext}")
    if gt_path is not None:
        write_ground_truth(gt, gt_path)
    return gt
