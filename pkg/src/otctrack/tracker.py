"""Mean-shift localization on OTC word histograms.

The target is described once, in the first frame, by a kernel-weighted
histogram over a vocabulary fitted to its own patches. In each later frame the
box center climbs the Bhattacharyya similarity between that histogram and the
candidate histogram at the current center.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import otc
from .codebook import (
    Codebook,
    HistogramPDF,
    histogram_from_words,
    kmeans_fit,
    normalized_radius2,
    quantize_many,
)
from .imaging import BBox, Frame, GrayFrame, GridSpec, extract_stacks, patch_lattice, to_gray

TRAJECTORY_HEADER = ("frame", "cx", "cy", "w", "h", "rho", "iters", "lost")


class TrackingError(Exception):
    pass


class LostTarget(TrackingError):
    """No patch in the candidate window carries positive weight."""


@dataclass(frozen=True)
class TrackConfig:
    max_iters: int = 20
    epsilon: float = 0.1
    clamp: float = 1e-6
    patch_size: int = 13
    stride: int = 1
    k: int = 100
    seed: int = 0
    mode: str = otc.RGB

    def __post_init__(self):
        for name in ("max_iters", "epsilon", "clamp", "patch_size", "stride", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.mode not in otc.MODES:
            raise ValueError(f"mode must be one of {otc.MODES}, got {self.mode!r}")
        GridSpec(self.patch_size, self.stride)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.patch_size, self.stride)

    def updated(self, **overrides) -> "TrackConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}


@dataclass(frozen=True, eq=False)
class TargetModel:
    codebook: Codebook
    target_pdf: HistogramPDF
    box_extent: tuple[float, float]
    grid: GridSpec
    mode: str
    init_box: BBox


@dataclass
class TrackerState:
    center: tuple[float, float]
    rho: float
    rho_initial: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)  # (y0, y_hat, rho at y0)


@dataclass(frozen=True)
class TrajectoryRow:
    frame: int
    cx: float
    cy: float
    w: float
    h: float
    rho: float
    iters: int
    lost: bool


@dataclass(frozen=True, eq=False)
class Candidate:
    centers: np.ndarray  # (M, 2) continuous patch centers
    words: np.ndarray
    pdf: HistogramPDF


def describe_region(frame: Frame, gray: GrayFrame, box: BBox, grid: GridSpec, mode: str):
    """Centers and descriptors of the dense patch lattice inside ``box``."""
    cols, rows = patch_lattice(frame.width, frame.height, box, grid)
    centers = np.stack([cols + 0.5, rows + 0.5], axis=1).astype(np.float64)
    if cols.size == 0:
        return centers, np.empty((0, otc.descriptor_length(grid.patch_size)))
    g, c = extract_stacks(frame, gray, cols, rows, grid.patch_size)
    return centers, otc.describe_stack(g, c, mode)


def candidate_at(model: TargetModel, frame: Frame, gray: GrayFrame, center) -> Candidate:
    box = BBox(center[0], center[1], *model.box_extent)
    centers, desc = describe_region(frame, gray, box, model.grid, model.mode)
    if len(centers) == 0:
        raise TrackingError("candidate window admits no patch")
    words = quantize_many(model.codebook, desc)
    return Candidate(centers, words, histogram_from_words(words, centers, box, model.codebook.k))


def build_target_model(frame: Frame, init_box: BBox, config: TrackConfig = TrackConfig()) -> TargetModel:
    gray = to_gray(frame)
    centers, desc = describe_region(frame, gray, init_box, config.grid, config.mode)
    if len(desc) == 0:
        raise TrackingError("target too small for patch size")
    codebook, assignment = kmeans_fit(desc, config.k, config.seed)
    pdf = histogram_from_words(assignment.labels, centers, init_box, codebook.k)
    return TargetModel(codebook, pdf, (init_box.w, init_box.h), config.grid, config.mode, init_box)


def _bins(p) -> np.ndarray:
    return np.asarray(p.bins if isinstance(p, HistogramPDF) else p, dtype=np.float64)


def bhattacharyya(target, candidate) -> float:
    a, b = _bins(target), _bins(candidate)
    if a.shape != b.shape:
        raise ValueError(f"bin-count mismatch: {a.shape[0]} vs {b.shape[0]}")
    rho = float(np.sum(np.sqrt(a * b)))
    return min(1.0, max(0.0, rho))


def bhattacharyya_distance(rho: float) -> float:
    return math.sqrt(1.0 - min(1.0, max(0.0, rho)))


def pdf_distance(target, candidate) -> float:
    """``sqrt(1 - rho)`` computed directly from two normalized PDFs.

    Uses ``1 - rho = sum((sqrt(a) - sqrt(b))**2) / 2``, which is exactly zero
    for identical inputs where ``1 - rho`` would leave rounding residue.
    """
    a, b = _bins(target), _bins(candidate)
    if a.shape != b.shape:
        raise ValueError(f"bin-count mismatch: {a.shape[0]} vs {b.shape[0]}")
    h = 0.5 * float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
    return math.sqrt(min(1.0, max(0.0, h)))


def compute_weights(model: TargetModel, candidate_pdf, sample_words, clamp: float = 1e-6) -> np.ndarray:
    """Per-patch weight ``sqrt(O[u] / max(C[u], clamp))`` for each patch's word ``u``."""
    target = _bins(model.target_pdf if isinstance(model, TargetModel) else model)
    cand = _bins(candidate_pdf)
    u = np.asarray(sample_words, dtype=np.int64)
    o = target[u]
    w = np.sqrt(o / np.maximum(cand[u], clamp))
    w[o == 0] = 0.0
    return w


def mean_shift_vector(centers, weights, y0, extent) -> tuple[float, float]:
    """Weighted centroid of the patch centers inside the kernel ellipse, minus ``y0``.

    The Epanechnikov profile has a constant derivative, so each step is a plain
    weighted mean over the unit ellipse with half-axes ``extent / 2``.
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64)
    r2 = normalized_radius2(centers, BBox(y0[0], y0[1], extent[0], extent[1]))
    w = np.where(r2 < 1.0, weights, 0.0)
    total = w.sum()
    if not total > 0:
        raise LostTarget("no weighted patch inside the kernel bandwidth")
    mx = float(np.dot(w, centers[:, 0]) / total)
    my = float(np.dot(w, centers[:, 1]) / total)
    return (mx - y0[0], my - y0[1])


def clamp_center(center, extent, frame: Frame) -> tuple[float, float]:
    w, h = extent
    if w > frame.width or h > frame.height:
        raise TrackingError(f"box {w}x{h} does not fit a {frame.width}x{frame.height} frame")
    cx = min(max(center[0], w / 2.0), frame.width - w / 2.0)
    cy = min(max(center[1], h / 2.0), frame.height - h / 2.0)
    return (float(cx), float(cy))


def similarity_at(model: TargetModel, frame: Frame, center, gray: GrayFrame | None = None) -> float:
    gray = to_gray(frame) if gray is None else gray
    return bhattacharyya(model.target_pdf, candidate_at(model, frame, gray, center).pdf)


def track_frame(model: TargetModel, frame: Frame, y_prev, config: TrackConfig = TrackConfig(),
                gray: GrayFrame | None = None) -> TrackerState:
    gray = to_gray(frame) if gray is None else gray
    y = clamp_center(y_prev, model.box_extent, frame)
    history = []
    rho0 = None
    converged = False
    last = (None, 0.0)  # most recently evaluated center and its similarity
    it = 0
    for it in range(1, config.max_iters + 1):
        cand = candidate_at(model, frame, gray, y)
        rho = bhattacharyya(model.target_pdf, cand.pdf)
        last = (y, rho)
        if rho0 is None:
            rho0 = rho
        weights = compute_weights(model, cand.pdf, cand.words, config.clamp)
        # shift relative to the lattice's own centroid, so that uniform weights
        # never move the box because of where the snapped lattice sits
        ref = cand.centers.mean(axis=0)
        try:
            mh = mean_shift_vector(cand.centers, weights, ref, model.box_extent)
        except LostTarget:
            if it == 1 and rho == 0.0:
                raise
            break
        y_new = clamp_center((y[0] + mh[0], y[1] + mh[1]), model.box_extent, frame)
        history.append((y, y_new, rho))
        y = y_new
        if math.hypot(*mh) < config.epsilon:
            converged = True
            break
    rho_final = last[1] if last[0] == y else similarity_at(model, frame, y, gray)
    return TrackerState(y, rho_final, rho0, it, converged, history)


def track_sequence(model: TargetModel, frames, init: BBox, config: TrackConfig = TrackConfig(),
                   indices=None) -> list[TrajectoryRow]:
    """Track every frame in order, each seeded by the previous frame's center.

    A lost frame is recorded with ``rho = 0`` and ``lost = True``; tracking
    resumes from the last good center.
    """
    rows = []
    y = (init.cx, init.cy)
    w, h = model.box_extent
    for t, frame in enumerate(frames):
        idx = t if indices is None else indices[t]
        try:
            st = track_frame(model, frame, y, config)
        except LostTarget:
            rows.append(TrajectoryRow(idx, y[0], y[1], w, h, 0.0, 1, True))
            continue
        y = st.center
        rows.append(TrajectoryRow(idx, y[0], y[1], w, h, st.rho, st.iterations, False))
    return rows


def write_trajectory(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRAJECTORY_HEADER)
        for r in rows:
            wr.writerow([r.frame, f"{r.cx:.6f}", f"{r.cy:.6f}", f"{r.w:.6f}", f"{r.h:.6f}",
                         f"{r.rho:.6f}", r.iters, int(r.lost)])


def read_trajectory(path) -> list[TrajectoryRow]:
    path = Path(path)
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(TRAJECTORY_HEADER) - set(rd.fieldnames or ())
        if missing:
            raise TrackingError(f"{path}: missing columns {sorted(missing)}")
        return [
            TrajectoryRow(int(r["frame"]), float(r["cx"]), float(r["cy"]), float(r["w"]),
                          float(r["h"]), float(r["rho"]), int(r["iters"]), r["lost"].strip() == "1")
            for r in rd
        ]
