"""Oriented texture curve (OTC) patch descriptor.

A patch is cut into ``N`` parallel strips at each of eight fixed orientations.
The strip means form one ``N``-point curve per orientation; the curves are
encoded by their forward differences (gradient) and second differences
(curvature). A constant H-bin is prepended and the vector is scaled to unit
l2 norm.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

N_ORIENTATIONS = 8
ORIENTATIONS_DEG = tuple(22.5 * j for j in range(N_ORIENTATIONS))
H_BIN = 0.05

GRAY = "gray"
RGB = "rgb"
MODES = (GRAY, RGB)


def descriptor_length(n: int) -> int:
    return 1 + N_ORIENTATIONS * (2 * n - 3)


@dataclass(frozen=True, eq=False)
class StripPartition:
    """Strip membership of each pixel of an ``N x N`` patch at one angle.

    ``strip_index`` is row-major over the patch with 0-based strip ids.
    """

    n: int
    theta_deg: float
    strip_index: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True, eq=False)
class CurveSet:
    gray: np.ndarray  # (8, N)
    rgb: np.ndarray  # (8, N, 3)


@lru_cache(maxsize=None)
def strip_partition(n: int, theta_deg: float) -> StripPartition:
    if n < 3 or n % 2 == 0:
        raise ValueError(f"patch size must be odd and >= 3, got {n}")
    c = (n - 1) / 2.0
    ys, xs = np.mgrid[0:n, 0:n].astype(np.float64)
    t = np.deg2rad(theta_deg)
    # projection onto the axis perpendicular to the strip direction
    d = -np.sin(t) * (xs - c) + np.cos(t) * (ys - c)
    d_min, d_max = d.min(), d.max()
    span = d_max - d_min
    idx = np.floor(n * (d - d_min) / (span + 1e-9 * span)).astype(np.int64).ravel()
    counts = np.bincount(idx, minlength=n)
    if (counts == 0).any():
        log.warning("empty strips at N=%d, theta=%g; borrowing nearest nonempty strip", n, theta_deg)
    idx.setflags(write=False)
    counts.setflags(write=False)
    return StripPartition(n, float(theta_deg), idx, counts)


def _strip_members(part: StripPartition, i: int) -> np.ndarray:
    # an empty strip borrows the pixels of the nearest nonempty one
    filled = np.flatnonzero(part.counts)
    j = filled[np.argmin(np.abs(filled - i))]
    return part.strip_index == j


@lru_cache(maxsize=None)
def _strip_mean_matrix(n: int) -> np.ndarray:
    """``(8*N, N*N)`` matrix mapping a flattened patch to its 8 curves."""
    m = np.zeros((N_ORIENTATIONS * n, n * n))
    for j, theta in enumerate(ORIENTATIONS_DEG):
        part = strip_partition(n, theta)
        for i in range(n):
            members = _strip_members(part, i)
            m[j * n + i, members] = 1.0 / members.sum()
    m.setflags(write=False)
    return m


def orientation_partitions(n: int) -> list[StripPartition]:
    return [strip_partition(n, t) for t in ORIENTATIONS_DEG]


def _curves_from_stacks(gray_stack: np.ndarray, rgb_stack: np.ndarray | None):
    """Centered curves for a batch of patches.

    Means are taken after subtracting each patch's center pixel so that flat
    regions give exactly flat curves; the offset is returned separately.
    """
    m_, n, _ = gray_stack.shape
    mat = _strip_mean_matrix(n)
    r = (n - 1) // 2
    gref = gray_stack[:, r, r].copy()
    g = (gray_stack.reshape(m_, n * n) - gref[:, None]) @ mat.T
    g = g.reshape(m_, N_ORIENTATIONS, n)
    if rgb_stack is None:
        return g, gref, None, None
    cref = rgb_stack[:, r, r, :].copy()
    flat = (rgb_stack - cref[:, None, None, :]).reshape(m_, n * n, 3).transpose(0, 2, 1)
    c = (flat.reshape(m_ * 3, n * n) @ mat.T).reshape(m_, 3, N_ORIENTATIONS, n)
    c = c.transpose(0, 2, 3, 1)
    return g, gref, c, cref


def compute_curves(patch, partitions: list[StripPartition] | None = None) -> CurveSet:
    """Mean luma and mean RGB along every strip of every orientation."""
    gray = np.asarray(patch.gray, dtype=np.float64)
    rgb = np.asarray(patch.rgb, dtype=np.float64)
    n = gray.shape[0]
    if partitions is None:
        partitions = orientation_partitions(n)
    if len(partitions) != N_ORIENTATIONS or any(p.n != n for p in partitions):
        raise ValueError("partitions do not match the patch size")
    r = (n - 1) // 2
    gref, cref = gray[r, r], rgb[r, r]
    gflat = (gray - gref).ravel()
    cflat = (rgb - cref).reshape(n * n, 3)
    g = np.empty((N_ORIENTATIONS, n))
    c = np.empty((N_ORIENTATIONS, n, 3))
    for j, part in enumerate(partitions):
        for i in range(n):
            members = _strip_members(part, i)
            g[j, i] = gflat[members].mean()
            c[j, i] = cflat[members].mean(axis=0)
    return CurveSet(g + gref, c + cref)


def curve_gradient(v):
    return np.diff(np.asarray(v, dtype=np.float64), axis=-1)


def curve_curvature(dv):
    return np.diff(np.asarray(dv, dtype=np.float64), axis=-1)


def rgb_gradient(V, dv_gray):
    """Signed color gradient: l2 norm of the RGB step, sign of the gray step."""
    V = np.asarray(V, dtype=np.float64)
    mag = np.linalg.norm(np.diff(V, axis=-2), axis=-1)
    return np.sign(dv_gray) * mag


def _encode(gray_curves, rgb_curves, mode):
    dv = curve_gradient(gray_curves)
    if mode == GRAY:
        grad = dv
    elif mode == RGB:
        grad = rgb_gradient(rgb_curves, dv)
    else:
        raise ValueError(f"unknown descriptor mode {mode!r}")
    curv = curve_curvature(grad)
    lead = grad.shape[:-2]
    body = np.concatenate([grad, curv], axis=-1).reshape(*lead, -1)
    hbin = np.full(lead + (1,), H_BIN)
    f = np.concatenate([hbin, body], axis=-1)
    return f / np.linalg.norm(f, axis=-1, keepdims=True)


def assemble_descriptor(curves: CurveSet, mode: str = RGB) -> np.ndarray:
    return _encode(curves.gray, curves.rgb, mode)


def describe_stack(gray_stack, rgb_stack=None, mode: str = RGB) -> np.ndarray:
    """Descriptors for a batch of patches, one row per patch.

    ``gray_stack`` is ``(M, N, N)``; ``rgb_stack`` is ``(M, N, N, 3)`` and is
    only needed in RGB mode.
    """
    gray_stack = np.asarray(gray_stack, dtype=np.float64)
    if gray_stack.ndim != 3 or gray_stack.shape[1] != gray_stack.shape[2]:
        raise ValueError(f"expected (M, N, N) gray patches, got {gray_stack.shape}")
    n = gray_stack.shape[1]
    if n < 3 or n % 2 == 0:
        raise ValueError(f"patch size must be odd and >= 3, got {n}")
    if gray_stack.shape[0] == 0:
        return np.empty((0, descriptor_length(n)))
    if mode == RGB:
        if rgb_stack is None:
            raise ValueError("RGB mode needs the RGB patches")
        rgb_stack = np.asarray(rgb_stack, dtype=np.float64)
    else:
        rgb_stack = None
    g, _, c, _ = _curves_from_stacks(gray_stack, rgb_stack)
    return _encode(g, c, mode)


def describe(patch, mode: str = RGB) -> np.ndarray:
    return describe_stack(np.asarray(patch.gray)[None], np.asarray(patch.rgb)[None], mode)[0]
