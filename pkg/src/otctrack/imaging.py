"""Frames, boxes and dense patch sampling.

Coordinates are continuous with pixel ``(i, j)`` covering ``[i, i+1) x [j, j+1)``,
so a pixel's center sits at ``(i + 0.5, j + 0.5)``. A box is stored by its
center and extent; it covers ``[cx - w/2, cx + w/2)`` horizontally.
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

PPM_EXTS = (".ppm",)
PNG_EXTS = (".png",)


class ImageError(Exception):
    """Raised when a frame cannot be read or written."""

    def __init__(self, path, cause):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{self.path}: {cause}")


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit RGB raster, stored as an ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        if px.dtype != np.uint8:
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class GrayFrame:
    luma: np.ndarray

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]


@dataclass(frozen=True)
class BBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_corner(cls, x: float, y: float, w: float, h: float) -> "BBox":
        return cls(x + w / 2.0, y + h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def moved_to(self, cx: float, cy: float) -> "BBox":
        return BBox(cx, cy, self.w, self.h)

    def pixel_block(self) -> tuple[int, int, int, int]:
        """Integer ``(x0, y0, W, H)`` of the pixels the box covers, center snapped."""
        wi = max(1, _round_half_up(self.w))
        hi = max(1, _round_half_up(self.h))
        x0 = _round_half_up(self.cx - self.w / 2.0)
        y0 = _round_half_up(self.cy - self.h / 2.0)
        return x0, y0, wi, hi


@dataclass(frozen=True)
class GridSpec:
    patch_size: int = 13
    stride: int = 3

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError(f"patch size must be odd and >= 3, got {self.patch_size}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


@dataclass(frozen=True, eq=False)
class PatchSample:
    center: tuple[float, float]
    gray: np.ndarray
    rgb: np.ndarray


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def to_gray(frame: Frame) -> GrayFrame:
    # BT.601 weights, no rounding
    return GrayFrame(frame.pixels.astype(np.float64) @ LUMA_WEIGHTS)


def _axis_lattice(start: int, extent: int, limit: int, n: int, s: int) -> np.ndarray:
    lo = max(start, 0)
    hi = min(start + extent, limit)
    fit = hi - lo
    if fit < n:
        return np.empty(0, dtype=np.int64)
    count = (fit - n) // s + 1
    # spread the leftover margin evenly on both sides
    margin = (fit - n - (count - 1) * s) // 2
    first = lo + margin + (n - 1) // 2
    return first + s * np.arange(count, dtype=np.int64)


def patch_lattice(width: int, height: int, region: BBox, grid: GridSpec):
    """Integer pixel indices ``(cols, rows)`` of patch centers, row-major.

    Every returned center admits a full ``N x N`` patch inside both the frame
    and the region's pixel block.
    """
    x0, y0, wi, hi = region.pixel_block()
    xs = _axis_lattice(x0, wi, width, grid.patch_size, grid.stride)
    ys = _axis_lattice(y0, hi, height, grid.patch_size, grid.stride)
    rows, cols = np.meshgrid(ys, xs, indexing="ij")
    return cols.ravel(), rows.ravel()


def extract_stacks(frame: Frame, gray: GrayFrame, cols, rows, n: int):
    """Stack the ``n x n`` gray and RGB windows around each center index."""
    r = (n - 1) // 2
    offs = np.arange(-r, r + 1)
    yy = rows[:, None, None] + offs[None, :, None]
    xx = cols[:, None, None] + offs[None, None, :]
    gray_stack = gray.luma[yy, xx]
    rgb_stack = frame.pixels[yy, xx].astype(np.float64)
    return gray_stack, rgb_stack


def sample_patches(frame: Frame, gray: GrayFrame, region: BBox, grid: GridSpec) -> list[PatchSample]:
    cols, rows = patch_lattice(frame.width, frame.height, region, grid)
    if cols.size == 0:
        return []
    g, c = extract_stacks(frame, gray, cols, rows, grid.patch_size)
    return [
        PatchSample((float(x) + 0.5, float(y) + 0.5), g[i], c[i])
        for i, (x, y) in enumerate(zip(cols, rows))
    ]


def draw_bbox(frame: Frame, box: BBox, color=(255, 255, 255)) -> Frame:
    out = frame.pixels.copy()
    x0, y0, wi, hi = box.pixel_block()
    x1, y1 = x0 + wi - 1, y0 + hi - 1
    H, W = out.shape[:2]
    color = np.asarray(color, dtype=np.uint8)
    cx0, cx1 = max(x0, 0), min(x1, W - 1)
    cy0, cy1 = max(y0, 0), min(y1, H - 1)
    if cx0 > cx1 or cy0 > cy1:
        return Frame(out)
    for y in (y0, y1):
        if 0 <= y < H:
            out[y, cx0:cx1 + 1] = color
    for x in (x0, x1):
        if 0 <= x < W:
            out[cy0:cy1 + 1, x] = color
    return Frame(out)


# --- file I/O -------------------------------------------------------------

def _read_ppm(path: Path) -> Frame:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ImageError(path, f"unreadable file ({e.strerror or e})") from e
    if not data.startswith(b"P6"):
        raise ImageError(path, "unsupported format (expected binary PPM 'P6')")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageError(path, "corrupt header")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ImageError(path, "corrupt header")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageError(path, "corrupt header (non-positive dimensions)")
    if maxval != 255:
        raise ImageError(path, f"unsupported format (maxval {maxval}, only 8-bit supported)")
    need = width * height * 3
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise ImageError(path, f"corrupt payload (expected {need} bytes, got {len(payload)})")
    return Frame(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy())


def _write_ppm(frame: Frame, path: Path) -> None:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    path.write_bytes(header + frame.pixels.tobytes())


def _pil():
    try:
        from PIL import Image
    except ImportError as e:  # pragma: no cover - depends on environment
        raise ImageError("<png>", "PNG support requires Pillow") from e
    return Image


def load_frame(path) -> Frame:
    path = Path(path)
    ext = path.suffix.lower()
    if not path.exists():
        raise ImageError(path, "unreadable file (does not exist)")
    if ext in PPM_EXTS:
        return _read_ppm(path)
    if ext in PNG_EXTS:
        Image = _pil()
        try:
            with Image.open(path) as im:
                im.load()
                if im.mode in ("I;16", "I", "F"):
                    raise ImageError(path, f"unsupported format (PNG mode {im.mode})")
                arr = np.asarray(im.convert("RGB"))
        except ImageError:
            raise
        except Exception as e:
            raise ImageError(path, f"corrupt payload ({e})") from e
        return Frame(arr.copy())
    raise ImageError(path, f"unsupported format '{ext or '<none>'}'")


def save_frame(frame: Frame, path) -> None:
    path = Path(path)
    ext = path.suffix.lower()
    try:
        if ext in PPM_EXTS:
            _write_ppm(frame, path)
        elif ext in PNG_EXTS:
            _pil().fromarray(frame.pixels, "RGB").save(path)
        else:
            raise ImageError(path, f"unsupported format '{ext or '<none>'}'")
    except OSError as e:
        raise ImageError(path, f"cannot write ({e.strerror or e})") from e


_INDEXED = re.compile(r"^(?P<prefix>.*?)(?P<index>\d+)(?P<ext>\.[A-Za-z0-9]+)$")


def list_sequence(directory, prefix: str | None = None, ext: str | None = None) -> list[Path]:
    """Frame files ``<prefix><index><ext>`` in ``directory``, ascending by index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageError(directory, "not a directory")
    found = []
    for name in os.listdir(directory):
        m = _INDEXED.match(name)
        if not m:
            continue
        e = m.group("ext").lower()
        if ext is not None and e != ext.lower():
            continue
        if ext is None and e not in PPM_EXTS + PNG_EXTS:
            continue
        if prefix is not None and m.group("prefix") != prefix:
            continue
        found.append((int(m.group("index")), name))
    found.sort()
    return [directory / name for _, name in found]
