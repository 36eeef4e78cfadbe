"""Ground truth files and center-error metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

GT_HEADER = ("frame", "cx", "cy", "w", "h")
DEFAULT_TAU = 20.0


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class GTRow:
    frame: int
    cx: float
    cy: float
    w: float
    h: float


@dataclass(frozen=True)
class Metrics:
    mean_center_error: float
    success_rate: float
    lost_frames: int
    n_frames: int
    tau: float = DEFAULT_TAU

    def as_tuple(self):
        return (self.mean_center_error, self.success_rate, self.lost_frames)


def write_ground_truth(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(GT_HEADER)
        for r in rows:
            wr.writerow([r.frame, f"{r.cx:.6f}", f"{r.cy:.6f}", f"{r.w:.6f}", f"{r.h:.6f}"])


def read_ground_truth(path) -> list[GTRow]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise EvaluationError(f"{path}: unreadable ({e.strerror or e})") from e
    with fh:
        rd = csv.DictReader(fh)
        missing = set(GT_HEADER) - set(rd.fieldnames or ())
        if missing:
            raise EvaluationError(f"{path}: missing columns {sorted(missing)}")
        return [GTRow(int(r["frame"]), float(r["cx"]), float(r["cy"]), float(r["w"]), float(r["h"]))
                for r in rd]


def center_errors(trajectory, gt) -> list[float]:
    by_frame = {r.frame: r for r in trajectory}
    missing = [g.frame for g in gt if g.frame not in by_frame]
    if missing:
        raise EvaluationError(f"trajectory lacks ground-truth frames: {missing}")
    return [math.hypot(by_frame[g.frame].cx - g.cx, by_frame[g.frame].cy - g.cy) for g in gt]


def evaluate(trajectory, gt, tau: float = DEFAULT_TAU) -> Metrics:
    """Mean center error, success rate at ``tau`` and lost count over the GT frames."""
    if not gt:
        raise EvaluationError("ground truth is empty")
    errs = center_errors(trajectory, gt)
    by_frame = {r.frame: r for r in trajectory}
    lost = sum(1 for g in gt if getattr(by_frame[g.frame], "lost", False))
    n = len(errs)
    return Metrics(sum(errs) / n, sum(e <= tau for e in errs) / n, lost, n, tau)
