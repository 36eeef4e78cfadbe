"""Visual vocabulary: K-means fitting, hard quantization, kernel histograms.

Word ids are 0-based indices into the centroid array.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"OTCB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")

MAX_LLOYD_ITERS = 100


class CodebookError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (k, d)
    seed: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]


@dataclass(eq=False)
class Assignment:
    labels: np.ndarray
    objective: float
    requested_k: int
    k: int
    iterations: int
    history: list[float] = field(default_factory=list)

    @property
    def reduced(self) -> bool:
        return self.k < self.requested_k


@dataclass(frozen=True, eq=False)
class HistogramPDF:
    bins: np.ndarray
    alpha: float
    uniform_fallback: bool = False

    @property
    def k(self) -> int:
        return self.bins.shape[0]


def _sq_dists_exact(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], c.shape[0]))
    step = max(1, 4_000_000 // max(1, c.size))
    for a in range(0, x.shape[0], step):
        diff = x[a:a + step, None, :] - c[None, :, :]
        out[a:a + step] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared euclidean distances, ``(len(x), len(c))``.

    Uses the expanded form for speed, then recomputes exactly every row whose
    two best candidates are within rounding of each other, so ties and exact
    matches resolve the same way as a direct difference would.
    """
    xx = np.einsum("nd,nd->n", x, x)
    cc = np.einsum("kd,kd->k", c, c)
    d = np.maximum(xx[:, None] - 2.0 * (x @ c.T) + cc[None, :], 0.0)
    if c.shape[0] > 1:
        tol = 1e-9 * (xx[:, None] + cc[None, :] + 1.0)
        near = (d - d.min(axis=1, keepdims=True)) <= tol
        rows = np.flatnonzero((near.sum(axis=1) > 1) | (d.min(axis=1) <= tol.min(axis=1)))
    else:
        rows = np.flatnonzero(d[:, 0] <= 1e-9 * (xx + cc[0] + 1.0))
    if rows.size:
        d[rows] = _sq_dists_exact(x[rows], c)
    return d


def _seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first pick uniform, the rest by squared-distance weight."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(x, x[chosen[0]][None])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        i = int(rng.choice(n, p=d2 / total))
        chosen.append(i)
        d2 = np.minimum(d2, _sq_dists(x, x[i][None])[:, 0])
    return x[chosen].copy()


def kmeans_fit(features, k: int, seed: int = 0, max_iters: int = MAX_LLOYD_ITERS):
    """Lloyd's algorithm with k-means++ seeding.

    ``k`` is reduced to the number of distinct feature vectors when it
    exceeds it. Returns ``(Codebook, Assignment)``; ``Assignment.history``
    holds the objective after every assignment step.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise CodebookError("empty feature set")
    if k < 1:
        raise CodebookError(f"k must be >= 1, got {k}")
    if not np.isfinite(x).all():
        raise CodebookError("features contain non-finite values")

    n_distinct = np.unique(x, axis=0).shape[0]
    k_eff = min(k, n_distinct)
    if k_eff < k:
        log.info("k reduced from %d to %d distinct features", k, k_eff)

    rng = np.random.default_rng(seed)
    mu = _seed_centroids(x, k_eff, rng)

    labels = None
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sq_dists(x, mu)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(x)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        mu = _update_means(x, labels, mu, d2)
    else:
        d2 = _sq_dists(x, mu)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(x)), labels].sum()))

    objective = history[-1]
    cb = Codebook(mu, seed)
    return cb, Assignment(labels, objective, k, k_eff, it, history)


def _update_means(x, labels, mu, d2):
    k = mu.shape[0]
    new_mu = np.empty_like(mu)
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j]:
            new_mu[j] = x[labels == j].mean(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        # move each empty centroid onto the worst-fit feature
        err = d2[np.arange(len(x)), labels].copy()
        for j in empty:
            i = int(np.argmax(err))
            new_mu[j] = x[i]
            err[i] = -1.0
    return new_mu


def quantize_many(codebook: Codebook, features) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[None]
    if f.shape[1] != codebook.d:
        raise CodebookError(f"dimension mismatch: descriptor has {f.shape[1]}, codebook has {codebook.d}")
    # argmin returns the first minimum, so ties go to the lowest id
    return np.argmin(_sq_dists(f, codebook.centroids), axis=1)


def quantize(codebook: Codebook, f) -> int:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise CodebookError("quantize expects a single descriptor")
    return int(quantize_many(codebook, f)[0])


def epanechnikov_profile(r2):
    return np.maximum(0.0, 1.0 - np.asarray(r2, dtype=np.float64))


def normalized_radius2(centers, region) -> np.ndarray:
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    dx = (c[:, 0] - region.cx) / (region.w / 2.0)
    dy = (c[:, 1] - region.cy) / (region.h / 2.0)
    return dx * dx + dy * dy


def histogram_from_words(words, centers, region, k: int) -> HistogramPDF:
    words = np.asarray(words, dtype=np.int64)
    if words.size == 0:
        raise CodebookError("cannot encode a histogram from zero samples")
    kappa = epanechnikov_profile(normalized_radius2(centers, region))
    fallback = False
    if kappa.sum() <= 0:
        log.info("all samples outside the kernel support; using uniform weights")
        kappa = np.ones_like(kappa)
        fallback = True
    raw = np.bincount(words, weights=kappa, minlength=k)
    alpha = 1.0 / kappa.sum()
    return HistogramPDF(raw * alpha, alpha, fallback)


def encode_histogram(codebook: Codebook, samples, region) -> HistogramPDF:
    """Kernel-weighted word histogram of ``(center, descriptor)`` pairs about ``region``."""
    samples = list(samples)
    if not samples:
        raise CodebookError("cannot encode a histogram from zero samples")
    centers = np.array([c for c, _ in samples], dtype=np.float64)
    feats = np.array([f for _, f in samples], dtype=np.float64)
    return histogram_from_words(quantize_many(codebook, feats), centers, region, codebook.k)


# --- persistence ----------------------------------------------------------

def save_codebook(codebook: Codebook, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, codebook.k, codebook.d, codebook.seed & 0xFFFFFFFFFFFFFFFF)
    body = np.ascontiguousarray(codebook.centroids, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_codebook(path) -> Codebook:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CodebookError(f"{path}: unreadable file ({e.strerror or e})") from e
    if len(data) < _HEADER.size:
        raise CodebookError(f"{path}: truncated header")
    magic, version, k, d, seed = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CodebookError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CodebookError(f"{path}: unsupported version {version}")
    need = k * d * 8
    body = data[_HEADER.size:]
    if len(body) != need:
        raise CodebookError(f"{path}: expected {need} centroid bytes, got {len(body)}")
    mu = np.frombuffer(body, dtype="<f8").reshape(k, d).astype(np.float64)
    return Codebook(mu, seed)
