"""Fréchet distance between Gaussian fits of embedding sets.

``d = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))``

The trace of the cross term is computed from the symmetric matrix
``S_a^(1/2) S_b S_a^(1/2)``, whose eigenvalues are those of ``S_a S_b``.
Embeddings come from files; a cheap pixel-statistics embedding is included
for tests and demos.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ImageRaster
from .errors import DimensionMismatch, NonConvergentEigen, TooFewSamples

__all__ = [
    "EmbeddingSet",
    "EmbeddingStats",
    "embedding_stats",
    "sqrtm_psd",
    "frechet_distance",
    "severity_sweep",
    "read_embeddings",
    "write_embeddings",
    "pixel_embedding",
    "embed_images",
    "REGULARIZATION",
]

REGULARIZATION = 1e-6


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    vectors: np.ndarray
    source: str = ""
    ids: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionMismatch("embeddings must be a 2-D (n, D) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("embeddings must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class EmbeddingStats:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def embedding_stats(e: "EmbeddingSet | np.ndarray") -> EmbeddingStats:
    """Sample mean and unbiased (``n - 1``) covariance."""
    v = e.vectors if isinstance(e, EmbeddingSet) else np.asarray(e, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2:
        raise TooFewSamples("at least two embedding vectors are required")
    mu = v.mean(axis=0)
    centered = v - mu
    cov = centered.T @ centered / (v.shape[0] - 1)
    return EmbeddingStats(mu, (cov + cov.T) / 2.0)


def _eigh(m: np.ndarray):
    try:
        return np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergentEigen(str(exc)) from exc


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive semi-definite matrix."""
    m = np.asarray(m, dtype=np.float64)
    w, v = _eigh((m + m.T) / 2.0)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _regularize(cov: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(cov)
    if w.size and w.min() < -1e-8 * max(1.0, abs(w).max()):
        return cov + REGULARIZATION * np.eye(cov.shape[0])
    return cov


def frechet_distance(a: EmbeddingStats, b: EmbeddingStats) -> float:
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise DimensionMismatch(f"dimension {a.dim} vs {b.dim}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    ca, cb = _regularize(a.cov), _regularize(b.cov)
    root_a = sqrtm_psd(ca)
    inner = root_a @ cb @ root_a
    w = _eigh((inner + inner.T) / 2.0)[0]
    tr_cross = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    diff = a.mean - b.mean
    d = float(diff @ diff) + float(np.trace(ca) + np.trace(cb)) - 2.0 * tr_cross
    return max(d, 0.0)


def _stats(x) -> EmbeddingStats:
    return x if isinstance(x, EmbeddingStats) else embedding_stats(x)


def severity_sweep(clean, corrupted: Mapping[int, object]) -> list[tuple[int, float]]:
    """Distance from each severity's embeddings to the clean ones, by severity."""
    ref = _stats(clean)
    rows = []
    for sev in sorted(corrupted):
        rows.append((int(sev), frechet_distance(ref, _stats(corrupted[sev]))))
    return rows


# --- files ---------------------------------------------------------------------------

_HEADER = struct.Struct("<II")


def write_embeddings(e: EmbeddingSet, path: "str | os.PathLike") -> None:
    """Binary when the suffix is not ``.jsonl``: ``<u32 n><u32 D>`` then float32 rows."""
    path = Path(path)
    if path.suffix == ".jsonl":
        ids = e.ids or tuple(str(i) for i in range(e.n))
        lines = [json.dumps({"id": i, "vector": row.tolist()}) for i, row in zip(ids, e.vectors)]
        path.write_text("\n".join(lines) + "\n")
        return
    body = e.vectors.astype("<f4").tobytes(order="C")
    path.write_bytes(_HEADER.pack(e.n, e.dim) + body)


def read_embeddings(path: "str | os.PathLike") -> EmbeddingSet:
    path = Path(path)
    if path.suffix == ".jsonl":
        ids, rows = [], []
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(str(rec["id"]))
                rows.append([float(x) for x in rec["vector"]])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if len({len(r) for r in rows}) > 1:
            raise DimensionMismatch(f"{path}: vectors of different lengths")
        return EmbeddingSet(np.array(rows, dtype=np.float64).reshape(len(rows), -1),
                            str(path), tuple(ids))
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    n, dim = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 4 * n * dim
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {n}x{dim}, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n, dim)
    return EmbeddingSet(data.astype(np.float64), str(path))


# --- toy embedding --------------------------------------------------------------------

def pixel_embedding(img: "ImageRaster | np.ndarray", grid: int = 4) -> np.ndarray:
    """Block means per channel plus block mean gradient magnitude.

    The image is split into a ``grid x grid`` layout; the vector holds the
    mean of each block for every channel, followed by the mean absolute
    finite-difference gradient of the channel-averaged image per block.
    Sensitive both to global tone (haze) and to high-frequency energy (noise).
    """
    data = img.data if isinstance(img, ImageRaster) else np.asarray(img, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    h, w, c = data.shape
    ys = np.linspace(0, h, grid + 1).astype(int)
    xs = np.linspace(0, w, grid + 1).astype(int)
    gray = data.mean(axis=2)
    grad = np.zeros_like(gray)
    grad[:, :-1] += np.abs(np.diff(gray, axis=1))
    grad[:-1, :] += np.abs(np.diff(gray, axis=0))
    feats = []
    for ch in range(c):
        for i in range(grid):
            for j in range(grid):
                feats.append(data[ys[i]:ys[i + 1], xs[j]:xs[j + 1], ch].mean())
    for i in range(grid):
        for j in range(grid):
            feats.append(grad[ys[i]:ys[i + 1], xs[j]:xs[j + 1]].mean())
    return np.array(feats)


def embed_images(images: Sequence, grid: int = 4, source: str = "") -> EmbeddingSet:
    return EmbeddingSet(np.stack([pixel_embedding(im, grid) for im in images]), source)
