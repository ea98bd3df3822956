"""Visual vocabulary, VLAD aggregation, and PCA projection.

A vocabulary is k cluster centers fit with Lloyd's algorithm (k-means++
seeding). A VLAD descriptor hard-assigns each local descriptor to its
nearest center, sums the residuals per cluster, concatenates the k blocks
in center order and L2-normalizes once globally. An image with no usable
local descriptors aggregates to the all-zero sentinel vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError

_VOC_MAGIC = b"VOC1"
_PCA_MAGIC = b"PCA1"
_VDB_MAGIC = b"VDB1"


@dataclass(frozen=True)
class Vocabulary:
    """k cluster centers of dimension d, row per center."""

    centers: np.ndarray

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class VladDescriptor:
    """Aggregated image descriptor; unit norm unless it is the zero sentinel."""

    vector: np.ndarray
    projected: bool = False
    source_id: str = ""

    @property
    def is_sentinel(self) -> bool:
        return not np.any(self.vector)


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus an orthonormal basis, one row per component."""

    mean: np.ndarray
    basis: np.ndarray

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def assign_to_centers(descriptors: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center per row (L2; ties go to the lowest index)."""
    x2 = (descriptors * descriptors).sum(axis=1)[:, None]
    c2 = (centers * centers).sum(axis=1)[None, :]
    d2 = x2 + c2 - 2.0 * (descriptors @ centers.T)
    return np.argmin(d2, axis=1)


def kmeans_fit(
    descriptors: np.ndarray,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
) -> Vocabulary:
    """Lloyd's algorithm with k-means++ initialization from a seeded PRNG.

    Terminates when assignments stabilize or after ``max_iters``. A cluster
    that loses all members keeps its previous center, so within-cluster SSE
    never increases.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"descriptors must be (n, d), got shape {x.shape}")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distinct = np.unique(x, axis=0).shape[0]
    if distinct < k:
        raise ValueError(f"need at least {k} distinct descriptors, got {distinct}")

    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        probs = d2 / d2.sum()
        centers[i] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))

    assign = assign_to_centers(x, centers)
    for _ in range(max_iters):
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
        new_assign = assign_to_centers(x, centers)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return Vocabulary(centers=centers)


def kmeans_sse(descriptors: np.ndarray, vocab: Vocabulary) -> float:
    """Within-cluster sum of squared distances under nearest assignment."""
    x = np.asarray(descriptors, dtype=np.float64)
    assign = assign_to_centers(x, vocab.centers)
    diffs = x - vocab.centers[assign]
    return float((diffs * diffs).sum())


def vlad_aggregate(
    descriptors: np.ndarray | Sequence[np.ndarray],
    vocab: Vocabulary,
    intra_norm: bool = False,
    source_id: str = "",
) -> VladDescriptor:
    """Aggregate local descriptors into one globally normalized VLAD vector.

    ``intra_norm`` additionally normalizes each per-cluster block before the
    global normalization (ablation switch; off by default).
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.size == 0:
        flat = np.zeros(vocab.k * vocab.dim, dtype=np.float64)
        return VladDescriptor(vector=flat, source_id=source_id)
    if x.ndim != 2 or x.shape[1] != vocab.dim:
        raise ValueError(
            f"descriptors must be (n, {vocab.dim}), got shape {x.shape}"
        )
    assign = assign_to_centers(x, vocab.centers)
    agg = np.zeros((vocab.k, vocab.dim), dtype=np.float64)
    np.add.at(agg, assign, x)
    counts = np.bincount(assign, minlength=vocab.k).astype(np.float64)
    agg -= counts[:, None] * vocab.centers
    if intra_norm:
        norms = np.linalg.norm(agg, axis=1, keepdims=True)
        np.divide(agg, norms, out=agg, where=norms > 0)
    flat = agg.reshape(-1)
    norm = np.linalg.norm(flat)
    if norm > 0:
        flat = flat / norm
    return VladDescriptor(vector=flat, source_id=source_id)


def pca_fit(samples: np.ndarray, p: int) -> PcaModel:
    """Top-p principal axes of the mean-centered samples.

    Computed via SVD of the centered sample matrix (the eigendecomposition
    of the covariance). Each basis row is sign-fixed so its first nonzero
    component is positive.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"samples must be (n, d), got shape {x.shape}")
    n, d = x.shape
    if p < 1 or p > d:
        raise ValueError(f"p must be in [1, {d}], got {p}")
    if n <= p:
        raise ValueError(f"need more than {p} samples, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:p].copy()
    for row in basis:
        nonzero = np.nonzero(np.abs(row) > 1e-12)[0]
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    return PcaModel(mean=mean, basis=basis)


def pca_project(v: np.ndarray, model: PcaModel) -> np.ndarray:
    """Project onto the basis and re-normalize to unit length.

    The zero vector (and anything that projects to zero) stays zero, keeping
    the empty-image sentinel intact.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.dim,):
        raise ValueError(f"vector has dimension {v.shape}, model expects ({model.dim},)")
    y = model.basis @ (v - model.mean)
    norm = np.linalg.norm(y)
    if norm > 1e-12:
        return y / norm
    return np.zeros(model.p, dtype=np.float64)


def project_descriptor(desc: VladDescriptor, model: PcaModel) -> VladDescriptor:
    if desc.is_sentinel:
        return VladDescriptor(
            vector=np.zeros(model.p), projected=True, source_id=desc.source_id
        )
    return VladDescriptor(
        vector=pca_project(desc.vector, model),
        projected=True,
        source_id=desc.source_id,
    )


# ---------------------------------------------------------------------------
# Binary file formats (all little-endian, f32 payloads)
# ---------------------------------------------------------------------------


def write_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(_VOC_MAGIC)
        f.write(struct.pack("<II", vocab.k, vocab.dim))
        f.write(np.ascontiguousarray(vocab.centers, dtype="<f4").tobytes())


def read_vocabulary(path: str | Path) -> Vocabulary:
    raw = Path(path).read_bytes()
    if raw[:4] != _VOC_MAGIC:
        raise DataError(f"{path}: bad vocabulary magic {raw[:4]!r}")
    k, d = struct.unpack_from("<II", raw, 4)
    expected = 12 + 4 * k * d
    if len(raw) != expected:
        raise DataError(f"{path}: vocabulary size mismatch")
    centers = np.frombuffer(raw, dtype="<f4", count=k * d, offset=12)
    return Vocabulary(centers=centers.astype(np.float64).reshape(k, d))


def write_pca(model: PcaModel, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(_PCA_MAGIC)
        f.write(struct.pack("<II", model.p, model.dim))
        f.write(np.ascontiguousarray(model.mean, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(model.basis, dtype="<f4").tobytes())


def read_pca(path: str | Path) -> PcaModel:
    raw = Path(path).read_bytes()
    if raw[:4] != _PCA_MAGIC:
        raise DataError(f"{path}: bad PCA magic {raw[:4]!r}")
    p, d = struct.unpack_from("<II", raw, 4)
    expected = 12 + 4 * d + 4 * p * d
    if len(raw) != expected:
        raise DataError(f"{path}: PCA file size mismatch")
    mean = np.frombuffer(raw, dtype="<f4", count=d, offset=12).astype(np.float64)
    basis = np.frombuffer(raw, dtype="<f4", count=p * d, offset=12 + 4 * d)
    return PcaModel(mean=mean, basis=basis.astype(np.float64).reshape(p, d))


def write_descriptor_db(entries: Sequence[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Write (id, vector) pairs; all vectors must share one dimension."""
    dims = {np.asarray(v).reshape(-1).shape[0] for _, v in entries}
    if len(dims) > 1:
        raise ValueError(f"descriptor DB entries disagree on dimension: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "wb") as f:
        f.write(_VDB_MAGIC)
        f.write(struct.pack("<II", len(entries), dim))
        for name, vec in entries:
            blob = name.encode("utf-8")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def read_descriptor_db(path: str | Path) -> list[tuple[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != _VDB_MAGIC:
        raise DataError(f"{path}: bad descriptor DB magic {raw[:4]!r}")
    count, dim = struct.unpack_from("<II", raw, 4)
    offset = 12
    entries = []
    seen = set()
    for _ in range(count):
        if offset + 4 > len(raw):
            raise DataError(f"{path}: truncated descriptor DB")
        (name_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        if offset + 4 * dim > len(raw):
            raise DataError(f"{path}: truncated descriptor DB")
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
        if name in seen:
            raise DataError(f"{path}: duplicate descriptor id {name!r}")
        seen.add(name)
        entries.append((name, vec.astype(np.float64)))
    if offset != len(raw):
        raise DataError(f"{path}: trailing bytes in descriptor DB")
    return entries


# ---------------------------------------------------------------------------
# Estimator wrappers
# ---------------------------------------------------------------------------


class VladEncoder(TransformerMixin, BaseEstimator):
    """fit: build a k-center vocabulary; transform: per-image VLAD matrix."""

    def __init__(self, k: int = 16, max_iters: int = 100, seed: int = 0, intra_norm: bool = False):
        self.k = k
        self.max_iters = max_iters
        self.seed = seed
        self.intra_norm = intra_norm

    def fit(self, X: Sequence[np.ndarray], y=None):
        stacked = np.vstack([np.asarray(d) for d in X if np.asarray(d).size])
        self.vocabulary_ = kmeans_fit(stacked, self.k, max_iters=self.max_iters, seed=self.seed)
        return self

    def transform(self, X: Sequence[np.ndarray]) -> np.ndarray:
        rows = [
            vlad_aggregate(d, self.vocabulary_, intra_norm=self.intra_norm).vector
            for d in X
        ]
        return np.stack(rows)


class DescriptorPca(TransformerMixin, BaseEstimator):
    """fit: principal axes of descriptor rows; transform: unit projections."""

    def __init__(self, n_components: int = 64):
        self.n_components = n_components

    def fit(self, X: np.ndarray, y=None):
        self.model_ = pca_fit(np.asarray(X), self.n_components)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return np.stack([pca_project(row, self.model_) for row in np.asarray(X)])
