"""Brute-force nearest-neighbor retrieval over image descriptors.

Exact L2 search over a small immutable index; ties break toward the
lexicographically smallest reference id (entries are kept id-sorted, so
argmin's first-hit rule does the tie-breaking). Dual evaluation queries
twice, once with the translation stage wrapped in a horizontal
flip/unflip bracket, and keeps the closer match.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DataError
from .geoeval import Pose
from .imgproc import hflip

MATCH_CSV_HEADER = ["query_id", "reference_id", "distance", "used_flip"]


@dataclass(frozen=True)
class Match:
    query_id: str
    reference_id: str
    distance: float
    used_flip: bool = False


@dataclass
class RetrievalIndex:
    """Id-sorted reference descriptors, optionally carrying poses."""

    ids: list[str]
    vectors: np.ndarray
    poses: list[Pose | None]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def build_index(
    db: Sequence[tuple[str, np.ndarray]],
    poses: Mapping[str, Pose] | None = None,
) -> RetrievalIndex:
    """Index (id, descriptor) entries, joining a pose per id when given.

    With a pose table present every id must resolve; entries are sorted by
    id so queries are order-independent and tie-breaks deterministic.
    """
    seen = set()
    for name, _ in db:
        if name in seen:
            raise DataError(f"duplicate reference id {name!r}")
        seen.add(name)
    entries = sorted(db, key=lambda e: e[0])
    ids = [name for name, _ in entries]
    if not entries:
        return RetrievalIndex(ids=[], vectors=np.zeros((0, 0)), poses=[])
    dims = {np.asarray(v).reshape(-1).shape[0] for _, v in entries}
    if len(dims) != 1:
        raise DataError(f"descriptor dimensions disagree: {sorted(dims)}")
    vectors = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for _, v in entries])
    pose_list: list[Pose | None]
    if poses is None:
        pose_list = [None] * len(ids)
    else:
        missing = [name for name in ids if name not in poses]
        if missing:
            raise DataError(f"no pose for reference id {missing[0]!r}")
        pose_list = [poses[name] for name in ids]
    return RetrievalIndex(ids=ids, vectors=vectors, poses=pose_list)


def query(index: RetrievalIndex, qdesc: np.ndarray, query_id: str = "") -> Match:
    """Exact nearest reference under L2 distance."""
    if len(index) == 0:
        raise RuntimeError("cannot query an empty index")
    q = np.asarray(qdesc, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dimension {q.shape[0]} != index dimension {index.dim}")
    diffs = index.vectors - q
    dists = np.sqrt((diffs * diffs).sum(axis=1))
    best = int(np.argmin(dists))
    return Match(
        query_id=query_id,
        reference_id=index.ids[best],
        distance=float(dists[best]),
        used_flip=False,
    )


def query_dual(
    index: RetrievalIndex,
    q_img: np.ndarray,
    featurize: Callable[[np.ndarray], np.ndarray],
    translate: Callable[[np.ndarray], np.ndarray] | None = None,
    query_id: str = "",
) -> Match:
    """Query with the image and with its flip-translate-unflip counterpart.

    The flip bracket wraps the translation stage only, never the
    featurization, so descriptors always come from upright images. Without
    a translation stage the bracket collapses to the identity. Ties favor
    the unflipped result.
    """
    if translate is None:
        img_plain = q_img
        img_flip = q_img
    else:
        img_plain = translate(q_img)
        img_flip = hflip(translate(hflip(q_img)))
    plain = query(index, featurize(img_plain), query_id=query_id)
    flipped = query(index, featurize(img_flip), query_id=query_id)
    if flipped.distance < plain.distance:
        return Match(
            query_id=query_id,
            reference_id=flipped.reference_id,
            distance=flipped.distance,
            used_flip=True,
        )
    return plain


# ---------------------------------------------------------------------------
# Match CSV format
# ---------------------------------------------------------------------------


def write_matches(matches: Sequence[Match], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MATCH_CSV_HEADER)
        for m in matches:
            writer.writerow([m.query_id, m.reference_id, repr(m.distance), int(m.used_flip)])


def read_matches(path: str | Path) -> list[Match]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty match file") from None
        if [h.strip() for h in header] != MATCH_CSV_HEADER:
            raise DataError(f"{path}: bad match header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                out.append(
                    Match(
                        query_id=row[0],
                        reference_id=row[1],
                        distance=float(row[2]),
                        used_flip=bool(int(row[3])),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad match row: {exc}") from None
    return out


class PlaceRetriever(BaseEstimator):
    """fit: index reference descriptors; predict: nearest reference ids."""

    def __init__(self):
        pass

    def fit(self, X: np.ndarray, ids: Sequence[str] | None = None, poses: Mapping[str, Pose] | None = None):
        X = np.asarray(X, dtype=np.float64)
        if ids is None:
            width = len(str(max(len(X) - 1, 0)))
            ids = [f"{i:0{width}d}" for i in range(len(X))]
        self.index_ = build_index(list(zip(ids, X)), poses=poses)
        return self

    def match(self, X: np.ndarray, query_ids: Sequence[str] | None = None) -> list[Match]:
        X = np.asarray(X, dtype=np.float64)
        if query_ids is None:
            query_ids = [str(i) for i in range(len(X))]
        return [query(self.index_, row, query_id=qid) for row, qid in zip(X, query_ids)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([m.reference_id for m in self.match(X)])
