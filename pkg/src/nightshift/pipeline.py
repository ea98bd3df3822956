"""Composition helpers tying extraction, aggregation, and retrieval together.

The CLI and the test suite both drive these, so the command-line surface
stays a thin argument-parsing shell.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .dataset import DatasetManifest
from .features import extract_dense, stack_vectors
from .imgproc import hist_equalize, read_image
from .retrieval import Match, RetrievalIndex, query, query_dual
from .vlad import PcaModel, Vocabulary, kmeans_fit, pca_fit, project_descriptor, vlad_aggregate


def featurize_image(
    img: np.ndarray,
    vocab: Vocabulary,
    pca: PcaModel | None = None,
    cfg: RunConfig | None = None,
    source_id: str = "",
) -> np.ndarray:
    """Image -> VLAD vector (optionally PCA-projected) under the config."""
    cfg = cfg or RunConfig()
    descs = extract_dense(img, scales=cfg.sift_scales, stride=cfg.sift_stride)
    vd = vlad_aggregate(
        stack_vectors(descs), vocab, intra_norm=cfg.intra_norm, source_id=source_id
    )
    if pca is not None:
        vd = project_descriptor(vd, pca)
    return vd.vector


def featurize_manifest(
    manifest: DatasetManifest,
    vocab: Vocabulary,
    pca: PcaModel | None = None,
    cfg: RunConfig | None = None,
    transform: Callable[[np.ndarray], np.ndarray] | None = None,
    log: Callable[[str], None] | None = None,
) -> list[tuple[str, np.ndarray]]:
    """Featurize every image in a manifest, id order, optional pre-transform."""
    out = []
    for i, image_id in enumerate(manifest.ids):
        img = read_image(manifest.paths[image_id])
        if transform is not None:
            img = transform(img)
        out.append((image_id, featurize_image(img, vocab, pca, cfg, source_id=image_id)))
        if log is not None and (i + 1) % 25 == 0:
            log(f"featurized {i + 1}/{len(manifest)} images")
    return out


def build_vocabulary(
    manifest: DatasetManifest,
    cfg: RunConfig,
    log: Callable[[str], None] | None = None,
) -> Vocabulary:
    """k-means vocabulary over dense descriptors of every manifest image."""
    stacks = []
    for i, image_id in enumerate(manifest.ids):
        img = read_image(manifest.paths[image_id])
        stacks.append(
            stack_vectors(extract_dense(img, scales=cfg.sift_scales, stride=cfg.sift_stride))
        )
        if log is not None and (i + 1) % 25 == 0:
            log(f"extracted descriptors for {i + 1}/{len(manifest)} images")
    all_descs = np.vstack([s for s in stacks if s.size])
    if log is not None:
        log(f"clustering {all_descs.shape[0]} descriptors into {cfg.vocab_k} centers")
    return kmeans_fit(all_descs, cfg.vocab_k, max_iters=cfg.kmeans_iters, seed=cfg.seed)


def fit_projection(
    entries: Sequence[tuple[str, np.ndarray]],
    cfg: RunConfig,
) -> PcaModel:
    """PCA model over already-aggregated VLAD rows."""
    rows = np.stack([v for _, v in entries])
    return pca_fit(rows, cfg.pca_dim)


def run_queries(
    index: RetrievalIndex,
    manifest: DatasetManifest,
    featurize: Callable[[np.ndarray], np.ndarray],
    translate_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    dual: bool = False,
    hist_eq: bool = False,
    log: Callable[[str], None] | None = None,
) -> list[Match]:
    """Match every query image against the index, honoring the eval flags.

    Histogram equalization (when enabled) applies to the raw query before
    any translation. With ``dual`` the horizontal flip bracket wraps the
    translation stage and the closer of the two matches wins.
    """
    matches = []
    for i, image_id in enumerate(manifest.ids):
        img = read_image(manifest.paths[image_id])
        if hist_eq:
            img = hist_equalize(img)
        if dual:
            m = query_dual(index, img, featurize, translate=translate_fn, query_id=image_id)
        else:
            if translate_fn is not None:
                img = translate_fn(img)
            m = query(index, featurize(img), query_id=image_id)
        matches.append(m)
        if log is not None and (i + 1) % 10 == 0:
            log(f"matched {i + 1}/{len(manifest)} queries")
    return matches
