"""Dense upright RootSIFT extraction on a regular grid.

The front end mirrors the classic dense-descriptor recipe: convert to
grayscale, downsample 2x by pixel skipping, then place 4x4-cell patches on
a regular grid at several scales and histogram magnitude-weighted gradient
orientations into 8 bins per cell. Descriptors are square-root normalized
(RootSIFT) so Euclidean comparisons approximate Hellinger distance.

Conventions (deliberately simple, deterministic):
  * upright patches, no dominant-orientation estimation;
  * hard orientation-bin assignment, no trilinear interpolation;
  * ``scale`` is the spatial cell size in pixels on the half-resolution
    grid, so a patch covers 4*scale pixels there (8*scale at full size);
  * positions are reported in original-image coordinates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError
from .imgproc import downsample_skip, to_grayscale, xy_gradients
from .validate import check_image

N_CELLS = 4
N_BINS = 8
DESCRIPTOR_DIM = N_CELLS * N_CELLS * N_BINS
ENERGY_EPS = 1e-6
SIFT_CLAMP = 0.2

DEFAULT_SCALES = (4, 6, 8, 10)
DEFAULT_STRIDE = 4

_DUMP_MAGIC = b"DSF1"


@dataclass(frozen=True)
class LocalDescriptor:
    """A 128-D RootSIFT vector with its grid position and extraction scale.

    ``x``/``y`` are the patch center on the original image (column, row);
    ``scale`` is the cell size on the half-resolution grid.
    """

    vector: np.ndarray
    x: float
    y: float
    scale: float


def rootsift(v: np.ndarray) -> np.ndarray:
    """L1-normalize a non-negative vector and take the component-wise root.

    The result has unit L2 norm.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if (v < 0).any():
        raise ValueError("rootsift requires non-negative components")
    l1 = v.sum()
    if l1 == 0:
        raise ValueError("rootsift is undefined for the all-zero vector")
    return np.sqrt(v / l1)


def _orientation_integrals(gray: np.ndarray) -> np.ndarray:
    """Per-orientation-bin integral images of gradient magnitude.

    Returns (N_BINS, H+1, W+1) summed-area tables; the sum of magnitude in
    bin b over rows [r0,r1) x cols [c0,c1) is the usual four-corner lookup.
    """
    g = xy_gradients(gray)
    gx = g.gx[:, :, 0]
    gy = g.gy[:, :, 0]
    mag = np.sqrt(gx * gx + gy * gy)
    theta = np.arctan2(gy, gx)
    phi = np.where(theta < 0, theta + 2.0 * np.pi, theta)
    bins = np.minimum((phi / (2.0 * np.pi / N_BINS)).astype(np.int64), N_BINS - 1)
    h, w = mag.shape
    tables = np.zeros((N_BINS, h + 1, w + 1), dtype=np.float64)
    for b in range(N_BINS):
        weighted = np.where(bins == b, mag, 0.0)
        tables[b, 1:, 1:] = weighted.cumsum(axis=0).cumsum(axis=1)
    return tables


def _cell_histograms(tables: np.ndarray, cys: np.ndarray, cxs: np.ndarray, scale: int) -> np.ndarray:
    """Raw 128-bin histograms for every (cy, cx) grid combination.

    Output rows are ordered cy-major then cx; within a row the layout is
    cell-row, cell-col, orientation bin.
    """
    edges = np.arange(-2 * scale, 2 * scale + 1, scale)
    ry = cys[:, None] + edges[None, :]
    rx = cxs[:, None] + edges[None, :]
    corners = tables[:, ry[:, None, :, None], rx[None, :, None, :]]
    cells = (
        corners[..., 1:, 1:]
        - corners[..., :-1, 1:]
        - corners[..., 1:, :-1]
        + corners[..., :-1, :-1]
    )
    # Summed-area subtraction can cancel to tiny negatives; bins are sums of
    # magnitudes and must stay non-negative for the RootSIFT square root.
    np.maximum(cells, 0.0, out=cells)
    hists = np.transpose(cells, (1, 2, 3, 4, 0))
    return hists.reshape(len(cys) * len(cxs), DESCRIPTOR_DIM)


def _sift_tail(hists: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize raw histograms into unit SIFT vectors.

    Returns (vectors, keep_mask); rows with pre-normalization L2 energy
    below ENERGY_EPS are dropped from ``vectors``.
    """
    energy = np.linalg.norm(hists, axis=1)
    keep = energy >= ENERGY_EPS
    v = hists[keep] / energy[keep, None]
    v = np.minimum(v, SIFT_CLAMP)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v, keep


def sift_at(gray: np.ndarray, x: int, y: int, scale: int) -> np.ndarray | None:
    """Upright SIFT vector for the 4*scale patch centered at (x, y).

    Returns None when the patch has no usable gradient energy. The caller
    is responsible for any RootSIFT mapping on top.
    """
    gray = check_image(gray, channels=1)
    h, w = gray.shape[:2]
    scale = int(scale)
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    half = 2 * scale
    if x - half < 0 or x + half > w or y - half < 0 or y + half > h:
        raise ValueError(
            f"patch of size {4 * scale} at ({x}, {y}) exceeds image of size {h}x{w}"
        )
    tables = _orientation_integrals(gray)
    hists = _cell_histograms(tables, np.asarray([y]), np.asarray([x]), scale)
    vectors, keep = _sift_tail(hists)
    if not keep[0]:
        return None
    return vectors[0]


def extract_dense(
    img: np.ndarray,
    scales: Sequence[int] = DEFAULT_SCALES,
    stride: int = DEFAULT_STRIDE,
) -> list[LocalDescriptor]:
    """Dense RootSIFT over a regular grid of a 3-channel image.

    The image is converted to grayscale and skip-downsampled 2x first.
    Descriptors are emitted scale-major, then in row-major grid order, so
    extracting with a prefix of ``scales`` yields a prefix of the result.
    """
    img = check_image(img, channels=3)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    height, width = img.shape[:2]
    for s in scales:
        if 4 * int(s) > min(height, width) / 2:
            raise ValueError(
                f"scale {s} too large: patch {4 * int(s)} exceeds half of "
                f"min(H, W) = {min(height, width)}"
            )
    small = downsample_skip(to_grayscale(img))
    h, w = small.shape[:2]
    tables = _orientation_integrals(small)

    out: list[LocalDescriptor] = []
    for s in scales:
        s = int(s)
        half = 2 * s
        cys = np.arange(half, h - half + 1, stride)
        cxs = np.arange(half, w - half + 1, stride)
        if len(cys) == 0 or len(cxs) == 0:
            continue
        hists = _cell_histograms(tables, cys, cxs, s)
        vectors, keep = _sift_tail(hists)
        vectors = np.sqrt(vectors / vectors.sum(axis=1, keepdims=True))
        grid_y, grid_x = np.meshgrid(cys, cxs, indexing="ij")
        kept_y = grid_y.ravel()[keep]
        kept_x = grid_x.ravel()[keep]
        for vec, gx_, gy_ in zip(vectors, kept_x, kept_y):
            out.append(
                LocalDescriptor(vector=vec, x=2.0 * gx_, y=2.0 * gy_, scale=float(s))
            )
    return out


def stack_vectors(descriptors: Sequence[LocalDescriptor]) -> np.ndarray:
    """Stack descriptor vectors into an (n, 128) array (empty-safe)."""
    if not descriptors:
        return np.zeros((0, DESCRIPTOR_DIM), dtype=np.float64)
    return np.stack([d.vector for d in descriptors])


# ---------------------------------------------------------------------------
# Debug dump format: "DSF1", u32 count, then {f32 x, y, scale, f32[128]}.
# ---------------------------------------------------------------------------


def write_descriptors(descriptors: Sequence[LocalDescriptor], path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(_DUMP_MAGIC)
        f.write(struct.pack("<I", len(descriptors)))
        for d in descriptors:
            f.write(struct.pack("<fff", d.x, d.y, d.scale))
            f.write(np.ascontiguousarray(d.vector, dtype="<f4").tobytes())


def read_descriptors(path: str | Path) -> list[LocalDescriptor]:
    raw = Path(path).read_bytes()
    if raw[:4] != _DUMP_MAGIC:
        raise DataError(f"{path}: bad descriptor dump magic {raw[:4]!r}")
    (count,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    record = 12 + 4 * DESCRIPTOR_DIM
    if len(raw) != offset + count * record:
        raise DataError(f"{path}: truncated descriptor dump")
    out = []
    for _ in range(count):
        x, y, scale = struct.unpack_from("<fff", raw, offset)
        vec = np.frombuffer(raw, dtype="<f4", count=DESCRIPTOR_DIM, offset=offset + 12)
        out.append(
            LocalDescriptor(vector=vec.astype(np.float64), x=x, y=y, scale=scale)
        )
        offset += record
    return out


class DenseRootSift(TransformerMixin, BaseEstimator):
    """Stateless transformer: images -> per-image (n_i, 128) RootSIFT arrays."""

    def __init__(self, scales: Sequence[int] = DEFAULT_SCALES, stride: int = DEFAULT_STRIDE):
        self.scales = scales
        self.stride = stride

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: Sequence[np.ndarray]) -> list[np.ndarray]:
        return [
            stack_vectors(extract_dense(img, scales=self.scales, stride=self.stride))
            for img in X
        ]
