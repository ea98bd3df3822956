"""Input validation helpers.

Images everywhere in this package are channel-last float arrays of shape
(H, W, C) with C in {1, 3}. Values are in [0, 1] "at rest"; the GAN works
on a [-1, 1] view at its own boundary and converts back before anything
else sees the data.
"""

from __future__ import annotations

import numpy as np


def check_image(img: np.ndarray, channels: int | None = None, name: str = "image") -> np.ndarray:
    """Validate an (H, W, C) float image and return it as an ndarray.

    ``channels`` pins the channel count when the caller requires one.
    """
    img = np.asarray(img)
    if img.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, C), got {img.shape}")
    if img.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {img.shape[2]}")
    if channels is not None and img.shape[2] != channels:
        raise ValueError(f"{name} must have {channels} channel(s), got {img.shape[2]}")
    if not np.issubdtype(img.dtype, np.floating):
        raise ValueError(f"{name} must be floating point, got dtype {img.dtype}")
    if not np.isfinite(img).all():
        raise ValueError(f"{name} contains non-finite values")
    return img


def check_vector(v: np.ndarray, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate a 1-D float vector, optionally of fixed dimension."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} contains non-finite values")
    return v
