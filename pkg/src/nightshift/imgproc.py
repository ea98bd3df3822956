"""Deterministic image primitives.

These are the reference (non-differentiable) implementations shared by the
descriptor front end, the discriminator feature taps, and the baselines.
All operations are pure, preserve dtype, and use replicate padding for
convolutions so border statistics stay flat.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .validate import check_image

# ITU-R BT.601 luminance weights.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GradientPair:
    """x/y gradients of a single image, same spatial size, 1 channel each."""

    gx: np.ndarray
    gy: np.ndarray


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luminance of a 3-channel image: 0.299 R + 0.587 G + 0.114 B."""
    img = check_image(img, channels=3)
    w = np.asarray(LUMA_WEIGHTS, dtype=img.dtype)
    gray = img @ w
    return gray[:, :, None]


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel with odd side length."""
    if size % 2 == 0 or size < 1:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def _convolve_replicate(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate one channel with a 2-D kernel under replicate padding."""
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    padded = np.pad(channel, ((py, py), (px, px)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", windows, kernel.astype(channel.dtype))


def gaussian_blur(img: np.ndarray, kernel_size: int = 5, sigma: float = 3.0) -> np.ndarray:
    """Per-channel Gaussian blur with replicate padding; output size unchanged."""
    img = check_image(img)
    kernel = gaussian_kernel(kernel_size, sigma)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = _convolve_replicate(img[:, :, c], kernel)
    return out


def xy_gradients(img: np.ndarray) -> GradientPair:
    """Horizontal/vertical gradients of a 1-channel image.

    gx is the correlation with a [-1 0 1] row kernel, gy with its transpose,
    both under replicate padding: gx(y,x) = I(y,x+1) - I(y,x-1).
    """
    img = check_image(img, channels=1)
    chan = img[:, :, 0]
    px = np.pad(chan, ((0, 0), (1, 1)), mode="edge")
    py = np.pad(chan, ((1, 1), (0, 0)), mode="edge")
    gx = px[:, 2:] - px[:, :-2]
    gy = py[2:, :] - py[:-2, :]
    return GradientPair(gx=gx[:, :, None], gy=gy[:, :, None])


def downsample_skip(img: np.ndarray) -> np.ndarray:
    """Downsample by 2x keeping every other pixel: out(y,x) = in(2y,2x)."""
    img = check_image(img)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2 to downsample, got {img.shape[:2]}")
    return img[::2, ::2, :]


def grad_mag_orient(g: GradientPair) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and orientation (radians, (-pi, pi], 0 at zero gradient)."""
    gx = check_image(g.gx, channels=1)
    gy = check_image(g.gy, channels=1)
    if gx.shape != gy.shape:
        raise ValueError(f"gradient pair shapes differ: {gx.shape} vs {gy.shape}")
    mag = np.sqrt(gx * gx + gy * gy)
    orient = np.arctan2(gy, gx)
    orient[(gx == 0) & (gy == 0)] = 0.0
    # arctan2 yields -pi for (negative, -0); fold onto the (-pi, pi] convention.
    orient[orient == -np.pi] = np.pi
    return mag, orient


def hist_equalize(img: np.ndarray) -> np.ndarray:
    """Per-channel histogram equalization on a 256-bin quantization.

    Standard CDF remap (cdf(v) - cdf_min) / (N - cdf_min); a channel with a
    single distinct level is returned unchanged.
    """
    img = check_image(img)
    out = np.empty_like(img)
    n = img.shape[0] * img.shape[1]
    for c in range(img.shape[2]):
        chan = img[:, :, c]
        levels = np.clip(np.rint(chan * 255.0), 0, 255).astype(np.int64)
        hist = np.bincount(levels.ravel(), minlength=256)
        cdf = np.cumsum(hist)
        cdf_min = cdf[np.nonzero(hist)[0][0]]
        if cdf_min == n:
            out[:, :, c] = chan
            continue
        remap = (cdf - cdf_min) / float(n - cdf_min)
        out[:, :, c] = remap[levels].astype(img.dtype)
    return out


def hflip(img: np.ndarray) -> np.ndarray:
    """Reverse column order. Involution."""
    img = check_image(img)
    return img[:, ::-1, :]


# ---------------------------------------------------------------------------
# 8-bit image I/O (PNG and binary PPM), values mapped linearly to [0, 1].
# ---------------------------------------------------------------------------


def read_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit RGB image (PNG or PPM) as an (H, W, 3) float64 in [0, 1]."""
    from .errors import DataError

    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return data / 255.0


def write_image(img: np.ndarray, path: str | Path) -> None:
    """Write an (H, W, C) float image in [0, 1] as 8-bit PNG or PPM (P6)."""
    img = check_image(img)
    path = Path(path)
    data = np.clip(img, 0.0, 1.0)
    bytes_ = np.rint(data * 255.0).astype(np.uint8)
    if bytes_.shape[2] == 1:
        bytes_ = np.repeat(bytes_, 3, axis=2)
    pil = PILImage.fromarray(bytes_, mode="RGB")
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        pil.save(path, format="PPM")
    elif suffix == ".png":
        pil.save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image format {suffix!r} (use .png or .ppm)")
