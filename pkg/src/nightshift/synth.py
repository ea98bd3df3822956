"""Procedural synthetic day/night localization dataset.

A long textured "street" strip is rendered once per seed: sky gradient,
a building skyline with per-building stripe textures and floor lines, and
a patterned ground band. A camera pose (distance along the street plus a
small smooth heading) selects a window into the strip; references sample
the street at regular spacing, queries fall between references with pose
jitter.

Night counterparts of the query views are produced by a color-channel
mixing matrix, per-channel gain and gamma compression (dark, blue-heavy),
and additive warm bright spots at per-image random positions. The color
part is spatially uniform and invertible, so a translation model can
recover it; the bright spots are not recoverable and keep the comparison
against the raw-night baseline meaningful rather than trivially perfect.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DatasetManifest, ingest
from .geoeval import Pose, write_pose_csv
from .imgproc import write_image

IMG_W = 96
IMG_H = 72
PX_PER_M = 12.0
HORIZON_Y = 44
PAN_PX_PER_RAD = 70.0
_MARGIN = 24

_PALETTE = np.array(
    [
        (0.85, 0.25, 0.20),
        (0.20, 0.70, 0.30),
        (0.25, 0.35, 0.85),
        (0.85, 0.75, 0.25),
        (0.75, 0.30, 0.75),
        (0.25, 0.75, 0.75),
        (0.80, 0.50, 0.20),
        (0.55, 0.58, 0.62),
    ]
)

_NIGHT_MIX = np.array(
    [
        (0.55, 0.35, 0.10),
        (0.10, 0.55, 0.35),
        (0.08, 0.22, 0.70),
    ]
)
_NIGHT_GAIN = np.array([0.20, 0.24, 0.42])
_NIGHT_GAMMA = np.array([2.6, 2.3, 1.8])
_SPOT_TINT = np.array([1.00, 0.93, 0.78])


def _render_world(rng: np.random.Generator, length: int) -> np.ndarray:
    """Render the full street strip as an (IMG_H, length, 3) float image."""
    world = np.zeros((IMG_H, length, 3))
    xs = np.arange(length)
    ys = np.arange(IMG_H)

    # Sky: vertical gradient with a slow horizontal color drift.
    top = np.array([0.50, 0.65, 0.92])
    bottom = np.array([0.86, 0.90, 0.98])
    frac = (ys[:HORIZON_Y] / max(HORIZON_Y - 1, 1))[:, None, None]
    world[:HORIZON_Y] = top + (bottom - top) * frac
    drift = 0.06 * np.sin(2.0 * np.pi * xs / 157.0)
    world[:HORIZON_Y, :, 0] += drift[None, :]
    world[:HORIZON_Y, :, 1] += 0.04 * np.sin(2.0 * np.pi * xs / 211.0 + 1.3)[None, :]

    # Ground: checkered pavement whose colors change district by district.
    district = (xs // 48).astype(np.int64)
    ca = _PALETTE[(district * 3 + 1) % len(_PALETTE)] * 0.9
    cb = _PALETTE[(district * 5 + 4) % len(_PALETTE)] * 0.7 + 0.2
    checker = ((xs[None, :] // 6 + ys[HORIZON_Y:, None] // 4) % 2).astype(bool)
    ground = np.where(checker[:, :, None], ca[None, :, :], cb[None, :, :])
    shade = (0.75 + 0.25 * (ys[HORIZON_Y:] - HORIZON_Y) / (IMG_H - HORIZON_Y))[:, None, None]
    world[HORIZON_Y:] = ground * shade

    # Buildings: piecewise facades with vertical stripes and floor lines.
    x = 0
    while x < length:
        width = int(rng.integers(18, 42))
        height = int(rng.uniform(0.30, 0.85) * HORIZON_Y)
        base_idx = int(rng.integers(len(_PALETTE)))
        stripe_idx = int((base_idx + rng.integers(1, len(_PALETTE))) % len(_PALETTE))
        base = _PALETTE[base_idx] * rng.uniform(0.75, 1.0)
        stripe = _PALETTE[stripe_idx] * rng.uniform(0.75, 1.0)
        period = int(rng.integers(4, 10))
        phase = int(rng.integers(period))
        floor_period = int(rng.integers(5, 9))
        x1 = min(x + width, length)
        top_y = HORIZON_Y - height
        cols = np.arange(x, x1)
        stripe_mask = ((cols + phase) // (period // 2 + 1)) % 2 == 0
        block = np.where(stripe_mask[None, :, None], base[None, None, :], stripe[None, None, :])
        block = np.broadcast_to(block, (height, x1 - x, 3)).copy()
        floor_rows = (np.arange(height) % floor_period) == 0
        block[floor_rows] *= 0.65
        block[0] = base * 0.5  # roofline
        world[top_y:HORIZON_Y, x:x1] = block
        x = x1
    return np.clip(world, 0.0, 1.0)


def _yaw_at(s: float) -> float:
    """Smooth small heading profile along the street, radians."""
    return np.deg2rad(3.0) * np.sin(2.0 * np.pi * s / 37.0)


def _pose(s: float, yaw: float) -> Pose:
    return Pose(
        t=np.array([s, 0.0, 0.0]),
        q=np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)]),
    )


def _view(world: np.ndarray, s: float, yaw: float) -> np.ndarray:
    x0 = _MARGIN + int(round(s * PX_PER_M + yaw * PAN_PX_PER_RAD))
    return world[:, x0 : x0 + IMG_W].copy()


def night_transform(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Darken a day view into a night view: mix, gamma, gain, bright spots."""
    mixed = np.clip(img @ _NIGHT_MIX.T, 0.0, 1.0)
    exposure = rng.uniform(0.85, 1.15)
    night = (_NIGHT_GAIN * exposure) * mixed**_NIGHT_GAMMA
    n_spots = int(rng.integers(3, 8))
    ys, xs = np.mgrid[0:IMG_H, 0:IMG_W]
    for _ in range(n_spots):
        cx = rng.uniform(0, IMG_W)
        cy = rng.uniform(0, IMG_H * 0.8)
        radius = rng.uniform(1.5, 4.5)
        amp = rng.uniform(0.6, 1.2)
        blob = amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * radius**2))
        night = night + blob[:, :, None] * _SPOT_TINT
    return np.clip(night, 0.0, 1.0)


def synth_dataset(
    seed: int,
    n_ref: int,
    n_query: int,
    out_dir: str | Path,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Write a day reference set and a night query set with pose tables.

    Returns the ingested (reference, query) manifests. Identical seeds
    produce byte-identical outputs.
    """
    if n_ref < 1 or n_query < 1:
        raise ValueError(f"need at least one reference and one query, got {n_ref}/{n_query}")
    out_dir = Path(out_dir)
    ref_dir = out_dir / "reference"
    query_dir = out_dir / "query"
    ref_dir.mkdir(parents=True, exist_ok=True)
    query_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    length = int(np.ceil((n_ref - 1) * PX_PER_M)) + IMG_W + 2 * _MARGIN
    world = _render_world(rng, length)

    ref_poses: dict[str, Pose] = {}
    for i in range(n_ref):
        s = float(i)
        yaw = _yaw_at(s)
        image_id = f"day_{i:04d}"
        write_image(_view(world, s, yaw), ref_dir / f"{image_id}.png")
        ref_poses[image_id] = _pose(s, yaw)
    write_pose_csv(ref_poses, ref_dir / "poses.csv")

    query_poses: dict[str, Pose] = {}
    span = float(n_ref - 1)
    for j in range(n_query):
        base = (j + 0.5) * span / n_query
        s = float(np.clip(base + rng.uniform(-0.3, 0.3), 0.0, span))
        yaw = _yaw_at(s) + np.deg2rad(rng.uniform(-1.5, 1.5))
        image_id = f"night_{j:04d}"
        day_view = _view(world, s, yaw)
        write_image(night_transform(day_view, rng), query_dir / f"{image_id}.png")
        query_poses[image_id] = _pose(s, yaw)
    write_pose_csv(query_poses, query_dir / "poses.csv")

    return ingest(ref_dir, split="reference"), ingest(query_dir, split="query")
