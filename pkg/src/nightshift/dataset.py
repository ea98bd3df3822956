"""Dataset ingestion: a directory of images with an optional pose table.

Image ids are file stems; poses are joined by id from a `poses.csv` next to
the images, never by listing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError
from .geoeval import Pose, read_pose_csv
from .imgproc import read_image

IMAGE_SUFFIXES = (".png", ".ppm")
POSE_FILE_NAME = "poses.csv"


@dataclass
class DatasetManifest:
    root: Path
    split: str
    ids: list[str]
    paths: dict[str, Path]
    poses: dict[str, Pose] | None

    def __len__(self) -> int:
        return len(self.ids)

    def require_poses(self) -> dict[str, Pose]:
        if self.poses is None:
            raise DataError(f"{self.root}: no {POSE_FILE_NAME} found but poses are required")
        missing = [i for i in self.ids if i not in self.poses]
        if missing:
            raise DataError(f"{self.root}: no pose for image id {missing[0]!r}")
        return self.poses


def ingest(root: str | Path, split: str = "reference") -> DatasetManifest:
    """Scan a directory for images, validate readability and id uniqueness."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory does not exist: {root}")
    paths: dict[str, Path] = {}
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        stem = path.stem
        if stem in paths:
            raise DataError(f"duplicate image id {stem!r}: {paths[stem]} and {path}")
        try:
            with PILImage.open(path) as im:
                im.verify()
        except Exception as exc:
            raise DataError(f"unreadable image {path}: {exc}") from exc
        paths[stem] = path
    poses = None
    pose_path = root / POSE_FILE_NAME
    if pose_path.is_file():
        poses = read_pose_csv(pose_path)
    return DatasetManifest(
        root=root, split=split, ids=sorted(paths), paths=paths, poses=poses
    )


def load_images(manifest: DatasetManifest) -> list[np.ndarray]:
    """Read every image in id order."""
    return [read_image(manifest.paths[i]) for i in manifest.ids]
