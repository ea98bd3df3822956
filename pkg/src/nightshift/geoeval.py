"""6-DOF pose bookkeeping and threshold-accuracy evaluation.

A pose is a metric translation plus a unit quaternion (w, x, y, z),
world-from-camera. Rotation error uses the quaternion dot product with
absolute value, so q and -q describe the same rotation. Accuracy at a
threshold pair counts queries whose translation AND rotation errors are
both inside the (inclusive) bounds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

# Threshold pairs (meters, degrees), loosest first.
DEFAULT_THRESHOLDS: tuple[tuple[float, float], ...] = ((5.0, 10.0), (0.5, 5.0), (0.25, 2.0))

POSE_CSV_HEADER = ["image_id", "tx", "ty", "tz", "qw", "qx", "qy", "qz"]


@dataclass(frozen=True)
class Pose:
    """Translation (meters) and unit quaternion rotation (w, x, y, z)."""

    t: np.ndarray
    q: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(t=np.zeros(3), q=np.array([1.0, 0.0, 0.0, 0.0]))


def _check_unit_quaternion(q: np.ndarray, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"{name} quaternion must have 4 components, got shape {q.shape}")
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"{name} quaternion is not unit length (norm {norm!r})")
    return q


def pose_error(estimate: Pose, truth: Pose) -> tuple[float, float]:
    """(translation error in meters, rotation error in degrees)."""
    qa = _check_unit_quaternion(estimate.q, "estimate")
    qb = _check_unit_quaternion(truth.q, "truth")
    dt = float(np.linalg.norm(np.asarray(estimate.t, dtype=np.float64) - np.asarray(truth.t, dtype=np.float64)))
    dot = min(1.0, abs(float(qa @ qb)))
    angle = np.degrees(2.0 * np.arccos(dot))
    return dt, float(angle)


def threshold_accuracy(
    errors: Sequence[tuple[float, float]],
    thresholds: Sequence[tuple[float, float]] = DEFAULT_THRESHOLDS,
) -> list[float]:
    """Percentage of errors inside each (meters, degrees) bound, inclusive."""
    if len(errors) == 0:
        raise ValueError("threshold_accuracy requires a non-empty error list")
    for tm, tdeg in thresholds:
        if tm <= 0 or tdeg <= 0:
            raise ValueError(f"thresholds must be positive, got ({tm}, {tdeg})")
    arr = np.asarray(errors, dtype=np.float64)
    out = []
    for tm, tdeg in thresholds:
        inside = (arr[:, 0] <= tm) & (arr[:, 1] <= tdeg)
        out.append(100.0 * inside.sum() / arr.shape[0])
    return out


@dataclass
class EvaluationReport:
    """Per-threshold accuracies plus the per-query errors behind them."""

    thresholds: tuple[tuple[float, float], ...]
    accuracies: list[float]
    errors: list[tuple[str, str, float, float]]  # (query_id, reference_id, m, deg)


def evaluate_retrieval(
    matches: Iterable,
    query_truth: Mapping[str, Pose],
    ref_poses: Mapping[str, Pose],
    thresholds: Sequence[tuple[float, float]] = DEFAULT_THRESHOLDS,
) -> EvaluationReport:
    """Score matches by treating each retrieved reference's pose as the estimate."""
    per_query = []
    for m in matches:
        if m.query_id not in query_truth:
            raise DataError(f"no ground-truth pose for query {m.query_id!r}")
        if m.reference_id not in ref_poses:
            raise DataError(f"no pose for retrieved reference {m.reference_id!r}")
        dm, ddeg = pose_error(ref_poses[m.reference_id], query_truth[m.query_id])
        per_query.append((m.query_id, m.reference_id, dm, ddeg))
    accs = threshold_accuracy([(e[2], e[3]) for e in per_query], thresholds)
    return EvaluationReport(
        thresholds=tuple((float(a), float(b)) for a, b in thresholds),
        accuracies=accs,
        errors=per_query,
    )


# ---------------------------------------------------------------------------
# CSV / report serialization
# ---------------------------------------------------------------------------


def read_pose_csv(path: str | Path) -> dict[str, Pose]:
    """Read `image_id,tx,ty,tz,qw,qx,qy,qz` rows (with header)."""
    poses: dict[str, Pose] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty pose table") from None
        if [h.strip() for h in header] != POSE_CSV_HEADER:
            raise DataError(f"{path}: bad pose table header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise DataError(f"{path}:{lineno}: expected 8 fields, got {len(row)}")
            image_id = row[0]
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric pose field: {exc}") from None
            if image_id in poses:
                raise DataError(f"{path}:{lineno}: duplicate pose id {image_id!r}")
            poses[image_id] = Pose(t=np.array(values[:3]), q=np.array(values[3:]))
    return poses


def write_pose_csv(poses: Mapping[str, Pose], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(POSE_CSV_HEADER)
        for image_id in sorted(poses):
            p = poses[image_id]
            writer.writerow([image_id] + [repr(float(v)) for v in (*p.t, *p.q)])


def format_report(report: EvaluationReport) -> str:
    """Plain-text accuracy table, one threshold column triple per row."""
    lines = ["threshold           accuracy"]
    for (tm, tdeg), acc in zip(report.thresholds, report.accuracies):
        label = f"{tm:g} m / {tdeg:g} deg"
        lines.append(f"{label:<20}{acc:6.1f} %")
    lines.append(f"queries: {len(report.errors)}")
    return "\n".join(lines) + "\n"


def write_report(report: EvaluationReport, prefix: str | Path) -> list[Path]:
    """Write <prefix>.txt, <prefix>.csv and <prefix>_errors.csv."""
    prefix = Path(prefix)
    txt_path = prefix.with_name(prefix.name + ".txt")
    csv_path = prefix.with_name(prefix.name + ".csv")
    err_path = prefix.with_name(prefix.name + "_errors.csv")
    txt_path.write_text(format_report(report))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["threshold_m", "threshold_deg", "accuracy_pct"])
    for (tm, tdeg), acc in zip(report.thresholds, report.accuracies):
        writer.writerow([repr(tm), repr(tdeg), repr(acc)])
    csv_path.write_text(buf.getvalue())
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["query_id", "reference_id", "error_m", "error_deg"])
    for qid, rid, dm, ddeg in report.errors:
        writer.writerow([qid, rid, repr(dm), repr(ddeg)])
    err_path.write_text(buf.getvalue())
    return [txt_path, csv_path, err_path]
