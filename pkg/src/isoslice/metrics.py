"""Overlap and surface-distance scores between label volumes.

Surfaces are foreground voxels with at least one non-foreground
6-neighbour, the volume boundary counting as background.  Distances are
Euclidean in millimetres over the anisotropic grid and come from a k-d tree
over the mm-scaled surface points, which is exact; the naive all-pairs
computation lives in the test suite as the correctness oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ShapeError, UndefinedMetricError
from .volume import LabelVolume, Spacing


@dataclass(frozen=True)
class ClassScores:
    """Scores for one class; None marks a metric undefined for these masks."""

    dice: float | None
    ravd: float | None
    ravd_abs: float | None
    assd_mm: float | None
    mssd_mm: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {
            "dice": self.dice,
            "ravd": self.ravd,
            "ravd_abs": self.ravd_abs,
            "assd_mm": self.assd_mm,
            "mssd_mm": self.mssd_mm,
        }


@dataclass(frozen=True)
class MetricReport:
    """Per-class scores for every non-background class plus their plain mean."""

    classes: dict[int, ClassScores]
    mean: ClassScores

    def as_dict(self) -> dict:
        return {
            "classes": {str(cid): scores.as_dict() for cid, scores in self.classes.items()},
            "mean": self.mean.as_dict(),
        }


def _check_dims(gt: LabelVolume, pred: LabelVolume) -> None:
    if gt.dims != pred.dims:
        raise ShapeError(f"label dims {gt.dims} and {pred.dims} differ")


def dice(gt: LabelVolume, pred: LabelVolume, class_id: int) -> float:
    """Overlap of the two masks as a percentage: 2|A n B| / (|A| + |B|) * 100.

    Two empty masks agree vacuously (100); one empty mask overlaps nothing (0).
    """
    _check_dims(gt, pred)
    a = gt.data == class_id
    b = pred.data == class_id
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 100.0
    inter = int(np.count_nonzero(a & b))
    return 200.0 * inter / denom


def ravd(gt: LabelVolume, pred: LabelVolume, class_id: int) -> tuple[float, float]:
    """Relative volume difference (|pred| - |gt|) / |gt| as (signed %, absolute %)."""
    _check_dims(gt, pred)
    n_gt = int(np.count_nonzero(gt.data == class_id))
    n_pred = int(np.count_nonzero(pred.data == class_id))
    if n_gt == 0:
        raise UndefinedMetricError(f"ravd is undefined: class {class_id} is empty in the reference")
    signed = 100.0 * (n_pred - n_gt) / n_gt
    return signed, abs(signed)


def surface_voxels(l: LabelVolume, class_id: int) -> np.ndarray:
    """(n, 3) array of (x, y, z) coordinates of the class's surface voxels.

    A surface voxel is foreground with at least one of its six face
    neighbours outside the mask; faces on the volume boundary count as
    outside.  Rows are ordered by (z, y, x).
    """
    mask = l.data == class_id
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1, 1:-1]
        & padded[2:, 1:-1, 1:-1]
        & padded[1:-1, :-2, 1:-1]
        & padded[1:-1, 2:, 1:-1]
        & padded[1:-1, 1:-1, :-2]
        & padded[1:-1, 1:-1, 2:]
    )
    zz, yy, xx = np.nonzero(mask & ~interior)
    return np.column_stack([xx, yy, zz]).astype(np.int64)


def _surface_points_mm(l: LabelVolume, class_id: int, spacing: Spacing) -> np.ndarray:
    coords = surface_voxels(l, class_id)
    scale = np.array(spacing.as_tuple(), dtype=np.float64)
    return coords.astype(np.float64) * scale


def _directed_distances(
    gt: LabelVolume, pred: LabelVolume, class_id: int, spacing: Spacing | None
) -> tuple[np.ndarray, np.ndarray]:
    _check_dims(gt, pred)
    if spacing is None:
        if gt.spacing != pred.spacing:
            raise ShapeError("label spacings differ; pass an explicit spacing to override")
        spacing = gt.spacing
    pts_gt = _surface_points_mm(gt, class_id, spacing)
    pts_pred = _surface_points_mm(pred, class_id, spacing)
    if len(pts_gt) == 0 or len(pts_pred) == 0:
        raise UndefinedMetricError(
            f"surface distances are undefined: class {class_id} has an empty surface"
        )
    d_gt = cKDTree(pts_pred).query(pts_gt)[0]
    d_pred = cKDTree(pts_gt).query(pts_pred)[0]
    return d_gt, d_pred


def assd(
    gt: LabelVolume, pred: LabelVolume, class_id: int, spacing: Spacing | None = None
) -> float:
    """Average symmetric surface distance in mm.

    Every surface voxel contributes its distance to the nearest voxel of the
    other surface; the two directed sums are divided by the total number of
    surface voxels on both sides.
    """
    d_gt, d_pred = _directed_distances(gt, pred, class_id, spacing)
    return float((d_gt.sum() + d_pred.sum()) / (len(d_gt) + len(d_pred)))


def mssd(
    gt: LabelVolume, pred: LabelVolume, class_id: int, spacing: Spacing | None = None
) -> float:
    """Maximum symmetric surface distance in mm (symmetric Hausdorff)."""
    d_gt, d_pred = _directed_distances(gt, pred, class_id, spacing)
    return float(max(d_gt.max(), d_pred.max()))


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.mean(present))


def evaluate(gt: LabelVolume, pred: LabelVolume) -> MetricReport:
    """Score every non-background class and average the per-class results.

    Undefined entries (empty reference mask or empty surface) surface as
    None rather than raising; the mean skips them.
    """
    _check_dims(gt, pred)
    if gt.spacing != pred.spacing:
        raise ShapeError("label spacings differ")
    if gt.classes != pred.classes:
        raise ShapeError(f"class counts {gt.classes} and {pred.classes} differ")

    per_class: dict[int, ClassScores] = {}
    for cid in range(1, gt.classes):
        dice_val = dice(gt, pred, cid)
        try:
            ravd_signed, ravd_abs = ravd(gt, pred, cid)
        except UndefinedMetricError:
            ravd_signed, ravd_abs = None, None
        try:
            assd_val = assd(gt, pred, cid)
            mssd_val = mssd(gt, pred, cid)
        except UndefinedMetricError:
            assd_val, mssd_val = None, None
        per_class[cid] = ClassScores(dice_val, ravd_signed, ravd_abs, assd_val, mssd_val)

    scores = list(per_class.values())
    mean = ClassScores(
        _mean_or_none([s.dice for s in scores]),
        _mean_or_none([s.ravd for s in scores]),
        _mean_or_none([s.ravd_abs for s in scores]),
        _mean_or_none([s.assd_mm for s in scores]),
        _mean_or_none([s.mssd_mm for s in scores]),
    )
    return MetricReport(per_class, mean)
