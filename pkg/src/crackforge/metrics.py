"""Tolerance-aware segmentation scoring and class-imbalance statistics.

A prediction voxel counts as correct at tolerance t when it lies within
Chebyshev distance t of some ground-truth voxel (and symmetrically for
recall).  Chebyshev balls are realized as t iterations of dilation with the
full 26-neighborhood, so tolerant counts are exactly testable against a
voxel-distance oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask


@dataclass(frozen=True)
class ToleranceScore:
    tolerance: int
    precision: float
    recall: float
    f1: float
    hits_pred: int   # |P  intersect  dilate(G, t)|
    hits_gt: int     # |G  intersect  dilate(P, t)|


@dataclass(frozen=True)
class EvalReport:
    """Per-tolerance precision/recall/F1 plus class-imbalance statistics."""

    n_pred: int
    n_gt: int
    p0: float
    p1: float
    weight: float
    scores: dict[int, ToleranceScore] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_pred": self.n_pred,
            "n_gt": self.n_gt,
            "p0": self.p0,
            "p1": self.p1,
            "weight": self.weight,
            "tolerances": {
                str(t): {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "hits_pred": s.hits_pred,
                    "hits_gt": s.hits_gt,
                }
                for t, s in sorted(self.scores.items())
            },
        }


def chebyshev_dilate(bits: np.ndarray, t: int) -> np.ndarray:
    """Dilate by the Chebyshev ball of radius t (t full-neighborhood passes)."""
    if t == 0 or not bits.any():
        return bits.copy()
    structure = np.ones((3,) * bits.ndim, dtype=bool)
    return ndimage.binary_dilation(bits, structure=structure, iterations=t)


def _safe_ratio(num: int, den: int, empty_both: bool) -> float:
    if den == 0:
        return 1.0 if empty_both else 0.0
    return num / den


def _f1(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def score(pred: BinaryMask, gt: BinaryMask,
          tolerances=(0, 1, 2)) -> EvalReport:
    """Score a segmentation against ground truth at the given tolerances.

    Empty-set conventions: an empty prediction has precision 1 against an
    empty ground truth and 0 otherwise (and symmetrically for recall), so a
    perfect empty prediction scores 1 rather than NaN.
    """
    if pred.dims != gt.dims:
        raise VolumeError(f"dim mismatch {pred.dims} vs {gt.dims}")
    p_bits, g_bits = pred.bits, gt.bits
    n_pred = int(p_bits.sum())
    n_gt = int(g_bits.sum())
    total = p_bits.size
    p1 = n_gt / total
    p0 = 1.0 - p1
    weight = p0 / p1 if n_gt > 0 else float("inf")

    scores = {}
    for t in tolerances:
        t = int(t)
        if t < 0:
            raise VolumeError(f"negative tolerance {t}")
        g_dil = chebyshev_dilate(g_bits, t)
        p_dil = chebyshev_dilate(p_bits, t)
        hits_pred = int((p_bits & g_dil).sum())
        hits_gt = int((g_bits & p_dil).sum())
        prec = _safe_ratio(hits_pred, n_pred, n_gt == 0)
        rec = _safe_ratio(hits_gt, n_gt, n_pred == 0)
        scores[t] = ToleranceScore(t, prec, rec, _f1(prec, rec),
                                   hits_pred, hits_gt)
    return EvalReport(n_pred=n_pred, n_gt=n_gt, p0=p0, p1=p1,
                      weight=weight, scores=scores)


def class_weight(gt: BinaryMask) -> float:
    """Background/foreground count ratio used to up-weight crack voxels."""
    ones = int(gt.bits.sum())
    if ones == 0:
        raise VolumeError("undefined weight: mask has no foreground")
    zeros = gt.bits.size - ones
    return zeros / ones


@dataclass(frozen=True)
class MeasureSummary:
    minimum: float
    mean: float
    median: float
    argmin_id: str


def summarize(reports: list[EvalReport],
              ids: list[str] | None = None) -> dict[str, MeasureSummary]:
    """Min/mean/median per measure over reports, with the id of the minimum.

    The median is the lower median for even counts.  Keys look like
    ``precision@1``.
    """
    if not reports:
        raise VolumeError("cannot summarize an empty report list")
    if ids is None:
        ids = [str(k) for k in range(len(reports))]
    if len(ids) != len(reports):
        raise VolumeError("ids and reports length mismatch")
    tolerances = sorted(reports[0].scores)
    out = {}
    for t in tolerances:
        for measure in ("precision", "recall", "f1"):
            vals = np.array([getattr(r.scores[t], measure) for r in reports])
            k = int(np.argmin(vals))
            lower_median = float(np.sort(vals)[(len(vals) - 1) // 2])
            out[f"{measure}@{t}"] = MeasureSummary(
                minimum=float(vals[k]), mean=float(vals.mean()),
                median=lower_median, argmin_id=ids[k])
    return out
