"""Region similarity J, contour accuracy F, temporal instability T.

F and T follow fixed artifact definitions (tolerance-matched boundary
F-measure; centroid-aligned consecutive-frame contour dissimilarity). They are
not bit-compatible with any external benchmark toolkit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .maskcore import _same_shape, as_mask, boundary_pixels, centroid, squared_distance_transform, translate

RECALL_THRESHOLD = 0.5


def default_tolerance(shape) -> int:
    """0.8% of the image diagonal, rounded up, at least one pixel."""
    h, w = shape
    return max(1, math.ceil(0.008 * math.hypot(h, w)))


def region_similarity(pred, gt) -> float:
    pred, gt = as_mask(pred), as_mask(gt)
    _same_shape(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def _matched_fraction(src: np.ndarray, dst: np.ndarray, tol: float) -> float:
    """Fraction of ``src`` boundary pixels within ``tol`` of a ``dst`` boundary pixel."""
    d2 = squared_distance_transform(dst)
    return np.count_nonzero(d2[src] <= tol * tol) / np.count_nonzero(src)


def contour_accuracy(pred, gt, tol: float | None = None) -> float:
    pred, gt = as_mask(pred), as_mask(gt)
    _same_shape(pred, gt)
    if tol is None:
        tol = default_tolerance(gt.shape)
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    bp, bg = boundary_pixels(pred), boundary_pixels(gt)
    has_p, has_g = bp.any(), bg.any()
    if not has_p and not has_g:
        return 1.0
    if not has_p or not has_g:
        return 0.0
    precision = _matched_fraction(bp, bg, tol)
    recall = _matched_fraction(bg, bp, tol)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def temporal_instability(masks, tol: float | None = None) -> float:
    """100 x mean over consecutive pairs of (1 - F) after centroid alignment.

    Pairs where either mask is empty are skipped; all skipped gives 0.
    """
    masks = [as_mask(m) for m in masks]
    if len(masks) < 2:
        raise ValueError("temporal instability needs at least two masks")
    for m in masks[1:]:
        _same_shape(masks[0], m)
    if tol is None:
        tol = default_tolerance(masks[0].shape)
    terms = []
    for a, b in zip(masks, masks[1:]):
        ca, cb = centroid(a), centroid(b)
        if ca is None or cb is None:
            continue
        shifted = translate(a, _round_half_up(cb[0] - ca[0]), _round_half_up(cb[1] - ca[1]))
        terms.append(1.0 - contour_accuracy(shifted, b, tol))
    if not terms:
        return 0.0
    return 100.0 * float(np.mean(terms))


def aggregate(values) -> tuple[float, float, float]:
    """Mean M, recall O (fraction strictly above 0.5) and decay D.

    D is the mean of the first ``ceil(n/4)`` frames minus the mean of the last
    ``ceil(n/4)`` frames, in time order.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot aggregate an empty list")
    q = math.ceil(v.size / 4)
    mean = float(v.mean())
    recall = float(np.count_nonzero(v > RECALL_THRESHOLD) / v.size)
    decay = float(v[:q].mean() - v[-q:].mean())
    return mean, recall, decay


@dataclass(frozen=True)
class FrameScores:
    j: float
    f: float


@dataclass
class SequenceReport:
    name: str
    frames: list[FrameScores]
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float
    t_mean: float

    def summary(self) -> dict:
        return {
            "J": {"mean": self.j_mean, "recall": self.j_recall, "decay": self.j_decay},
            "F": {"mean": self.f_mean, "recall": self.f_recall, "decay": self.f_decay},
            "T": {"mean": self.t_mean},
        }


def evaluate_sequence(name: str, preds, gts, tol: float | None = None) -> SequenceReport:
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts) or not preds:
        raise ValueError("prediction and ground-truth lists must be non-empty and equal length")
    scores = [FrameScores(region_similarity(p, g), contour_accuracy(p, g, tol))
              for p, g in zip(preds, gts)]
    jm, jo, jd = aggregate([s.j for s in scores])
    fm, fo, fd = aggregate([s.f for s in scores])
    t = temporal_instability(preds, tol) if len(preds) >= 2 else 0.0
    return SequenceReport(name, scores, jm, jo, jd, fm, fo, fd, t)


def summarize(reports) -> dict:
    """Average the per-sequence M/O/D (and T) over a list of reports."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to summarize")

    def avg(attr):
        return float(np.mean([getattr(r, attr) for r in reports]))

    return {
        "J": {"mean": avg("j_mean"), "recall": avg("j_recall"), "decay": avg("j_decay")},
        "F": {"mean": avg("f_mean"), "recall": avg("f_recall"), "decay": avg("f_decay")},
        "T": {"mean": avg("t_mean")},
    }


@dataclass
class AttributeReport:
    # attribute -> {"with": mean J on tagged sequences, "gain": mean(untagged) - mean(tagged)}
    rows: dict[str, dict[str, float]] = field(default_factory=dict)


def attribute_report(reports, tags) -> AttributeReport:
    reports = list(reports)
    tags = [frozenset(t) for t in tags]
    if not reports:
        raise ValueError("attribute report needs at least one sequence")
    if len(tags) != len(reports):
        raise ValueError("one tag set per report required")
    out = AttributeReport()
    for attr in sorted(set().union(*tags)):
        with_ = [r.j_mean for r, t in zip(reports, tags) if attr in t]
        without = [r.j_mean for r, t in zip(reports, tags) if attr not in t]
        if not with_ or not without:
            continue
        w = float(np.mean(with_))
        out.rows[attr] = {"with": w, "gain": float(np.mean(without)) - w}
    return out
