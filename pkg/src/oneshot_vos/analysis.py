"""Error decomposition, box-overlap tracking curves and the report bundle."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scipy import ndimage

from .maskcore import BoundingBox, _same_shape, as_mask, bounding_box, euclidean_distance_transform, threshold
from .metrics import SequenceReport, attribute_report, summarize
from .nnet import contour_target
from .snap import SnapConfig, best_proposal_oracle, best_superpixel_oracle, partition_from_contours

FAR_DISTANCE = 20
TRACKER_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)
REFERENCE_METHOD = "-BS"


@dataclass(frozen=True)
class ErrorBreakdown:
    fp_close: int = 0
    fp_far: int = 0
    fn: int = 0

    @property
    def total_error(self) -> int:
        return self.fp_close + self.fp_far + self.fn

    def __add__(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        return ErrorBreakdown(self.fp_close + other.fp_close, self.fp_far + other.fp_far, self.fn + other.fn)

    def shares(self, reference: float) -> dict[str, float]:
        """Counts divided by ``reference`` (e.g. the total error of another method)."""
        if reference <= 0:
            raise ValueError("reference total must be positive")
        return {"fp_close": self.fp_close / reference, "fp_far": self.fp_far / reference,
                "fn": self.fn / reference}


def error_decomposition(pred, gt, d: float = FAR_DISTANCE) -> ErrorBreakdown:
    """Split the symmetric difference into FN and FP near (<= d) or far from the gt object."""
    pred, gt = as_mask(pred), as_mask(gt)
    _same_shape(pred, gt)
    fp = pred & ~gt
    fn = int(np.count_nonzero(gt & ~pred))
    if not gt.any():
        return ErrorBreakdown(0, int(np.count_nonzero(fp)), fn)
    close = int(np.count_nonzero(fp & (euclidean_distance_transform(gt) <= d)))
    return ErrorBreakdown(close, int(np.count_nonzero(fp)) - close, fn)


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """IoU of inclusive pixel boxes."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0) + 1
    ih = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
    inter = max(iw, 0) * max(ih, 0)
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class TrackerCurve:
    thresholds: tuple[float, ...]
    success: tuple[float, ...]  # fraction of frames with box IoU above each threshold


def frame_box_iou(pred, gt) -> float | None:
    """Box IoU; ``None`` when both masks are empty, 0 when exactly one is."""
    bp, bg = bounding_box(pred), bounding_box(gt)
    if bp is None and bg is None:
        return None
    if bp is None or bg is None:
        return 0.0
    return box_iou(bp, bg)


def tracker_eval(preds, gts, thresholds=TRACKER_THRESHOLDS) -> TrackerCurve:
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gts)} gt masks")
    if not preds:
        raise ValueError("tracker evaluation needs at least one frame")
    thresholds = tuple(float(t) for t in thresholds)
    if any(not 0.0 < t < 1.0 for t in thresholds):
        raise ValueError("thresholds must lie in (0, 1)")
    ious = [frame_box_iou(p, g) for p, g in zip(preds, gts)]
    n = len(ious)
    success = tuple(sum(1 for v in ious if v is None or v > t) / n for t in thresholds)
    return TrackerCurve(thresholds, success)


# ---------------------------------------------------------------- oracle bounds

def _superpixel_bound(part, gt) -> float:
    if not gt.any():
        return 1.0  # selecting nothing matches an empty object exactly
    return best_superpixel_oracle(part, gt)[1]


def proposals(fg, extra=()) -> list[np.ndarray]:
    """Candidate masks: each 4-connected component of ``fg >= 0.5``, their union,
    the empty mask, then ``extra``."""
    m = threshold(fg)
    lab, n = ndimage.label(m, structure=ndimage.generate_binary_structure(2, 1))
    out = [lab == i for i in range(1, n + 1)]
    out += [m, np.zeros_like(m)]
    return out + [as_mask(e) for e in extra]


def oracle_bounds(gts: dict[str, list], maps: dict[str, list], snap_cfg: SnapConfig = SnapConfig(),
                  extra: dict[str, list] | None = None) -> dict[str, float]:
    """Mean J of three oracle selectors, averaged per sequence then over sequences.

    ``proposal``: best candidate from :func:`proposals` on the model's fg map.
    ``superpixel_learned``: best region subset of the model's own contour partition.
    ``superpixel_gt_contours``: same on a partition from gt-derived contours.
    """
    rows = {"proposal": [], "superpixel_learned": [], "superpixel_gt_contours": []}
    for name, seq_maps in maps.items():
        acc = {k: [] for k in rows}
        for t, ((fg, ct), gt) in enumerate(zip(seq_maps, gts[name])):
            gt = as_mask(gt)
            ex = [e[t] for e in (extra or {}).get(name, [])]
            acc["proposal"].append(best_proposal_oracle(proposals(fg, ex), gt)[1])
            acc["superpixel_learned"].append(
                _superpixel_bound(partition_from_contours(ct, snap_cfg.contour_threshold), gt))
            gt_ct = contour_target(gt).astype(np.float64)
            acc["superpixel_gt_contours"].append(
                _superpixel_bound(partition_from_contours(gt_ct, snap_cfg.contour_threshold), gt))
        for k in rows:
            rows[k].append(float(np.mean(acc[k])))
    return {k: float(np.mean(v)) for k, v in rows.items() if v}


# ---------------------------------------------------------------- report bundle

@dataclass
class ReportInputs:
    reports: dict[str, list[SequenceReport]]  # method -> one report per sequence
    masks: dict[str, dict[str, list]] = field(default_factory=dict)  # method -> seq -> masks
    gts: dict[str, list] = field(default_factory=dict)
    attributes: dict[str, list[str]] = field(default_factory=dict)
    deltas: dict[str, dict[str, float]] = field(default_factory=dict)
    refinement: list = field(default_factory=list)  # RefinementTrace
    timing: list = field(default_factory=list)  # TimingPoint
    budget: dict[str, float] = field(default_factory=dict)
    bounds: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _r(x: float) -> float:
    return round(float(x), 6)


def _rounded(obj):
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _r(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.6f}" if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def error_table(inputs: ReportInputs, d: float = FAR_DISTANCE):
    """Per (method, sequence) breakdowns and per-method totals."""
    rows, totals = [], {}
    for method, per_seq in inputs.masks.items():
        tot = ErrorBreakdown()
        for name, masks in per_seq.items():
            eb = ErrorBreakdown()
            for m, g in zip(masks, inputs.gts[name]):
                eb = eb + error_decomposition(m, g, d)
            rows.append((method, name, eb))
            tot = tot + eb
        totals[method] = tot
    return rows, totals


def assemble_report(inputs: ReportInputs, out_dir) -> dict[str, Path]:
    """Write ``summary.json`` and the CSV tables under ``out_dir``; byte-stable."""
    if not inputs.reports:
        raise ValueError("report needs at least one evaluated method")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    methods = list(inputs.reports)

    summary: dict = {"meta": inputs.meta, "methods": {}, "per_sequence_j": {}}
    for m in methods:
        summary["methods"][m] = summarize(inputs.reports[m])
        summary["per_sequence_j"][m] = {r.name: r.j_mean for r in inputs.reports[m]}
        if inputs.attributes:
            tags = [inputs.attributes.get(r.name, []) for r in inputs.reports[m]]
            summary.setdefault("attributes", {})[m] = attribute_report(inputs.reports[m], tags).rows
    if inputs.deltas:
        summary["ablation_deltas"] = inputs.deltas

    err_rows, totals = error_table(inputs)
    if totals:
        ref_name = REFERENCE_METHOD if REFERENCE_METHOD in totals else next(iter(totals))
        ref = totals[ref_name].total_error
        summary["errors"] = {"reference": ref_name, "totals": {}}
        for m, t in totals.items():
            entry = {"fp_close": t.fp_close, "fp_far": t.fp_far, "fn": t.fn, "total": t.total_error}
            if ref > 0:
                entry["relative"] = t.shares(ref)
            summary["errors"]["totals"][m] = entry

    tracker_rows = []
    if inputs.masks:
        summary["tracker"] = {}
        for m, per_seq in inputs.masks.items():
            preds = [p for name in per_seq for p in per_seq[name]]
            gts = [g for name in per_seq for g in inputs.gts[name]]
            curve = tracker_eval(preds, gts)
            summary["tracker"][m] = dict(zip((f"{t:.1f}" for t in curve.thresholds), curve.success))
            tracker_rows += [(m, t, s) for t, s in zip(curve.thresholds, curve.success)]

    if inputs.refinement:
        summary["refinement"] = {
            tr.sequence: [{"n": n, "frames": list(f), "j": j} for n, f, j in tr.steps]
            for tr in inputs.refinement}
        lengths = {len(tr.steps) for tr in inputs.refinement}
        if len(lengths) == 1:
            summary["refinement_mean"] = [
                {"n": inputs.refinement[0].steps[k][0],
                 "j": float(np.mean([tr.steps[k][2] for tr in inputs.refinement]))}
                for k in range(lengths.pop())]
    if inputs.timing:
        summary["timing"] = [{"mode": p.mode, "iterations": p.iterations,
                              "steps_per_frame": p.steps_per_frame, "j": p.j_mean}
                             for p in inputs.timing]
    if inputs.budget:
        summary["budget"] = inputs.budget
    if inputs.bounds:
        summary["bounds"] = inputs.bounds

    files = {
        "summary.json": json.dumps(_rounded(summary), indent=2, sort_keys=True) + "\n",
        "per_sequence.csv": _csv(
            ("method", "sequence", "J_mean", "J_recall", "J_decay", "F_mean", "F_recall", "F_decay", "T_mean"),
            [(m, r.name, r.j_mean, r.j_recall, r.j_decay, r.f_mean, r.f_recall, r.f_decay, r.t_mean)
             for m in methods for r in inputs.reports[m]]),
        "errors.csv": _csv(("method", "sequence", "fp_close", "fp_far", "fn", "total"),
                           [(m, s, e.fp_close, e.fp_far, e.fn, e.total_error) for m, s, e in err_rows]),
        "tracker.csv": _csv(("method", "threshold", "success"), tracker_rows),
        "timing.csv": _csv(("mode", "iterations", "steps_per_frame", "J_mean"),
                           [(p.mode, p.iterations, p.steps_per_frame, p.j_mean) for p in inputs.timing]),
    }
    paths = {}
    for name, text in files.items():
        paths[name] = out / name
        paths[name].write_text(text)
    return paths
