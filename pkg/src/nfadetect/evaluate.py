"""Object-level evaluation: IoU matching, F1 and average precision.

A detection counts as a true positive when its box overlaps a ground
truth box with IoU of at least 5% (small targets shift IoU wildly with
single-pixel changes, hence the loose default).  Matching is greedy in
descending score order, one-to-one, ties broken by ground-truth index;
a second detection on an already matched object counts as a false
positive.  AP is the all-point interpolated area under the object-level
precision/recall curve, pooling detections across the dataset.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

__all__ = [
    "GroundTruthBox",
    "EvalReport",
    "MatchResult",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate_detections",
    "read_gt_csv",
    "write_gt_csv",
    "write_report_json",
    "write_pr_csv",
    "GT_CSV_HEADER",
]

DEFAULT_IOU_MIN = 0.05
GT_CSV_HEADER = ("image_id", "x_min", "y_min", "x_max", "y_max", "extent")


@dataclass(frozen=True)
class GroundTruthBox:
    """A ground-truth object: inclusive box plus source component size."""

    image_id: str
    box: tuple[int, int, int, int]
    extent: int


@dataclass(frozen=True)
class MatchResult:
    tp_pairs: tuple  # (det_index, gt_index) pairs
    fp_indices: tuple
    fn_indices: tuple


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    ap: float
    pr_samples: tuple  # (recall, precision) pairs, recall nondecreasing


def iou(a, b) -> float:
    """Intersection over union of two inclusive-coordinate boxes."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0) + 1
    ih = min(ay1, by1) - max(ay0, by0) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax1 - ax0 + 1) * (ay1 - ay0 + 1)
    area_b = (bx1 - bx0 + 1) * (by1 - by0 + 1)
    return inter / float(area_a + area_b - inter)


def match_detections(dets, gts, iou_min: float = DEFAULT_IOU_MIN) -> MatchResult:
    """Greedy one-to-one matching of scored detections to ground truths.

    dets: sequence of (box, score); gts: sequence of boxes.  Detections
    are visited in descending score (stable on ties); each takes the
    unmatched ground truth of highest IoU >= iou_min, ties broken by the
    lower ground-truth index.
    """
    if not 0.0 < iou_min <= 1.0:
        raise ValueError("iou_min must be in (0, 1]")
    order = sorted(range(len(dets)), key=lambda i: -dets[i][1])
    gt_taken = [False] * len(gts)
    tp, fp = [], []
    for di in order:
        box = dets[di][0]
        best_gi, best_iou = -1, -1.0
        for gi, gt_box in enumerate(gts):
            if gt_taken[gi]:
                continue
            v = iou(box, gt_box)
            # ascending gi scan with strict > keeps the lowest index on ties
            if v >= iou_min and v > best_iou:
                best_gi, best_iou = gi, v
        if best_gi >= 0:
            gt_taken[best_gi] = True
            tp.append((di, best_gi))
        else:
            fp.append(di)
    fn = [gi for gi, taken in enumerate(gt_taken) if not taken]
    return MatchResult(tp_pairs=tuple(tp), fp_indices=tuple(fp),
                       fn_indices=tuple(fn))


def _group_by_image(dets, gts):
    det_groups: dict[str, list] = {}
    for image_id, box, score in dets:
        det_groups.setdefault(image_id, []).append((box, score))
    gt_groups: dict[str, list] = {}
    for gt in gts:
        gt_groups.setdefault(gt.image_id, []).append(gt.box)
    return det_groups, gt_groups


def _counts_at_threshold(det_groups, gt_groups, iou_min, threshold):
    tp = fp = 0
    for image_id, dlist in det_groups.items():
        retained = [d for d in dlist if d[1] >= threshold]
        res = match_detections(retained, gt_groups.get(image_id, []), iou_min)
        tp += len(res.tp_pairs)
        fp += len(res.fp_indices)
    return tp, fp


def average_precision(dets, gts, iou_min: float = DEFAULT_IOU_MIN):
    """All-point interpolated AP over the pooled dataset.

    dets: sequence of (image_id, box, score); gts: GroundTruthBox list.
    Sweeps a threshold over every distinct score, matches the retained
    set per image, and integrates precision monotonized from the right
    over recall.  Returns (ap, pr_samples).
    """
    n_gt = len(gts)
    if not dets or n_gt == 0:
        return 0.0, ()
    det_groups, gt_groups = _group_by_image(dets, gts)
    thresholds = sorted({score for _, _, score in dets}, reverse=True)
    points = []
    for thr in thresholds:
        tp, fp = _counts_at_threshold(det_groups, gt_groups, iou_min, thr)
        recall = tp / n_gt
        precision = tp / (tp + fp) if tp + fp else 0.0
        points.append((recall, precision))
    ap = _all_point_area(points)
    return ap, tuple(points)


def _all_point_area(points):
    """Area under the PR points with precision monotonized from the right."""
    if not points:
        return 0.0
    pts = sorted(points)
    recalls = [r for r, _ in pts]
    precs = [p for _, p in pts]
    for i in range(len(precs) - 2, -1, -1):
        precs[i] = max(precs[i], precs[i + 1])
    area = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, precs):
        area += (r - prev_r) * p
        prev_r = r
    return area


def evaluate_detections(dets, gts, iou_min: float = DEFAULT_IOU_MIN) -> EvalReport:
    """Single-point P/R/F1 of the given detection set plus swept AP.

    dets: sequence of (image_id, box, score) at the chosen operating
    point; gts: GroundTruthBox list.  F1 is 2PR/(P+R) with the 0/0 -> 0
    convention.
    """
    det_groups, gt_groups = _group_by_image(dets, gts)
    tp = fp = 0
    for image_id, dlist in det_groups.items():
        res = match_detections(dlist, gt_groups.get(image_id, []), iou_min)
        tp += len(res.tp_pairs)
        fp += len(res.fp_indices)
    fn = len(gts) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    ap, pr_samples = average_precision(dets, gts, iou_min)
    return EvalReport(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall,
                      f1=f1, ap=ap, pr_samples=pr_samples)


def read_gt_csv(path):
    """Read ground truth boxes: image_id,x_min,y_min,x_max,y_max,extent."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != GT_CSV_HEADER:
            raise ValueError(f"{path}: bad or missing ground-truth CSV header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(GT_CSV_HEADER):
                raise ValueError(f"{path}:{line}: expected {len(GT_CSV_HEADER)} fields")
            image_id, x0, y0, x1, y1, extent = row
            out.append(GroundTruthBox(image_id=image_id,
                                      box=(int(x0), int(y0), int(x1), int(y1)),
                                      extent=int(extent)))
    return out


def write_gt_csv(path, gts) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_CSV_HEADER)
        for gt in gts:
            x0, y0, x1, y1 = gt.box
            writer.writerow([gt.image_id, x0, y0, x1, y1, gt.extent])


def write_report_json(path, report: EvalReport, extra: dict | None = None) -> None:
    payload = {
        "tp": report.tp, "fp": report.fp, "fn": report.fn,
        "precision": report.precision, "recall": report.recall,
        "f1": report.f1, "ap": report.ap,
        "pr_samples": [list(p) for p in report.pr_samples],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_pr_csv(path, pr_samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        for recall, precision in pr_samples:
            writer.writerow([repr(float(recall)), repr(float(precision))])
