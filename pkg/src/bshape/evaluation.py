"""COCO-style average-precision evaluation for boxes and instance masks.

Matching is greedy per image and category: detections are visited in
descending score order (ties by ascending input index) and each one takes
the unmatched, non-ignore ground truth with the highest IoU at or above the
threshold. Detections whose only qualifying overlap is an ignore region
(crowd ground truth, or ground truth outside the active size bucket) are
dropped from the precision-recall sequence instead of counting as false
positives. AP integrates the precision envelope at 101 evenly spaced
recall points; the headline number averages IoU thresholds 0.50 to 0.95 in
steps of 0.05 and all categories that have ground truth. Size buckets use
pixel areas: small below 32^2, medium in [32^2, 96^2), large at or above
96^2. Metrics without any qualifying ground truth report -1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ._geometry import iround
from .annotations import Dataset, decode_rle, instance_mask, json_byte_offset
from .errors import (
    DimensionMismatchError,
    DomainError,
    ParseError,
    UndefinedIouError,
)
from .reconstruct import Box

log = logging.getLogger(__name__)

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
_AP75_INDEX = IOU_THRESHOLDS.index(0.75)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)

SMALL_AREA_LIMIT = 32 ** 2
LARGE_AREA_LIMIT = 96 ** 2
_AREA_RANGES = {
    "all": (0.0, float("inf")),
    "small": (0.0, float(SMALL_AREA_LIMIT)),
    "medium": (float(SMALL_AREA_LIMIT), float(LARGE_AREA_LIMIT)),
    "large": (float(LARGE_AREA_LIMIT), float("inf")),
}


@dataclass(frozen=True)
class Detection:
    """One detection; exactly one of box or mask should be set."""

    image_id: int
    category_id: int
    score: float
    box: Box | None = None
    mask: np.ndarray | None = None


@dataclass(frozen=True)
class GroundTruth:
    """One ground-truth region for matching; ignore marks crowd regions."""

    image_id: int
    category_id: int
    box: Box | None = None
    mask: np.ndarray | None = None
    ignore: bool = False
    area: float = 0.0


@dataclass(frozen=True)
class MatchResult:
    kind: str  # "tp" | "fp" | "ignored"
    gt_index: int | None
    iou: float


@dataclass(frozen=True)
class EvalResult:
    ap: float
    ap50: float
    ap75: float
    ap_small: float
    ap_medium: float
    ap_large: float
    per_category: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap_small": self.ap_small,
            "ap_medium": self.ap_medium,
            "ap_large": self.ap_large,
            "per_category": dict(self.per_category),
        }


def mask_iou(a, b) -> float:
    """Pixel IoU of two binary masks; undefined (error) when both are empty."""
    am = np.asarray(a, dtype=bool)
    bm = np.asarray(b, dtype=bool)
    if am.shape != bm.shape:
        raise DimensionMismatchError(f"mask shapes {am.shape} and {bm.shape} differ")
    union = np.count_nonzero(am | bm)
    if union == 0:
        raise UndefinedIouError("IoU of two empty masks is undefined")
    return float(np.count_nonzero(am & bm) / union)


def bbox_iou(a: Box, b: Box) -> float:
    """Inclusive-pixel-area IoU of two boxes."""
    x0 = max(a.x_min, b.x_min)
    y0 = max(a.y_min, b.y_min)
    x1 = min(a.x_max, b.x_max)
    y1 = min(a.y_max, b.y_max)
    if x0 > x1 or y0 > y1:
        return 0.0
    inter = (x1 - x0 + 1) * (y1 - y0 + 1)
    return float(inter / (a.area + b.area - inter))


def _pair_iou(det: Detection, gt: GroundTruth) -> float:
    if det.box is not None and gt.box is not None:
        return bbox_iou(det.box, gt.box)
    if det.mask is not None and gt.mask is not None:
        am = np.asarray(det.mask, dtype=bool)
        bm = np.asarray(gt.mask, dtype=bool)
        if am.shape != bm.shape:
            raise DimensionMismatchError(f"mask shapes {am.shape} and {bm.shape} differ")
        union = np.count_nonzero(am | bm)
        if union == 0:
            return 0.0
        return float(np.count_nonzero(am & bm) / union)
    raise DomainError("detection and ground truth carry different payload types")


def _iou_matrix(dets, gts) -> np.ndarray:
    iou = np.zeros((len(dets), len(gts)), dtype=np.float64)
    for i, det in enumerate(dets):
        for j, gt in enumerate(gts):
            iou[i, j] = _pair_iou(det, gt)
    return iou


def _score_order(dets) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def _match_from_matrix(iou, order, gt_ignore, threshold) -> list[MatchResult]:
    n_gt = len(gt_ignore)
    taken = [False] * n_gt
    out: list[MatchResult | None] = [None] * iou.shape[0]
    for di in order:
        best_j, best_v = -1, 0.0
        for j in range(n_gt):
            if gt_ignore[j] or taken[j]:
                continue
            v = iou[di, j]
            if v >= threshold and v > best_v:
                best_j, best_v = j, v
        if best_j >= 0:
            taken[best_j] = True
            out[di] = MatchResult(kind="tp", gt_index=best_j, iou=float(best_v))
            continue
        ig_j, ig_v = -1, 0.0
        for j in range(n_gt):
            if not gt_ignore[j]:
                continue
            v = iou[di, j]
            if v >= threshold and v > ig_v:
                ig_j, ig_v = j, v
        if ig_j >= 0:
            out[di] = MatchResult(kind="ignored", gt_index=ig_j, iou=float(ig_v))
        else:
            out[di] = MatchResult(kind="fp", gt_index=None, iou=0.0)
    return out  # type: ignore[return-value]


def match_detections(dets, gts, iou_threshold: float) -> list[MatchResult]:
    """Greedy matching for one image and category at one IoU threshold.

    Returns one MatchResult per detection, aligned with the input order.
    Crowd (ignore) ground truths never become matches; a detection whose only
    qualifying overlap is an ignore region is marked "ignored".
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise DomainError(f"iou_threshold must lie in (0, 1], got {iou_threshold!r}")
    iou = _iou_matrix(dets, gts)
    return _match_from_matrix(iou, _score_order(dets), [g.ignore for g in gts], iou_threshold)


def average_precision(tp_flags, num_gt: int) -> float:
    """101-point interpolated AP from an ordered TP/FP sequence.

    tp_flags lists, in descending score order, True for each true positive
    and False for each false positive (ignored detections excluded).
    Returns -1.0 when num_gt is 0 (undefined).
    """
    if num_gt < 0:
        raise DomainError("num_gt must be non-negative")
    if num_gt == 0:
        return -1.0
    flags = np.asarray(tp_flags, dtype=bool)
    if flags.size == 0:
        return 0.0
    tp_cum = np.cumsum(flags)
    precision = tp_cum / np.arange(1, flags.size + 1)
    recall = tp_cum / num_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < flags.size, envelope[np.minimum(idx, flags.size - 1)], 0.0)
    return float(sampled.mean())


def _box_from_xywh(bbox) -> Box:
    x, y, w, h = bbox
    c0, c1 = iround(x), iround(x + w) - 1
    r0, r1 = iround(y), iround(y + h) - 1
    if c1 < c0 or r1 < r0:
        raise DomainError(f"box {tuple(bbox)} rounds to no pixels")
    return Box(x_min=c0, y_min=r0, x_max=c1, y_max=r1)


def load_detections(text: str, iou_type: str = "bbox") -> list[Detection]:
    """Parse a detections file: a JSON array of detection records.

    Each record needs image_id, category_id, a score in [0, 1], and either a
    "bbox" [x, y, w, h] (iou_type "bbox") or an uncompressed "segmentation"
    RLE with its own size (iou_type "mask").
    """
    if iou_type not in ("bbox", "mask"):
        raise DomainError(f"iou_type must be 'bbox' or 'mask', got {iou_type!r}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        offset = json_byte_offset(err)
        raise ParseError(
            f"malformed detections file at byte offset {offset}: {err.msg}", offset=offset
        ) from err
    if not isinstance(raw, list):
        raise ParseError("detections file must contain a JSON array")
    dets = []
    for pos, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ParseError(f"detection #{pos} must be an object")
        try:
            image_id = int(item["image_id"])
            category_id = int(item["category_id"])
            score = float(item["score"])
        except (KeyError, TypeError, ValueError) as err:
            raise ParseError(f"detection #{pos} is missing or mistypes a required field") from err
        if not (0.0 <= score <= 1.0):
            raise ParseError(f"detection #{pos} score {score} outside [0, 1]")
        if iou_type == "bbox":
            bbox = item.get("bbox")
            if not isinstance(bbox, list) or len(bbox) != 4:
                raise ParseError(f"detection #{pos} needs a bbox [x, y, w, h]")
            payload = {"box": _box_from_xywh([float(v) for v in bbox])}
        else:
            seg = item.get("segmentation")
            if not isinstance(seg, dict):
                raise ParseError(f"detection #{pos} needs an RLE segmentation")
            size = seg.get("size")
            counts = seg.get("counts")
            if isinstance(counts, str):
                raise ParseError(f"detection #{pos}: compressed RLE strings are unsupported")
            if not isinstance(size, list) or len(size) != 2:
                raise ParseError(f"detection #{pos}: RLE size must be [height, width]")
            payload = {"mask": decode_rle(counts, int(size[0]), int(size[1]))}
        dets.append(
            Detection(image_id=image_id, category_id=category_id, score=score, **payload)
        )
    return dets


def _detection_area(det: Detection) -> float:
    if det.box is not None:
        return float(det.box.area)
    return float(np.count_nonzero(det.mask))


def _in_range(area: float, area_range) -> bool:
    lo, hi = area_range
    return lo <= area < hi


def evaluate(detections, dataset: Dataset, iou_type: str = "bbox") -> EvalResult:
    """Average precision of a detection set against a parsed dataset.

    Detections for unknown categories are dropped with a warning. Crowd
    annotations act as ignore regions. For each size bucket, ground truth
    outside the bucket is ignored and unmatched detections outside the
    bucket's area range are excluded from the precision-recall sequence.
    """
    if iou_type not in ("bbox", "mask"):
        raise DomainError(f"iou_type must be 'bbox' or 'mask', got {iou_type!r}")
    images = {im.id: im for im in dataset.images}
    known_categories = {c.id for c in dataset.categories}

    kept: list[Detection] = []
    for det in detections:
        if det.category_id not in known_categories:
            log.warning("ignoring detection for unknown category %s", det.category_id)
            continue
        if (iou_type == "bbox" and det.box is None) or (iou_type == "mask" and det.mask is None):
            raise DomainError(f"detection lacks the {iou_type} payload")
        kept.append(det)

    gts: list[GroundTruth] = []
    for ann in dataset.annotations:
        image = images[ann.image_id]
        if iou_type == "bbox":
            box = _box_from_xywh(ann.bbox)
            gts.append(
                GroundTruth(
                    image_id=ann.image_id,
                    category_id=ann.category_id,
                    box=box,
                    ignore=ann.iscrowd,
                    area=float(box.area),
                )
            )
        else:
            m = instance_mask(ann, image)
            gts.append(
                GroundTruth(
                    image_id=ann.image_id,
                    category_id=ann.category_id,
                    mask=m,
                    ignore=ann.iscrowd,
                    area=float(np.count_nonzero(m)),
                )
            )

    # Group per (image, category) and cache IoU matrices; they are shared by
    # all thresholds and size buckets.
    det_groups: dict[tuple[int, int], list[int]] = {}
    for i, det in enumerate(kept):
        det_groups.setdefault((det.image_id, det.category_id), []).append(i)
    gt_groups: dict[tuple[int, int], list[int]] = {}
    for j, gt in enumerate(gts):
        gt_groups.setdefault((gt.image_id, gt.category_id), []).append(j)
    iou_cache = {
        key: _iou_matrix([kept[i] for i in det_idx], [gts[j] for j in gt_groups.get(key, [])])
        for key, det_idx in det_groups.items()
    }
    det_areas = [_detection_area(d) for d in kept]

    category_ids = sorted(known_categories)
    # bucket -> category -> list of APs across IOU_THRESHOLDS
    records: dict[str, dict[int, list[float]]] = {name: {} for name in _AREA_RANGES}
    for cat in category_ids:
        cat_keys = sorted(
            {key for key in det_groups if key[1] == cat} | {key for key in gt_groups if key[1] == cat}
        )
        for bucket, area_range in _AREA_RANGES.items():
            num_gt = sum(
                1
                for gt in gts
                if gt.category_id == cat and not gt.ignore and _in_range(gt.area, area_range)
            )
            if num_gt == 0:
                continue
            thr_aps = []
            for threshold in IOU_THRESHOLDS:
                pooled = []
                for key in cat_keys:
                    det_idx = det_groups.get(key, [])
                    if not det_idx:
                        continue
                    group_dets = [kept[i] for i in det_idx]
                    gt_idx = gt_groups.get(key, [])
                    ignore_flags = [
                        gts[j].ignore or not _in_range(gts[j].area, area_range) for j in gt_idx
                    ]
                    matches = _match_from_matrix(
                        iou_cache[key], _score_order(group_dets), ignore_flags, threshold
                    )
                    for local, det_i in enumerate(det_idx):
                        m = matches[local]
                        if m.kind == "ignored":
                            continue
                        if m.kind == "fp" and not _in_range(det_areas[det_i], area_range):
                            continue
                        pooled.append((-kept[det_i].score, key[0], local, m.kind == "tp"))
                pooled.sort()
                thr_aps.append(average_precision([p[3] for p in pooled], num_gt))
            records[bucket][cat] = thr_aps

    def mean_over(bucket: str, pick) -> float:
        values = [pick(aps) for aps in records[bucket].values()]
        return float(np.mean(values)) if values else -1.0

    per_category = {cat: float(np.mean(aps)) for cat, aps in records["all"].items()}
    return EvalResult(
        ap=mean_over("all", np.mean),
        ap50=mean_over("all", lambda aps: aps[0]),
        ap75=mean_over("all", lambda aps: aps[_AP75_INDEX]),
        ap_small=mean_over("small", np.mean),
        ap_medium=mean_over("medium", np.mean),
        ap_large=mean_over("large", np.mean),
        per_category=per_category,
    )
