"""Boundary-shape mask toolkit.

Target-mask generation (thick and scored variants for instance boundaries
and box perimeters), instance reconstruction from predicted boundary masks,
reference mask losses with analytic gradients, and COCO-style average
precision evaluation, plus mask file formats and a command-line front-end.
"""

from .annotations import (
    Category,
    Dataset,
    ImageRecord,
    InstanceAnnotation,
    Rle,
    decode_rle,
    encode_rle,
    instance_mask,
    parse_dataset,
    rasterize_polygon,
)
from .evaluation import (
    IOU_THRESHOLDS,
    Detection,
    EvalResult,
    GroundTruth,
    MatchResult,
    average_precision,
    bbox_iou,
    evaluate,
    load_detections,
    mask_iou,
    match_detections,
)
from .losses import (
    BCE_EPS,
    LossWeights,
    finite_diff_check,
    smask_loss,
    tmask_loss,
    total_loss,
)
from .maskgen import (
    CITYSCAPES_PROFILE_K,
    COCO_PROFILE_K,
    DEFAULT_SCORE_STEP,
    PROFILE_K,
    BoundarySet,
    MaskSpec,
    bbox_boundary,
    extract_boundary,
    generate_target,
    score,
    thicken,
)
from .maskio import (
    BSMK_MAGIC,
    BSMK_VERSION,
    read_bsmk,
    read_mask,
    read_mask_png,
    write_bsmk,
    write_mask,
    write_mask_png,
)
from .reconstruct import (
    Box,
    ReconstructionParams,
    bbox_from_mask,
    bresenham_line,
    connect_boundary,
    fill_region,
    intersect_boxes,
    reconstruct_instance,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "BCE_EPS",
    "BSMK_MAGIC",
    "BSMK_VERSION",
    "BoundarySet",
    "Box",
    "CITYSCAPES_PROFILE_K",
    "COCO_PROFILE_K",
    "Category",
    "DEFAULT_SCORE_STEP",
    "Dataset",
    "Detection",
    "EvalResult",
    "GroundTruth",
    "IOU_THRESHOLDS",
    "ImageRecord",
    "InstanceAnnotation",
    "LossWeights",
    "MaskSpec",
    "MatchResult",
    "PROFILE_K",
    "ReconstructionParams",
    "Rle",
    "average_precision",
    "bbox_boundary",
    "bbox_from_mask",
    "bbox_iou",
    "bresenham_line",
    "connect_boundary",
    "decode_rle",
    "encode_rle",
    "errors",
    "evaluate",
    "extract_boundary",
    "fill_region",
    "finite_diff_check",
    "generate_target",
    "instance_mask",
    "intersect_boxes",
    "load_detections",
    "mask_iou",
    "match_detections",
    "parse_dataset",
    "rasterize_polygon",
    "read_bsmk",
    "read_mask",
    "read_mask_png",
    "reconstruct_instance",
    "score",
    "smask_loss",
    "thicken",
    "tmask_loss",
    "total_loss",
    "write_bsmk",
    "write_mask",
    "write_mask_png",
]
