"""COCO-style annotation parsing and instance rasterization.

Binary masks are numpy bool arrays of shape (height, width). Run-length
encodings follow the usual convention for instance datasets: the mask is
scanned column by column (column-major) and the first run counts background
pixels, so a mask that starts with foreground gets a leading zero count.
Only integer count lists are accepted; compressed string encodings are
rejected so that every supported input stays human-auditable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, ReferentialIntegrityError, RleFormatError


@dataclass(frozen=True)
class ImageRecord:
    id: int
    width: int
    height: int


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Rle:
    """Uncompressed run-length segmentation over a column-major pixel scan."""

    counts: tuple[int, ...]
    height: int
    width: int


@dataclass(frozen=True)
class InstanceAnnotation:
    id: int
    image_id: int
    category_id: int
    segmentation: tuple[tuple[float, ...], ...] | Rle
    bbox: tuple[float, float, float, float]
    iscrowd: bool = False
    area: float | None = None

    @property
    def is_polygon(self) -> bool:
        return not isinstance(self.segmentation, Rle)


@dataclass(frozen=True)
class Dataset:
    """Parsed annotation file. Immutable after construction."""

    images: tuple[ImageRecord, ...]
    annotations: tuple[InstanceAnnotation, ...]
    categories: tuple[Category, ...]

    def __post_init__(self):
        object.__setattr__(self, "_images_by_id", {im.id: im for im in self.images})
        object.__setattr__(self, "_categories_by_id", {c.id: c for c in self.categories})

    def image(self, image_id: int) -> ImageRecord:
        return self._images_by_id[image_id]

    def category(self, category_id: int) -> Category:
        return self._categories_by_id[category_id]


def _as_int(value, what):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{what} must be an integer, got {value!r}")
    return value


def _as_number(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number, got {value!r}")
    return float(value)


def json_byte_offset(err: json.JSONDecodeError) -> int:
    """Byte offset of a JSON decode error (its .pos is a character offset)."""
    return len(err.doc[: err.pos].encode("utf-8"))


def _parse_rle_segmentation(seg, ann_id):
    counts = seg.get("counts")
    size = seg.get("size")
    if isinstance(counts, str):
        raise RleFormatError(
            f"annotation {ann_id}: compressed RLE strings are unsupported; "
            "provide integer run counts"
        )
    if not isinstance(counts, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) and c >= 0 for c in counts
    ):
        raise RleFormatError(f"annotation {ann_id}: RLE counts must be non-negative integers")
    if (
        not isinstance(size, list)
        or len(size) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in size)
    ):
        raise RleFormatError(f"annotation {ann_id}: RLE size must be [height, width]")
    height, width = size
    total = sum(counts)
    if total != height * width:
        raise RleFormatError(
            f"annotation {ann_id}: RLE counts sum to {total}, expected {height * width}"
        )
    return Rle(counts=tuple(counts), height=height, width=width)


def _parse_polygon_segmentation(seg, ann_id):
    rings = []
    for ring in seg:
        if not isinstance(ring, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in ring
        ):
            raise ParseError(f"annotation {ann_id}: polygon ring must be a flat number list")
        if len(ring) < 6 or len(ring) % 2 != 0:
            raise ParseError(
                f"annotation {ann_id}: polygon ring needs at least 3 (x, y) vertex pairs"
            )
        rings.append(tuple(float(v) for v in ring))
    if not rings:
        raise ParseError(f"annotation {ann_id}: empty polygon segmentation")
    return tuple(rings)


def parse_dataset(text: str) -> Dataset:
    """Parse an annotation file (images, annotations, categories).

    Raises ParseError for malformed syntax or structure (with the byte offset
    for syntax errors), ReferentialIntegrityError for annotations that point
    at missing images or categories, and RleFormatError for bad encodings.
    Unknown extra fields are ignored.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        offset = json_byte_offset(err)
        raise ParseError(
            f"malformed annotation file at byte offset {offset}: {err.msg}", offset=offset
        ) from err
    if not isinstance(raw, dict):
        raise ParseError("annotation file must contain a JSON object at the top level")
    for key in ("images", "annotations", "categories"):
        if not isinstance(raw.get(key), list):
            raise ParseError(f"annotation file needs a list under {key!r}")

    images = []
    seen_image_ids = set()
    for item in raw["images"]:
        if not isinstance(item, dict):
            raise ParseError("each image record must be an object")
        image_id = _as_int(item.get("id"), "image id")
        width = _as_int(item.get("width"), f"image {image_id} width")
        height = _as_int(item.get("height"), f"image {image_id} height")
        if width < 1 or height < 1:
            raise ParseError(f"image {image_id} has non-positive dimensions")
        if image_id in seen_image_ids:
            raise ParseError(f"duplicate image id {image_id}")
        seen_image_ids.add(image_id)
        images.append(ImageRecord(id=image_id, width=width, height=height))

    categories = []
    seen_category_ids = set()
    for item in raw["categories"]:
        if not isinstance(item, dict):
            raise ParseError("each category record must be an object")
        category_id = _as_int(item.get("id"), "category id")
        name = item.get("name")
        if not isinstance(name, str):
            raise ParseError(f"category {category_id} needs a string name")
        if category_id in seen_category_ids:
            raise ParseError(f"duplicate category id {category_id}")
        seen_category_ids.add(category_id)
        categories.append(Category(id=category_id, name=name))

    annotations = []
    seen_annotation_ids = set()
    for item in raw["annotations"]:
        if not isinstance(item, dict):
            raise ParseError("each annotation record must be an object")
        ann_id = _as_int(item.get("id"), "annotation id")
        if ann_id in seen_annotation_ids:
            raise ParseError(f"duplicate annotation id {ann_id}")
        seen_annotation_ids.add(ann_id)
        image_id = _as_int(item.get("image_id"), f"annotation {ann_id} image_id")
        if image_id not in seen_image_ids:
            raise ReferentialIntegrityError(
                f"annotation {ann_id} references missing image {image_id}",
                annotation_id=ann_id,
            )
        category_id = _as_int(item.get("category_id"), f"annotation {ann_id} category_id")
        if category_id not in seen_category_ids:
            raise ReferentialIntegrityError(
                f"annotation {ann_id} references missing category {category_id}",
                annotation_id=ann_id,
            )
        seg = item.get("segmentation")
        if isinstance(seg, dict):
            segmentation = _parse_rle_segmentation(seg, ann_id)
        elif isinstance(seg, list):
            segmentation = _parse_polygon_segmentation(seg, ann_id)
        else:
            raise ParseError(f"annotation {ann_id}: segmentation must be rings or an RLE object")
        bbox = item.get("bbox")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise ParseError(f"annotation {ann_id}: bbox must be [x, y, w, h]")
        bbox = tuple(_as_number(v, f"annotation {ann_id} bbox entry") for v in bbox)
        iscrowd = item.get("iscrowd", 0)
        if iscrowd not in (0, 1, False, True):
            raise ParseError(f"annotation {ann_id}: iscrowd must be 0 or 1")
        area = item.get("area")
        if area is not None:
            area = _as_number(area, f"annotation {ann_id} area")
        annotations.append(
            InstanceAnnotation(
                id=ann_id,
                image_id=image_id,
                category_id=category_id,
                segmentation=segmentation,
                bbox=bbox,
                iscrowd=bool(iscrowd),
                area=area,
            )
        )

    return Dataset(
        images=tuple(images),
        annotations=tuple(annotations),
        categories=tuple(categories),
    )


def _normalize_rings(polygon):
    if len(polygon) == 0:
        return []
    first = polygon[0]
    if isinstance(first, (list, tuple, np.ndarray)):
        rings = polygon
    else:
        rings = [polygon]
    out = []
    for ring in rings:
        flat = [float(v) for v in ring]
        if len(flat) < 6 or len(flat) % 2 != 0:
            raise DomainError("polygon ring needs at least 3 (x, y) vertex pairs")
        out.append((flat[0::2], flat[1::2]))
    return out


def _rasterize_ring(xs, ys, height, width):
    # Pixel (r, c) is foreground iff its center (c + 0.5, r + 0.5) is inside
    # the ring under the even-odd rule, or exactly on an edge (ties count as
    # inside). Crossing tests use a ray toward +x; centers sitting exactly on
    # a crossing are excluded there and picked up by the on-edge test.
    cx = np.arange(width, dtype=np.float64)[None, :] + 0.5
    cy = np.arange(height, dtype=np.float64)[:, None] + 0.5
    inside = np.zeros((height, width), dtype=bool)
    on_edge = np.zeros((height, width), dtype=bool)
    n = len(xs)
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        if y1 != y2:
            crosses = (y1 > cy) != (y2 > cy)
            x_int = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (cx < x_int)
        cross = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
        on_edge |= (
            (cross == 0.0)
            & (cx >= min(x1, x2))
            & (cx <= max(x1, x2))
            & (cy >= min(y1, y2))
            & (cy <= max(y1, y2))
        )
    return inside | on_edge


def rasterize_polygon(polygon, height: int, width: int) -> np.ndarray:
    """Rasterize a polygon (one flat ring or a list of rings) onto a grid.

    A pixel is foreground iff its center lies inside some ring under the
    even-odd rule; centers exactly on an edge count as inside. Multiple
    rings combine by union. Degenerate (zero-area) polygons rasterize to an
    empty mask rather than erroring.
    """
    if height < 1 or width < 1:
        raise DomainError("raster dimensions must be at least 1x1")
    mask = np.zeros((height, width), dtype=bool)
    for xs, ys in _normalize_rings(polygon):
        mask |= _rasterize_ring(xs, ys, height, width)
    return mask


def decode_rle(counts, height: int, width: int) -> np.ndarray:
    """Expand column-major background-first run counts into a bool mask."""
    arr = np.asarray(counts, dtype=np.int64)
    if arr.ndim != 1 or (arr.size and arr.min() < 0):
        raise RleFormatError("RLE counts must be a flat list of non-negative integers")
    if height < 1 or width < 1:
        raise RleFormatError("RLE dimensions must be at least 1x1")
    total = int(arr.sum()) if arr.size else 0
    if total != height * width:
        raise RleFormatError(f"RLE counts sum to {total}, expected {height * width}")
    values = np.zeros(arr.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, arr)
    return flat.reshape((height, width), order="F")


def encode_rle(mask) -> list[int]:
    """Canonical column-major run counts: background first, no empty interior runs."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise RleFormatError("RLE encoding needs a 2-D mask")
    flat = m.ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = [int(r) for r in np.diff(bounds)]
    if flat[0]:
        runs.insert(0, 0)
    return runs


def instance_mask(annotation: InstanceAnnotation, image: ImageRecord) -> np.ndarray:
    """Rasterize one annotation onto its image grid as a bool mask."""
    if annotation.image_id != image.id:
        raise DomainError(
            f"annotation {annotation.id} belongs to image {annotation.image_id}, "
            f"not image {image.id}"
        )
    seg = annotation.segmentation
    if isinstance(seg, Rle):
        if (seg.height, seg.width) != (image.height, image.width):
            raise RleFormatError(
                f"annotation {annotation.id}: RLE size {seg.height}x{seg.width} does not "
                f"match image {image.id} ({image.height}x{image.width})"
            )
        return decode_rle(seg.counts, seg.height, seg.width)
    return rasterize_polygon(list(seg), image.height, image.width)
