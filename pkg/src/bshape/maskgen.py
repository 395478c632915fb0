"""Boundary sets and thick / scored target-mask generation.

A boundary set holds the true boundary pixels of one instance on its image
grid. Target masks dilate that boundary along pixel rows and columns: for a
boundary pixel (i, j) and half-width k, every pixel (p, j) with |p - i| <= k
and every pixel (i, q) with |q - j| <= k is covered, with spans clamped to
the image. The thick variant marks covered pixels with 1. The scored
variant assigns 1 - d * s where d is the smallest axis distance at which
any boundary pixel covers the target pixel, so overlapping contributions
resolve to the maximum; values clamp below at 0 and true boundary pixels
are exactly 1.

Target masks are float32 arrays in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import annotations as _annotations
from ._geometry import pixel_rect
from .errors import DomainError, EmptyBoxError

DEFAULT_SCORE_STEP = 0.05

COCO_PROFILE_K = 7
CITYSCAPES_PROFILE_K = 3
PROFILE_K = {"coco": COCO_PROFILE_K, "cityscapes": CITYSCAPES_PROFILE_K}

KINDS = ("bshape", "bbox")
VARIANTS = ("thick", "scored")


@dataclass(frozen=True)
class BoundarySet:
    """True boundary pixels (row, col) of one instance on a height x width grid."""

    height: int
    width: int
    pixels: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DomainError("boundary grid dimensions must be at least 1x1")
        pixels = frozenset((int(r), int(c)) for r, c in self.pixels)
        for r, c in pixels:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise DomainError(f"boundary pixel ({r}, {c}) outside {self.height}x{self.width}")
        object.__setattr__(self, "pixels", pixels)

    def to_mask(self) -> np.ndarray:
        """Indicator raster of the boundary pixels."""
        mask = np.zeros((self.height, self.width), dtype=bool)
        for r, c in self.pixels:
            mask[r, c] = True
        return mask


@dataclass(frozen=True)
class MaskSpec:
    """How to build a target: boundary source, variant, and parameters.

    kind "bshape" traces the instance's own boundary; "bbox" traces the
    perimeter of its integer-rounded bounding box. k is the dilation
    half-width, s the per-pixel score decrement of the scored variant.
    """

    kind: str = "bshape"
    variant: str = "scored"
    k: int = COCO_PROFILE_K
    s: float = DEFAULT_SCORE_STEP

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise DomainError(f"k must be a non-negative integer, got {self.k!r}")
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must lie in (0, 1), got {self.s!r}")


def extract_boundary(mask) -> BoundarySet:
    """Inner boundary of a binary mask.

    A foreground pixel belongs to the boundary when at least one of its four
    edge neighbors is background or outside the image, i.e. the image border
    counts as background.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise DomainError("extract_boundary needs a 2-D mask")
    h, w = m.shape
    interior = np.zeros((h, w), dtype=bool)
    if h > 2 and w > 2:
        interior[1:-1, 1:-1] = (
            m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
        )
    boundary = m & ~interior
    pixels = frozenset((int(r), int(c)) for r, c in zip(*np.nonzero(boundary)))
    return BoundarySet(height=h, width=w, pixels=pixels)


def bbox_boundary(bbox, height: int, width: int) -> BoundarySet:
    """Pixel perimeter of an (x, y, w, h) box, integer-rounded and clamped.

    The perimeter is every pixel in the first or last covered row or column.
    Raises EmptyBoxError when no pixel survives rounding and clamping.
    """
    rect = pixel_rect(bbox, height, width)
    if rect is None:
        raise EmptyBoxError(f"box {tuple(bbox)} covers no pixels on a {height}x{width} grid")
    r0, r1, c0, c1 = rect
    pixels = set()
    for c in range(c0, c1 + 1):
        pixels.add((r0, c))
        pixels.add((r1, c))
    for r in range(r0, r1 + 1):
        pixels.add((r, c0))
        pixels.add((r, c1))
    return BoundarySet(height=height, width=width, pixels=frozenset(pixels))


def _indicator(boundary: BoundarySet) -> np.ndarray:
    ind = np.zeros((boundary.height, boundary.width), dtype=bool)
    for r, c in boundary.pixels:
        ind[r, c] = True
    return ind


def _spans_at_distance(ind: np.ndarray, d: int) -> np.ndarray:
    """Pixels covered by some boundary pixel at axis distance exactly d."""
    h, w = ind.shape
    out = np.zeros((h, w), dtype=bool)
    if d < h:
        out[d:, :] |= ind[: h - d, :]
        out[: h - d, :] |= ind[d:, :]
    if d < w:
        out[:, d:] |= ind[:, : w - d]
        out[:, : w - d] |= ind[:, d:]
    return out


def thicken(boundary: BoundarySet, k: int) -> np.ndarray:
    """Thick target: 1 on every pixel within axis distance k of the boundary
    along its row or column (spans clamped to the image), 0 elsewhere."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    ind = _indicator(boundary)
    cover = np.zeros_like(ind)
    for d in range(k + 1):
        cover |= _spans_at_distance(ind, d)
    return cover.astype(np.float32)


def score(boundary: BoundarySet, k: int, s: float = DEFAULT_SCORE_STEP) -> np.ndarray:
    """Scored target: covered pixels get 1 - d * s for their smallest covering
    axis distance d (the maximum over contributions), clamped below at 0."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    if not (0.0 < s < 1.0):
        raise DomainError(f"s must lie in (0, 1), got {s!r}")
    ind = _indicator(boundary)
    values = np.zeros(ind.shape, dtype=np.float32)
    covered = np.zeros_like(ind)
    # Ascending distance makes the first write per pixel the max contribution.
    for d in range(k + 1):
        fresh = _spans_at_distance(ind, d) & ~covered
        values[fresh] = np.float32(max(1.0 - d * s, 0.0))
        covered |= fresh
    return values


def generate_target(annotation, image, spec: MaskSpec) -> np.ndarray:
    """Target mask for one annotation on its image grid.

    kind "bshape" uses the instance raster's inner boundary (an empty raster
    yields an all-zero target); kind "bbox" uses the box perimeter and
    propagates EmptyBoxError for boxes outside the image.
    """
    if annotation.image_id != image.id:
        raise DomainError(
            f"annotation {annotation.id} belongs to image {annotation.image_id}, "
            f"not image {image.id}"
        )
    if spec.kind == "bbox":
        boundary = bbox_boundary(annotation.bbox, image.height, image.width)
    else:
        boundary = extract_boundary(_annotations.instance_mask(annotation, image))
    if spec.variant == "thick":
        return thicken(boundary, spec.k)
    return score(boundary, spec.k, spec.s)
