"""Pixel-grid rounding helpers shared by mask generation and evaluation."""

import math


def iround(value: float) -> int:
    """Round half-up to an integer. floor(v + 0.5) avoids banker's rounding."""
    return math.floor(value + 0.5)


def pixel_rect(bbox, height, width):
    """Integer-rounded pixel rectangle of an (x, y, w, h) box, clamped to the image.

    Returns inclusive (r0, r1, c0, c1), or None when no pixel remains after
    rounding and clamping.
    """
    x, y, w, h = bbox
    c0, c1 = iround(x), iround(x + w) - 1
    r0, r1 = iround(y), iround(y + h) - 1
    c0, c1 = max(c0, 0), min(c1, width - 1)
    r0, r1 = max(r0, 0), min(r1, height - 1)
    if r0 > r1 or c0 > c1:
        return None
    return r0, r1, c0, c1
