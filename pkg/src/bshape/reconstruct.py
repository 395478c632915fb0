"""Instance-mask recovery from predicted boundary masks.

The pipeline has three steps: binarize the prediction at a threshold,
connect its 8-connected fragments, then fill the enclosed region. The
connect step treats fragments as nodes of a complete graph weighted by the
Euclidean distance between their closest pixels, takes a Prim minimum
spanning tree, and draws a Bresenham segment for every tree edge no longer
than the bridge limit. Filling floods the background from the image border
with 4-connectivity and keeps everything the flood cannot reach, so an
8-connected closed contour holds the fill in.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyMaskError


@dataclass(frozen=True)
class ReconstructionParams:
    binarize_threshold: float = 0.5
    max_bridge_distance: float = 32.0

    def __post_init__(self):
        if not (0.0 < self.binarize_threshold < 1.0):
            raise DomainError(
                f"binarize_threshold must lie in (0, 1), got {self.binarize_threshold!r}"
            )
        if self.max_bridge_distance < 1.0:
            raise DomainError(
                f"max_bridge_distance must be at least 1, got {self.max_bridge_distance!r}"
            )


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel box with inclusive integer corners."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise DomainError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)


def bresenham_line(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer points of the discrete segment from (r0, c0) to (r1, c1), inclusive."""
    points = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        points.append((r, c))
        if r == r1 and c == c1:
            return points
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def _components(mask: np.ndarray) -> list[np.ndarray]:
    """8-connected foreground components as (n, 2) coordinate arrays, in scan order."""
    h, w = mask.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    comps = []
    for r0, c0 in zip(*np.nonzero(mask)):
        if labels[r0, c0] >= 0:
            continue
        index = len(comps)
        labels[r0, c0] = index
        queue = deque([(int(r0), int(c0))])
        members = []
        while queue:
            r, c = queue.popleft()
            members.append((r, c))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and labels[rr, cc] < 0:
                        labels[rr, cc] = index
                        queue.append((rr, cc))
        comps.append(np.array(members, dtype=np.int64))
    return comps


def _prim_mst(dist: np.ndarray) -> list[tuple[int, int]]:
    """Edges of a minimum spanning tree of a complete graph, O(n^2) Prim."""
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].astype(np.float64).copy()
    parent = np.zeros(n, dtype=np.int64)
    edges = []
    for _ in range(n - 1):
        candidate = np.where(in_tree, np.inf, best)
        v = int(np.argmin(candidate))
        edges.append((int(parent[v]), v))
        in_tree[v] = True
        closer = ~in_tree & (dist[v] < best)
        parent[closer] = v
        best[closer] = dist[v][closer]
    return edges


def connect_boundary(mask, params: ReconstructionParams | None = None) -> np.ndarray:
    """Bridge the 8-connected fragments of a binary boundary mask.

    Fragments become nodes of a complete graph weighted by closest-pixel
    Euclidean distance. Every minimum-spanning-tree edge whose weight is at
    most params.max_bridge_distance is drawn as a Bresenham segment between
    the closest pixel pair. Returns the union of the input and the bridges.
    """
    params = params or ReconstructionParams()
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise DomainError("connect_boundary needs a 2-D mask")
    comps = _components(m)
    if len(comps) <= 1:
        return m.copy()
    n = len(comps)
    dist = np.zeros((n, n), dtype=np.float64)
    closest = {}
    for i in range(n):
        for j in range(i + 1, n):
            a, b = comps[i], comps[j]
            d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
            flat = int(np.argmin(d2))
            ai, bj = divmod(flat, b.shape[0])
            dist[i, j] = dist[j, i] = math.sqrt(float(d2[ai, bj]))
            closest[(i, j)] = (
                (int(a[ai, 0]), int(a[ai, 1])),
                (int(b[bj, 0]), int(b[bj, 1])),
            )
    out = m.copy()
    for u, v in _prim_mst(dist):
        i, j = (u, v) if u < v else (v, u)
        if dist[i, j] <= params.max_bridge_distance:
            p, q = closest[(i, j)]
            for r, c in bresenham_line(p[0], p[1], q[0], q[1]):
                out[r, c] = True
    return out


def fill_region(mask) -> np.ndarray:
    """Fill everything a 4-connected background flood from the border cannot reach.

    Foreground always survives; background pixels enclosed by the foreground
    become foreground. Idempotent.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise DomainError("fill_region needs a 2-D mask")
    h, w = m.shape
    reached = np.zeros((h, w), dtype=bool)
    queue = deque()
    for r in range(h):
        for c in (0, w - 1):
            if not m[r, c] and not reached[r, c]:
                reached[r, c] = True
                queue.append((r, c))
    for c in range(w):
        for r in (0, h - 1):
            if not m[r, c] and not reached[r, c]:
                reached[r, c] = True
                queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= rr < h and 0 <= cc < w and not m[rr, cc] and not reached[rr, cc]:
                reached[rr, cc] = True
                queue.append((rr, cc))
    return ~reached


def reconstruct_instance(pred, params: ReconstructionParams | None = None) -> np.ndarray:
    """Binarize a predicted boundary mask, connect its fragments, fill the region."""
    params = params or ReconstructionParams()
    values = np.asarray(pred)
    if values.ndim != 2:
        raise DomainError("reconstruct_instance needs a 2-D prediction")
    binary = values >= params.binarize_threshold
    return fill_region(connect_boundary(binary, params))


def bbox_from_mask(mask) -> Box:
    """Tight bounding box of a mask's foreground. Raises EmptyMaskError if empty."""
    m = np.asarray(mask, dtype=bool)
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        raise EmptyMaskError("cannot take the bounding box of an empty mask")
    return Box(
        x_min=int(cols.min()),
        y_min=int(rows.min()),
        x_max=int(cols.max()),
        y_max=int(rows.max()),
    )


def intersect_boxes(a: Box, b: Box) -> Box | None:
    """Intersection of two pixel boxes, or None when they share no pixel."""
    x_min = max(a.x_min, b.x_min)
    y_min = max(a.y_min, b.y_min)
    x_max = min(a.x_max, b.x_max)
    y_max = min(a.y_max, b.y_max)
    if x_min > x_max or y_min > y_max:
        return None
    return Box(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max)
