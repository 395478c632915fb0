import numpy as np
import pytest

from bshape._geometry import pixel_rect
from bshape.annotations import rasterize_polygon
from bshape.errors import DomainError, EmptyMaskError
from bshape.maskgen import extract_boundary, thicken
from bshape.reconstruct import (
    Box,
    ReconstructionParams,
    _prim_mst,
    bbox_from_mask,
    bresenham_line,
    connect_boundary,
    fill_region,
    intersect_boxes,
    reconstruct_instance,
)
from oracles import count_components, min_spanning_weight, random_convex_polygon


def _raster_from_hull(hull, height, width):
    flat = [coord for point in hull for coord in point]
    return rasterize_polygon([flat], height, width)


# ---------------------------------------------------------------------------
# bresenham


def test_bresenham_straight_lines():
    assert bresenham_line(2, 1, 2, 4) == [(2, 1), (2, 2), (2, 3), (2, 4)]
    assert bresenham_line(1, 3, 4, 3) == [(1, 3), (2, 3), (3, 3), (4, 3)]
    assert bresenham_line(0, 0, 3, 3) == [(0, 0), (1, 1), (2, 2), (3, 3)]
    assert bresenham_line(5, 5, 5, 5) == [(5, 5)]


def test_bresenham_properties():
    rng = np.random.default_rng(3)
    for _ in range(50):
        r0, c0, r1, c1 = rng.integers(-20, 21, size=4)
        pts = bresenham_line(int(r0), int(c0), int(r1), int(c1))
        assert pts[0] == (r0, c0) and pts[-1] == (r1, c1)
        assert len(pts) == max(abs(r1 - r0), abs(c1 - c0)) + 1
        for (ar, ac), (br, bc) in zip(pts, pts[1:]):
            assert max(abs(ar - br), abs(ac - bc)) == 1  # 8-connected steps


# ---------------------------------------------------------------------------
# connect


def test_connect_bridges_two_pixels():
    mask = np.zeros((5, 5), dtype=bool)
    mask[0, 0] = mask[0, 4] = True
    out = connect_boundary(mask)
    expected = mask.copy()
    expected[0, 1:4] = True
    assert np.array_equal(out, expected)


def test_connect_single_component_is_copy():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1, 1:3] = True
    out = connect_boundary(mask)
    assert np.array_equal(out, mask)
    assert out is not mask


def test_connect_diagonal_pixels_already_connected():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = mask[1, 1] = True
    assert np.array_equal(connect_boundary(mask), mask)


def test_connect_respects_bridge_limit():
    mask = np.zeros((3, 12), dtype=bool)
    mask[1, 0] = mask[1, 11] = True
    params = ReconstructionParams(max_bridge_distance=5.0)
    assert np.array_equal(connect_boundary(mask, params), mask)
    assert len(count_components(connect_boundary(mask), 8)) == 1  # default 32 bridges


def test_connect_chains_three_fragments():
    mask = np.zeros((2, 8), dtype=bool)
    mask[0, 0] = mask[0, 3] = mask[0, 7] = True
    out = connect_boundary(mask)
    expected = np.zeros((2, 8), dtype=bool)
    expected[0, :] = True
    assert np.array_equal(out, expected)


def test_connect_uses_closest_pixel_pair():
    mask = np.zeros((5, 9), dtype=bool)
    mask[0:5, 0] = True  # left bar
    mask[2, 8] = True  # lone pixel level with the bar's middle
    out = connect_boundary(mask)
    assert out[2, 1:8].all()  # straight bridge from (2, 0)
    assert len(count_components(out, 8)) == 1


def test_prim_matches_exhaustive_minimum():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        dist = rng.uniform(0.1, 10.0, size=(n, n))
        dist = (dist + dist.T) / 2.0
        np.fill_diagonal(dist, 0.0)
        edges = _prim_mst(dist)
        assert len(edges) == n - 1
        weight = sum(dist[u, v] for u, v in edges)
        assert weight == pytest.approx(min_spanning_weight(dist.tolist()), abs=1e-9)


# ---------------------------------------------------------------------------
# fill


def test_fill_square_ring():
    mask = np.zeros((6, 6), dtype=bool)
    mask[1:5, 1:5] = True
    mask[2:4, 2:4] = False
    expected = np.zeros((6, 6), dtype=bool)
    expected[1:5, 1:5] = True
    assert np.array_equal(fill_region(mask), expected)


def test_fill_diamond_ring_holds_with_diagonal_steps():
    # an 8-connected contour made of diagonal steps must still trap the
    # 4-connected background flood
    mask = np.zeros((5, 5), dtype=bool)
    for r in range(5):
        for c in range(5):
            if abs(r - 2) + abs(c - 2) == 2:
                mask[r, c] = True
    filled = fill_region(mask)
    for r in range(5):
        for c in range(5):
            assert filled[r, c] == (abs(r - 2) + abs(c - 2) <= 2)


def test_fill_open_line_unchanged():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 1:4] = True
    assert np.array_equal(fill_region(mask), mask)


def test_fill_is_idempotent():
    rng = np.random.default_rng(13)
    for _ in range(10):
        mask = rng.random((12, 12)) < 0.35
        once = fill_region(mask)
        assert np.array_equal(fill_region(once), once)


def test_fill_region_touching_border_survives():
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, :] = True
    assert np.array_equal(fill_region(mask), mask)


# ---------------------------------------------------------------------------
# end-to-end reconstruction


def test_reconstruct_binarizes_at_threshold():
    pred = np.zeros((6, 6), dtype=np.float32)
    ring = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)]
    for r, c in ring:
        pred[r, c] = 0.5  # exactly at the default threshold: kept
    pred[4, 4] = 0.49  # just below: dropped
    out = reconstruct_instance(pred)
    expected = np.zeros((6, 6), dtype=bool)
    expected[1:4, 1:4] = True
    assert np.array_equal(out, expected)


def test_reconstruct_convex_contour_recovers_region():
    rng = np.random.default_rng(17)
    for _ in range(15):
        hull = random_convex_polygon(rng, 48, 48, margin=2, min_extent=10)
        region = _raster_from_hull(hull, 48, 48)
        if not region.any():
            continue
        contour = extract_boundary(region).to_mask()
        assert np.array_equal(fill_region(contour), region)


def test_reconstruct_thick_target_fills_to_region_union_band():
    rng = np.random.default_rng(19)
    for k in (1, 3):
        for _ in range(8):
            hull = random_convex_polygon(rng, 64, 64, margin=k + 2, min_extent=12)
            region = _raster_from_hull(hull, 64, 64)
            if not region.any():
                continue
            target = thicken(extract_boundary(region), k)
            filled = reconstruct_instance(target)
            assert np.array_equal(filled, region | (target > 0))


def test_reconstruct_survives_boundary_dropout():
    # zeroing isolated true-boundary pixels leaves their thick cross arms in
    # place, so the contour stays closed and the holes refill exactly
    rng = np.random.default_rng(21)
    for _ in range(10):
        hull = random_convex_polygon(rng, 64, 64, margin=3, min_extent=12)
        region = _raster_from_hull(hull, 64, 64)
        if not region.any():
            continue
        boundary = extract_boundary(region)
        target = thicken(boundary, 1)
        reference = region | (target > 0)
        pixels = sorted(boundary.pixels)
        drop = rng.choice(len(pixels), size=max(1, len(pixels) // 10), replace=False)
        damaged = target.copy()
        for index in drop:
            damaged[pixels[index]] = 0.0
        filled = reconstruct_instance(damaged)
        assert len(count_components(filled, 8)) == 1
        assert np.array_equal(filled, reference)


# ---------------------------------------------------------------------------
# boxes


def test_bbox_from_mask_example():
    mask = np.zeros((5, 6), dtype=bool)
    mask[1, 1] = mask[3, 4] = True
    assert bbox_from_mask(mask) == Box(x_min=1, y_min=1, x_max=4, y_max=3)


def test_bbox_from_mask_empty_errors():
    with pytest.raises(EmptyMaskError):
        bbox_from_mask(np.zeros((3, 3), dtype=bool))


def test_bbox_of_binarized_bbox_target_matches_rect():
    from bshape.maskgen import bbox_boundary

    bbox = (1.0, 1.0, 3.0, 2.0)
    target = thicken(bbox_boundary(bbox, 8, 8), 0)
    box = bbox_from_mask(target >= 0.5)
    r0, r1, c0, c1 = pixel_rect(bbox, 8, 8)
    assert (box.y_min, box.y_max, box.x_min, box.x_max) == (r0, r1, c0, c1)


def test_box_area_and_validation():
    assert Box(x_min=2, y_min=1, x_max=4, y_max=1).area == 3
    with pytest.raises(DomainError):
        Box(x_min=3, y_min=0, x_max=2, y_max=1)


def test_intersect_boxes():
    a = Box(x_min=0, y_min=0, x_max=3, y_max=3)
    b = Box(x_min=2, y_min=2, x_max=5, y_max=5)
    assert intersect_boxes(a, b) == Box(x_min=2, y_min=2, x_max=3, y_max=3)
    assert intersect_boxes(a, Box(x_min=4, y_min=0, x_max=6, y_max=2)) is None
    corner = intersect_boxes(a, Box(x_min=3, y_min=3, x_max=6, y_max=6))
    assert corner == Box(x_min=3, y_min=3, x_max=3, y_max=3)


def test_reconstruction_params_validation():
    with pytest.raises(DomainError):
        ReconstructionParams(binarize_threshold=0.0)
    with pytest.raises(DomainError):
        ReconstructionParams(binarize_threshold=1.0)
    with pytest.raises(DomainError):
        ReconstructionParams(max_bridge_distance=0.5)
