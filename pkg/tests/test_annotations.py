import json

import numpy as np
import pytest

from bshape.annotations import (
    Dataset,
    InstanceAnnotation,
    Rle,
    decode_rle,
    encode_rle,
    instance_mask,
    parse_dataset,
    rasterize_polygon,
)
from bshape.errors import (
    DomainError,
    ParseError,
    ReferentialIntegrityError,
    RleFormatError,
)
from conftest import make_dataset_text
from oracles import rasterize_oracle, rings_from_flat


# ---------------------------------------------------------------------------
# RLE codec


def test_decode_rle_worked_example():
    # counts [1, 2, 1] on a 2x2 grid, column-major, background first:
    # scan order (0,0) (1,0) (0,1) (1,1) -> bg, fg, fg, bg
    mask = decode_rle([1, 2, 1], 2, 2)
    expected = np.array([[False, True], [True, False]])
    assert np.array_equal(mask, expected)


def test_decode_rle_sum_mismatch():
    with pytest.raises(RleFormatError):
        decode_rle([1, 2, 2], 2, 2)


def test_decode_rle_rejects_negative_counts():
    with pytest.raises(RleFormatError):
        decode_rle([-1, 5], 2, 2)


def test_encode_rle_all_background():
    assert encode_rle(np.zeros((3, 3), dtype=bool)) == [9]


def test_encode_rle_all_foreground():
    assert encode_rle(np.ones((3, 3), dtype=bool)) == [0, 9]


def test_encode_rle_foreground_first_gets_leading_zero():
    mask = np.zeros((2, 2), dtype=bool)
    mask[0, 0] = True
    counts = encode_rle(mask)
    assert counts[0] == 0
    assert np.array_equal(decode_rle(counts, 2, 2), mask)


def test_rle_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        h = int(rng.integers(1, 12))
        w = int(rng.integers(1, 12))
        mask = rng.random((h, w)) < rng.uniform(0.1, 0.9)
        counts = encode_rle(mask)
        assert np.array_equal(decode_rle(counts, h, w), mask)
        # canonical: interior runs are non-empty, first run may only be 0
        assert all(c > 0 for c in counts[1:])
        assert counts[0] == 0 if mask.ravel(order="F")[0] else counts[0] > 0


# ---------------------------------------------------------------------------
# polygon rasterization


def test_square_polygon_raster():
    # axis-aligned square with corners (0,0) and (4,4) on a 6x6 grid:
    # centers 0.5..3.5 fall inside -> a 4x4 block
    mask = rasterize_polygon([0, 0, 4, 0, 4, 4, 0, 4], 6, 6)
    expected = np.zeros((6, 6), dtype=bool)
    expected[:4, :4] = True
    assert np.array_equal(mask, expected)
    assert mask.sum() == 16


def test_triangle_polygon_raster_matches_oracle():
    flat = [0, 0, 6, 0, 0, 6]
    mask = rasterize_polygon(flat, 6, 6)
    oracle = rasterize_oracle(rings_from_flat([flat]), 6, 6)
    assert np.array_equal(mask, oracle)
    # interior centers satisfy x + y < 6; centers exactly on the hypotenuse
    # (x + y == 6) count as inside by the tie rule, so r + c <= 5 overall
    expected = np.zeros((6, 6), dtype=bool)
    for r in range(6):
        for c in range(6):
            expected[r, c] = r + c <= 5
    assert np.array_equal(mask, expected)


def test_collinear_polygon_is_empty():
    mask = rasterize_polygon([0, 0, 2, 0, 4, 0], 6, 6)
    assert not mask.any()


def test_polygon_outside_grid_is_empty():
    mask = rasterize_polygon([10, 10, 14, 10, 14, 14, 10, 14], 6, 6)
    assert not mask.any()


def test_multi_ring_union():
    ring_a = [0, 0, 2, 0, 2, 2, 0, 2]
    ring_b = [3, 3, 5, 3, 5, 5, 3, 5]
    mask = rasterize_polygon([ring_a, ring_b], 6, 6)
    assert np.array_equal(
        mask, rasterize_polygon(ring_a, 6, 6) | rasterize_polygon(ring_b, 6, 6)
    )


def test_random_polygons_match_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(3, 8))
        flat = []
        for _ in range(n):
            flat.extend([float(rng.uniform(0, 12)), float(rng.uniform(0, 12))])
        mask = rasterize_polygon(flat, 12, 12)
        oracle = rasterize_oracle(rings_from_flat([flat]), 12, 12)
        assert np.array_equal(mask, oracle)


def test_rasterize_rejects_too_few_vertices():
    with pytest.raises(DomainError):
        rasterize_polygon([0, 0, 1, 1], 4, 4)


def test_rasterize_rejects_bad_grid():
    with pytest.raises(DomainError):
        rasterize_polygon([0, 0, 2, 0, 2, 2], 0, 4)


# ---------------------------------------------------------------------------
# dataset parsing


def _minimal_dataset_text():
    return make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 1,
                "image_id": 1,
                "category_id": 1,
                "segmentation": [[0, 0, 2, 0, 2, 2, 0, 2]],
                "bbox": [0, 0, 2, 2],
            }
        ],
    )


def test_parse_minimal_dataset():
    ds = parse_dataset(_minimal_dataset_text())
    assert isinstance(ds, Dataset)
    assert ds.image(1).width == 4
    assert ds.category(1).name == "thing"
    ann = ds.annotations[0]
    assert ann.is_polygon
    assert ann.iscrowd is False


def test_parse_ignores_unknown_fields():
    raw = json.loads(_minimal_dataset_text())
    raw["info"] = {"year": 2020}
    raw["images"][0]["license"] = 3
    raw["annotations"][0]["extra"] = "x"
    ds = parse_dataset(json.dumps(raw))
    assert len(ds.annotations) == 1


def test_parse_syntax_error_reports_byte_offset():
    text = '{"images": [}'
    with pytest.raises(ParseError) as info:
        parse_dataset(text)
    assert info.value.offset == text.index("}")
    assert "byte offset" in str(info.value)


def test_parse_dangling_image_reference():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 9,
                "image_id": 2,
                "category_id": 1,
                "segmentation": [[0, 0, 2, 0, 2, 2]],
                "bbox": [0, 0, 2, 2],
            }
        ],
    )
    with pytest.raises(ReferentialIntegrityError) as info:
        parse_dataset(text)
    assert info.value.annotation_id == 9
    assert "9" in str(info.value)


def test_parse_dangling_category_reference():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 5,
                "image_id": 1,
                "category_id": 99,
                "segmentation": [[0, 0, 2, 0, 2, 2]],
                "bbox": [0, 0, 2, 2],
            }
        ],
    )
    with pytest.raises(ReferentialIntegrityError) as info:
        parse_dataset(text)
    assert info.value.annotation_id == 5


def test_parse_rejects_compressed_rle():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 1,
                "image_id": 1,
                "category_id": 1,
                "segmentation": {"counts": "abc012", "size": [4, 4]},
                "bbox": [0, 0, 2, 2],
            }
        ],
    )
    with pytest.raises(RleFormatError):
        parse_dataset(text)


def test_parse_rejects_duplicate_image_ids():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}, {"id": 1, "width": 5, "height": 5}],
        annotations=[],
    )
    with pytest.raises(ParseError):
        parse_dataset(text)


def test_parse_rejects_short_polygon_ring():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 1,
                "image_id": 1,
                "category_id": 1,
                "segmentation": [[0, 0, 2, 0]],
                "bbox": [0, 0, 2, 2],
            }
        ],
    )
    with pytest.raises(ParseError):
        parse_dataset(text)


def test_parse_rle_counts_must_sum_to_area():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 1,
                "image_id": 1,
                "category_id": 1,
                "segmentation": {"counts": [3, 2], "size": [4, 4]},
                "bbox": [0, 0, 2, 2],
            }
        ],
    )
    with pytest.raises(RleFormatError):
        parse_dataset(text)


def test_mixed_polygon_and_rle_dataset_rasterizes():
    text = make_dataset_text(
        images=[{"id": 1, "width": 4, "height": 4}],
        annotations=[
            {
                "id": 1,
                "image_id": 1,
                "category_id": 1,
                "segmentation": [[0, 0, 2, 0, 2, 2, 0, 2]],
                "bbox": [0, 0, 2, 2],
            },
            {
                "id": 2,
                "image_id": 1,
                "category_id": 1,
                "segmentation": {"counts": [0, 1, 15], "size": [4, 4]},
                "bbox": [0, 0, 1, 1],
            },
        ],
    )
    ds = parse_dataset(text)
    image = ds.image(1)

    poly_mask = instance_mask(ds.annotations[0], image)
    expected_poly = np.zeros((4, 4), dtype=bool)
    expected_poly[:2, :2] = True
    assert np.array_equal(poly_mask, expected_poly)
    oracle = rasterize_oracle(rings_from_flat([[0, 0, 2, 0, 2, 2, 0, 2]]), 4, 4)
    assert np.array_equal(poly_mask, oracle)

    rle_mask = instance_mask(ds.annotations[1], image)
    expected_rle = np.zeros((4, 4), dtype=bool)
    expected_rle[0, 0] = True
    assert np.array_equal(rle_mask, expected_rle)


def test_instance_mask_checks_image_identity():
    ds = parse_dataset(_minimal_dataset_text())
    other = ds.image(1).__class__(id=2, width=4, height=4)
    with pytest.raises(DomainError):
        instance_mask(ds.annotations[0], other)


def test_instance_mask_checks_rle_size():
    ann = InstanceAnnotation(
        id=1,
        image_id=1,
        category_id=1,
        segmentation=Rle(counts=(9,), height=3, width=3),
        bbox=(0, 0, 1, 1),
    )
    ds = parse_dataset(_minimal_dataset_text())  # image 1 is 4x4
    with pytest.raises(RleFormatError):
        instance_mask(ann, ds.image(1))
