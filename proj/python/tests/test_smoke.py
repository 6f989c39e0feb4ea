import numpy as np
import pytest

import cratergan as cg


def test_tile_geometry():
    starts = cg.tile_starts(8192, 416, 208)
    assert len(starts) == 38 and starts[-1] == 7696
    assert cg.tile_starts(500, 416, 208, flush=True) == [0, 84]
    assert cg.tile_footprint_km2(416, 100) == pytest.approx(1730.56)
    with pytest.raises(cg.ConfigError):
        cg.tile_starts(100, 416, 208)


def test_slice_and_reassemble_roundtrip():
    rng = np.random.default_rng(0)
    img = rng.random((256, 256), dtype=np.float32)
    tiles = cg.slice_raster(img, "p", tile_px=128, stride_px=64)
    assert len(tiles) == 9
    t = tiles[5]
    assert t.tile_id == "p_r1_c2"
    np.testing.assert_array_equal(t.pixels, img[t.origin_y:t.origin_y + 128, t.origin_x:t.origin_x + 128])
    back, coverage = cg.reassemble(tiles, 256, 256)
    assert coverage.min() >= 1
    np.testing.assert_array_equal(back, img)


def test_rasterize_matches_numpy_disks():
    rng = np.random.default_rng(1)
    circles = np.column_stack([rng.uniform(0, 64, 15), rng.uniform(0, 64, 15), rng.uniform(1, 9, 15)])
    yy, xx = np.mgrid[0:64, 0:64] + 0.5
    want = np.zeros((64, 64), dtype=np.uint8)
    for cx, cy, r in circles:
        want |= ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(np.uint8)
    np.testing.assert_array_equal(cg.rasterize_craters(circles, 64, 64), want)


def test_scene_is_deterministic_and_labelled():
    a = cg.generate_scene(width_px=128, height_px=128, seed=3)
    b = cg.generate_scene(width_px=128, height_px=128, seed=3)
    np.testing.assert_array_equal(a["image"], b["image"])
    assert a["image"].shape == (128, 128)
    assert 0.0 <= a["image"].min() and a["image"].max() <= 1.0
    assert a["placements"].shape[1] == 5
    mask = cg.rasterize_craters(a["placements"][:, :3], 128, 128)
    assert mask.sum() > 0
    with pytest.raises(cg.ConfigError):
        cg.generate_scene(no_such_field=1)


def test_metrics_against_numpy():
    rng = np.random.default_rng(2)
    pred = (rng.random((64, 64)) < 0.3).astype(np.uint8)
    gt = (rng.random((64, 64)) < 0.4).astype(np.uint8)
    c = cg.confusion(pred, gt)
    tp = int(np.sum(pred & gt))
    fp = int(np.sum(pred & (1 - gt)))
    fn = int(np.sum((1 - pred) & gt))
    assert (c["tp"], c["fp"], c["fn"]) == (tp, fp, fn)
    m = cg.compute_metrics(**c)
    assert m["iou"] == pytest.approx(tp / (tp + fp + fn), abs=1e-12)
    assert m["f1"] == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)
    empty = cg.compute_metrics(0, 0, 0, 9)
    assert empty["vacuous"] and empty["f1"] == 1.0
    report = cg.evaluate_masks([pred, gt], [gt, gt])
    assert report["n_images"] == 2
    assert report["accuracy"] == pytest.approx((np.mean(pred == gt) + 1.0) / 2, abs=1e-12)


def test_reference_comparison():
    rows, table = cg.reference_comparison()
    assert [r["verdict"] for r in rows] == ["improved"] * 6
    f1 = next(r for r in rows if r["metric"] == "f1")
    assert 100 * f1["delta"] == pytest.approx(8.02, abs=1e-9)
    assert "+8.02" in table


def test_projection_and_lon():
    assert cg.normalize_lon(-90) == 270
    cx, cy, r, inside = cg.project_to_pixel(0.0, 180.0, 16.0, 3600, 1200)
    assert inside and r == pytest.approx(160.0)
