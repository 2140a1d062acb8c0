import numpy as np
import pytest
from skimage.measure import label as connected_label

from gcvt.content import (LabelMap, enforce_connectivity, imslic_lloyd, rcvt_lloyd,
                          segmentation_metrics, stretch_image, stretch_image_corners,
                          stretch_video, temporal_boundary_fraction)
from gcvt.content.io import boundary_overlay, read_image, read_pgm16, write_pgm16, write_ppm
from gcvt.content.metrics import label_boundaries, regions_from_boundaries, size_cv
from gcvt.content.superpixels import lattice_seeds


def _flood_connected(labels):
    """Independent check: one 4/6-connected component per label."""
    labels = np.asarray(labels)
    return all(connected_label(labels == i, connectivity=1).max() == 1 for i in np.unique(labels))


def _quadrants(n=256):
    img = np.zeros((n, n, 3))
    h = n // 2
    img[:h, :h, 0] = 20
    img[:h, h:, 0] = 80
    img[h:, :h, 0] = 60
    img[h:, h:, 0] = 40
    gt = np.zeros((n, n), dtype=bool)
    gt[h - 1:h + 1, :] = True
    gt[:, h - 1:h + 1] = True
    return img, gt


def test_constant_image_area_is_lambda1_squared():
    g = stretch_image(np.full((10, 12, 3), 42.0), 1.7, 3.0)
    assert g.shape == (10, 12)
    assert np.allclose(g.measure, 1.7 ** 2, atol=1e-9)
    assert g.features.shape == (120, 5)


def test_step_edge_area_closed_form():
    l1, l2, delta = 1.2, 0.5, 30.0
    corners = np.zeros((6, 7, 3))
    corners[:, 4:, 0] = delta
    g = stretch_image_corners(corners, l1, l2)
    expect = l1 * np.sqrt(l1 ** 2 + l2 ** 2 * delta ** 2)
    assert np.allclose(g.measure[:, 3], expect, atol=1e-9)
    assert np.allclose(np.delete(g.measure, 3, axis=1), l1 ** 2, atol=1e-9)


def test_measure_grows_with_color_variation():
    rng = np.random.default_rng(0)
    img = rng.random((16, 16, 3)) * 50
    g = stretch_image(img, 1.0, 1.0)
    assert (g.measure >= 1.0 - 1e-12).all()
    g2 = stretch_image(img, 1.0, 2.0)
    assert (g2.measure >= g.measure - 1e-12).all()


def test_tiny_color_factor_is_isometric():
    rng = np.random.default_rng(1)
    g = stretch_image(rng.random((8, 9, 3)) * 100, 2.0, 1e-12)
    assert np.allclose(g.measure, 4.0, atol=1e-9)


def test_non_positive_factors_rejected():
    img = np.zeros((4, 4, 3))
    with pytest.raises(ValueError):
        stretch_image(img, 0.0, 1.0)
    with pytest.raises(ValueError):
        stretch_image(img, 1.0, -1.0)
    with pytest.raises(ValueError):
        stretch_video(np.zeros((2, 4, 4, 3)), 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        stretch_video(np.zeros((1, 4, 4, 3)))


def test_constant_video_measure():
    g = stretch_video(np.full((3, 5, 6, 3), 10.0), 1.5, 0.7, 2.0)
    assert np.allclose(g.measure, 1.5 ** 2 * 0.7, atol=1e-9)


def test_static_video_reduces_to_image_area():
    rng = np.random.default_rng(2)
    frame = rng.random((7, 8, 3)) * 60
    l1, l2, l3 = 1.3, 0.6, 0.9
    g = stretch_video(np.repeat(frame[None], 4, axis=0), l1, l2, l3)
    img = stretch_image(frame, l1, l3)
    assert np.allclose(g.measure, img.measure[None] * l2, rtol=1e-9)


def test_flickering_voxel_stretches_its_neighbors():
    v = np.full((4, 6, 6, 3), 50.0)
    v[2, 3, 3, 0] = 90.0
    m = stretch_video(v, 1.0, 1.0, 1.0).measure
    assert (m >= 1.0 - 1e-9).all()
    near = m[1:4, 2:5, 2:5].copy()
    # corner averaging lifts all eight corners of the flickering cell equally
    assert near[1, 1, 1] == pytest.approx(1.0)
    near[1, 1, 1] = np.inf
    assert (near > 1.0 + 1e-6).all()
    far = np.ones(m.shape, dtype=bool)
    far[1:4, 2:5, 2:5] = False
    assert np.allclose(m[far], 1.0)


def test_lattice_seeds_count_and_spread():
    for k in (1, 7, 16, 50):
        p = lattice_seeds((1, 40, 60), k)
        assert len(p) == k
        assert (p[:, 1] >= 0).all() and (p[:, 2] <= 59).all()
    p = lattice_seeds((64, 64, 64), 32)
    assert len(p) == 32 and len(np.unique(p[:, 0])) > 1


@pytest.mark.parametrize("method", [rcvt_lloyd, imslic_lloyd])
def test_single_region(method):
    rng = np.random.default_rng(3)
    g = stretch_image(rng.random((12, 10, 3)) * 40, 1.0, 0.5)
    r = method(g, 1)
    assert r.labels.k == 1 and (r.labels.labels == 0).all()


def test_rcvt_single_generator_is_mass_centroid():
    rng = np.random.default_rng(4)
    g = stretch_image(rng.random((12, 10, 3)) * 40, 1.0, 0.5)
    r = rcvt_lloyd(g, 1)
    w = g.measure.ravel()
    assert np.allclose(r.generators[0], (w[:, None] * g.features).sum(0) / w.sum())


@pytest.mark.parametrize("method", [rcvt_lloyd, imslic_lloyd])
def test_k_validation(method):
    g = stretch_image(np.zeros((4, 4, 3)))
    with pytest.raises(ValueError):
        method(g, 0)
    with pytest.raises(ValueError):
        method(g, 17)


def test_constant_image_uniform_regions():
    g = stretch_image(np.full((256, 256, 3), 50.0), 1.0, 1.0)
    r = rcvt_lloyd(g, 64)
    assert r.labels.k == 64
    assert size_cv(r.labels.labels) < 0.05
    assert _flood_connected(r.labels.labels)


def test_rcvt_energy_non_increasing():
    rng = np.random.default_rng(5)
    img = rng.random((64, 64, 3)) * 30
    img[:, 32:, 0] += 40
    r = rcvt_lloyd(stretch_image(img, 1.0, 0.5), 16, max_iters=30)
    e = np.array(r.energy_trace)
    assert (np.diff(e) <= 1e-9 * e[0]).all()


def test_imslic_matches_rcvt_on_constant_image():
    g = stretch_image(np.full((96, 96, 3), 50.0), 1.0, 1.0)
    a = rcvt_lloyd(g, 36).labels.labels
    b = imslic_lloyd(g, 36).labels.labels
    assert (a == b).mean() >= 0.99


def test_imslic_regions_connected_without_enforcement():
    rng = np.random.default_rng(6)
    img = rng.random((48, 48, 3)) * 80
    r = imslic_lloyd(stretch_image(img, 1.0, 0.3), 20)
    assert _flood_connected(r.labels.labels)
    assert r.labels.is_connected()


def test_quadrant_boundary_recall():
    img, gt = _quadrants()
    r = imslic_lloyd(stretch_image(img, 1.0, 1.0), 16)
    labels = enforce_connectivity(r.labels).labels
    assert segmentation_metrics(labels, gt)["boundary_recall"] >= 0.9


def _two_tone(n=128, delta=40.0):
    img = np.full((n, n, 3), 30.0)
    img[:, n // 2:, 0] += delta
    return stretch_image(img, 1.0, 1.0)


@pytest.mark.parametrize("method", [rcvt_lloyd, imslic_lloyd])
def test_two_tone_regions_shrink_at_the_edge(method):
    g = _two_tone()
    labels = enforce_connectivity(method(g, 64, max_iters=50).labels).labels
    sizes = np.bincount(labels.ravel())
    strip = np.zeros(len(sizes), dtype=bool)
    strip[np.unique(labels[:, 62:66])] = True
    assert sizes[strip].mean() < 0.5 * sizes[~strip].mean()


@pytest.mark.parametrize("method", [rcvt_lloyd, imslic_lloyd])
def test_two_tone_region_measures_even(method):
    g = _two_tone()
    labels = enforce_connectivity(method(g, 64, max_iters=50).labels).labels
    meas = np.bincount(labels.ravel(), weights=g.measure.ravel())
    assert meas.std() / meas.mean() <= 0.15


def test_enforce_connectivity_keeps_connected_map():
    lab = np.repeat(np.repeat(np.arange(6).reshape(2, 3), 4, 0), 5, 1)
    out = enforce_connectivity(lab)
    assert np.array_equal(out.labels, lab)


def test_enforce_connectivity_absorbs_island():
    lab = np.zeros((8, 8), dtype=int)
    lab[:, 4:] = 1
    lab[2, 1:3] = 1
    out = enforce_connectivity(lab).labels
    expect = np.zeros((8, 8), dtype=int)
    expect[:, 4:] = 1
    assert np.array_equal(out, expect)


def test_enforce_connectivity_on_noise():
    rng = np.random.default_rng(7)
    lab = rng.integers(0, 10, (40, 40))
    out = enforce_connectivity(lab)
    assert out.k <= 10
    assert _flood_connected(out.labels)
    assert out.labels.min() == 0 and len(np.unique(out.labels)) == out.k


def test_enforce_connectivity_3d():
    rng = np.random.default_rng(8)
    lab = rng.integers(0, 5, (6, 10, 10))
    out = enforce_connectivity(lab)
    assert out.labels.shape == lab.shape and _flood_connected(out.labels)


def test_label_map_properties():
    lm = LabelMap(np.array([[0, 0, 1], [2, 2, 1]]))
    assert lm.k == 3
    assert list(lm.sizes) == [2, 2, 2]
    assert np.allclose(lm.centroids[1], [0.5, 2.0])


def test_metrics_exact_and_single_region():
    img, gt = _quadrants(32)
    regions = regions_from_boundaries(gt)
    assert regions.max() == 3
    m = segmentation_metrics(regions, gt)
    assert m["boundary_recall"] == 1.0
    assert m["underseg_error"] == 0.0
    assert segmentation_metrics(np.zeros_like(regions), gt)["boundary_recall"] == 0.0


def test_metrics_dimension_mismatch():
    with pytest.raises(ValueError):
        segmentation_metrics(np.zeros((4, 4), int), np.zeros((4, 5), bool))


def test_undersegmentation_counts_leakage():
    gt = np.zeros((4, 4), int)
    gt[:, 2:] = 1
    lab = np.zeros((4, 4), int)
    lab[:, 3:] = 1
    # region 0 spans 8 + 4 pixels: leakage min(8, 4) + min(4, 8) = 8 of 16
    m = segmentation_metrics(lab, label_boundaries(gt))
    assert m["underseg_error"] == pytest.approx(0.5)


def test_temporal_boundary_fraction():
    lab = np.zeros((3, 4, 4), int)
    assert temporal_boundary_fraction(lab) == 0.0
    lab[2] = 1
    assert temporal_boundary_fraction(lab) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        temporal_boundary_fraction(lab[0])


@pytest.mark.parametrize("method", [rcvt_lloyd, imslic_lloyd])
def test_constant_video_supervoxels(method):
    g = stretch_video(np.full((16, 64, 64, 3), 50.0))
    r = method(g, 32)
    labels = enforce_connectivity(r.labels).labels
    assert _flood_connected(labels)
    assert size_cv(labels) < 0.10


def test_pgm_round_trip(tmp_path):
    lab = np.arange(300 * 7).reshape(30, 70) % 65536
    write_pgm16(tmp_path / "l.pgm", lab)
    assert np.array_equal(read_pgm16(tmp_path / "l.pgm"), lab)
    with pytest.raises(ValueError):
        write_pgm16(tmp_path / "bad.pgm", np.full((2, 2), 70000))


def test_ppm_round_trip_and_overlay(tmp_path):
    rng = np.random.default_rng(9)
    rgb = rng.integers(0, 256, (9, 11, 3), dtype=np.uint8)
    write_ppm(tmp_path / "a.ppm", rgb)
    assert np.array_equal(read_image(tmp_path / "a.ppm"), rgb)
    lab = np.zeros((9, 11), int)
    lab[:, 5:] = 1
    over = boundary_overlay(rgb, lab)
    assert (over[:, 4:6] == [255, 0, 0]).all()
    assert np.array_equal(over[:, :4], rgb[:, :4])


def test_read_image_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.ppm"):
        read_image(tmp_path / "nope.ppm")
    (tmp_path / "junk.ppm").write_bytes(b"P6\nxx")
    with pytest.raises(ValueError, match="junk.ppm"):
        read_image(tmp_path / "junk.ppm")
