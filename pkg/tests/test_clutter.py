import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canyonpl.clutter import (CLUTTER4_FEATURES, CLUTTER_FEATURES, FeatureMatrix, apply_scaler,
                              assemble_clutter, clutter_per_link, clutter_per_street, fit_scaler,
                              load_features, prepare_street_clouds, save_features)
from canyonpl.geometry import build_voxel_grid, from_street_frame, traverse_segment
from canyonpl.scene import STREET, WORLD, Dataset, LinkRecord, PointCloud, StreetMeta, StreetScene

from oracles import clip_lengths, points_in_cubes

META = StreetMeta("A", 20.0, 15.0, True, (0.0, 0.0, 0.0), (1.0, 0.0))


def test_canonical_order():
    assert CLUTTER_FEATURES == ("log3d", "log1d", "street_width", "clutter_per_link",
                                "clutter_per_street", "rx_height", "both_sides")
    assert set(CLUTTER4_FEATURES) == {"log3d", "clutter_per_street", "clutter_per_link", "both_sides"}


class TestClutterPerStreet:
    def test_empty(self):
        assert clutter_per_street(PointCloud(np.empty((0, 3)), STREET), META, 100.0) == 0.0

    def test_uniform_box(self, rng):
        pts = rng.uniform([0, -10, 0], [100, 10, 15], (60000, 3))
        assert clutter_per_street(PointCloud(pts, STREET), META, 100.0) == pytest.approx(2.0, abs=1e-12)

    def test_zero_extent(self):
        with pytest.raises(ValueError):
            clutter_per_street(PointCloud(np.empty((0, 3)), STREET), META, 0.0)


class TestClutterPerLink:
    def test_empty(self):
        g = build_voxel_grid(PointCloud(np.empty((0, 3)), STREET))
        assert clutter_per_link(g, (50, 5, 1.5), (0, 0, 15)) == 0

    def test_five_in_one_cube(self):
        tx, rx = (10.5, 0.5, 0.5), (0.5, 0.5, 0.5)
        pts = np.full((5, 3), 4.5) * [1, 0, 0] + [0, 0.2, 0.7]
        pts = np.vstack([pts, [[4.5, 7.5, 0.5]]])  # off the path
        assert clutter_per_link(build_voxel_grid(PointCloud(pts, STREET)), tx, rx) == 5

    def test_brute_force(self, rng):
        for _ in range(50):
            pts = rng.uniform(-3, 8, (300, 3))
            a, b = rng.uniform(-3, 8, 3), rng.uniform(-3, 8, 3)
            g = build_voxel_grid(PointCloud(pts, STREET))
            assert clutter_per_link(g, a, b) == points_in_cubes(pts, clip_lengths(a, b))

    def test_monotone_under_added_points(self, rng):
        pts = rng.uniform(0, 6, (200, 3))
        a, b = (0.3, 0.3, 0.3), (5.7, 4.1, 3.3)
        base = clutter_per_link(build_voxel_grid(PointCloud(pts, STREET)), a, b)
        path = traverse_segment(None, a, b)
        on = np.array(path[len(path) // 2]) + 0.5
        off = np.array([50.0, 50.0, 50.0])
        more = clutter_per_link(build_voxel_grid(PointCloud(np.vstack([pts, on]), STREET)), a, b)
        same = clutter_per_link(build_voxel_grid(PointCloud(np.vstack([pts, off]), STREET)), a, b)
        assert more == base + 1 and same == base

    def test_integer_translation_invariance(self, rng):
        pts = rng.uniform(0, 10, (500, 3))
        a, b = rng.uniform(0, 10, 3), rng.uniform(0, 10, 3)
        shift = np.array([7.0, -3.0, 2.0])
        g0 = build_voxel_grid(PointCloud(pts, STREET))
        g1 = build_voxel_grid(PointCloud(pts + shift, STREET))
        assert clutter_per_link(g0, a, b) == clutter_per_link(g1, a + shift, b + shift)


def _dataset(both=True, cloud_pts=None):
    meta = StreetMeta("A", 20.0, 15.0, both, (500.0, 200.0, 0.0), (0.6, 0.8))
    pts = np.empty((0, 3)) if cloud_pts is None else cloud_pts
    scene = StreetScene(meta, from_street_frame(PointCloud(pts, STREET), meta))
    tx1 = (80.0, 0.0, 15.0 - 60.0)  # d3d = 100 with d1d = 80
    links = (LinkRecord("l1", "A", tx1, 100.0, 100.0, 80.0),
             LinkRecord("l2", "A", (40.0, 5.0, 1.5), 95.0, math.dist((40.0, 5.0, 1.5), (0, 0, 15.0)), 40.0))
    return Dataset({"A": scene}, links)


class TestAssemble:
    def test_log_distances(self):
        ds = _dataset()
        fm = assemble_clutter(ds, prepare_street_clouds(ds))
        assert fm.values[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert fm.values[0, 1] == pytest.approx(1.9030899869919435, abs=1e-12)
        assert fm.columns == CLUTTER_FEATURES
        np.testing.assert_array_equal(fm.target, [100.0, 95.0])

    def test_both_sides_zero(self):
        ds = _dataset(both=False)
        fm = assemble_clutter(ds, prepare_street_clouds(ds))
        assert np.all(fm.values[:, 6] == 0)

    def test_street_constant_cps(self, rng):
        pts = rng.uniform([0, -10, 0], [80, 10, 15], (3000, 3))
        ds = _dataset(cloud_pts=pts)
        fm = assemble_clutter(ds, prepare_street_clouds(ds, None))
        assert fm.values[0, 4] == fm.values[1, 4] == pytest.approx(3000 / (80 * 20 * 15))

    def test_missing_cloud(self):
        ds = _dataset()
        with pytest.raises(ValueError, match="missing street cloud"):
            assemble_clutter(ds, {})

    def test_world_frame_cloud_matches_street_frame(self, rng):
        """Features from the world-frame cloud equal those computed directly in street frame."""
        pts = rng.uniform([0, -10, 0], [80, 10, 15], (2000, 3))
        ds = _dataset(cloud_pts=pts)
        fm = assemble_clutter(ds, prepare_street_clouds(ds, None))
        grid = build_voxel_grid(PointCloud(pts, STREET))
        for k, lk in enumerate(ds.links):
            direct = clutter_per_link(grid, lk.tx_position, (0, 0, 15.0))
            # the round trip through world coordinates moves points by ~1e-13 m
            assert abs(fm.values[k, 3] - direct) <= 1


class TestScaler:
    def test_hand_example(self):
        s = fit_scaler(np.array([[1.0], [2.0], [3.0]]))
        assert s.means[0] == 2.0 and s.stds[0] == pytest.approx(math.sqrt(2 / 3))
        np.testing.assert_allclose(s.transform([[1.0], [2.0], [3.0]]).ravel(), [-1.224744871391589, 0, 1.224744871391589])

    def test_constant_column(self):
        s = fit_scaler(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]))
        np.testing.assert_array_equal(s.transform([[5.0, 1.0], [7.0, 1.0]])[:, 0], [0.0, 0.0])

    def test_mean_row_is_zero(self, rng):
        X = rng.normal(size=(20, 4))
        s = fit_scaler(X)
        np.testing.assert_allclose(s.transform(X.mean(0)[None]), 0.0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 10_000))
    def test_moments_and_inverse(self, n, p, seed):
        X = np.random.default_rng(seed).normal(3.0, 5.0, (n, p))
        s = fit_scaler(X)
        Z = s.transform(X)
        ok = ~s.constant
        assert np.all(np.abs(Z[:, ok].mean(0)) <= 1e-9)
        assert np.all(np.abs(Z[:, ok].std(0) - 1) <= 1e-9)
        np.testing.assert_allclose(s.inverse_transform(Z), X, atol=1e-9)

    def test_apply_keeps_rows(self):
        fm = FeatureMatrix(np.arange(6.0).reshape(3, 2), ("a", "b"), ["x", "y", "z"], ["s"] * 3, [1, 2, 3])
        out = apply_scaler(fit_scaler(fm), fm)
        assert out.link_ids == fm.link_ids and out.columns == fm.columns


def test_feature_csv_round_trip(tmp_path, rng):
    fm = FeatureMatrix(rng.normal(size=(4, 7)), CLUTTER_FEATURES, list("abcd"), ["s"] * 4, rng.normal(size=4))
    save_features(tmp_path / "f.csv", fm)
    back = load_features(tmp_path / "f.csv")
    assert back.columns == fm.columns and back.link_ids == fm.link_ids
    np.testing.assert_array_equal(back.values, fm.values)
    np.testing.assert_array_equal(back.target, fm.target)
