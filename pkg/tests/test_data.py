import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from silan.data import LabeledDataset, gen_moons, load_csv, make_shift_pair, rotate_about_mean, save_csv


class TestMoons:
    def test_class_sizes(self):
        ds = gen_moons(1000, 0.1, seed=3)
        assert np.bincount(ds.labels).tolist() == [500, 500]

    @given(st.integers(2, 301))
    @settings(max_examples=30)
    def test_balance(self, n):
        counts = np.bincount(gen_moons(n, 0.1, 0).labels, minlength=2)
        assert abs(counts[0] - counts[1]) <= 1
        assert counts.sum() == n

    def test_noiseless_upper_arc(self):
        ds = gen_moons(101, 0.0, seed=0)
        upper = ds.X[ds.labels == 0]
        np.testing.assert_allclose(np.linalg.norm(upper, axis=1), 1.0, atol=1e-12)
        assert np.all(upper[:, 1] >= -1e-12)

    def test_noiseless_lower_arc(self):
        ds = gen_moons(100, 0.0, seed=0)
        lower = ds.X[ds.labels == 1]
        np.testing.assert_allclose(np.linalg.norm(lower - [1.0, 0.5], axis=1), 1.0, atol=1e-12)

    def test_deterministic(self):
        assert gen_moons(50, 0.1, 4).equals(gen_moons(50, 0.1, 4))
        assert not gen_moons(50, 0.1, 4).equals(gen_moons(50, 0.1, 5))

    def test_too_small(self):
        with pytest.raises(ValueError):
            gen_moons(1, 0.1, 0)


class TestRotation:
    def test_zero_degrees(self):
        ds = gen_moons(40, 0.1, 1)
        np.testing.assert_allclose(rotate_about_mean(ds, 0).X, ds.X, atol=0, rtol=0)

    def test_full_turn(self):
        ds = gen_moons(40, 0.1, 1)
        np.testing.assert_allclose(rotate_about_mean(ds, 360).X, ds.X, atol=1e-9)

    def test_analytic_point(self):
        ds = LabeledDataset(np.array([[1.0, 0.0]]), np.array([0]))
        out = rotate_about_mean(ds, 30, center=[0.0, 0.0])
        np.testing.assert_allclose(out.X[0], [0.866025, 0.5], atol=1e-6)

    def test_mean_preserved_and_isometry(self):
        ds = gen_moons(200, 0.1, 2)
        out = rotate_about_mean(ds, 30)
        np.testing.assert_allclose(out.X.mean(axis=0), ds.X.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(pdist(out.X), pdist(ds.X), atol=1e-9)
        np.testing.assert_array_equal(out.labels, ds.labels)

    def test_needs_2d(self):
        ds = LabeledDataset(np.zeros((3, 3)), np.zeros(3, dtype=int))
        with pytest.raises(ValueError):
            rotate_about_mean(ds, 10)


class TestShiftPair:
    def test_experimental_pair(self):
        src, tgt = make_shift_pair(1000, 0.1, 30, 1, 2)
        assert len(src) == len(tgt) == 1000
        expected = rotate_about_mean(gen_moons(1000, 0.1, 2), 30)
        assert tgt.equals(expected)
        assert src.equals(gen_moons(1000, 0.1, 1))

    def test_null_shift(self):
        _, tgt = make_shift_pair(100, 0.1, 0, 1, 2)
        assert tgt.equals(gen_moons(100, 0.1, 2))

    def test_equal_seeds(self):
        with pytest.raises(ValueError):
            make_shift_pair(100, 0.1, 30, 1, 1)


class TestCsv:
    def test_round_trip(self, tmp_path):
        ds = gen_moons(37, 0.3, 8)
        save_csv(ds, tmp_path / "d.csv")
        assert load_csv(tmp_path / "d.csv").equals(ds)
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x0,x1,label"

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,x1,label\n0.1,0.2,2\n")
        with pytest.raises(ValueError, match="label"):
            load_csv(path)

    def test_non_integer_label(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,x1,label\n0.1,0.2,0.5\n")
        with pytest.raises(ValueError, match="integer"):
            load_csv(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,x1,label\n0.1,0\n")
        with pytest.raises(ValueError):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(path)
