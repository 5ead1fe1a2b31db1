import numpy as np
import pytest

from bloomsight.features import (FeatureFormatError, FeatureParseError,
                                 hsv_histogram_features,
                                 hsv_histogram_features_all,
                                 load_external_features,
                                 save_external_features)
from bloomsight.imageops import rgb_to_hsv
from bloomsight.slic import SuperpixelLabeling


def two_region_labeling(shape=(8, 8)):
    ids = np.zeros(shape, dtype=np.int32)
    ids[:, shape[1] // 2 :] = 1
    return SuperpixelLabeling.from_ids(ids)


class TestHsvHistogram:
    def test_constant_superpixel_three_bins(self):
        hsv = np.zeros((8, 8, 3))
        hsv[..., 0] = 120.0
        hsv[..., 1] = 0.4
        hsv[..., 2] = 0.9
        f = hsv_histogram_features(hsv, two_region_labeling(), 0)
        assert np.count_nonzero(f) == 3
        # one bin per block, each worth a third after renormalization
        assert sorted(f[f > 0]) == pytest.approx([1 / 3, 1 / 3, 1 / 3])

    def test_sums_to_one(self):
        rng = np.random.default_rng(1)
        hsv = np.stack([rng.uniform(0, 360, (8, 8)), rng.random((8, 8)), rng.random((8, 8))],
                       axis=-1)
        f = hsv_histogram_features(hsv, two_region_labeling(), 1)
        assert abs(f.sum() - 1.0) <= 1e-9
        assert (f >= 0).all()

    def test_two_hues_split_the_hue_block(self):
        ids = np.ones((1, 4), dtype=np.int32)
        ids[0, :2] = 0
        lab = SuperpixelLabeling.from_ids(ids)
        hsv = np.zeros((1, 4, 3))
        hsv[0, 0, 0], hsv[0, 1, 0] = 0.0, 180.0
        hsv[0, :, 1] = 0.5
        hsv[0, :, 2] = 0.5
        f = hsv_histogram_features(hsv, lab, 0)
        assert f[0] == pytest.approx(1 / 6)     # hue bin 0
        assert f[25] == pytest.approx(1 / 6)    # hue bin for 180 degrees
        assert f[:50].sum() == pytest.approx(1 / 3)

    def test_pixel_order_invariance(self):
        rng = np.random.default_rng(2)
        pixels = np.stack([rng.uniform(0, 360, 12), rng.random(12), rng.random(12)], axis=-1)
        a_img = pixels.reshape(3, 4, 3)
        b_img = pixels[rng.permutation(12)].reshape(4, 3, 3)
        a = hsv_histogram_features(a_img, SuperpixelLabeling.from_ids(np.zeros((3, 4), np.int32)), 0)
        b = hsv_histogram_features(b_img, SuperpixelLabeling.from_ids(np.zeros((4, 3), np.int32)), 0)
        assert np.allclose(a, b)

    def test_additivity_before_normalization(self):
        rng = np.random.default_rng(3)
        hsv = np.stack([rng.uniform(0, 360, (6, 6)), rng.random((6, 6)), rng.random((6, 6))],
                       axis=-1)
        whole = SuperpixelLabeling.from_ids(np.zeros((6, 6), np.int32))
        split_ids = np.zeros((6, 6), np.int32)
        split_ids[3:] = 1
        parts = SuperpixelLabeling.from_ids(split_ids)
        # joint normalization divides raw counts by 3 * pixel_count
        f_whole = hsv_histogram_features(hsv, whole, 0, per_block=False) * 36
        f_a = hsv_histogram_features(hsv, parts, 0, per_block=False) * 18
        f_b = hsv_histogram_features(hsv, parts, 1, per_block=False) * 18
        assert np.allclose(f_whole, f_a + f_b)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, (10, 10, 3)).astype(float)
        hsv = rgb_to_hsv(img)
        ids = (np.arange(100).reshape(10, 10) // 25).astype(np.int32)
        lab = SuperpixelLabeling.from_ids(ids)
        batch = hsv_histogram_features_all(hsv, lab)
        for i in range(lab.k):
            assert np.allclose(batch[i], hsv_histogram_features(hsv, lab, i), atol=1e-12)

    def test_invalid_id(self):
        with pytest.raises(ValueError):
            hsv_histogram_features(np.zeros((4, 4, 3)), two_region_labeling((4, 4)), 5)


class TestExternalFeatures:
    def write(self, tmp_path, lines):
        path = tmp_path / "features.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = [("imgA", 0, "o", rng.random(6)), ("imgA", 1, "o", rng.random(6)),
                ("imgA", 0, "v", rng.random(6))]
        path = tmp_path / "f.csv"
        save_external_features(path, 6, rows)
        src = load_external_features(path, 6)
        assert len(src) == 3
        for image_id, sid, variant, vec in rows:
            assert np.array_equal(src.get(image_id, sid, variant), vec)

    def test_lookup_returns_identical_values(self, tmp_path):
        path = self.write(tmp_path, ["#dim=3", "a,0,1.5,2.5,-0.5"])
        src = load_external_features(path)
        first = src.get("a", 0)
        second = src.get("a", 0)
        assert np.array_equal(first, second)
        assert first.tolist() == [1.5, 2.5, -0.5]

    def test_dimension_mismatch_rejected(self, tmp_path):
        path = self.write(tmp_path, ["#dim=4096"] )
        with pytest.raises(FeatureFormatError):
            load_external_features(path, 100)

    def test_missing_header(self, tmp_path):
        path = self.write(tmp_path, ["a,0,1.0,2.0"])
        with pytest.raises(FeatureFormatError):
            load_external_features(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = self.write(tmp_path, ["#dim=2", "a,0,1,2", "a,0,3,4"])
        with pytest.raises(FeatureParseError) as err:
            load_external_features(path)
        assert err.value.line_no == 3

    def test_malformed_row_reports_line(self, tmp_path):
        path = self.write(tmp_path, ["#dim=2", "a,0,1,2", "a,1,oops,4"])
        with pytest.raises(FeatureParseError) as err:
            load_external_features(path)
        assert err.value.line_no == 3

    def test_wrong_field_count(self, tmp_path):
        path = self.write(tmp_path, ["#dim=3", "a,0,1,2"])
        with pytest.raises(FeatureParseError):
            load_external_features(path)

    def test_missing_key(self, tmp_path):
        path = self.write(tmp_path, ["#dim=2", "a,0,1,2"])
        src = load_external_features(path)
        with pytest.raises(KeyError):
            src.get("a", 1)
        with pytest.raises(KeyError):
            src.get("a", 0, "v")

    def test_variant_keys(self, tmp_path):
        path = self.write(tmp_path, ["#dim=2", "a,0,1,2", "a,0:v,3,4", "a,0:b,5,6"])
        src = load_external_features(path)
        assert src.get("a", 0, "v").tolist() == [3.0, 4.0]
        assert src.get("a", 0, "b").tolist() == [5.0, 6.0]
        assert src.has("a", 0) and not src.has("a", 0, "h")
