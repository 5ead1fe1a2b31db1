import numpy as np
import pytest

from bloomsight.portraits import (Portrait, augment_mirror, enclosing_square,
                                  make_portrait, mean_center, mirror_portrait)
from bloomsight.slic import SuperpixelLabeling

from oracles import direct_gaussian_blur

MEAN = np.array([60.0, 90.0, 55.0])


def labeling_with_rect(shape, r0, r1, c0, c1):
    """id 0 = the given rectangle, id 1 = everything else."""
    ids = np.ones(shape, dtype=np.int32)
    ids[r0 : r1 + 1, c0 : c1 + 1] = 0
    return SuperpixelLabeling.from_ids(ids)


class TestEnclosingSquare:
    def test_tall_box_shares_center(self):
        lab = labeling_with_rect((40, 40), 5, 24, 8, 17)  # 20 tall x 10 wide
        rect = enclosing_square(lab, 0)
        assert rect.side == 20
        assert rect.y0 == 5 and rect.x0 == 3  # x center 12.5 preserved
        assert not rect.out_of_image

    def test_square_box_identity(self):
        lab = labeling_with_rect((20, 20), 4, 8, 6, 10)
        rect = enclosing_square(lab, 0)
        assert (rect.x0, rect.y0, rect.side) == (6, 4, 5)

    def test_corner_box_flagged(self):
        lab = labeling_with_rect((30, 30), 0, 4, 0, 9)  # 5 tall x 10 wide at corner
        rect = enclosing_square(lab, 0)
        assert rect.side == 10
        assert rect.y0 < 0
        assert rect.out_of_image

    def test_invalid_id(self):
        lab = labeling_with_rect((10, 10), 0, 4, 0, 4)
        with pytest.raises(ValueError):
            enclosing_square(lab, 7)


class TestMakePortrait:
    def setup_method(self):
        rng = np.random.default_rng(21)
        self.img = rng.integers(0, 256, (16, 16, 3)).astype(float)
        # irregular blob inside rows/cols 4..11 with that exact bounding box
        ids = np.ones((16, 16), dtype=np.int32)
        yy, xx = np.mgrid[0:16, 0:16]
        blob = ((yy - 7.5) ** 2 + (xx - 7.5) ** 2 <= 16) & (yy >= 4) & (yy <= 11)
        blob[4, 4] = blob[11, 11] = True  # pin the bbox corners
        ids[blob] = 0
        self.lab = SuperpixelLabeling.from_ids(ids)
        self.rect = enclosing_square(self.lab, 0)
        assert self.rect.side == 8 and not self.rect.out_of_image

    def crop_and_footprint(self):
        r = self.rect
        crop = self.img[r.y0 : r.y0 + r.side, r.x0 : r.x0 + r.side]
        foot = self.lab.ids[r.y0 : r.y0 + r.side, r.x0 : r.x0 + r.side] == 0
        return crop, foot

    def test_mean_pad_is_definitional(self):
        p = make_portrait(self.img, self.lab, 0, "mean_pad", MEAN, size=self.rect.side)
        crop, foot = self.crop_and_footprint()
        assert np.array_equal(p.pixels[foot], crop[foot])
        assert np.array_equal(p.pixels[~foot], np.broadcast_to(MEAN, p.pixels[~foot].shape))

    def test_full_coverage_makes_modes_identical(self):
        ids = np.ones((16, 16), dtype=np.int32)
        ids[4:12, 4:12] = 0  # superpixel fills its own enclosing square
        lab = SuperpixelLabeling.from_ids(ids)
        outs = [make_portrait(self.img, lab, 0, mode, MEAN, size=12)
                for mode in ("original", "blur", "mean_pad")]
        assert np.array_equal(outs[0].pixels, outs[1].pixels)
        assert np.array_equal(outs[0].pixels, outs[2].pixels)

    def test_blur_background_matches_direct_convolution(self):
        sigma = 1.2
        p = make_portrait(self.img, self.lab, 0, "blur", MEAN,
                          size=self.rect.side, blur_sigma=sigma)
        crop, foot = self.crop_and_footprint()
        blurred = np.stack([direct_gaussian_blur(crop[..., c], sigma) for c in range(3)], axis=-1)
        assert np.allclose(p.pixels[~foot], blurred[~foot], atol=1e-9)
        assert np.array_equal(p.pixels[foot], crop[foot])

    def test_out_of_image_filled_with_mean(self):
        lab = labeling_with_rect((16, 16), 0, 3, 0, 11)  # square pokes above the image
        p = make_portrait(self.img, lab, 0, "original", MEAN, size=12)
        rect = enclosing_square(lab, 0)
        assert rect.y0 == -4
        assert np.array_equal(p.pixels[0:4], np.broadcast_to(MEAN, (4, 12, 3)))

    def test_resized_portrait_shape_and_range(self):
        p = make_portrait(self.img, self.lab, 0, "mean_pad", MEAN, size=227)
        assert p.pixels.shape == (227, 227, 3)
        assert p.pixels.min() >= 0.0 and p.pixels.max() <= 255.0

    def test_bad_mode_and_size(self):
        with pytest.raises(ValueError):
            make_portrait(self.img, self.lab, 0, "sharpen", MEAN)
        with pytest.raises(ValueError):
            make_portrait(self.img, self.lab, 0, "blur", MEAN, size=0)


class TestMeanCenter:
    def test_portrait_equal_to_mean_becomes_zero(self):
        pix = np.broadcast_to(MEAN, (8, 8, 3)).copy()
        p = mean_center(Portrait(pix, "a", 0, "mean_pad"), MEAN)
        assert np.array_equal(p.pixels, np.zeros((8, 8, 3)))
        assert p.centered

    def test_zero_mean_is_identity(self):
        pix = np.full((4, 4, 3), 33.0)
        p = mean_center(Portrait(pix, "a", 0, "mean_pad"), np.zeros(3))
        assert np.array_equal(p.pixels, pix)

    def test_arithmetic(self):
        pix = np.full((1, 1, 3), 0.0)
        pix[0, 0] = (100, 150, 200)
        p = mean_center(Portrait(pix, "a", 0, "original"), np.array([90, 140, 190]))
        assert np.array_equal(p.pixels[0, 0], (10, 10, 10))

    def test_double_centering_rejected(self):
        p = Portrait(np.zeros((2, 2, 3)), "a", 0, "mean_pad", centered=True)
        with pytest.raises(ValueError):
            mean_center(p, MEAN)

    def test_mean_pad_background_zero_after_centering(self):
        ids = np.ones((16, 16), dtype=np.int32)
        ids[4:10, 4:10] = 0
        lab = SuperpixelLabeling.from_ids(ids)
        p = make_portrait(np.random.default_rng(2).integers(0, 256, (16, 16, 3)).astype(float),
                          lab, 1, "mean_pad", MEAN, size=16)
        centered = mean_center(p, MEAN)
        # the hole left by superpixel 0 is background for superpixel 1
        assert np.array_equal(centered.pixels[5:9, 5:9], np.zeros((4, 4, 3)))


class TestAugmentMirror:
    def make_samples(self, n_pos, n_neg):
        rng = np.random.default_rng(5)
        samples = []
        for i in range(n_pos + n_neg):
            pix = rng.random((6, 6, 3))
            samples.append((Portrait(pix, "img", i, "mean_pad"), 1 if i < n_pos else -1))
        return samples

    def test_quadruples_positives_only(self):
        out = augment_mirror(self.make_samples(3, 7))
        labels = [lbl for _, lbl in out]
        assert labels.count(1) == 12
        assert labels.count(-1) == 7

    def test_no_positives_unchanged(self):
        samples = self.make_samples(0, 4)
        out = augment_mirror(samples)
        assert len(out) == 4
        assert all(a[0] is b[0] for a, b in zip(out, samples))

    def test_flip_both_is_involution(self):
        p = Portrait(np.random.default_rng(3).random((5, 5, 3)), "x", 0, "original")
        twice = mirror_portrait(mirror_portrait(p, "b"), "b")
        assert np.array_equal(twice.pixels, p.pixels)

    def test_flip_axes(self):
        pix = np.arange(12, dtype=float).reshape(2, 2, 3)
        p = Portrait(pix, "x", 0, "original")
        assert np.array_equal(mirror_portrait(p, "v").pixels, pix[:, ::-1])
        assert np.array_equal(mirror_portrait(p, "h").pixels, pix[::-1, :])
        assert np.array_equal(mirror_portrait(p, "b").pixels, pix[::-1, ::-1])

    def test_variant_tags(self):
        out = augment_mirror(self.make_samples(1, 0))
        assert [p.variant for p, _ in out] == ["o", "v", "h", "b"]
