import numpy as np
import pytest

from motionqa.augment import (
    AugKind,
    AugRecord,
    adaptive_hist,
    apply_record,
    draw_record,
    gamma_adjust,
    log_adjust,
    random_augment,
    sigmoid_adjust,
)
from motionqa.imagecore import Slice2D
from motionqa.rng import make_rng


def global_histeq_oracle(pixels, bins=256):
    """Plain (unclipped) histogram equalization: pixel -> its quantile."""
    q = np.minimum((pixels * bins).astype(int), bins - 1)
    hist = np.bincount(q.ravel(), minlength=bins).astype(float)
    cdf = np.cumsum(hist) / pixels.size
    return cdf[q]


@pytest.fixture()
def ramp():
    return Slice2D(np.linspace(0, 1, 64 * 64).reshape(64, 64))


class TestGamma:
    def test_identity(self, ramp):
        assert np.array_equal(gamma_adjust(ramp, 1.0).pixels, ramp.pixels)

    def test_square(self):
        s = Slice2D(np.full((2, 2), 0.25))
        assert np.allclose(gamma_adjust(s, 2.0).pixels, 0.0625)

    def test_sqrt(self):
        s = Slice2D(np.full((2, 2), 0.25))
        assert np.allclose(gamma_adjust(s, 0.5).pixels, 0.5)

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_rejects_nonpositive(self, ramp, gamma):
        with pytest.raises(ValueError, match="gamma"):
            gamma_adjust(ramp, gamma)


class TestLog:
    def test_zero_fixed_point(self):
        s = Slice2D(np.zeros((4, 4)))
        assert np.array_equal(log_adjust(s, 1.3).pixels, np.zeros((4, 4)))

    def test_one_at_gain_one(self):
        s = Slice2D(np.ones((4, 4)))
        assert np.allclose(log_adjust(s, 1.0).pixels, 1.0)

    def test_half_pixel_value(self):
        s = Slice2D(np.full((2, 2), 0.5))
        assert np.abs(log_adjust(s, 1.0).pixels - 0.58496).max() <= 1e-5

    def test_rejects_out_of_range_gain(self, ramp):
        for gain in (0.0, -0.5, 2.5):
            with pytest.raises(ValueError, match="gain"):
                log_adjust(ramp, gain)


class TestSigmoid:
    def test_cutoff_maps_to_half(self):
        s = Slice2D(np.full((3, 3), 0.4))
        assert np.allclose(sigmoid_adjust(s, 0.4, 7.0).pixels, 0.5)

    def test_known_value(self):
        s = Slice2D(np.full((2, 2), 0.25))
        assert np.abs(sigmoid_adjust(s, 0.5, 10.0).pixels - 0.07586).max() <= 1e-5

    def test_preserves_strict_order(self):
        row = Slice2D(np.linspace(0, 1, 32)[None, :].repeat(12, axis=0))
        out = sigmoid_adjust(row, 0.55, 9.0).pixels[0]
        assert np.all(np.diff(out) > 0)

    def test_rejects_out_of_range(self, ramp):
        with pytest.raises(ValueError, match="cutoff"):
            sigmoid_adjust(ramp, 0.1, 5.0)
        with pytest.raises(ValueError, match="gain"):
            sigmoid_adjust(ramp, 0.5, 20.0)


class TestAdaptiveHist:
    def test_constant_stays_constant(self):
        s = Slice2D(np.full((32, 32), 0.37))
        out = adaptive_hist(s, 0.01, 4).pixels
        assert out.min() == out.max()
        # clipping + redistribution keeps the mapping near identity
        assert abs(out[0, 0] - 0.37) < 0.02

    def test_single_tile_large_clip_is_plain_histeq(self):
        pixels = np.zeros((8, 8))
        pixels[:, :4] = 0.2
        pixels[:, 4:] = 0.8
        s = Slice2D(pixels)
        out = adaptive_hist(s, 1.0, 1).pixels
        assert np.abs(out - global_histeq_oracle(pixels)).max() <= 1 / 256

    def test_output_range(self, rng):
        for _ in range(100):
            s = Slice2D(rng.uniform(size=(24, 24)))
            out = adaptive_hist(s, float(rng.uniform(0.005, 0.05)), int(rng.choice([1, 4, 8]))).pixels
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_tile_mapping_monotone(self, rng):
        # a single-tile mapping is a CDF, hence non-decreasing in pixel value
        s = Slice2D(rng.uniform(size=(32, 32)))
        out = adaptive_hist(s, 0.02, 1).pixels
        order = np.argsort(s.pixels.ravel())
        assert np.all(np.diff(out.ravel()[order]) >= -1e-12)

    def test_rejects_image_smaller_than_grid(self):
        with pytest.raises(ValueError, match="tile grid"):
            adaptive_hist(Slice2D(np.ones((8, 8)) * 0.5), 0.01, 16)

    def test_rejects_bad_clip(self, ramp):
        with pytest.raises(ValueError, match="clip"):
            adaptive_hist(ramp, 0.0, 4)

    def test_nondivisible_dims_covered_by_edge_tiles(self, rng):
        s = Slice2D(rng.uniform(size=(37, 53)))
        out = adaptive_hist(s, 0.02, 4).pixels
        assert out.shape == (37, 53)
        assert np.all(np.isfinite(out))


class TestRandomAugment:
    def test_kind_frequencies(self, phantom_slices):
        rng = make_rng(31337)
        s = phantom_slices[0]
        counts = {k: 0 for k in AugKind if k is not AugKind.NONE}
        for _ in range(4000):
            record = draw_record(rng)
            counts[record.kind] += 1
        for kind, c in counts.items():
            assert 0.22 <= c / 4000 <= 0.28, (kind, c)

    def test_params_inside_ranges(self):
        rng = make_rng(5)
        for _ in range(500):
            r = draw_record(rng)
            if r.kind is AugKind.GAMMA:
                assert 0.25 <= r.params["gamma"] <= 4.0
            elif r.kind is AugKind.LOG:
                assert 0.0 < r.params["gain"] <= 2.0
            elif r.kind is AugKind.SIGMOID:
                assert 0.3 <= r.params["cutoff"] <= 0.7
                assert 3.0 <= r.params["gain"] <= 12.0
            else:
                assert 0.005 <= r.params["clip_limit"] <= 0.05
                assert r.params["tiles"] in (4.0, 8.0, 16.0)

    def test_deterministic_for_fixed_seed(self, phantom_slices):
        s = phantom_slices[1]
        out1, rec1 = random_augment(s, make_rng(42))
        out2, rec2 = random_augment(s, make_rng(42))
        assert rec1 == rec2
        assert np.array_equal(out1.pixels, out2.pixels)

    def test_disabled_passthrough(self, phantom_slices):
        s = phantom_slices[2]
        out, rec = random_augment(s, make_rng(0), enabled=False)
        assert rec.kind is AugKind.NONE
        assert out is s

    def test_replay_matches(self, phantom_slices):
        s = phantom_slices[3]
        out, rec = random_augment(s, make_rng(1234), seed=1234)
        again = apply_record(s, rec)
        assert np.array_equal(out.pixels, again.pixels)

    def test_record_json_round_trip(self):
        rec = draw_record(make_rng(8), seed=8)
        assert AugRecord.from_json_dict(rec.to_json_dict()) == rec


class TestRangeAndMonotonicity:
    def test_all_transforms_preserve_unit_range(self, phantom_slices, rng):
        s = phantom_slices[4]
        outs = [
            gamma_adjust(s, 3.7),
            log_adjust(s, 1.9),
            sigmoid_adjust(s, 0.3, 12.0),
            adaptive_hist(s, 0.05, 8),
        ]
        for out in outs:
            assert np.all(np.isfinite(out.pixels))
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    def test_pointwise_transforms_strictly_monotone(self):
        vals = Slice2D(np.linspace(0.01, 0.99, 64).reshape(8, 8))
        for out in (gamma_adjust(vals, 2.2), sigmoid_adjust(vals, 0.5, 6.0)):
            assert np.all(np.diff(out.pixels.ravel()) > 0)
        out = log_adjust(vals, 0.9).pixels.ravel()
        assert np.all(np.diff(out) > 0)

    def test_gamma_one_and_none_keep_ssim_one(self, phantom_slices):
        from motionqa.ssim import ssim_mean

        s = phantom_slices[5]
        assert ssim_mean(s, gamma_adjust(s, 1.0)).mean == pytest.approx(1.0, abs=1e-9)
        out, _ = random_augment(s, make_rng(0), enabled=False)
        assert ssim_mean(s, out).mean == pytest.approx(1.0, abs=1e-9)
