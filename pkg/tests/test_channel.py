import numpy as np
import pytest

from wmattrib.bitstring import Watermark, bitwise_accuracy, unpack_bits
from wmattrib.channel import (
    ChannelParams,
    DecodeSample,
    IDENTITY_PROFILE,
    PostprocessProfile,
    degrade_beta,
    estimate_beta,
    estimate_gamma,
    resolve_profile,
    simulate_unwatermarked_batch,
    simulate_unwatermarked_decode,
    simulate_watermarked_batch,
    simulate_watermarked_decode,
    unwatermarked_bit_probs,
)
from wmattrib.errors import ConfigError
from wmattrib.rng import substream


class TestWatermarkedChannel:
    def test_perfect_channel_is_identity(self):
        wm = Watermark("10110100")
        out = simulate_watermarked_decode(wm, 1.0, substream(0, 0))
        assert out == wm
        packed = simulate_watermarked_batch(wm, 1.0, 5, substream(0, 0))
        assert all(np.array_equal(row, wm.words) for row in packed)

    def test_beta_zero_is_rejected(self):
        with pytest.raises(ValueError):
            simulate_watermarked_decode(Watermark("01"), 0.0, substream(0, 0))
        with pytest.raises(ValueError):
            simulate_watermarked_decode(Watermark("01"), 1.1, substream(0, 0))

    def test_mean_accuracy_tracks_beta(self):
        wm = Watermark(substream(1, 0).integers(0, 2, 512, dtype=np.uint8))
        samples = [
            simulate_watermarked_decode(wm, 0.9, substream(1, 1, i)) for i in range(64)
        ]
        est = estimate_beta(samples, wm)
        assert abs(est - 0.9) < 0.01

    def test_batch_matches_known_flip_pattern(self):
        # with beta=0.5 every bit is a fair coin from the stream, so the
        # batch must be reproducible from the same substream
        wm = Watermark("1" * 32)
        a = simulate_watermarked_batch(wm, 0.7, 4, substream(9, 2))
        b = simulate_watermarked_batch(wm, 0.7, 4, substream(9, 2))
        assert np.array_equal(a, b)


class TestUnwatermarkedChannel:
    def test_worstcase_probs_are_constant(self):
        probs = unwatermarked_bit_probs(16, 0.05, "worstcase")
        assert np.allclose(probs, 0.55)

    def test_perbit_probs_stay_in_band(self):
        probs = unwatermarked_bit_probs(4096, 0.3, "perbituniform", substream(0, 1))
        assert probs.min() >= 0.2 and probs.max() <= 0.8
        assert probs.std() > 0.05  # actually varies per position

    def test_perbit_requires_rng(self):
        with pytest.raises(ValueError):
            unwatermarked_bit_probs(8, 0.1, "perbituniform")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            unwatermarked_bit_probs(8, 0.1, "adversarial", substream(0, 0))

    def test_batch_reports_total_ones(self):
        packed, ones = simulate_unwatermarked_batch(33, 0.0, "worstcase", 7, substream(2, 0))
        bits = np.concatenate([unpack_bits(row, 33) for row in packed])
        assert ones == int(bits.sum())

    def test_gamma_estimate_sees_the_bias(self):
        samples = [
            simulate_unwatermarked_decode(256, 0.25, "worstcase", substream(4, i))
            for i in range(40)
        ]
        assert abs(estimate_gamma(samples) - 0.25) < 0.02
        # unbiased channel estimates near zero
        fair = [
            simulate_unwatermarked_decode(256, 0.0, "worstcase", substream(5, i))
            for i in range(40)
        ]
        assert estimate_gamma(fair) < 0.02


class TestChannelParams:
    def test_validation(self):
        params = ChannelParams(beta={"u1": 0.9}, gamma=0.1, rng_seed=3)
        assert params.beta["u1"] == 0.9
        with pytest.raises(ValueError):
            ChannelParams(beta={"u1": 0.0}, gamma=0.1)
        with pytest.raises(ValueError):
            ChannelParams(beta={"u1": 0.9}, gamma=0.6)
        with pytest.raises(ValueError):
            ChannelParams(beta={"u1": 0.9}, gamma=0.1, gamma_mode="nope")

    def test_beta_mapping_is_read_only(self):
        params = ChannelParams(beta={"u1": 0.9}, gamma=0.1)
        with pytest.raises(TypeError):
            params.beta["u2"] = 0.5


class TestPostprocess:
    def test_identity(self):
        assert degrade_beta(0.97, IDENTITY_PROFILE) == 0.97

    def test_absolute_and_scale(self):
        assert degrade_beta(0.99, PostprocessProfile("jpeg", "absolute", 0.09)) == pytest.approx(0.90)
        assert degrade_beta(0.8, PostprocessProfile("blur", "scale", 0.5)) == pytest.approx(0.4)

    def test_never_increases_and_never_hits_zero(self):
        profile = PostprocessProfile("crush", "absolute", 0.99)
        out = degrade_beta(0.6, profile)
        assert 0 < out < 0.6  # clipped at the positive floor, not zero
        grow = PostprocessProfile("keep", "scale", 1.0)
        assert degrade_beta(0.6, grow) == 0.6
        with pytest.raises(ValueError):
            PostprocessProfile("boost", "scale", 1.5)
        with pytest.raises(ValueError):
            PostprocessProfile("neg", "absolute", -0.1)
        with pytest.raises(ValueError):
            PostprocessProfile("full", "absolute", 1.0)
        with pytest.raises(ValueError):
            PostprocessProfile("bad", "sharpen", 0.1)

    def test_resolve_unknown_profile(self):
        with pytest.raises(ConfigError):
            resolve_profile("missing", {"identity": IDENTITY_PROFILE})


class TestEstimators:
    def test_estimate_beta_exact_small_case(self):
        wm = Watermark("1111")
        samples = [DecodeSample(Watermark("1111")), DecodeSample(Watermark("1100"))]
        assert estimate_beta(samples, wm) == 0.75

    def test_estimate_needs_samples(self):
        with pytest.raises(ValueError):
            estimate_beta([], Watermark("1"))
        with pytest.raises(ValueError):
            estimate_gamma([])

    def test_accepts_bare_watermarks(self):
        wm = Watermark("0101")
        assert estimate_beta([wm], wm) == 1.0
        assert estimate_gamma([Watermark("0101")]) == 0.0
