import numpy as np
import pytest
from helpers import periodic_clip, sawtooth_clip, silence_clip, random_logf0_track

from crossvox.audio import AudioClip
from crossvox.errors import EmptyInputError, FormatError, InsufficientDataError
from crossvox.features import (
    F0Stats,
    FeatureConfig,
    denormalize_logf0,
    extract_logf0,
    extract_lpcnet_features,
    extract_mfcc,
    fit_f0_stats,
    normalize_logf0,
    num_frames_for,
)
from crossvox.tracks import FeatureKind, FeatureTrack


@pytest.fixture(scope="module")
def config():
    return FeatureConfig()


def test_frame_counts_one_second(config):
    clip = periodic_clip(150.0, 1.0)
    assert clip.num_samples == 16000
    for extractor in (extract_mfcc, extract_logf0, extract_lpcnet_features):
        assert extractor(clip, config).data.shape[0] == 100


def test_lpcnet_dim_and_pitch_on_sawtooth(config):
    track = extract_lpcnet_features(sawtooth_clip(100.0, 1.0), config)
    assert track.data.shape[1] == 20
    assert track.feature_kind is FeatureKind.LPCNET
    interior = track.data[5:-5]
    assert (interior[:, 19] >= 0.9).all()
    assert np.abs(interior[:, 18] - 160.0).max() <= 5.0


def test_lpcnet_silence_unvoiced(config):
    track = extract_lpcnet_features(silence_clip(1.0), config)
    assert (track.data[:, 19] <= 0.1).all()


def test_pitch_correlation_in_unit_interval(config):
    rng = np.random.default_rng(3)
    for _ in range(10):
        clip = AudioClip(np.clip(rng.standard_normal(rng.integers(800, 6000)) * 0.2, -1, 1))
        corr = extract_lpcnet_features(clip, config).data[:, 19]
        assert (corr >= 0.0).all() and (corr <= 1.0).all()


def test_mfcc_deterministic(config):
    clip = periodic_clip(180.0, 0.7)
    a = extract_mfcc(clip, config)
    b = extract_mfcc(clip, config)
    assert np.array_equal(a.data, b.data)


def test_mfcc_scaling_shifts_c0_only(config):
    clip = periodic_clip(140.0, 0.5)
    half = AudioClip(clip.samples * 0.5)
    a = extract_mfcc(clip, config).data
    b = extract_mfcc(half, config).data
    # power scales by 0.25, every log band shifts by ln(0.25); orthonormal
    # DCT-II maps a constant band shift c to sqrt(M) * c on coefficient 0
    expected_shift = np.log(0.25) * np.sqrt(config.mel_filters)
    diff = b - a
    assert np.abs(diff[:, 0] - expected_shift).max() < 1e-6
    assert np.abs(diff[:, 1:]).max() < 1e-6


def test_logf0_pure_tone_oracle(config):
    track = extract_logf0(periodic_clip(200.0, 1.0, harmonics=1), config)
    voiced = track.data[~np.isnan(track.data[:, 0]), 0]
    assert len(voiced) > 50
    assert np.abs(voiced - np.log(200.0)).max() <= 0.02


def test_logf0_silence_all_unvoiced(config):
    track = extract_logf0(silence_clip(1.0), config)
    assert np.isnan(track.data).all()


def test_short_clip_rejected(config):
    with pytest.raises(EmptyInputError):
        extract_mfcc(AudioClip(np.zeros(10)), config)


def test_wrong_sample_rate_rejected():
    with pytest.raises(FormatError):
        AudioClip(np.zeros(16000), sample_rate=8000)


def test_frame_count_law_random_lengths(config):
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(config.frame_length, 12000))
        clip = AudioClip(np.clip(rng.standard_normal(n) * 0.1, -1, 1))
        assert extract_mfcc(clip, config).data.shape[0] == num_frames_for(n, config.hop)
        assert num_frames_for(n, config.hop) == -(-n // config.hop)


def test_time_shift_covariance(config):
    clip = periodic_clip(130.0, 0.6)
    k = 3
    shifted = AudioClip(np.concatenate([np.zeros(k * config.hop), clip.samples]))
    a = extract_mfcc(clip, config).data
    b = extract_mfcc(shifted, config).data
    # interior frames move by exactly k positions; boundaries exempt
    inner = slice(2, len(a) - 2)
    assert np.allclose(b[k:][inner], a[inner], atol=1e-9)


def test_fit_f0_stats_hand_oracle():
    values = np.array([5.0, 5.2, 4.8])
    track = FeatureTrack(values.reshape(-1, 1), 0.01, FeatureKind.LOG_F0)
    stats = fit_f0_stats([track], "spk")
    assert stats.mean_logf0 == pytest.approx(5.0, abs=1e-12)
    assert stats.std_logf0 == pytest.approx(0.16329931618554522, abs=1e-9)
    assert stats.num_voiced_frames == 3


def test_fit_f0_stats_degenerate_variance():
    track = FeatureTrack(np.full((4, 1), 5.0), 0.01, FeatureKind.LOG_F0)
    with pytest.raises(InsufficientDataError):
        fit_f0_stats([track], "spk")


def test_fit_f0_stats_pooling_equivalence():
    rng = np.random.default_rng(5)
    a = random_logf0_track(rng, 40)
    b = random_logf0_track(rng, 25)
    both = np.concatenate([a.data, b.data])
    merged = FeatureTrack(both, 0.01, FeatureKind.LOG_F0)
    s1 = fit_f0_stats([a, b], "spk")
    s2 = fit_f0_stats([merged], "spk")
    assert s1.mean_logf0 == pytest.approx(s2.mean_logf0, abs=1e-12)
    assert s1.std_logf0 == pytest.approx(s2.std_logf0, abs=1e-12)


def test_normalize_centering_identity():
    stats = F0Stats("spk", mean_logf0=5.0, std_logf0=0.3, num_voiced_frames=10)
    track = FeatureTrack(np.full((6, 1), 5.0), 0.01, FeatureKind.LOG_F0)
    out = normalize_logf0(track, stats)
    assert np.abs(out.data).max() == 0.0


def test_normalize_hand_oracle():
    values = np.array([5.0, 5.2, 4.8])
    track = FeatureTrack(values.reshape(-1, 1), 0.01, FeatureKind.LOG_F0)
    stats = fit_f0_stats([track], "spk")
    out = normalize_logf0(track, stats).data[:, 0]
    expected = np.array([0.0, 1.224744871391589, -1.224744871391589])
    assert np.abs(out - expected).max() < 1e-9


def test_normalize_unvoiced_to_zero():
    stats = F0Stats("spk", 5.0, 0.2, 10)
    data = np.array([[5.2], [np.nan], [4.9]])
    out = normalize_logf0(FeatureTrack(data, 0.01, FeatureKind.LOG_F0), stats)
    assert out.data[1, 0] == 0.0


def test_normalize_round_trip():
    rng = np.random.default_rng(9)
    track = random_logf0_track(rng, 60)
    stats = fit_f0_stats([track], "spk")
    back = denormalize_logf0(normalize_logf0(track, stats), stats)
    voiced = ~np.isnan(track.data)
    assert np.abs(back.data[voiced] - track.data[voiced]).max() < 1e-9


def test_normalize_kind_mismatch():
    stats = F0Stats("spk", 5.0, 0.2, 10)
    wrong = FeatureTrack(np.zeros((4, 13)), 0.01, FeatureKind.MFCC)
    with pytest.raises(TypeError):
        normalize_logf0(wrong, stats)
