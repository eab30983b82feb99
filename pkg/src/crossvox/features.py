"""Frame-level acoustic feature extraction.

All extractors share one framing law: frames start at multiples of the hop
and the last frames are zero-padded, so num_frames == ceil(num_samples / hop)
and MFCC / log-F0 / synthesis-feature tracks align frame-for-frame.
"""

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.fft import dct, rfft

from .audio import AudioClip
from .errors import EmptyInputError, InsufficientDataError, ValidationError
from .tracks import FeatureKind, FeatureTrack

LOG_FLOOR = 1e-30


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_length: int = 400   # 25 ms
    hop: int = 160            # 10 ms
    n_fft: int = 512
    preemphasis: float = 0.97
    mel_filters: int = 26
    mfcc_order: int = 13
    bark_bands: int = 18
    f0_min: float = 60.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.5

    @property
    def frame_shift(self) -> float:
        return self.hop / self.sample_rate

    @property
    def min_lag(self) -> int:
        return int(np.floor(self.sample_rate / self.f0_max))

    @property
    def max_lag(self) -> int:
        return int(np.ceil(self.sample_rate / self.f0_min))

    def to_dict(self) -> dict:
        return asdict(self)


def num_frames_for(num_samples: int, hop: int) -> int:
    return -(-num_samples // hop)


def _check_clip(clip: AudioClip, config: FeatureConfig) -> None:
    if clip.num_samples < config.frame_length:
        raise EmptyInputError(
            f"clip has {clip.num_samples} samples, shorter than one frame ({config.frame_length})"
        )


def _preemphasize(x: np.ndarray, coeff: float) -> np.ndarray:
    if coeff <= 0.0:
        return x.copy()
    return np.concatenate([x[:1], x[1:] - coeff * x[:-1]])


def _frames(x: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    count = num_frames_for(len(x), hop)
    padded = np.zeros((count - 1) * hop + frame_length)
    padded[: len(x)] = x
    idx = np.arange(frame_length)[None, :] + hop * np.arange(count)[:, None]
    return padded[idx]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def _hz_to_bark(f):
    # Traunmueller's approximation of the Bark scale
    f = np.asarray(f, dtype=np.float64)
    return 26.81 * f / (1960.0 + f) - 0.53


def _bark_to_hz(z):
    z = np.asarray(z, dtype=np.float64) + 0.53
    return 1960.0 * z / (26.81 - z)


def _triangular_bank(edges_hz: np.ndarray, n_fft: int, sample_rate: int) -> np.ndarray:
    """Rows are triangular filters spanning consecutive edge triples."""
    n_bins = n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / n_fft
    bank = np.zeros((len(edges_hz) - 2, n_bins))
    for b in range(bank.shape[0]):
        lo, mid, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        up = (bin_hz - lo) / max(mid - lo, 1e-12)
        down = (hi - bin_hz) / max(hi - mid, 1e-12)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(config.sample_rate / 2), config.mel_filters + 2))
    return _triangular_bank(edges, config.n_fft, config.sample_rate)


def bark_filterbank(config: FeatureConfig) -> np.ndarray:
    edges = _bark_to_hz(np.linspace(_hz_to_bark(0.0), _hz_to_bark(config.sample_rate / 2), config.bark_bands + 2))
    return _triangular_bank(edges, config.n_fft, config.sample_rate)


def _power_spectrum(frames: np.ndarray, config: FeatureConfig) -> np.ndarray:
    window = np.hanning(config.frame_length)
    spec = rfft(frames * window, n=config.n_fft, axis=1)
    return np.abs(spec) ** 2


def _log_band_energies(clip: AudioClip, config: FeatureConfig, bank: np.ndarray) -> np.ndarray:
    x = _preemphasize(clip.samples, config.preemphasis)
    power = _power_spectrum(_frames(x, config.frame_length, config.hop), config)
    energies = power @ bank.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def extract_mfcc(clip: AudioClip, config: FeatureConfig) -> FeatureTrack:
    """Classic MFCCs: DCT-II (orthonormal) of log mel-band energies."""
    _check_clip(clip, config)
    log_e = _log_band_energies(clip, config, mel_filterbank(config))
    cepstra = dct(log_e, type=2, norm="ortho", axis=1)[:, : config.mfcc_order]
    return FeatureTrack(cepstra, config.frame_shift, FeatureKind.MFCC)


def _nccf(segment: np.ndarray, window: int, min_lag: int, max_lag: int):
    """Normalized cross-correlation over the lag range; returns (lags, scores)."""
    base = segment[:window]
    num = np.correlate(segment, base, mode="valid")  # num[tau] = sum base * segment[tau:tau+window]
    sq = np.concatenate([[0.0], np.cumsum(segment**2)])
    e0 = sq[window] - sq[0]
    lags = np.arange(min_lag, max_lag + 1)
    etau = sq[lags + window] - sq[lags]
    den = np.sqrt(e0 * etau)
    scores = np.zeros_like(den)
    good = den > 1e-12
    scores[good] = num[lags[good]] / den[good]
    return lags, scores


def _parabolic_refine(lags: np.ndarray, scores: np.ndarray, k: int) -> float:
    if 0 < k < len(scores) - 1:
        denom = scores[k - 1] - 2.0 * scores[k] + scores[k + 1]
        if abs(denom) > 1e-12:
            delta = 0.5 * (scores[k - 1] - scores[k + 1]) / denom
            return float(lags[k]) + float(np.clip(delta, -0.5, 0.5))
    return float(lags[k])


_OCTAVE_TOLERANCE = 0.01


def _pick_peak(scores: np.ndarray) -> int:
    """Smallest-lag peak within tolerance of the global max (avoids subharmonic picks)."""
    best = float(scores.max())
    k = int(np.argmax(scores >= best - _OCTAVE_TOLERANCE))
    while k + 1 < len(scores) and scores[k + 1] > scores[k]:
        k += 1
    return k


def _pitch_track(clip: AudioClip, config: FeatureConfig):
    """Per-frame (period_samples, correlation) on the raw signal."""
    count = num_frames_for(clip.num_samples, config.hop)
    window = config.frame_length
    min_lag, max_lag = config.min_lag, config.max_lag
    padded = np.zeros((count - 1) * config.hop + window + max_lag + 1)
    padded[: clip.num_samples] = clip.samples
    periods = np.empty(count)
    corrs = np.empty(count)
    for i in range(count):
        seg = padded[i * config.hop : i * config.hop + window + max_lag + 1]
        lags, scores = _nccf(seg, window, min_lag, max_lag)
        if scores.max() > 0.0:
            k = _pick_peak(scores)
            corrs[i] = scores[k]
            periods[i] = _parabolic_refine(lags, scores, k)
        else:
            corrs[i] = 0.0
            periods[i] = float(min_lag)
    periods = np.clip(periods, min_lag, max_lag)
    return periods, np.clip(corrs, 0.0, 1.0)


def extract_logf0(clip: AudioClip, config: FeatureConfig) -> FeatureTrack:
    """1-dim log-F0 track; unvoiced frames are NaN."""
    _check_clip(clip, config)
    periods, corrs = _pitch_track(clip, config)
    logf0 = np.where(
        corrs >= config.voicing_threshold,
        np.log(config.sample_rate / periods),
        np.nan,
    )
    return FeatureTrack(logf0[:, None], config.frame_shift, FeatureKind.LOG_F0)


def extract_lpcnet_features(clip: AudioClip, config: FeatureConfig) -> FeatureTrack:
    """20-dim synthesis features: 18 Bark-band cepstra + pitch period + pitch correlation.

    The period is in samples, clamped to the configured pitch search range;
    the correlation is clamped to [0, 1].
    """
    if config.bark_bands != 18:
        raise ValidationError(f"synthesis features need 18 Bark bands, got {config.bark_bands}")
    _check_clip(clip, config)
    log_e = _log_band_energies(clip, config, bark_filterbank(config))
    cepstra = dct(log_e, type=2, norm="ortho", axis=1)
    periods, corrs = _pitch_track(clip, config)
    data = np.concatenate([cepstra, periods[:, None], corrs[:, None]], axis=1)
    return FeatureTrack(data, config.frame_shift, FeatureKind.LPCNET)


@dataclass
class F0Stats:
    """Per-speaker log-F0 statistics over voiced frames (population std)."""

    speaker_id: str
    mean_logf0: float
    std_logf0: float
    num_voiced_frames: int

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(asdict(self), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "F0Stats":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def fit_f0_stats(tracks, speaker_id: str = "") -> F0Stats:
    """Pool voiced frames of all tracks and fit zero-mean/unit-variance stats."""
    voiced = []
    for track in tracks:
        if track.feature_kind is not FeatureKind.LOG_F0:
            raise ValidationError(f"expected LOG_F0 track, got {track.feature_kind.value}")
        values = track.data[:, 0]
        voiced.append(values[np.isfinite(values)])
    pooled = np.concatenate(voiced) if voiced else np.empty(0)
    if pooled.size < 2:
        raise InsufficientDataError(f"need >= 2 voiced frames, got {pooled.size}")
    mean = float(pooled.mean())
    std = float(pooled.std())  # population
    if std <= 0.0:
        raise InsufficientDataError("voiced log-F0 values are all equal; std would be 0")
    return F0Stats(speaker_id=speaker_id, mean_logf0=mean, std_logf0=std, num_voiced_frames=int(pooled.size))


def normalize_logf0(track: FeatureTrack, stats: F0Stats) -> FeatureTrack:
    """Map voiced frames to z-scores; unvoiced frames become 0 (neutral conditioning)."""
    if track.feature_kind is not FeatureKind.LOG_F0:
        raise TypeError(f"expected LOG_F0 track, got {track.feature_kind.value}")
    if stats.std_logf0 <= 0.0:
        raise ValidationError("stats.std_logf0 must be positive")
    values = track.data[:, 0]
    z = np.where(np.isfinite(values), (values - stats.mean_logf0) / stats.std_logf0, 0.0)
    return FeatureTrack(z[:, None], track.frame_shift, FeatureKind.LOG_F0)


def denormalize_logf0(track: FeatureTrack, stats: F0Stats) -> FeatureTrack:
    """Inverse of normalize_logf0 on voiced positions (unvoiced were collapsed to 0)."""
    if track.feature_kind is not FeatureKind.LOG_F0:
        raise TypeError(f"expected LOG_F0 track, got {track.feature_kind.value}")
    values = track.data[:, 0] * stats.std_logf0 + stats.mean_logf0
    return FeatureTrack(values[:, None], track.frame_shift, FeatureKind.LOG_F0)
