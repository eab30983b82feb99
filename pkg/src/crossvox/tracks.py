"""Frame-level feature tracks and their on-disk format.

A track is stored as raw little-endian float32, row-major frames, next to a
``<name>.meta`` text sidecar carrying dim / frame_shift / feature_kind /
num_frames.  Unvoiced log-F0 frames are NaN in memory and -1e10 on disk.

In memory data is float64; writing quantizes to float32 once, after which
write -> read -> write is byte-identical.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

UNVOICED_SENTINEL = -1e10
LPCNET_DIM = 20


class FeatureKind(str, Enum):
    MFCC = "MFCC"
    LOG_F0 = "LOG_F0"
    LPCNET = "LPCNET"
    PPG = "PPG"
    ALIGNMENT = "ALIGNMENT"  # exported attention matrices, for offline inspection


@dataclass
class FeatureTrack:
    """Time-major matrix of frame features with frame-rate metadata.

    ``speaker_id`` is an in-memory tag (set by voice conversion); the disk
    format does not carry it, manifests do.
    """

    data: np.ndarray
    frame_shift: float
    feature_kind: FeatureKind
    speaker_id: str | None = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise FormatError(f"track data must be 2-D, got shape {self.data.shape}")
        self.feature_kind = FeatureKind(self.feature_kind)
        if self.feature_kind is FeatureKind.LPCNET and self.dim != LPCNET_DIM:
            raise FormatError(f"LPCNET tracks must have dim {LPCNET_DIM}, got {self.dim}")
        finite = np.isfinite(self.data)
        if self.feature_kind is FeatureKind.LOG_F0:
            # NaN marks unvoiced frames; infinities are still invalid
            if np.isinf(self.data).any():
                raise FormatError("log-F0 track contains infinities")
        elif not finite.all():
            raise FormatError(f"{self.feature_kind.value} track contains non-finite values")

    @property
    def num_frames(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def voiced_mask(self) -> np.ndarray:
        """True where the frame is voiced (LOG_F0 tracks only)."""
        if self.feature_kind is not FeatureKind.LOG_F0:
            raise ValidationError(f"voiced_mask only applies to LOG_F0, not {self.feature_kind.value}")
        return np.isfinite(self.data[:, 0])


def write_track(path, track: FeatureTrack) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = track.data
    if track.feature_kind is FeatureKind.LOG_F0:
        data = np.where(np.isnan(data), np.float32(UNVOICED_SENTINEL), data)
    path.write_bytes(data.astype("<f4").tobytes())
    meta = {
        "dim": track.dim,
        "feature_kind": track.feature_kind.value,
        "frame_shift": repr(track.frame_shift),
        "num_frames": track.num_frames,
    }
    lines = [f"{k}={meta[k]}" for k in sorted(meta)]
    Path(str(path) + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_track(path) -> FeatureTrack:
    path = Path(path)
    meta_path = Path(str(path) + ".meta")
    if not meta_path.exists():
        raise FormatError(f"missing sidecar {meta_path}")
    meta = {}
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key] = value
    dim = int(meta["dim"])
    num_frames = int(meta["num_frames"])
    kind = FeatureKind(meta["feature_kind"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != dim * num_frames:
        raise FormatError(f"{path}: payload has {raw.size} floats, sidecar says {dim * num_frames}")
    data = raw.reshape(num_frames, dim).astype(np.float64)
    if kind is FeatureKind.LOG_F0:
        data[data == float(np.float32(UNVOICED_SENTINEL))] = np.nan
    return FeatureTrack(data, frame_shift=float(meta["frame_shift"]), feature_kind=kind)


def _group_means(data: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping group means; the final partial group averages its actual size."""
    n = data.shape[0]
    out_len = -(-n // factor)
    out = np.empty((out_len, data.shape[1]), dtype=np.float64)
    for i in range(out_len):
        out[i] = data[i * factor : (i + 1) * factor].mean(axis=0)
    return out


def downsample_track(track: FeatureTrack, factor: int) -> FeatureTrack:
    """Mean-pool consecutive groups of ``factor`` frames (PPG length reduction)."""
    if factor < 1:
        raise ValidationError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return FeatureTrack(track.data.copy(), track.frame_shift, track.feature_kind)
    pooled = _group_means(track.data.astype(np.float64), factor)
    return FeatureTrack(pooled, track.frame_shift * factor, track.feature_kind)


def downsample_logf0(track: FeatureTrack, factor: int) -> FeatureTrack:
    """Voiced-aware mean-pooling: NaN frames are excluded; all-unvoiced groups stay NaN."""
    if track.feature_kind is not FeatureKind.LOG_F0:
        raise ValidationError(f"expected LOG_F0 track, got {track.feature_kind.value}")
    if factor < 1:
        raise ValidationError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return FeatureTrack(track.data.copy(), track.frame_shift, track.feature_kind)
    values = track.data[:, 0].astype(np.float64)
    n = values.shape[0]
    out_len = -(-n // factor)
    out = np.full(out_len, np.nan)
    for i in range(out_len):
        group = values[i * factor : (i + 1) * factor]
        voiced = group[np.isfinite(group)]
        if voiced.size:
            out[i] = voiced.mean()
    return FeatureTrack(out[:, None], track.frame_shift * factor, FeatureKind.LOG_F0)
