"""Audio clips and 16 kHz / 16-bit mono WAV I/O."""

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

SAMPLE_RATE = 16000
BIT_DEPTH = 16
_INT16_FULL_SCALE = 32768.0


@dataclass
class AudioClip:
    """Mono waveform with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    bit_depth: int = BIT_DEPTH

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise FormatError(f"expected mono samples, got shape {self.samples.shape}")
        if self.sample_rate != SAMPLE_RATE:
            raise FormatError(f"sample_rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise FormatError("samples contain non-finite values")
        if self.samples.size and (np.abs(self.samples) > 1.0).any():
            raise FormatError("samples exceed [-1, 1]")

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


def read_wav(path) -> AudioClip:
    """Read a PCM mono 16 kHz 16-bit WAV file, rejecting anything else."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        if wf.getcomptype() != "NONE":
            raise FormatError(f"{path}: compression type {wf.getcomptype()!r}, need PCM")
        if wf.getnchannels() != 1:
            raise FormatError(f"{path}: {wf.getnchannels()} channels, need mono")
        if wf.getframerate() != SAMPLE_RATE:
            raise FormatError(f"{path}: sample rate {wf.getframerate()} Hz, need {SAMPLE_RATE}")
        if wf.getsampwidth() != BIT_DEPTH // 8:
            raise FormatError(f"{path}: sample width {8 * wf.getsampwidth()} bit, need {BIT_DEPTH}")
        raw = wf.readframes(wf.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioClip(pcm.astype(np.float64) / _INT16_FULL_SCALE)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as PCM mono 16 kHz 16-bit WAV."""
    path = Path(path)
    pcm = np.clip(np.round(clip.samples * _INT16_FULL_SCALE), -32768, 32767).astype("<i2")
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(BIT_DEPTH // 8)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(pcm.tobytes())
