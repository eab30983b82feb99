"""Waveform rendering from 20-dim synthesis features.

Two routes: EXTERNAL shells out to a real LPCNet binary via a command
template; DSP_FALLBACK is a deterministic source-filter synthesizer kept
around so the pipeline always produces audible output.  The fallback trades
quality for testability: invert the Bark cepstra to a spectral envelope,
excite with a pulse train (correlation > 0.5 -> voiced) or white noise,
overlap-add, undo preemphasis.
"""

import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.fft import idct, irfft, rfft
from scipy.signal import lfilter

from .audio import AudioClip, read_wav
from .errors import EmptyInputError, ValidationError, VocoderError
from .features import FeatureConfig, bark_filterbank
from .tracks import FeatureKind, FeatureTrack

VOICING_THRESHOLD = 0.5
_PEAK_CEILING = 0.99
_DIAG_TAIL = 2000  # chars of stdout/stderr kept in error messages


class VocoderMode(str, Enum):
    EXTERNAL = "EXTERNAL"
    DSP_FALLBACK = "DSP_FALLBACK"


@dataclass
class VocoderSpec:
    """How to turn feature frames into a waveform.

    ``command`` is a template with {input} and {output} placeholders; the
    input file is raw float32, 20 values per frame, row-major.  The output
    is read as 16 kHz mono: WAV when ``output_suffix`` is ``.wav``, raw
    s16le otherwise.
    """

    mode: VocoderMode = VocoderMode.DSP_FALLBACK
    command: str | None = None
    feature_suffix: str = ".f32"
    output_suffix: str = ".pcm"
    max_processes: int = 1
    _semaphore: threading.Semaphore | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        self.mode = VocoderMode(self.mode)
        if self.mode is VocoderMode.EXTERNAL:
            if not self.command:
                raise ValidationError("EXTERNAL mode requires a command template")
            for placeholder in ("{input}", "{output}"):
                if placeholder not in self.command:
                    raise ValidationError(f"command template is missing {placeholder}")
        if self.max_processes < 1:
            raise ValidationError("max_processes must be >= 1")

    def semaphore(self) -> threading.Semaphore:
        if self._semaphore is None:
            self._semaphore = threading.Semaphore(self.max_processes)
        return self._semaphore


def _check_features(features: FeatureTrack) -> None:
    if features.dim != 20:
        raise TypeError(f"synthesis features must have dim 20, got {features.dim}")
    if features.feature_kind is not FeatureKind.LPCNET:
        raise TypeError(f"expected an LPCNET track, got {features.feature_kind.value}")
    if features.num_frames == 0:
        raise EmptyInputError("no feature frames to render")


def render(
    features: FeatureTrack,
    spec: VocoderSpec | None = None,
    config: FeatureConfig | None = None,
) -> AudioClip:
    """Feature frames to a 16 kHz clip; duration = num_frames * hop +- one frame."""
    spec = spec if spec is not None else VocoderSpec()
    config = config if config is not None else FeatureConfig()
    _check_features(features)
    if spec.mode is VocoderMode.EXTERNAL:
        return _render_external(features, spec)
    return _render_fallback(features, config)


def _render_external(features: FeatureTrack, spec: VocoderSpec) -> AudioClip:
    with tempfile.TemporaryDirectory(prefix="crossvox-vocoder-") as td:
        in_path = Path(td) / f"features{spec.feature_suffix}"
        out_path = Path(td) / f"render{spec.output_suffix}"
        in_path.write_bytes(features.data.astype("<f4").tobytes())
        cmd = shlex.split(spec.command.format(input=str(in_path), output=str(out_path)))
        with spec.semaphore():
            try:
                proc = subprocess.run(cmd, capture_output=True, timeout=600)
            except OSError as exc:
                raise VocoderError(f"could not launch {cmd[0]!r}: {exc}") from exc
            except subprocess.TimeoutExpired as exc:
                raise VocoderError(f"vocoder timed out: {' '.join(cmd)}") from exc
        if proc.returncode != 0:
            raise VocoderError(
                f"vocoder exited {proc.returncode}: {' '.join(cmd)}\n"
                f"stdout: {proc.stdout[-_DIAG_TAIL:].decode(errors='replace')}\n"
                f"stderr: {proc.stderr[-_DIAG_TAIL:].decode(errors='replace')}"
            )
        if not out_path.exists():
            raise VocoderError(f"vocoder produced no output file: {' '.join(cmd)}")
        if spec.output_suffix == ".wav":
            return read_wav(out_path)
        pcm = np.frombuffer(out_path.read_bytes(), dtype="<i2")
        return AudioClip(pcm.astype(np.float64) / 32768.0)


def _band_amplitudes(cepstra: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Per-frame, per-FFT-bin amplitude envelope from 18 Bark cepstra.

    Band energies are spread evenly over each band's bins, then interpolated
    across bin centers.  DC is zeroed so de-preemphasis cannot drift.
    """
    bank = bark_filterbank(config)
    n_bins = bank.shape[1]
    widths = np.maximum(bank.sum(axis=1), 1e-12)
    centers = bank @ np.arange(n_bins) / widths
    log_e = idct(cepstra, type=2, norm="ortho", axis=1)
    band_amp = np.sqrt(np.exp(log_e) / widths)
    bins = np.arange(n_bins, dtype=np.float64)
    amps = np.empty((cepstra.shape[0], n_bins))
    for i in range(cepstra.shape[0]):
        amps[i] = np.interp(bins, centers, band_amp[i])
    amps[:, 0] = 0.0
    return amps


def _excitation(periods, corrs, hop: int, rng: np.random.Generator) -> np.ndarray:
    """Pulse train (voiced) / white noise (unvoiced), unit power per frame."""
    count = len(periods)
    exc = np.empty(count * hop)
    phase = 1.0  # fire a pulse at the first voiced sample
    for i in range(count):
        sl = slice(i * hop, (i + 1) * hop)
        if corrs[i] > VOICING_THRESHOLD:
            period = max(float(periods[i]), 2.0)
            amp = np.sqrt(period)
            frame = np.zeros(hop)
            for n in range(hop):
                phase += 1.0 / period
                if phase >= 1.0:
                    phase -= 1.0
                    frame[n] = amp
            exc[sl] = frame
        else:
            phase = 1.0
            exc[sl] = rng.standard_normal(hop)
    return exc


def _render_fallback(features: FeatureTrack, config: FeatureConfig) -> AudioClip:
    count = features.num_frames
    hop = config.hop
    amps = _band_amplitudes(features.data[:, :18], config)
    rng = np.random.default_rng(0)  # fixed seed: render is deterministic
    exc = _excitation(features.data[:, 18], features.data[:, 19], hop, rng)

    win = 2 * hop
    window = np.hanning(win)
    padded = np.concatenate([exc, np.zeros(win)])
    out = np.zeros(count * hop + config.n_fft)
    for i in range(count):
        seg = padded[i * hop : i * hop + win] * window
        shaped = rfft(seg, n=config.n_fft) * amps[i]
        out[i * hop : i * hop + config.n_fft] += irfft(shaped, n=config.n_fft)
    out = out[: count * hop]

    if config.preemphasis > 0.0:
        out = lfilter([1.0], [1.0, -config.preemphasis], out)
    peak = np.max(np.abs(out)) if out.size else 0.0
    if peak > _PEAK_CEILING:
        out = out * (_PEAK_CEILING / peak)
    return AudioClip(out)
