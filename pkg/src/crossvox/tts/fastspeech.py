"""FastSpeech: single-pass TTS from phonemes via explicit durations.

Feed-forward transformer blocks on both sides of a length regulator.  The
duration predictor regresses log-durations; at inference frame counts are
exp(log-duration) rounded so the total is preserved (floor plus remainder
to the largest fractional parts).
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from ..errors import DataError
from ..seq2seq import FEATURE_DIM
from .transformer import MultiHeadAttention, ScaledPositionalEncoding

# duration regression target is log(max(d, floor)); the floor keeps
# zero-duration phonemes finite and still rounds back to zero frames
LOG_DURATION_FLOOR = 0.1


@dataclass(frozen=True)
class FastSpeechTTSConfig:
    vocab_size: int
    d_model: int = 64
    num_heads: int = 2
    encoder_layers: int = 2
    decoder_layers: int = 2
    conv_units: int = 128
    duration_units: int = 64
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class ConvFeedForward(nn.Module):
    """Two width-3 1-D convolutions, the FFT-block variant of the FFN."""

    def __init__(self, d_model: int, conv_units: int, dropout: float = 0.0):
        super().__init__()
        self.conv1 = nn.Conv1d(d_model, conv_units, 3, padding=1)
        self.conv2 = nn.Conv1d(conv_units, d_model, 3, padding=1)
        self.dropout = dropout

    def forward(self, x):
        x = x.transpose(1, 2)
        x = torch.relu(self.conv1(x))
        x = nn.functional.dropout(x, self.dropout, training=self.training)
        x = self.conv2(x)
        return x.transpose(1, 2)


class FFTBlock(nn.Module):
    def __init__(self, cfg: FastSpeechTTSConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.ffn = ConvFeedForward(cfg.d_model, cfg.conv_units, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)

    def forward(self, x):
        y = self.norm1(x)
        x = x + self.self_attn(y, y, y)
        y = self.norm2(x)
        return x + self.ffn(y)


class DurationPredictor(nn.Module):
    """2 conv layers + affine, predicting log-durations per phoneme."""

    def __init__(self, d_model: int, units: int, dropout: float = 0.0):
        super().__init__()
        self.conv1 = nn.Conv1d(d_model, units, 3, padding=1)
        self.norm1 = nn.LayerNorm(units)
        self.conv2 = nn.Conv1d(units, units, 3, padding=1)
        self.norm2 = nn.LayerNorm(units)
        self.proj = nn.Linear(units, 1)
        self.dropout = dropout

    def forward(self, x):
        x = torch.relu(self.conv1(x.transpose(1, 2))).transpose(1, 2)
        x = nn.functional.dropout(self.norm1(x), self.dropout, training=self.training)
        x = torch.relu(self.conv2(x.transpose(1, 2))).transpose(1, 2)
        x = nn.functional.dropout(self.norm2(x), self.dropout, training=self.training)
        return self.proj(x).squeeze(2)


def round_preserving_total(values: np.ndarray) -> np.ndarray:
    """Round non-negative floats to ints keeping the (rounded) total.

    Floor everything, then hand out the remaining frames to the largest
    fractional parts (ties broken by position).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise DataError("duration vector must be 1-D")
    if (values < 0).any():
        raise DataError("negative duration")
    total = int(math.floor(values.sum() + 0.5))
    floors = np.floor(values).astype(np.int64)
    remainder = total - int(floors.sum())
    fracs = values - floors
    order = np.lexsort((np.arange(len(values)), -fracs))
    out = floors.copy()
    for i in order[:remainder]:
        out[i] += 1
    return out


def length_regulate(states: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
    """Expand [1, T, D] phoneme states into [1, sum(durations), D] frames."""
    if durations.ndim != 1 or durations.shape[0] != states.shape[1]:
        raise DataError(
            f"{int(durations.numel())} durations for {states.shape[1]} phonemes"
        )
    if int(durations.sum()) <= 0:
        raise DataError("total duration is zero")
    return torch.repeat_interleave(states, durations, dim=1)


class FastSpeechTTS(nn.Module):
    def __init__(self, config: FastSpeechTTSConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.encoder_pe = ScaledPositionalEncoding()
        self.encoder_layers = nn.ModuleList(FFTBlock(config) for _ in range(config.encoder_layers))
        self.encoder_norm = nn.LayerNorm(config.d_model)
        self.duration_predictor = DurationPredictor(
            config.d_model, config.duration_units, config.dropout
        )
        self.decoder_pe = ScaledPositionalEncoding()
        self.decoder_layers = nn.ModuleList(FFTBlock(config) for _ in range(config.decoder_layers))
        self.decoder_norm = nn.LayerNorm(config.d_model)
        self.feature_proj = nn.Linear(config.d_model, FEATURE_DIM)

    def encode(self, ids: torch.Tensor) -> torch.Tensor:
        if int(ids.max()) >= self.config.vocab_size:
            raise DataError(
                f"symbol id {int(ids.max())} outside vocabulary of {self.config.vocab_size}"
            )
        x = self.encoder_pe(self.embedding(ids))
        for layer in self.encoder_layers:
            x = layer(x)
        return self.encoder_norm(x)

    def _decode(self, regulated: torch.Tensor) -> torch.Tensor:
        x = self.decoder_pe(regulated)
        for layer in self.decoder_layers:
            x = layer(x)
        return self.feature_proj(self.decoder_norm(x))

    def forward_train(self, ids: torch.Tensor, durations: torch.Tensor):
        """Teacher durations in, (features, predicted log-durations) out."""
        states = self.encode(ids)
        log_dur = self.duration_predictor(states)
        features = self._decode(length_regulate(states, durations))
        return features, log_dur

    def infer(self, ids: torch.Tensor):
        """Single-pass synthesis; returns (features, integer durations)."""
        states = self.encode(ids)
        log_dur = self.duration_predictor(states)
        durations = round_preserving_total(
            np.exp(log_dur.squeeze(0).detach().double().cpu().numpy())
        )
        dur_t = torch.from_numpy(durations).to(ids.device)
        features = self._decode(length_regulate(states, dur_t))
        return features, durations


def duration_targets(durations: torch.Tensor) -> torch.Tensor:
    """Log-domain regression targets for the duration predictor."""
    return torch.log(torch.clamp(durations.to(torch.float64), min=LOG_DURATION_FLOOR))
