"""Shared sequence-to-sequence pieces for the VC synthesizer and Tacotron TTS.

Both models own an encoder producing an attention memory and share this
decoder: pre-net on the previous frame group, GMM attention, a 2-layer
recurrent stack, feature/stop projections, and a convolutional post-net with
a residual connection.  The decoder emits ``reduction_factor`` frames per
step.  Dropout defaults to 0 so desk-scale overfit runs stay deterministic;
regularization is a knob, not a contract.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .attention import AttentionState, GMMAttention
from .errors import DataError

FEATURE_DIM = 20
STOP_THRESHOLD = 0.5
MAX_FRAMES_PER_ENCODER_STEP = 30


@dataclass
class FeatureScaler:
    """Per-dimension standardization of training targets.

    Losses and overfit thresholds are stated on this normalized scale;
    inference denormalizes back to raw feature units.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, arrays) -> "FeatureScaler":
        stacked = np.concatenate([np.asarray(a, dtype=np.float64) for a in arrays], axis=0)
        std = stacked.std(axis=0)
        return cls(mean=stacked.mean(axis=0), std=np.maximum(std, 1e-8))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(mean=np.array(d["mean"], dtype=np.float64), std=np.array(d["std"], dtype=np.float64))


class Prenet(nn.Module):
    def __init__(self, in_dim: int, units: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, units)
        self.fc2 = nn.Linear(units, units)
        self.dropout = dropout

    def forward(self, x):
        x = torch.relu(self.fc1(x))
        x = nn.functional.dropout(x, self.dropout, training=self.training)
        x = torch.relu(self.fc2(x))
        return nn.functional.dropout(x, self.dropout, training=self.training)


class ConvStack(nn.Module):
    """Width-5 1-D convolution stack with batch norm and ReLU, over [B, T, C]."""

    def __init__(self, in_dim: int, filters: int, num_layers: int = 3, dropout: float = 0.0):
        super().__init__()
        self.layers = nn.ModuleList()
        self.norms = nn.ModuleList()
        for i in range(num_layers):
            self.layers.append(nn.Conv1d(in_dim if i == 0 else filters, filters, 5, padding=2))
            self.norms.append(nn.BatchNorm1d(filters))
        self.dropout = dropout

    def forward(self, x):
        x = x.transpose(1, 2)
        for conv, norm in zip(self.layers, self.norms):
            x = torch.relu(norm(conv(x)))
            x = nn.functional.dropout(x, self.dropout, training=self.training)
        return x.transpose(1, 2)


class Postnet(nn.Module):
    """5 width-5 conv layers refining the decoder output; caller adds the residual."""

    def __init__(self, filters: int, num_layers: int = 5, dropout: float = 0.0):
        super().__init__()
        self.layers = nn.ModuleList()
        self.norms = nn.ModuleList()
        for i in range(num_layers):
            in_ch = FEATURE_DIM if i == 0 else filters
            out_ch = FEATURE_DIM if i == num_layers - 1 else filters
            self.layers.append(nn.Conv1d(in_ch, out_ch, 5, padding=2))
            self.norms.append(nn.BatchNorm1d(out_ch))
        self.dropout = dropout

    def forward(self, x):
        x = x.transpose(1, 2)
        last = len(self.layers) - 1
        for i, (conv, norm) in enumerate(zip(self.layers, self.norms)):
            x = norm(conv(x))
            if i != last:
                x = torch.tanh(x)
            x = nn.functional.dropout(x, self.dropout, training=self.training)
        return x.transpose(1, 2)


@dataclass
class DecoderOutput:
    before: torch.Tensor        # [B, frames, 20] decoder output, pre post-net
    after: torch.Tensor         # [B, frames, 20] with post-net residual added
    stop_logits: torch.Tensor   # [B, frames]
    alignment: torch.Tensor     # [B, steps, T]
    truncated: bool = False     # inference hit the max_frames cap


class Seq2SeqDecoder(nn.Module):
    """Autoregressive decoder with GMM attention and a reduction factor."""

    def __init__(
        self,
        memory_dim: int,
        prenet_units: int,
        rnn_units: int,
        postnet_filters: int,
        reduction_factor: int = 2,
        attention_components: int = 5,
        dropout: float = 0.0,
    ):
        super().__init__()
        if reduction_factor < 1:
            raise ValueError(f"reduction_factor must be >= 1, got {reduction_factor}")
        self.memory_dim = memory_dim
        self.reduction_factor = reduction_factor
        self.prenet = Prenet(FEATURE_DIM, prenet_units, dropout)
        self.attention = GMMAttention(rnn_units, attention_components)
        self.attention_rnn = nn.LSTMCell(prenet_units + memory_dim, rnn_units)
        self.decoder_rnn = nn.LSTMCell(rnn_units + memory_dim, rnn_units)
        self.feature_proj = nn.Linear(rnn_units + memory_dim, FEATURE_DIM * reduction_factor)
        self.stop_proj = nn.Linear(rnn_units + memory_dim, reduction_factor)
        self.postnet = Postnet(postnet_filters, dropout=dropout)

    def _zero_hidden(self, memory):
        batch = memory.shape[0]
        opts = {"device": memory.device, "dtype": memory.dtype}
        units = self.attention_rnn.hidden_size
        return [
            (torch.zeros(batch, units, **opts), torch.zeros(batch, units, **opts))
            for _ in range(2)
        ]

    def _step(self, frame, memory, hidden, att_state: AttentionState):
        pre = self.prenet(frame)
        h1, c1 = self.attention_rnn(torch.cat([pre, att_state.prev_context], dim=1), hidden[0])
        weights, context, att_state = self.attention.step(att_state, h1, memory)
        h2, c2 = self.decoder_rnn(torch.cat([h1, context], dim=1), hidden[1])
        proj_in = torch.cat([h2, context], dim=1)
        frames = self.feature_proj(proj_in).view(-1, self.reduction_factor, FEATURE_DIM)
        stops = self.stop_proj(proj_in)
        return frames, stops, weights, [(h1, c1), (h2, c2)], att_state

    def teacher_forced(self, memory: torch.Tensor, targets: torch.Tensor) -> DecoderOutput:
        """Decode with ground-truth previous frames; targets [B, L, 20]."""
        r = self.reduction_factor
        batch, length, _ = targets.shape
        padded = pad_to_reduction(targets, r)
        steps = padded.shape[1] // r
        hidden = self._zero_hidden(memory)
        att_state = self.attention.initial_state(memory)
        frame = torch.zeros(batch, FEATURE_DIM, device=memory.device, dtype=memory.dtype)
        outs, stops, aligns = [], [], []
        for i in range(steps):
            frames, stop, weights, hidden, att_state = self._step(frame, memory, hidden, att_state)
            outs.append(frames)
            stops.append(stop)
            aligns.append(weights)
            frame = padded[:, (i + 1) * r - 1]
        before = torch.cat(outs, dim=1)[:, :length]
        after = before + self.postnet(before)
        return DecoderOutput(
            before=before,
            after=after,
            stop_logits=torch.cat(stops, dim=1)[:, :length],
            alignment=torch.stack(aligns, dim=1),
        )

    def infer(self, memory: torch.Tensor, max_frames: int | None = None) -> DecoderOutput:
        """Autoregressive decoding; halts on the stop token or the frame cap."""
        r = self.reduction_factor
        if memory.shape[0] != 1:
            raise DataError("autoregressive inference decodes one utterance at a time")
        if max_frames is None:
            max_frames = MAX_FRAMES_PER_ENCODER_STEP * memory.shape[1]
        hidden = self._zero_hidden(memory)
        att_state = self.attention.initial_state(memory)
        frame = torch.zeros(1, FEATURE_DIM, device=memory.device, dtype=memory.dtype)
        outs, stops, aligns = [], [], []
        frames_done, truncated, stop_at = 0, False, None
        while True:
            frames, stop, weights, hidden, att_state = self._step(frame, memory, hidden, att_state)
            outs.append(frames)
            stops.append(stop)
            aligns.append(weights)
            frames_done += r
            hit = torch.sigmoid(stop[0]) > STOP_THRESHOLD
            if bool(hit.any()):
                stop_at = frames_done - r + int(hit.nonzero()[0, 0]) + 1
                break
            if frames_done >= max_frames:
                truncated = True
                break
            frame = frames[:, -1]
        before = torch.cat(outs, dim=1)
        keep = min(stop_at if stop_at is not None else before.shape[1], max_frames)
        before = before[:, :keep]
        after = before + self.postnet(before)
        return DecoderOutput(
            before=before,
            after=after,
            stop_logits=torch.cat(stops, dim=1)[:, :keep],
            alignment=torch.stack(aligns, dim=1),
            truncated=truncated,
        )


def pad_to_reduction(x: torch.Tensor, r: int) -> torch.Tensor:
    """Right-pad [B, L, D] along L to a multiple of r, repeating the last frame."""
    length = x.shape[1]
    if length % r == 0:
        return x
    pad = r - length % r
    return torch.cat([x, x[:, -1:].expand(-1, pad, -1)], dim=1)


def make_stop_targets(length: int, r: int, device=None, dtype=None) -> torch.Tensor:
    """Per-frame stop targets: zeros with ones on the final frame group."""
    padded = length + (-length) % r
    t = torch.zeros(1, length, device=device, dtype=dtype)
    start = min(max(padded - r, 0), length - 1)
    t[0, start:] = 1.0
    return t


def seq2seq_loss(out: DecoderOutput, targets: torch.Tensor, stop_targets: torch.Tensor) -> dict:
    """MSE before + MSE after post-net + stop BCE, equal weights, all finite."""
    for name, t in (("targets", targets), ("before", out.before), ("after", out.after)):
        if not torch.isfinite(t).all():
            raise DataError(f"non-finite values in {name}")
    mse_before = nn.functional.mse_loss(out.before, targets)
    mse_after = nn.functional.mse_loss(out.after, targets)
    stop = nn.functional.binary_cross_entropy_with_logits(out.stop_logits, stop_targets)
    return {
        "loss": mse_before + mse_after + stop,
        "mse_before": mse_before,
        "mse_after": mse_after,
        "stop": stop,
    }
