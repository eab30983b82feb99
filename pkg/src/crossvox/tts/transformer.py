"""Transformer TTS: phoneme ids to LPCNet features with retrievable alignments.

A compact encoder-decoder with scaled positional encodings and hand-rolled
multi-head attention so every cross-attention matrix (per layer, per head)
can be read back after any forward pass; duration extraction depends on
that.  Reduction factor is fixed at 1 so decoder rows map one-to-one onto
output frames.
"""

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn

from ..errors import DataError
from ..seq2seq import FEATURE_DIM, STOP_THRESHOLD, MAX_FRAMES_PER_ENCODER_STEP, Postnet, Prenet


@dataclass(frozen=True)
class TransformerTTSConfig:
    vocab_size: int
    d_model: int = 64
    num_heads: int = 2
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_units: int = 128
    prenet_units: int = 32
    postnet_filters: int = 64
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def positional_encoding(length: int, dim: int, device, dtype) -> torch.Tensor:
    position = torch.arange(length, device=device, dtype=dtype).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, device=device, dtype=dtype) * (-math.log(10000.0) / dim)
    )
    pe = torch.zeros(length, dim, device=device, dtype=dtype)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div)
    return pe


class ScaledPositionalEncoding(nn.Module):
    """x + alpha * PE with a learnable alpha, per the Transformer-TTS recipe."""

    def __init__(self):
        super().__init__()
        self.alpha = nn.Parameter(torch.ones(1))

    def forward(self, x):
        pe = positional_encoding(x.shape[1], x.shape[2], x.device, x.dtype)
        return x + self.alpha * pe.unsqueeze(0)


class MultiHeadAttention(nn.Module):
    """Standard scaled dot-product attention that keeps its last weights."""

    def __init__(self, d_model: int, num_heads: int, dropout: float = 0.0):
        super().__init__()
        if d_model % num_heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.head_dim = d_model // num_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = dropout
        self.last_weights: torch.Tensor | None = None

    def forward(self, query, key, value, mask=None):
        b, lq, _ = query.shape
        lk = key.shape[1]
        h, hd = self.num_heads, self.head_dim
        q = self.q_proj(query).view(b, lq, h, hd).transpose(1, 2)
        k = self.k_proj(key).view(b, lk, h, hd).transpose(1, 2)
        v = self.v_proj(value).view(b, lk, h, hd).transpose(1, 2)
        scores = torch.matmul(q, k.transpose(2, 3)) / math.sqrt(hd)
        if mask is not None:
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        self.last_weights = weights.detach()
        weights = nn.functional.dropout(weights, self.dropout, training=self.training)
        out = torch.matmul(weights, v).transpose(1, 2).contiguous().view(b, lq, h * hd)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ffn_units: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(d_model, ffn_units)
        self.fc2 = nn.Linear(ffn_units, d_model)
        self.dropout = dropout

    def forward(self, x):
        x = torch.relu(self.fc1(x))
        x = nn.functional.dropout(x, self.dropout, training=self.training)
        return self.fc2(x)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: TransformerTTSConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.d_model, cfg.ffn_units, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)

    def forward(self, x):
        y = self.norm1(x)
        x = x + self.self_attn(y, y, y)
        y = self.norm2(x)
        return x + self.ffn(y)


class DecoderLayer(nn.Module):
    def __init__(self, cfg: TransformerTTSConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.ffn = FeedForward(cfg.d_model, cfg.ffn_units, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.norm3 = nn.LayerNorm(cfg.d_model)

    def forward(self, x, memory, self_mask):
        y = self.norm1(x)
        x = x + self.self_attn(y, y, y, mask=self_mask)
        y = self.norm2(x)
        x = x + self.cross_attn(y, memory, memory)
        y = self.norm3(x)
        return x + self.ffn(y)


class TransformerTTS(nn.Module):
    """Encoder-decoder TTS; ``last_cross_attentions`` holds per-layer weights
    [B, heads, decoder_frames, phonemes] after every forward pass."""

    def __init__(self, config: TransformerTTSConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.encoder_pe = ScaledPositionalEncoding()
        self.encoder_layers = nn.ModuleList(
            EncoderLayer(config) for _ in range(config.encoder_layers)
        )
        self.encoder_norm = nn.LayerNorm(config.d_model)
        self.decoder_prenet = Prenet(FEATURE_DIM, config.prenet_units, config.dropout)
        self.decoder_in = nn.Linear(config.prenet_units, config.d_model)
        self.decoder_pe = ScaledPositionalEncoding()
        self.decoder_layers = nn.ModuleList(
            DecoderLayer(config) for _ in range(config.decoder_layers)
        )
        self.decoder_norm = nn.LayerNorm(config.d_model)
        self.feature_proj = nn.Linear(config.d_model, FEATURE_DIM)
        self.stop_proj = nn.Linear(config.d_model, 1)
        self.postnet = Postnet(config.postnet_filters, dropout=config.dropout)
        self.last_cross_attentions: list[torch.Tensor] = []

    def encode(self, ids: torch.Tensor) -> torch.Tensor:
        if int(ids.max()) >= self.config.vocab_size:
            raise DataError(
                f"symbol id {int(ids.max())} outside vocabulary of {self.config.vocab_size}"
            )
        x = self.encoder_pe(self.embedding(ids))
        for layer in self.encoder_layers:
            x = layer(x)
        return self.encoder_norm(x)

    def _decode(self, memory: torch.Tensor, frames: torch.Tensor):
        length = frames.shape[1]
        mask = torch.tril(torch.ones(length, length, device=frames.device, dtype=torch.bool))
        x = self.decoder_pe(self.decoder_in(self.decoder_prenet(frames)))
        for layer in self.decoder_layers:
            x = layer(x, memory, mask.view(1, 1, length, length))
        x = self.decoder_norm(x)
        self.last_cross_attentions = [layer.cross_attn.last_weights for layer in self.decoder_layers]
        return self.feature_proj(x), self.stop_proj(x).squeeze(2)

    def teacher_forced(self, ids: torch.Tensor, targets: torch.Tensor):
        """Shift targets right by one frame and decode with a causal mask.

        Returns (before, after, stop_logits); cross-attention weights are on
        ``last_cross_attentions``.
        """
        memory = self.encode(ids)
        first = torch.zeros_like(targets[:, :1])
        decoder_in = torch.cat([first, targets[:, :-1]], dim=1)
        before, stop = self._decode(memory, decoder_in)
        after = before + self.postnet(before)
        return before, after, stop

    def infer(self, ids: torch.Tensor, max_frames: int | None = None):
        """Autoregressive decoding; returns (features, stop_logits, truncated)."""
        if ids.shape[0] != 1:
            raise DataError("autoregressive inference decodes one utterance at a time")
        memory = self.encode(ids)
        if max_frames is None:
            max_frames = MAX_FRAMES_PER_ENCODER_STEP * ids.shape[1]
        frames = torch.zeros(1, 1, FEATURE_DIM, device=ids.device,
                             dtype=next(self.parameters()).dtype)
        outputs, truncated = None, False
        while True:
            before, stop = self._decode(memory, frames)
            outputs = before
            if torch.sigmoid(stop[0, -1]) > STOP_THRESHOLD:
                break
            if outputs.shape[1] >= max_frames:
                truncated = True
                break
            frames = torch.cat([frames[:, :1], before], dim=1)
        after = outputs + self.postnet(outputs)
        return after, stop, truncated
