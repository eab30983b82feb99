"""Tacotron2-style TTS: phoneme embeddings into the shared attention decoder.

Same decoder as voice conversion (prenet, GMM attention, two LSTMs,
postnet); only the memory differs — embedded phonemes through a conv stack
and a BiLSTM instead of PPG frames.
"""

from dataclasses import asdict, dataclass

import torch
from torch import nn

from ..errors import DataError
from ..seq2seq import ConvStack, DecoderOutput, Seq2SeqDecoder


@dataclass(frozen=True)
class TacotronTTSConfig:
    vocab_size: int
    embed_dim: int = 64
    encoder_filters: int = 64
    encoder_units: int = 32
    prenet_units: int = 32
    decoder_units: int = 128
    attention_components: int = 3
    reduction_factor: int = 2
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class TacotronTTS(nn.Module):
    def __init__(self, config: TacotronTTSConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim)
        self.encoder_convs = ConvStack(
            config.embed_dim, config.encoder_filters, num_layers=3, dropout=config.dropout
        )
        self.encoder_rnn = nn.LSTM(
            config.encoder_filters,
            config.encoder_units,
            batch_first=True,
            bidirectional=True,
        )
        self.decoder = Seq2SeqDecoder(
            memory_dim=2 * config.encoder_units,
            prenet_units=config.prenet_units,
            rnn_units=config.decoder_units,
            postnet_filters=config.encoder_filters,
            reduction_factor=config.reduction_factor,
            attention_components=config.attention_components,
            dropout=config.dropout,
        )

    def encode(self, ids: torch.Tensor) -> torch.Tensor:
        if int(ids.max()) >= self.config.vocab_size:
            raise DataError(
                f"symbol id {int(ids.max())} outside vocabulary of {self.config.vocab_size}"
            )
        x = self.encoder_convs(self.embedding(ids))
        x, _ = self.encoder_rnn(x)
        return x

    def teacher_forced(self, ids: torch.Tensor, targets: torch.Tensor) -> DecoderOutput:
        return self.decoder.teacher_forced(self.encode(ids), targets)

    def infer(self, ids: torch.Tensor, max_frames: int | None = None) -> DecoderOutput:
        return self.decoder.infer(self.encode(ids), max_frames=max_frames)
