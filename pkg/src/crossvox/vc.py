"""Tacotron-style voice conversion synthesizer.

Maps (downsampled PPG, normalized log-F0) to 20-dim LPCNet features with a
stop token.  The encoder output is concatenated with a 1-dim log-F0 channel
to form the attention memory, so pitch survives the phonetic bottleneck.
Training standardizes targets per corpus; losses and overfit thresholds are
stated on that normalized scale and inference maps back to raw units.
"""

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .attention import attention_alignment
from .audio import AudioClip
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError
from .features import (
    F0Stats,
    FeatureConfig,
    extract_logf0,
    extract_lpcnet_features,
    extract_mfcc,
    normalize_logf0,
)
from .ppg import PPGModel, extract_ppg, downsample_ppg
from .seq2seq import (
    FEATURE_DIM,
    DecoderOutput,
    FeatureScaler,
    Seq2SeqDecoder,
    ConvStack,
    make_stop_targets,
    seq2seq_loss,
)
from .tracks import FeatureKind, FeatureTrack, downsample_logf0

CHECKPOINT_KIND = "vc"


@dataclass(frozen=True)
class VCConfig:
    ppg_dim: int
    encoder_units: int = 64
    encoder_filters: int = 64
    recurrent_units: int = 32
    prenet_units: int = 32
    decoder_units: int = 128
    attention_components: int = 3
    reduction_factor: int = 2
    downsample_factor: int = 2
    dropout: float = 0.0
    # paper scale: encoder_units=512, encoder_filters=512, recurrent_units=256,
    # prenet_units=256, decoder_units=1024, attention_components=5

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VCTrainingExample:
    utterance_id: str
    speaker_id: str
    ppg: FeatureTrack
    logf0: FeatureTrack
    target: FeatureTrack

    def __post_init__(self):
        if self.ppg.data.shape[0] != self.logf0.data.shape[0]:
            raise DataError(
                f"{self.utterance_id}: ppg length {self.ppg.data.shape[0]} != "
                f"logf0 length {self.logf0.data.shape[0]}"
            )
        if self.logf0.data.shape[1] != 1:
            raise DataError(f"{self.utterance_id}: logf0 must be 1-dim")


class VCModel(nn.Module):
    def __init__(self, config: VCConfig):
        super().__init__()
        self.config = config
        self.scaler: FeatureScaler | None = None
        self.speaker_id: str | None = None
        self.ppg_linear = nn.Linear(config.ppg_dim, config.encoder_units)
        self.ppg_norm = nn.LayerNorm(config.encoder_units)
        self.encoder_convs = ConvStack(config.encoder_units, config.encoder_filters, 3, config.dropout)
        self.encoder_rnn = nn.LSTM(
            config.encoder_filters, config.recurrent_units, bidirectional=True, batch_first=True
        )
        self.decoder = Seq2SeqDecoder(
            memory_dim=2 * config.recurrent_units + 1,
            prenet_units=config.prenet_units,
            rnn_units=config.decoder_units,
            postnet_filters=config.encoder_filters,
            reduction_factor=config.reduction_factor,
            attention_components=config.attention_components,
            dropout=config.dropout,
        )

    def encode(self, ppg: torch.Tensor, logf0: torch.Tensor) -> torch.Tensor:
        """[B, T, ppg_dim] + [B, T, 1] -> attention memory [B, T, 2U+1]."""
        x = torch.relu(self.ppg_norm(self.ppg_linear(ppg)))
        x = self.encoder_convs(x)
        x, _ = self.encoder_rnn(x)
        return torch.cat([x, logf0], dim=2)

    def save(self, path) -> None:
        extra = {"speaker_id": self.speaker_id or ""}
        if self.scaler is not None:
            extra["scaler"] = self.scaler.to_dict()
        save_checkpoint(path, CHECKPOINT_KIND, self.config.to_dict(), self.state_dict(), extra)

    @classmethod
    def load(cls, path) -> "VCModel":
        payload = load_checkpoint(path, CHECKPOINT_KIND)
        model = cls(VCConfig(**payload["config"]))
        model.load_state_dict(payload["state_dict"])
        if "scaler" in payload["extra"]:
            model.scaler = FeatureScaler.from_dict(payload["extra"]["scaler"])
        model.speaker_id = payload["extra"].get("speaker_id") or None
        model.eval()
        return model


def _track_tensor(track: FeatureTrack, dtype, device) -> torch.Tensor:
    return torch.from_numpy(track.data).to(dtype=dtype, device=device).unsqueeze(0)


def vc_forward(
    model: VCModel,
    ppg: FeatureTrack,
    logf0: FeatureTrack,
    teacher_targets: FeatureTrack | None = None,
    max_frames: int | None = None,
) -> tuple[FeatureTrack, np.ndarray, np.ndarray, DecoderOutput]:
    """Run the VC network on one utterance.

    Teacher-forced when targets are given, autoregressive otherwise.  Returns
    (features in raw units, stop logits, per-frame alignment, raw decoder
    output); the decoder output stays on the model's normalized scale.
    """
    if ppg.data.shape[0] != logf0.data.shape[0]:
        raise DataError(
            f"ppg length {ppg.data.shape[0]} != logf0 length {logf0.data.shape[0]}"
        )
    p = next(model.parameters())
    memory = model.encode(
        _track_tensor(ppg, p.dtype, p.device), _track_tensor(logf0, p.dtype, p.device)
    )
    if teacher_targets is not None:
        target = teacher_targets.data
        if model.scaler is not None:
            target = model.scaler.transform(target)
        out = model.decoder.teacher_forced(
            memory, torch.from_numpy(target).to(dtype=p.dtype, device=p.device).unsqueeze(0)
        )
    else:
        out = model.decoder.infer(memory, max_frames=max_frames)
    feats = out.after.squeeze(0).detach().double().cpu().numpy()
    if model.scaler is not None:
        feats = model.scaler.inverse(feats)
    r = model.decoder.reduction_factor
    per_frame = out.alignment.squeeze(0).detach().double().cpu().numpy()
    per_frame = np.repeat(per_frame, r, axis=0)[: feats.shape[0]]
    track = FeatureTrack(
        feats,
        ppg.frame_shift / model.config.downsample_factor,
        FeatureKind.LPCNET,
        speaker_id=model.speaker_id,
    )
    stop = out.stop_logits.squeeze(0).detach().double().cpu().numpy()
    return track, stop, per_frame, out


def vc_loss(
    pred_before: torch.Tensor,
    pred_after: torch.Tensor,
    stop_logits: torch.Tensor,
    targets: torch.Tensor,
    stop_targets: torch.Tensor,
) -> torch.Tensor:
    """MSE before post-net + MSE after + stop BCE (weights 1/1/1)."""
    out = DecoderOutput(before=pred_before, after=pred_after, stop_logits=stop_logits,
                        alignment=torch.zeros(1, 1, 1))
    return seq2seq_loss(out, targets, stop_targets)["loss"]


def train_vc(
    model: VCModel,
    dataset: list[VCTrainingExample],
    epochs: int = 200,
    lr: float = 1e-3,
    seed: int = 0,
    mse_threshold: float | None = None,
    diagonality_threshold: float = 0.9,
    checkpoint_path=None,
) -> tuple[VCModel, list[dict]]:
    """Teacher-forced training on one speaker's corpus.

    Early-stops once the epoch-mean post-net MSE falls under ``mse_threshold``
    and the mean alignment diagonality reaches ``diagonality_threshold``.
    """
    if not dataset:
        raise DataError("empty training dataset")
    speakers = {ex.speaker_id for ex in dataset}
    if len(speakers) != 1:
        raise DataError(f"dataset mixes speakers: {sorted(speakers)}")
    if model.scaler is None:
        model.scaler = FeatureScaler.fit([ex.target.data for ex in dataset])
    model.speaker_id = dataset[0].speaker_id
    torch.manual_seed(seed)
    model.train()
    p = next(model.parameters())
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    tensors = []
    for ex in dataset:
        target = torch.from_numpy(model.scaler.transform(ex.target.data)).to(p.dtype).unsqueeze(0)
        tensors.append(
            (
                _track_tensor(ex.ppg, p.dtype, p.device),
                _track_tensor(ex.logf0, p.dtype, p.device),
                target,
                make_stop_targets(target.shape[1], model.decoder.reduction_factor,
                                  dtype=p.dtype, device=p.device),
            )
        )
    history: list[dict] = []
    for _ in range(epochs):
        epoch_mse, epoch_diag = [], []
        for ppg_t, f0_t, target, stop_t in tensors:
            memory = model.encode(ppg_t, f0_t)
            out = model.decoder.teacher_forced(memory, target)
            parts = seq2seq_loss(out, target, stop_t)
            opt.zero_grad()
            parts["loss"].backward()
            opt.step()
            diag = attention_alignment(out.alignment.squeeze(0).detach())
            record = {k: float(v.detach()) for k, v in parts.items()}
            record["diagonality"] = diag
            epoch_mse.append(record["mse_after"])
            epoch_diag.append(diag)
            history.append(record)
        if (
            mse_threshold is not None
            and float(np.mean(epoch_mse)) < mse_threshold
            and float(np.mean(epoch_diag)) >= diagonality_threshold
        ):
            break
    model.eval()
    if checkpoint_path is not None:
        model.save(checkpoint_path)
    return model, history


def vc_example_from_clip(
    utterance_id: str,
    speaker_id: str,
    clip: AudioClip,
    ppg_model: PPGModel,
    f0_stats: F0Stats,
    vc_config: VCConfig,
    feature_config: FeatureConfig | None = None,
) -> VCTrainingExample:
    """Build one self-reconstruction training example from a speaker's clip."""
    cfg = feature_config or FeatureConfig()
    mfcc = extract_mfcc(clip, cfg)
    ppg = downsample_ppg(extract_ppg(ppg_model, mfcc), vc_config.downsample_factor)
    logf0 = downsample_logf0(extract_logf0(clip, cfg), vc_config.downsample_factor)
    logf0 = normalize_logf0(logf0, f0_stats)
    target = extract_lpcnet_features(clip, cfg)
    return VCTrainingExample(utterance_id, speaker_id, ppg, logf0, target)


def convert(
    source_clip: AudioClip,
    ppg_model: PPGModel,
    vc_model: VCModel,
    f0_stats_source: F0Stats,
    feature_config: FeatureConfig | None = None,
    max_frames: int | None = None,
) -> FeatureTrack:
    """Convert a source utterance into the VC model's target voice.

    Source F0 is normalized with the SOURCE speaker's stats, so the
    conditioning the decoder sees is speaker-independent by construction.
    """
    cfg = feature_config or FeatureConfig()
    mfcc = extract_mfcc(source_clip, cfg)
    ppg = downsample_ppg(extract_ppg(ppg_model, mfcc), vc_model.config.downsample_factor)
    logf0 = downsample_logf0(extract_logf0(source_clip, cfg), vc_model.config.downsample_factor)
    logf0 = normalize_logf0(logf0, f0_stats_source)
    track, _, _, _ = vc_forward(vc_model, ppg, logf0, max_frames=max_frames)
    return track
