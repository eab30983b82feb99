"""Phonetic posteriorgram extractor: a frame-level senone classifier.

A stack of bidirectional GRUs over MFCC frames with a linear head to S
senone classes.  The head starts at zero so an untrained model is exactly
uninformed: cross-entropy == ln(S) regardless of input.
"""

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DataError, FormatError
from .tracks import FeatureKind, FeatureTrack, downsample_track

CHECKPOINT_KIND = "ppg"


@dataclass(frozen=True)
class PPGConfig:
    num_classes: int
    input_dim: int = 13
    num_layers: int = 2
    hidden_size: int = 64
    # paper scale is num_layers=5, hidden_size=550, num_classes=488

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SenoneLabels:
    utterance_id: str
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise DataError(f"{self.utterance_id}: labels must be 1-D")


def write_senone_labels(path, labelled: list[SenoneLabels]) -> None:
    """Write "utterance_id<TAB>space-separated integer labels" lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for item in labelled:
            fh.write(item.utterance_id + "\t" + " ".join(str(v) for v in item.labels) + "\n")


def read_senone_labels(path) -> list[SenoneLabels]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt, _, rest = line.partition("\t")
        if not rest:
            raise FormatError(f"senone label line without a TAB: {line[:50]!r}")
        out.append(SenoneLabels(utt, np.array([int(v) for v in rest.split()], dtype=np.int64)))
    return out


class PPGModel(nn.Module):
    def __init__(self, config: PPGConfig):
        super().__init__()
        self.config = config
        self.gru = nn.GRU(
            config.input_dim,
            config.hidden_size,
            num_layers=config.num_layers,
            bidirectional=True,
            batch_first=True,
        )
        self.head = nn.Linear(2 * config.hidden_size, config.num_classes)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, mfcc: torch.Tensor) -> torch.Tensor:
        """[batch, frames, input_dim] -> logits [batch, frames, num_classes]."""
        hidden, _ = self.gru(mfcc)
        return self.head(hidden)

    def save(self, path) -> None:
        save_checkpoint(path, CHECKPOINT_KIND, self.config.to_dict(), self.state_dict())

    @classmethod
    def load(cls, path) -> "PPGModel":
        payload = load_checkpoint(path, CHECKPOINT_KIND)
        model = cls(PPGConfig(**payload["config"]))
        model.load_state_dict(payload["state_dict"])
        model.eval()
        return model


def train_ppg_extractor(
    dataset: list[tuple[FeatureTrack, SenoneLabels]],
    config: PPGConfig,
    epochs: int = 10,
    lr: float = 1e-3,
    seed: int = 0,
) -> tuple[PPGModel, list[float]]:
    """Train the senone classifier; returns the model and per-step losses.

    Utterances are visited in order, one optimizer step each, so runs are
    seed-deterministic.  A frame-count mismatch between features and labels
    is a hard per-utterance error.
    """
    for track, labels in dataset:
        if track.data.shape[0] != len(labels.labels):
            raise DataError(
                f"{labels.utterance_id}: {track.data.shape[0]} feature frames "
                f"but {len(labels.labels)} labels"
            )
        if labels.labels.min() < 0 or labels.labels.max() >= config.num_classes:
            raise DataError(f"{labels.utterance_id}: label outside [0, {config.num_classes})")
    torch.manual_seed(seed)
    model = PPGModel(config)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    for _ in range(epochs):
        for track, labels in dataset:
            x = torch.from_numpy(track.data).float().unsqueeze(0)
            y = torch.from_numpy(labels.labels).unsqueeze(0)
            logits = model(x)
            loss = nn.functional.cross_entropy(logits.squeeze(0), y.squeeze(0))
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
    model.eval()
    return model, losses


def extract_ppg(model: PPGModel, mfcc: FeatureTrack) -> FeatureTrack:
    """Per-frame senone posteriors for one utterance; rows lie on the simplex."""
    if mfcc.data.shape[1] != model.config.input_dim:
        raise TypeError(
            f"feature dim {mfcc.data.shape[1]} does not match model input dim "
            f"{model.config.input_dim}"
        )
    model.eval()
    with torch.no_grad():
        logits = model(torch.from_numpy(mfcc.data).float().unsqueeze(0))
        posteriors = torch.softmax(logits.double(), dim=2).squeeze(0).numpy()
    return FeatureTrack(data=posteriors, frame_shift=mfcc.frame_shift, feature_kind=FeatureKind.PPG)


def downsample_ppg(ppg: FeatureTrack, factor: int) -> FeatureTrack:
    """Non-overlapping mean over groups of `factor` frames (mean pooling)."""
    return downsample_track(ppg, factor)
