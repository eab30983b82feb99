"""Phoneme durations read off transformer cross-attention alignments.

A teacher-forced pass over the corpus scores every (layer, head) pair by
average alignment diagonality; the best pair's per-frame argmax is counted
into per-phoneme frame totals.  Totals always equal the number of decoder
frames exactly — no smoothing or monotonic repair.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from ..attention import attention_alignment
from ..errors import DataError, FormatError

log = logging.getLogger(__name__)

# above this fraction of zero-duration phonemes the alignment is suspect
DEGENERATE_ZERO_FRACTION = 0.2


@dataclass
class DurationSequence:
    utterance_id: str
    durations: np.ndarray
    degenerate: bool = field(default=False)

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=np.int64)
        if self.durations.ndim != 1:
            raise DataError("durations must be a 1-D integer vector")
        if (self.durations < 0).any():
            raise DataError("negative duration")

    @property
    def total_frames(self) -> int:
        return int(self.durations.sum())


def durations_from_attention(weights: np.ndarray) -> np.ndarray:
    """Count per-frame argmax positions of a [frames, phonemes] alignment."""
    weights = np.asarray(weights)
    if weights.ndim != 2 or weights.shape[0] == 0 or weights.shape[1] == 0:
        raise DataError("alignment must be a non-empty 2-D matrix")
    picks = weights.argmax(axis=1)
    return np.bincount(picks, minlength=weights.shape[1]).astype(np.int64)


def _collect_attentions(model, dataset, uids):
    """Teacher-forced pass per utterance; returns [(uid, frames, attn)].

    attn is a list over decoder layers of [heads, frames, phonemes]
    cross-attention matrices.
    """
    records = []
    scaler = getattr(model, "scaler", None)
    model.eval()
    with torch.no_grad():
        for (seq, track), uid in zip(dataset, uids):
            if track.num_frames == 0:
                raise DataError(f"utterance {uid}: empty feature track")
            ids = torch.tensor([list(seq.ids)], dtype=torch.long)
            data = scaler.transform(track.data) if scaler is not None else track.data
            target = torch.from_numpy(data.astype(np.float32)).unsqueeze(0)
            model.teacher_forced(ids, target)
            attn = [w[0].cpu().numpy() for w in model.last_cross_attentions]
            records.append((uid, track.num_frames, attn))
    return records


def select_alignment_head(records) -> tuple[int, int, float]:
    """Pick (layer, head) with the highest mean diagonality over the corpus."""
    num_layers = len(records[0][2])
    num_heads = records[0][2][0].shape[0]
    scores = np.zeros((num_layers, num_heads))
    for _, _, attn in records:
        for li in range(num_layers):
            for hi in range(num_heads):
                scores[li, hi] += attention_alignment(attn[li][hi])
    scores /= len(records)
    li, hi = np.unravel_index(int(scores.argmax()), scores.shape)
    return int(li), int(hi), float(scores[li, hi])


def extract_durations(model, dataset, uids=None) -> list[DurationSequence]:
    """Per-phoneme frame counts for every (PhonemeSequence, FeatureTrack) pair.

    model is a teacher-forcible TTS whose last_cross_attentions records
    per-layer [1, heads, frames, phonemes] weights (the transformer).
    Conservation is strict: counts sum to the decoder frame count.
    ``uids`` names the utterances; defaults to each sequence's text.
    """
    if not dataset:
        raise DataError("no utterances to extract durations from")
    if uids is None:
        uids = [seq.text_ref for seq, _ in dataset]
    if len(uids) != len(dataset):
        raise DataError(f"{len(uids)} uids for {len(dataset)} utterances")
    records = _collect_attentions(model, dataset, uids)
    layer, head, score = select_alignment_head(records)
    log.info("alignment head: layer %d head %d (diagonality %.3f)", layer, head, score)
    out = []
    for uid, frames, attn in records:
        durations = durations_from_attention(attn[layer][head])
        if int(durations.sum()) != frames:
            raise DataError(
                f"utterance {uid}: durations sum {int(durations.sum())} != frames {frames}"
            )
        zero_frac = float((durations == 0).mean())
        degenerate = zero_frac > DEGENERATE_ZERO_FRACTION
        if degenerate:
            warnings.warn(
                f"utterance {uid}: degenerate alignment, "
                f"{zero_frac:.0%} of phonemes got zero frames",
                stacklevel=2,
            )
        out.append(DurationSequence(uid, durations, degenerate=degenerate))
    return out


def write_durations(path, sequences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            vals = " ".join(str(int(d)) for d in seq.durations)
            fh.write(f"{seq.utterance_id}\t{vals}\n")


def read_durations(path) -> list[DurationSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected utterance<TAB>durations")
            uid, _, vals = line.partition("\t")
            durations = np.array(
                [int(v) for v in vals.split()] if vals.strip() else [], dtype=np.int64
            )
            out.append(DurationSequence(uid, durations))
    return out
