"""Shared training / synthesis / checkpoint surface over the three TTS
architectures.

All three train per-utterance with Adam on scaler-normalized targets, carry
the symbol-table hash in their checkpoints, and synthesize into 20-dim
vocoder feature tracks.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..attention import attention_alignment
from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import DataError, SymbolLookupError, ValidationError
from ..frontend import BilingualLexicon, PhonemeSequence, SymbolTable, tokenize_mixed
from ..seq2seq import (
    DecoderOutput,
    FeatureScaler,
    make_stop_targets,
    seq2seq_loss,
)
from ..tracks import FeatureKind, FeatureTrack
from .durations import DurationSequence
from .fastspeech import FastSpeechTTS, FastSpeechTTSConfig, duration_targets
from .tacotron import TacotronTTS, TacotronTTSConfig
from .transformer import TransformerTTS, TransformerTTSConfig

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "tts"
ARCHITECTURES = ("tacotron2", "transformer", "fastspeech")

_CONFIGS = {
    "tacotron2": TacotronTTSConfig,
    "transformer": TransformerTTSConfig,
    "fastspeech": FastSpeechTTSConfig,
}
_MODELS = {
    "tacotron2": TacotronTTS,
    "transformer": TransformerTTS,
    "fastspeech": FastSpeechTTS,
}


@dataclass
class SynthesisResult:
    features: FeatureTrack
    truncated: bool = False
    alignment: np.ndarray | None = None
    durations: np.ndarray | None = None


def default_tts_config(arch: str, vocab_size: int):
    _check_arch(arch)
    return _CONFIGS[arch](vocab_size=vocab_size)


def build_tts_model(arch: str, config) -> nn.Module:
    _check_arch(arch)
    if not isinstance(config, _CONFIGS[arch]):
        raise ValidationError(
            f"{arch} expects {_CONFIGS[arch].__name__}, got {type(config).__name__}"
        )
    model = _MODELS[arch](config)
    model.arch = arch
    model.scaler = None
    model.vocab_hash = None
    model.frame_shift = None
    return model


def _check_arch(arch: str) -> None:
    if arch not in ARCHITECTURES:
        raise ValidationError(f"unknown architecture {arch!r}, expected one of {ARCHITECTURES}")


def _unpack_entry(entry):
    if len(entry) == 2:
        seq, track = entry
        durations = None
    elif len(entry) == 3:
        seq, track, durations = entry
    else:
        raise DataError("dataset entries must be (phonemes, track[, durations])")
    if isinstance(durations, DurationSequence):
        durations = durations.durations
    return seq, track, durations


def _validate_dataset(arch, dataset, vocab_size):
    if not dataset:
        raise DataError("empty training set")
    frame_shift = None
    for entry in dataset:
        seq, track, durations = _unpack_entry(entry)
        if max(seq.ids) >= vocab_size:
            raise DataError(
                f"utterance {seq.text_ref}: symbol id {max(seq.ids)} outside "
                f"vocabulary of {vocab_size}"
            )
        if track.num_frames == 0:
            raise DataError(f"utterance {seq.text_ref}: empty feature track")
        if frame_shift is None:
            frame_shift = track.frame_shift
        elif abs(track.frame_shift - frame_shift) > 1e-9:
            raise DataError("feature tracks disagree on frame shift")
        if arch == "fastspeech":
            if durations is None:
                raise DataError(
                    f"utterance {seq.text_ref}: fastspeech training needs phoneme durations"
                )
            if len(durations) != len(seq.ids):
                raise DataError(
                    f"utterance {seq.text_ref}: {len(durations)} durations for "
                    f"{len(seq.ids)} phonemes"
                )
            if int(np.sum(durations)) != track.num_frames:
                raise DataError(
                    f"utterance {seq.text_ref}: durations sum {int(np.sum(durations))} "
                    f"!= {track.num_frames} frames"
                )
    return frame_shift


def _epoch_step(model, arch, ids, target, durations):
    """One utterance forward + loss; returns (loss, mse, diagonality|None)."""
    if arch == "tacotron2":
        out = model.teacher_forced(ids, target)
        stop_t = make_stop_targets(
            target.shape[1], model.config.reduction_factor, dtype=target.dtype
        )
        parts = seq2seq_loss(out, target, stop_t)
        diag = attention_alignment(out.alignment[0].detach().cpu().numpy())
        return parts["loss"], parts["mse_after"], diag
    if arch == "transformer":
        before, after, stop = model.teacher_forced(ids, target)
        stop_t = make_stop_targets(target.shape[1], 1, dtype=target.dtype)
        out = DecoderOutput(before, after, stop, alignment=None)
        parts = seq2seq_loss(out, target, stop_t)
        cross = model.last_cross_attentions[-1][0].mean(dim=0)
        diag = attention_alignment(cross.detach().cpu().numpy())
        return parts["loss"], parts["mse_after"], diag
    features, log_dur = model.forward_train(ids, durations)
    if not torch.isfinite(features).all():
        raise DataError("non-finite values in predicted features")
    mse = nn.functional.mse_loss(features, target)
    dur_target = duration_targets(durations).to(log_dur.dtype)
    dur_loss = nn.functional.mse_loss(log_dur.squeeze(0), dur_target)
    return mse + dur_loss, mse, None


def train_tts(
    arch: str,
    dataset: list,
    config=None,
    table: SymbolTable | None = None,
    epochs: int = 200,
    lr: float = 1e-3,
    seed: int = 0,
    mse_threshold: float | None = None,
    checkpoint_path=None,
    model: nn.Module | None = None,
):
    """Train (or continue training) one architecture on (phonemes, track[, durations]).

    Pass ``model`` to refine an existing network; its scaler and config are
    kept so normalization stays consistent across runs.  Returns
    (model, history) where history has one dict per epoch.
    """
    _check_arch(arch)
    if model is not None:
        if getattr(model, "arch", None) != arch:
            raise ValidationError(
                f"cannot refine a {getattr(model, 'arch', 'untagged')} model as {arch}"
            )
        config = model.config
    elif config is None:
        if table is None:
            raise ValidationError("need a config, a symbol table, or a model to train")
        config = default_tts_config(arch, len(table.symbols))
    if table is not None and config.vocab_size != len(table.symbols):
        raise ValidationError(
            f"config vocabulary {config.vocab_size} != symbol table {len(table.symbols)}"
        )
    frame_shift = _validate_dataset(arch, dataset, config.vocab_size)

    torch.manual_seed(seed)
    if model is None:
        model = build_tts_model(arch, config)
        model.scaler = FeatureScaler.fit([track.data for _, track, *_ in map(_unpack_entry, dataset)])
    if table is not None:
        model.vocab_hash = table.content_hash()
    model.frame_shift = frame_shift
    scaler = model.scaler

    tensors = []
    for entry in dataset:
        seq, track, durations = _unpack_entry(entry)
        ids = torch.tensor([list(seq.ids)], dtype=torch.long)
        target = torch.from_numpy(scaler.transform(track.data).astype(np.float32)).unsqueeze(0)
        dur_t = None
        if durations is not None:
            dur_t = torch.as_tensor(np.asarray(durations, dtype=np.int64))
        tensors.append((ids, target, dur_t))

    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    history: list[dict] = []
    model.train()
    for epoch in range(epochs):
        mses, diags, losses = [], [], []
        for ids, target, dur_t in tensors:
            optimizer.zero_grad()
            loss, mse, diag = _epoch_step(model, arch, ids, target, dur_t)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
            mses.append(float(mse.detach()))
            if diag is not None:
                diags.append(diag)
        entry = {
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "mse": float(np.mean(mses)),
        }
        if diags:
            entry["diagonality"] = float(np.mean(diags))
        history.append(entry)
        if mse_threshold is not None and entry["mse"] < mse_threshold:
            log.info("%s early stop at epoch %d: mse %.4f", arch, epoch, entry["mse"])
            break
    model.eval()
    if checkpoint_path is not None:
        save_tts_model(model, checkpoint_path)
    return model, history


def save_tts_model(model: nn.Module, path) -> None:
    arch = getattr(model, "arch", None)
    if arch not in ARCHITECTURES:
        raise ValidationError("model carries no architecture tag; build it with build_tts_model")
    scaler = model.scaler
    extra = {
        "arch": arch,
        "scaler": scaler.to_dict() if scaler is not None else None,
        "vocab_hash": model.vocab_hash,
        "frame_shift": model.frame_shift,
    }
    save_checkpoint(path, CHECKPOINT_KIND, model.config.to_dict(), model.state_dict(), extra)


def load_tts_model(path, table: SymbolTable | None = None) -> nn.Module:
    """Restore a TTS checkpoint; refuses one trained on a different vocabulary."""
    payload = load_checkpoint(path, CHECKPOINT_KIND)
    extra = payload["extra"]
    arch = extra.get("arch")
    _check_arch(arch)
    config = _CONFIGS[arch](**payload["config"])
    model = build_tts_model(arch, config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    if extra.get("scaler") is not None:
        model.scaler = FeatureScaler.from_dict(extra["scaler"])
    model.vocab_hash = extra.get("vocab_hash")
    model.frame_shift = extra.get("frame_shift")
    if table is not None and model.vocab_hash is not None:
        if table.content_hash() != model.vocab_hash:
            raise ValidationError(
                "checkpoint was trained on a different symbol table "
                f"(hash {model.vocab_hash[:12]}… != {table.content_hash()[:12]}…)"
            )
    return model


def synthesize(
    model: nn.Module,
    phonemes: PhonemeSequence,
    max_frames: int | None = None,
) -> SynthesisResult:
    """Phonemes to a 20-dim feature track in real (denormalized) units."""
    arch = getattr(model, "arch", None)
    _check_arch(arch)
    if model.frame_shift is None:
        raise ValidationError("model has no frame_shift; train or load it first")
    ids = torch.tensor([list(phonemes.ids)], dtype=torch.long)
    model.eval()
    truncated = False
    alignment = None
    durations = None
    with torch.no_grad():
        if arch == "tacotron2":
            out = model.infer(ids, max_frames=max_frames)
            raw = out.after[0].cpu().numpy()
            r = model.config.reduction_factor
            per_step = out.alignment[0].cpu().numpy()
            alignment = np.repeat(per_step, r, axis=0)[: raw.shape[0]]
            truncated = out.truncated
        elif arch == "transformer":
            after, _stop, truncated = model.infer(ids, max_frames=max_frames)
            raw = after[0].cpu().numpy()
            cross = model.last_cross_attentions[-1][0].mean(dim=0)
            alignment = cross.cpu().numpy()
        else:
            feats, durations = model.infer(ids)
            raw = feats[0].cpu().numpy()
    data = model.scaler.inverse(raw) if model.scaler is not None else raw
    track = FeatureTrack(
        data=np.asarray(data, dtype=np.float64),
        frame_shift=model.frame_shift,
        feature_kind=FeatureKind.LPCNET,
    )
    return SynthesisResult(track, truncated=truncated, alignment=alignment, durations=durations)


def augment_with_code_switch(
    model: nn.Module,
    sentences: list[str],
    lexicon: BilingualLexicon,
    table: SymbolTable,
    dataset: list,
):
    """Synthesize code-switched sentences and append them to the dataset.

    Sentences that fail tokenization or synthesis are skipped, each with a
    recorded reason.  Returns (augmented_dataset, skipped) where skipped is
    a list of (sentence, reason).
    """
    augmented = list(dataset)
    skipped: list[tuple[str, str]] = []
    for sentence in sentences:
        try:
            seq = tokenize_mixed(sentence, lexicon, table)
            result = synthesize(model, seq)
        except (SymbolLookupError, ValidationError, DataError) as exc:
            reason = str(exc)
            log.warning("skipping %r: %s", sentence, reason)
            skipped.append((sentence, reason))
            continue
        augmented.append((seq, result.features))
    return augmented, skipped
