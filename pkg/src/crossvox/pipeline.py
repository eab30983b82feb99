"""Pipeline stages over corpus manifests: feature preparation, PPG / VC /
TTS training, bilingual corpus construction, code-switch augmentation, and
synthesis.

Every stage is content-hash gated (re-runs with unchanged inputs skip work),
writes a reproducibility record (config echo, seed, input/output hashes),
and training stages hold a lock file so two runs cannot write the same
checkpoint.
"""

import dataclasses
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .audio import read_wav, write_wav
from .corpus import (
    CorpusManifest,
    Language,
    ManifestEntry,
    SyntheticCorpusConfig,
    SyntheticVoice,
    make_synthetic_corpus,
    read_manifest,
    write_manifest,
)
from .errors import CrossvoxError, PipelineError, ValidationError
from .features import (
    F0Stats,
    FeatureConfig,
    extract_logf0,
    extract_lpcnet_features,
    extract_mfcc,
    fit_f0_stats,
)
from .frontend import (
    default_symbol_table,
    load_lexicon,
    tokenize_english,
    tokenize_mandarin,
    tokenize_mixed,
)
from .ppg import PPGConfig, PPGModel, read_senone_labels, train_ppg_extractor
from .tracks import read_track, write_track
from .tts import (
    ARCHITECTURES,
    augment_with_code_switch,
    extract_durations,
    load_tts_model,
    read_durations,
    synthesize,
    train_tts,
    write_durations,
)
from .vc import VCConfig, VCModel, convert, train_vc, vc_example_from_clip
from .vocoder import VocoderSpec, render

log = logging.getLogger(__name__)

_TRAIN_KEYS = {"epochs", "lr", "mse_threshold", "diagonality_threshold"}
_DEFAULTS = {
    "ppg": {"epochs": 40, "lr": 1e-3},
    "vc": {"epochs": 150, "lr": 1e-3, "mse_threshold": 0.045, "diagonality_threshold": 0.9},
    "transformer": {"epochs": 400, "lr": 1e-3, "mse_threshold": 0.045},
    "tacotron2": {"epochs": 300, "lr": 1e-3, "mse_threshold": 0.045},
    "fastspeech": {"epochs": 300, "lr": 1e-3, "mse_threshold": 0.045},
}


# --- config ---


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _split_overrides(cls, overrides: dict, reserved=()) -> tuple[dict, dict]:
    """(dataclass kwargs, training kwargs); unknown keys raise."""
    cfg_fields = _field_names(cls) - set(reserved)
    cfg, rest = {}, {}
    for k, v in overrides.items():
        if k in cfg_fields:
            cfg[k] = v
        elif k in _TRAIN_KEYS:
            rest[k] = v
        else:
            raise ValidationError(f"unknown {cls.__name__} override {k!r}")
    return cfg, rest


@dataclass
class PipelineConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    downsample_factor: int = 2
    seed: int = 0
    workers: int = 1
    ppg: dict = field(default_factory=dict)
    vc: dict = field(default_factory=dict)
    tts: dict = field(default_factory=dict)  # per-architecture overrides
    vocoder: dict = field(default_factory=dict)
    synthetic: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)  # optional defaults: work, corpus

    def validate(self) -> None:
        from .tts.fastspeech import FastSpeechTTSConfig
        from .tts.tacotron import TacotronTTSConfig
        from .tts.transformer import TransformerTTSConfig

        if self.downsample_factor < 1:
            raise ValidationError("downsample_factor must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        _split_overrides(PPGConfig, self.ppg, reserved=("num_classes", "input_dim"))
        _split_overrides(VCConfig, self.vc, reserved=("ppg_dim",))
        tts_cfgs = {
            "tacotron2": TacotronTTSConfig,
            "transformer": TransformerTTSConfig,
            "fastspeech": FastSpeechTTSConfig,
        }
        for arch, overrides in self.tts.items():
            if arch not in ARCHITECTURES:
                raise ValidationError(f"unknown TTS architecture {arch!r} in config")
            _split_overrides(tts_cfgs[arch], overrides, reserved=("vocab_size",))
        self.vocoder_spec()  # VocoderSpec validates its own fields
        self.synthetic_config().validate()

    def vocoder_spec(self) -> VocoderSpec:
        known = _field_names(VocoderSpec) - {"_semaphore"}
        bad = set(self.vocoder) - known
        if bad:
            raise ValidationError(f"unknown vocoder option(s): {sorted(bad)}")
        return VocoderSpec(**self.vocoder)

    def synthetic_config(self) -> SyntheticCorpusConfig:
        d = dict(self.synthetic)
        if "voices" in d:
            d["voices"] = tuple(
                SyntheticVoice(
                    speaker_id=v["speaker_id"],
                    language=Language(v["language"]),
                    base_f0=float(v["base_f0"]),
                    tilt=float(v.get("tilt", 1.0)),
                    sentences=tuple(v["sentences"]),
                )
                for v in d["voices"]
            )
        bad = set(d) - _field_names(SyntheticCorpusConfig)
        if bad:
            raise ValidationError(f"unknown synthetic option(s): {sorted(bad)}")
        return SyntheticCorpusConfig(**d)

    def stage_params(self, stage: str) -> dict:
        overrides = self.tts.get(stage, {}) if stage in ARCHITECTURES else getattr(self, stage, {})
        params = dict(_DEFAULTS[stage])
        for k in _TRAIN_KEYS:
            if k in overrides:
                params[k] = overrides[k]
        return params

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["feature"] = self.feature.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        bad = set(d) - _field_names(cls)
        if bad:
            raise ValidationError(f"unknown pipeline option(s): {sorted(bad)}")
        if "feature" in d:
            feat = d["feature"]
            unknown = set(feat) - _field_names(FeatureConfig)
            if unknown:
                raise ValidationError(f"unknown feature option(s): {sorted(unknown)}")
            d["feature"] = FeatureConfig(**feat)
        config = cls(**d)
        config.validate()
        return config

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- workspace layout, hashing, locks, records ---


@dataclass
class Workspace:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def features(self) -> Path:
        return self.root / "features"

    @property
    def stats(self) -> Path:
        return self.root / "stats"

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def locks(self) -> Path:
        return self.root / "locks"

    @property
    def records(self) -> Path:
        return self.root / "records"

    @property
    def state(self) -> Path:
        return self.root / "state"

    @property
    def bilingual(self) -> Path:
        return self.root / "bilingual"

    @property
    def augmented(self) -> Path:
        return self.root / "augmented"

    @property
    def durations(self) -> Path:
        return self.root / "durations"

    @property
    def synth(self) -> Path:
        return self.root / "synth"

    def track_path(self, utterance_id: str, kind: str) -> Path:
        return self.features / f"{utterance_id}.{kind}.f32"

    def f0_stats_path(self, speaker_id: str) -> Path:
        return self.stats / f"{speaker_id}.f0.json"

    def checkpoint(self, name: str) -> Path:
        return self.checkpoints / f"{name}.pt"


def _sha256_bytes(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part if isinstance(part, bytes) else str(part).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_state(work: Workspace, name: str) -> dict:
    path = work.state / f"{name}.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def _save_state(work: Workspace, name: str, state: dict) -> None:
    work.state.mkdir(parents=True, exist_ok=True)
    (work.state / f"{name}.json").write_text(
        json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@contextmanager
def stage_lock(work: Workspace, name: str):
    """Exclusive lock for training stages; refuses to run if already held."""
    work.locks.mkdir(parents=True, exist_ok=True)
    path = work.locks / f"{name}.lock"
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PipelineError(
            f"stage {name!r} is locked by another run ({path}); remove the file if stale"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def _write_record(work: Workspace, stage: str, payload: dict) -> None:
    work.records.mkdir(parents=True, exist_ok=True)
    payload = {"stage": stage, "time": time.strftime("%Y-%m-%dT%H:%M:%S"), **payload}
    (work.records / f"{stage}.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# --- dataset assembly ---


def _tokenize_entry(entry: ManifestEntry, lexicon, table):
    if entry.language is Language.EN:
        return tokenize_english(entry.transcript, lexicon, table)
    if entry.language is Language.ZH:
        return tokenize_mandarin(entry.transcript, lexicon, table)
    return tokenize_mixed(entry.transcript, lexicon, table)


def _load_manifest(manifest_path) -> tuple[CorpusManifest, Path]:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise PipelineError(f"manifest not found: {manifest_path}")
    manifest = read_manifest(manifest_path)
    manifest.validate(manifest_path.parent)
    return manifest, manifest_path.parent


def _require_track(work: Workspace, utterance_id: str, kind: str):
    path = work.track_path(utterance_id, kind)
    if not path.exists():
        raise PipelineError(
            f"utterance {utterance_id}: missing {kind} features ({path}); run prepare first"
        )
    return read_track(path)


def _load_tts_dataset(manifest: CorpusManifest, work: Workspace, lexicon, table):
    dataset, uids = [], []
    for entry in manifest.entries:
        seq = _tokenize_entry(entry, lexicon, table)
        track = _require_track(work, entry.utterance_id, "lpcnet")
        dataset.append((seq, track))
        uids.append(entry.utterance_id)
    return dataset, uids


# --- stages ---


def cmd_prepare(manifest_path, work_dir, config: PipelineConfig, workers: int | None = None) -> dict:
    """Extract MFCC / log-F0 / LPCNet features and per-speaker F0 stats."""
    manifest, base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    work.features.mkdir(parents=True, exist_ok=True)
    workers = workers or config.workers
    state = _load_state(work, "prepare")
    cfg_hash = _sha256_bytes(json.dumps(config.feature.to_dict(), sort_keys=True))
    kinds = ("mfcc", "logf0", "lpcnet")

    def one(entry: ManifestEntry):
        audio_path = base / entry.audio
        utt_hash = _sha256_bytes(_sha256_file(audio_path), cfg_hash)
        outputs = [work.track_path(entry.utterance_id, k) for k in kinds]
        if state.get(entry.utterance_id) == utt_hash and all(p.exists() for p in outputs):
            return entry.utterance_id, utt_hash, True, None
        try:
            clip = read_wav(audio_path)
            write_track(outputs[0], extract_mfcc(clip, config.feature))
            write_track(outputs[1], extract_logf0(clip, config.feature))
            write_track(outputs[2], extract_lpcnet_features(clip, config.feature))
        except (CrossvoxError, OSError) as exc:
            return entry.utterance_id, None, False, f"{entry.utterance_id}: {exc}"
        return entry.utterance_id, utt_hash, False, None

    done = skipped = 0
    failures: list[str] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for uid, utt_hash, was_skipped, error in pool.map(one, manifest.entries):
            if error is not None:
                log.error("prepare failed: %s", error)
                failures.append(error)
                continue
            state[uid] = utt_hash
            if was_skipped:
                skipped += 1
                log.info("prepare: %s up to date, skipped", uid)
            else:
                done += 1

    stats_written = []
    if not failures:
        work.stats.mkdir(parents=True, exist_ok=True)
        for speaker in manifest.speakers():
            entries = manifest.for_speaker(speaker)
            spk_hash = _sha256_bytes(speaker, *(state[e.utterance_id] for e in entries))
            stats_path = work.f0_stats_path(speaker)
            if state.get(f"stats:{speaker}") == spk_hash and stats_path.exists():
                log.info("prepare: F0 stats for %s up to date, skipped", speaker)
                continue
            tracks = [_require_track(work, e.utterance_id, "logf0") for e in entries]
            stats = fit_f0_stats(tracks, speaker)
            stats.save(stats_path)
            state[f"stats:{speaker}"] = spk_hash
            stats_written.append(str(stats_path))

    _save_state(work, "prepare", state)
    _write_record(
        work,
        "prepare",
        {
            "config": config.to_dict(),
            "manifest": str(manifest_path),
            "manifest_hash": _sha256_file(manifest_path),
            "utterances": len(manifest.entries),
            "extracted": done,
            "skipped": skipped,
            "failures": failures,
            "stats_written": stats_written,
        },
    )
    if failures:
        raise PipelineError(f"prepare: {len(failures)} utterance(s) failed: {'; '.join(failures)}")
    return {"extracted": done, "skipped": skipped, "speakers": manifest.speakers()}


def cmd_train_ppg(manifest_path, work_dir, config: PipelineConfig, seed: int | None = None) -> Path:
    """Train the senone classifier on stored MFCCs + corpus labels."""
    manifest, base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    seed = config.seed if seed is None else seed
    labels_path = base / "labels.tsv"
    if not labels_path.exists():
        raise PipelineError(f"senone labels not found: {labels_path}")
    labels = {l.utterance_id: l for l in read_senone_labels(labels_path)}
    table = default_symbol_table()

    dataset = []
    for entry in manifest.entries:
        if entry.utterance_id not in labels:
            raise PipelineError(f"utterance {entry.utterance_id}: no senone labels")
        dataset.append((_require_track(work, entry.utterance_id, "mfcc"), labels[entry.utterance_id]))

    params = config.stage_params("ppg")
    ckpt = work.checkpoint("ppg")
    in_hash = _sha256_bytes(
        _sha256_file(labels_path),
        json.dumps(config.ppg, sort_keys=True),
        seed,
        params["epochs"],
        params["lr"],
        *(state_hash for state_hash in sorted(_load_state(work, "prepare").values())),
    )
    state = _load_state(work, "train-ppg")
    if state.get("hash") == in_hash and ckpt.exists():
        log.info("train-ppg: up to date, skipped")
        return ckpt

    cfg_kwargs, _ = _split_overrides(PPGConfig, config.ppg, reserved=("num_classes", "input_dim"))
    ppg_config = PPGConfig(
        num_classes=len(table.symbols), input_dim=config.feature.mfcc_order, **cfg_kwargs
    )
    with stage_lock(work, "train-ppg"):
        model, losses = train_ppg_extractor(
            dataset, ppg_config, epochs=params["epochs"], lr=params["lr"], seed=seed
        )
        work.checkpoints.mkdir(parents=True, exist_ok=True)
        model.save(ckpt)
    _save_state(work, "train-ppg", {"hash": in_hash})
    _write_record(
        work,
        "train-ppg",
        {
            "config": config.to_dict(),
            "seed": seed,
            "input_hash": in_hash,
            "final_loss": losses[-1] if losses else None,
            "checkpoint": str(ckpt),
            "checkpoint_hash": _sha256_file(ckpt),
        },
    )
    return ckpt


def cmd_train_vc(
    manifest_path, work_dir, config: PipelineConfig, target_speaker: str, seed: int | None = None
) -> Path:
    """Train voice conversion into target_speaker's voice on their corpus."""
    manifest, base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    seed = config.seed if seed is None else seed
    entries = manifest.for_speaker(target_speaker)
    if not entries:
        raise PipelineError(f"no utterances for speaker {target_speaker!r}")
    ppg_ckpt = work.checkpoint("ppg")
    if not ppg_ckpt.exists():
        raise PipelineError(f"PPG checkpoint not found: {ppg_ckpt}; run train-ppg first")
    stats_path = work.f0_stats_path(target_speaker)
    if not stats_path.exists():
        raise PipelineError(f"F0 stats not found: {stats_path}; run prepare first")

    params = config.stage_params("vc")
    ckpt = work.checkpoint(f"vc_{target_speaker}")
    in_hash = _sha256_bytes(
        _sha256_file(ppg_ckpt),
        _sha256_file(stats_path),
        json.dumps(config.vc, sort_keys=True),
        config.downsample_factor,
        seed,
        json.dumps(params, sort_keys=True),
        *(_sha256_file(base / e.audio) for e in entries),
    )
    state = _load_state(work, f"train-vc-{target_speaker}")
    if state.get("hash") == in_hash and ckpt.exists():
        log.info("train-vc %s: up to date, skipped", target_speaker)
        return ckpt

    ppg_model = PPGModel.load(ppg_ckpt)
    stats = F0Stats.load(stats_path)
    cfg_kwargs, _ = _split_overrides(VCConfig, config.vc, reserved=("ppg_dim",))
    cfg_kwargs.setdefault("downsample_factor", config.downsample_factor)
    vc_config = VCConfig(ppg_dim=ppg_model.config.num_classes, **cfg_kwargs)
    examples = [
        vc_example_from_clip(
            e.utterance_id, target_speaker, read_wav(base / e.audio),
            ppg_model, stats, vc_config, config.feature,
        )
        for e in entries
    ]
    with stage_lock(work, f"train-vc-{target_speaker}"):
        model, history = train_vc(
            VCModel(vc_config),
            examples,
            epochs=params["epochs"],
            lr=params["lr"],
            seed=seed,
            mse_threshold=params["mse_threshold"],
            diagonality_threshold=params["diagonality_threshold"],
        )
        work.checkpoints.mkdir(parents=True, exist_ok=True)
        model.save(ckpt)
    _save_state(work, f"train-vc-{target_speaker}", {"hash": in_hash})
    last = history[-1] if history else {}
    _write_record(
        work,
        f"train-vc-{target_speaker}",
        {
            "config": config.to_dict(),
            "seed": seed,
            "input_hash": in_hash,
            "epochs_run": len(history),
            "final": last,
            "checkpoint": str(ckpt),
            "checkpoint_hash": _sha256_file(ckpt),
        },
    )
    return ckpt


def _convert_utterance(
    entry: ManifestEntry,
    base: Path,
    work: Workspace,
    config: PipelineConfig,
    ppg_model: PPGModel,
    vc_model: VCModel,
    source_stats: F0Stats,
    target_speaker: str,
    audio_dir: Path,
):
    """Convert one utterance into the target voice; returns (uid, track_path, wav_path)."""
    uid = f"{entry.utterance_id}__vc_{target_speaker}"
    clip = read_wav(base / entry.audio)
    track = convert(clip, ppg_model, vc_model, source_stats, config.feature)
    track_path = work.track_path(uid, "lpcnet")
    write_track(track_path, track)
    wav_path = audio_dir / f"{uid}.wav"
    write_wav(wav_path, render(track, config.vocoder_spec(), config.feature))
    return uid, track_path, wav_path


def cmd_build_bilingual(manifest_path, work_dir, config: PipelineConfig, workers: int | None = None) -> dict:
    """Per-speaker bilingual manifests: own originals + everyone else's
    utterances converted into that speaker's voice (synthetic=true)."""
    manifest, base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    workers = workers or config.workers
    speakers = manifest.speakers()
    ppg_ckpt = work.checkpoint("ppg")
    if not ppg_ckpt.exists():
        raise PipelineError(f"PPG checkpoint not found: {ppg_ckpt}; run train-ppg first")
    ppg_model = PPGModel.load(ppg_ckpt)
    state = _load_state(work, "build-bilingual")
    out_paths = {}
    work.bilingual.mkdir(parents=True, exist_ok=True)
    audio_dir = work.bilingual / "audio"
    audio_dir.mkdir(exist_ok=True)

    for target in speakers:
        vc_ckpt = work.checkpoint(f"vc_{target}")
        if not vc_ckpt.exists():
            raise PipelineError(f"VC checkpoint not found: {vc_ckpt}; run train-vc first")
        vc_model = VCModel.load(vc_ckpt)
        vc_hash = _sha256_file(vc_ckpt)
        entries = [
            dataclasses.replace(e, audio=os.path.relpath(base / e.audio, work.bilingual))
            for e in manifest.for_speaker(target)
        ]
        sources = [e for e in manifest.entries if e.speaker_id != target]
        if not sources:
            log.warning("build-bilingual: no other speakers; %s manifest is originals only", target)

        def one(src: ManifestEntry):
            uid = f"{src.utterance_id}__vc_{target}"
            utt_hash = _sha256_bytes(_sha256_file(base / src.audio), vc_hash, _sha256_file(ppg_ckpt))
            track_path = work.track_path(uid, "lpcnet")
            wav_path = audio_dir / f"{uid}.wav"
            if state.get(uid) == utt_hash and track_path.exists() and wav_path.exists():
                log.info("build-bilingual: %s up to date, skipped", uid)
                return src, uid, wav_path, utt_hash
            source_stats = F0Stats.load(work.f0_stats_path(src.speaker_id))
            _convert_utterance(
                src, base, work, config, ppg_model, vc_model, source_stats, target, audio_dir
            )
            return src, uid, wav_path, utt_hash

        with ThreadPoolExecutor(max_workers=workers) as pool:
            converted = list(pool.map(one, sources))
        for src, uid, wav_path, utt_hash in converted:
            state[uid] = utt_hash
            entries.append(
                ManifestEntry(
                    utterance_id=uid,
                    audio=os.path.relpath(wav_path, work.bilingual),
                    transcript=src.transcript,
                    language=src.language,
                    speaker_id=target,
                    synthetic=True,
                )
            )
        out = work.bilingual / f"{target}.jsonl"
        write_manifest(out, CorpusManifest(entries=entries))
        out_paths[target] = out

    _save_state(work, "build-bilingual", state)
    _write_record(
        work,
        "build-bilingual",
        {
            "config": config.to_dict(),
            "manifest": str(manifest_path),
            "manifest_hash": _sha256_file(manifest_path),
            "outputs": {k: str(v) for k, v in out_paths.items()},
        },
    )
    return out_paths


def cmd_convert(
    manifest_path, work_dir, config: PipelineConfig, utterance_id: str, target_speaker: str
) -> Path:
    """Convert a single utterance into target_speaker's voice; returns the WAV path."""
    manifest, base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    matches = [e for e in manifest.entries if e.utterance_id == utterance_id]
    if not matches:
        raise PipelineError(f"utterance {utterance_id!r} not in manifest")
    entry = matches[0]
    vc_ckpt = work.checkpoint(f"vc_{target_speaker}")
    ppg_ckpt = work.checkpoint("ppg")
    for p, stage in ((vc_ckpt, "train-vc"), (ppg_ckpt, "train-ppg")):
        if not p.exists():
            raise PipelineError(f"checkpoint not found: {p}; run {stage} first")
    out_dir = work.root / "converted"
    out_dir.mkdir(parents=True, exist_ok=True)
    _, _, wav_path = _convert_utterance(
        entry,
        base,
        work,
        config,
        PPGModel.load(ppg_ckpt),
        VCModel.load(vc_ckpt),
        F0Stats.load(work.f0_stats_path(entry.speaker_id)),
        target_speaker,
        out_dir,
    )
    _write_record(
        work,
        "convert",
        {
            "config": config.to_dict(),
            "utterance": utterance_id,
            "target_speaker": target_speaker,
            "output": str(wav_path),
            "output_hash": _sha256_file(wav_path),
        },
    )
    return wav_path


def cmd_train_tts(
    manifest_path,
    work_dir,
    config: PipelineConfig,
    arch: str,
    seed: int | None = None,
    resume: bool = False,
    durations_path=None,
) -> Path:
    """Train one TTS architecture on a manifest's stored feature tracks.

    With resume=True an existing checkpoint continues training (refinement
    on an augmented corpus); fastspeech requires a durations file.
    """
    from .tts.fastspeech import FastSpeechTTSConfig
    from .tts.tacotron import TacotronTTSConfig
    from .tts.transformer import TransformerTTSConfig

    if arch not in ARCHITECTURES:
        raise PipelineError(f"unknown TTS architecture {arch!r}")
    manifest, _base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    seed = config.seed if seed is None else seed
    table = default_symbol_table()
    lexicon = load_lexicon()
    dataset, uids = _load_tts_dataset(manifest, work, lexicon, table)

    if arch == "fastspeech":
        if durations_path is None:
            raise PipelineError("fastspeech training needs --durations (run extract-durations)")
        if not Path(durations_path).exists():
            raise PipelineError(f"durations file not found: {durations_path}")
        by_uid = {d.utterance_id: d for d in read_durations(durations_path)}
        missing = [u for u in uids if u not in by_uid]
        if missing:
            raise PipelineError(f"durations missing for utterance(s): {', '.join(missing)}")
        dataset = [(seq, track, by_uid[uid]) for (seq, track), uid in zip(dataset, uids)]

    params = config.stage_params(arch)
    ckpt = work.checkpoint(f"tts_{arch}")
    in_hash = _sha256_bytes(
        arch,
        _sha256_file(manifest_path),
        json.dumps(config.tts.get(arch, {}), sort_keys=True),
        seed,
        json.dumps(params, sort_keys=True),
        resume and ckpt.exists() and _sha256_file(ckpt) or "fresh",
        durations_path and _sha256_file(durations_path) or "no-durations",
        *(state_hash for state_hash in sorted(_load_state(work, "prepare").values())),
    )
    state = _load_state(work, f"train-tts-{arch}")
    if state.get("hash") == in_hash and ckpt.exists():
        log.info("train-tts %s: up to date, skipped", arch)
        return ckpt

    model = None
    tts_config = None
    if resume:
        if not ckpt.exists():
            raise PipelineError(f"cannot resume: checkpoint not found: {ckpt}")
        model = load_tts_model(ckpt, table)
        log.info("train-tts %s: resuming from %s", arch, ckpt)
    else:
        cfg_cls = {
            "tacotron2": TacotronTTSConfig,
            "transformer": TransformerTTSConfig,
            "fastspeech": FastSpeechTTSConfig,
        }[arch]
        cfg_kwargs, _ = _split_overrides(cfg_cls, config.tts.get(arch, {}), reserved=("vocab_size",))
        tts_config = cfg_cls(vocab_size=len(table.symbols), **cfg_kwargs)

    with stage_lock(work, f"train-tts-{arch}"):
        work.checkpoints.mkdir(parents=True, exist_ok=True)
        model, history = train_tts(
            arch,
            dataset,
            config=tts_config,
            table=table,
            epochs=params["epochs"],
            lr=params["lr"],
            seed=seed,
            mse_threshold=params["mse_threshold"],
            checkpoint_path=ckpt,
            model=model,
        )
    _save_state(work, f"train-tts-{arch}", {"hash": in_hash})
    last = history[-1] if history else {}
    _write_record(
        work,
        f"train-tts-{arch}",
        {
            "config": config.to_dict(),
            "seed": seed,
            "manifest": str(manifest_path),
            "input_hash": in_hash,
            "resumed": resume,
            "epochs_run": len(history),
            "final": last,
            "checkpoint": str(ckpt),
            "checkpoint_hash": _sha256_file(ckpt),
        },
    )
    return ckpt


def cmd_extract_durations(manifest_path, work_dir, config: PipelineConfig, out_path=None) -> Path:
    """Teacher-forced transformer pass -> per-phoneme durations TSV."""
    manifest, _base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    ckpt = work.checkpoint("tts_transformer")
    if not ckpt.exists():
        raise PipelineError(f"transformer checkpoint not found: {ckpt}; run train-tts first")
    table = default_symbol_table()
    lexicon = load_lexicon()
    dataset, uids = _load_tts_dataset(manifest, work, lexicon, table)
    out_path = Path(out_path) if out_path else work.durations / f"{Path(manifest_path).stem}.tsv"

    in_hash = _sha256_bytes(_sha256_file(ckpt), _sha256_file(manifest_path))
    state = _load_state(work, "extract-durations")
    if state.get(str(out_path)) == in_hash and out_path.exists():
        log.info("extract-durations: up to date, skipped")
        return out_path

    model = load_tts_model(ckpt, table)
    sequences = extract_durations(model, dataset, uids=uids)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_durations(out_path, sequences)
    state[str(out_path)] = in_hash
    _save_state(work, "extract-durations", state)
    _write_record(
        work,
        "extract-durations",
        {
            "config": config.to_dict(),
            "manifest": str(manifest_path),
            "checkpoint_hash": _sha256_file(ckpt),
            "output": str(out_path),
            "output_hash": _sha256_file(out_path),
            "degenerate": [s.utterance_id for s in sequences if s.degenerate],
        },
    )
    return out_path


def cmd_augment(
    manifest_path, cs_text_path, work_dir, config: PipelineConfig, seed: int | None = None
) -> dict:
    """Synthesize code-switched sentences with the transformer and append
    them to the manifest (synthetic=true, language CS)."""
    manifest, _base = _load_manifest(manifest_path)
    work = Workspace(work_dir)
    cs_text_path = Path(cs_text_path)
    if not cs_text_path.exists():
        raise PipelineError(f"code-switch text file not found: {cs_text_path}")
    sentences = [
        line.strip() for line in cs_text_path.read_text(encoding="utf-8").splitlines() if line.strip()
    ]
    ckpt = work.checkpoint("tts_transformer")
    if not ckpt.exists():
        raise PipelineError(f"transformer checkpoint not found: {ckpt}; run train-tts first")
    table = default_symbol_table()
    lexicon = load_lexicon()
    model = load_tts_model(ckpt, table)

    real_speakers = [e.speaker_id for e in manifest.entries if not e.synthetic]
    pool = real_speakers or [e.speaker_id for e in manifest.entries]
    speaker = max(sorted(set(pool)), key=pool.count)

    out_manifest_path = work.augmented / f"{Path(manifest_path).stem}.jsonl"
    in_hash = _sha256_bytes(_sha256_file(ckpt), _sha256_file(cs_text_path), _sha256_file(manifest_path))
    state = _load_state(work, "augment")
    if state.get(str(out_manifest_path)) == in_hash and out_manifest_path.exists():
        log.info("augment: up to date, skipped")
        existing = read_manifest(out_manifest_path)
        return {
            "manifest": out_manifest_path,
            "added": len(existing.entries) - len(manifest.entries),
            "skipped": [],
        }

    work.augmented.mkdir(parents=True, exist_ok=True)
    audio_dir = work.augmented / "audio"
    audio_dir.mkdir(exist_ok=True)
    spec = config.vocoder_spec()

    entries = [
        dataclasses.replace(
            e, audio=os.path.relpath(Path(manifest_path).parent / e.audio, work.augmented)
        )
        for e in manifest.entries
    ]

    new_pairs, skipped = augment_with_code_switch(model, sentences, lexicon, table, dataset=[])
    for i, (seq, track) in enumerate(new_pairs):
        uid = f"cs-{i:04d}__tts_{speaker}"
        write_track(work.track_path(uid, "lpcnet"), track)
        wav_path = audio_dir / f"{uid}.wav"
        write_wav(wav_path, render(track, spec, config.feature))
        entries.append(
            ManifestEntry(
                utterance_id=uid,
                audio=os.path.relpath(wav_path, work.augmented),
                transcript=seq.text_ref,
                language=Language.CS,
                speaker_id=speaker,
                synthetic=True,
            )
        )
    write_manifest(out_manifest_path, CorpusManifest(entries=entries))
    state[str(out_manifest_path)] = in_hash
    _save_state(work, "augment", state)
    _write_record(
        work,
        "augment",
        {
            "config": config.to_dict(),
            "seed": config.seed if seed is None else seed,
            "manifest": str(manifest_path),
            "sentences": len(sentences),
            "added": len(new_pairs),
            "skipped": skipped,
            "output": str(out_manifest_path),
            "output_hash": _sha256_file(out_manifest_path),
        },
    )
    if skipped:
        for sentence, reason in skipped:
            log.warning("augment skipped %r: %s", sentence, reason)
    return {"manifest": out_manifest_path, "added": len(new_pairs), "skipped": skipped}


def cmd_synthesize(
    texts, work_dir, config: PipelineConfig, arch: str = "tacotron2",
    model_path=None, out_dir=None,
) -> list[Path]:
    """Tokenize + synthesize + render each text; returns the WAV paths."""
    work = Workspace(work_dir)
    ckpt = Path(model_path) if model_path else work.checkpoint(f"tts_{arch}")
    if not ckpt.exists():
        raise PipelineError(f"TTS checkpoint not found: {ckpt}")
    table = default_symbol_table()
    lexicon = load_lexicon()
    model = load_tts_model(ckpt, table)
    spec = config.vocoder_spec()
    out_dir = Path(out_dir) if out_dir else work.synth
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = []
    outputs = {}
    for i, text in enumerate(texts):
        seq = tokenize_mixed(text, lexicon, table)
        result = synthesize(model, seq)
        if result.truncated:
            log.warning("synthesize %r: hit the frame cap before the stop token", text)
        clip = render(result.features, spec, config.feature)
        wav_path = out_dir / f"synth-{i:04d}.wav"
        write_wav(wav_path, clip)
        paths.append(wav_path)
        outputs[str(wav_path)] = _sha256_file(wav_path)
    _write_record(
        work,
        "synthesize",
        {
            "config": config.to_dict(),
            "model": str(ckpt),
            "model_hash": _sha256_file(ckpt),
            "texts": list(texts),
            "outputs": outputs,
        },
    )
    return paths


def cmd_make_synthetic_corpus(out_dir, config: PipelineConfig, seed: int | None = None) -> Path:
    seed = config.seed if seed is None else seed
    manifest_path = make_synthetic_corpus(out_dir, seed=seed, config=config.synthetic_config())
    log.info("synthetic corpus written to %s", manifest_path)
    return manifest_path
