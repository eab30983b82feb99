"""Corpus manifests and the synthetic desk-scale corpus generator.

A manifest is JSON-lines: a header record with the format version, then one
utterance per line.  The synthetic generator builds two single-language
"speakers" whose phonemes are distinct harmonic prototypes, so senone labels
are exact by construction and the VC/TTS mappings are learnable in minutes.
"""

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav
from .errors import FormatError, ValidationError
from .frontend import (
    BilingualLexicon,
    PhonemeSequence,
    SymbolTable,
    default_symbol_table,
    load_lexicon,
    tokenize_english,
    tokenize_mandarin,
)
from .ppg import SenoneLabels, write_senone_labels

MANIFEST_FORMAT = "crossvox-manifest"
MANIFEST_VERSION = 1


class Language(str, Enum):
    EN = "EN"
    ZH = "ZH"
    CS = "CS"  # code-switched


@dataclass
class ManifestEntry:
    utterance_id: str
    audio: str  # path, resolved against the manifest's directory
    transcript: str
    language: Language
    speaker_id: str
    synthetic: bool = False

    def __post_init__(self):
        self.language = Language(self.language)

    def to_json(self) -> str:
        d = asdict(self)
        d["language"] = self.language.value
        return json.dumps(d, sort_keys=True, ensure_ascii=False)


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def validate(self, base_dir=None) -> None:
        seen = set()
        for entry in self.entries:
            if entry.utterance_id in seen:
                raise ValidationError(f"duplicate utterance_id {entry.utterance_id!r}")
            seen.add(entry.utterance_id)
            if base_dir is not None:
                path = Path(base_dir) / entry.audio
                if not path.exists():
                    raise ValidationError(
                        f"utterance {entry.utterance_id}: audio file missing: {path}"
                    )

    def speakers(self) -> list[str]:
        out = []
        for entry in self.entries:
            if entry.speaker_id not in out:
                out.append(entry.speaker_id)
        return out

    def for_speaker(self, speaker_id: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.speaker_id == speaker_id]


def write_manifest(path, manifest: CorpusManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"format": MANIFEST_FORMAT, "version": manifest.version}, sort_keys=True)]
    lines += [entry.to_json() for entry in manifest.entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: bad JSON header: {exc}") from exc
    if header.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: not a {MANIFEST_FORMAT} file")
    if header.get("version") != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported version {header.get('version')}")
    entries = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            entries.append(ManifestEntry(**d))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad manifest entry: {exc}") from exc
    return CorpusManifest(entries=entries, version=header["version"])


# --- synthetic corpus ---

DEFAULT_EN_SENTENCES = (
    "hello world.",
    "i like tea.",
    "the cat is big.",
    "good morning friend.",
    "read the book.",
    "you love music.",
    "the dog is happy.",
    "one old apple.",
    "you speak english.",
    "thanks teacher.",
)

DEFAULT_ZH_SENTENCES = (
    "ni3 hao3 shi4 jie4.",
    "wo3 xi3 huan1 cha2.",
    "mao1 hen3 da4.",
    "zao3 shang4 hao3 peng2 you3.",
    "wo3 du2 shu1.",
    "ni3 ai4 yin1 yue4.",
    "gou3 hen3 kuai4 le4.",
    "yi1 ge4 pin2 guo3.",
    "ni3 shuo1 ying1 wen2.",
    "xie4 xie4 lao3 shi1.",
)


@dataclass(frozen=True)
class SyntheticVoice:
    speaker_id: str
    language: Language
    base_f0: float       # Hz; speakers must differ by > 0.2 log-Hz
    tilt: float          # harmonic rolloff exponent, amp ~ h**-tilt
    sentences: tuple[str, ...]


@dataclass(frozen=True)
class SyntheticCorpusConfig:
    voices: tuple[SyntheticVoice, ...] = (
        SyntheticVoice("spk_en", Language.EN, 120.0, 1.1, DEFAULT_EN_SENTENCES),
        SyntheticVoice("spk_zh", Language.ZH, 230.0, 0.7, DEFAULT_ZH_SENTENCES),
    )
    utterances_per_speaker: int = 10
    min_frames_per_phone: int = 6
    max_frames_per_phone: int = 10
    harmonics: int = 10
    amplitude: float = 0.5
    hop: int = 160
    sample_rate: int = 16000

    def validate(self) -> None:
        if not self.voices:
            raise ValidationError("need at least one voice")
        if self.utterances_per_speaker < 1:
            raise ValidationError("utterances_per_speaker must be >= 1")
        if not (2 <= self.min_frames_per_phone <= self.max_frames_per_phone):
            raise ValidationError("bad frames-per-phone range")
        for voice in self.voices:
            if not voice.sentences:
                raise ValidationError(f"voice {voice.speaker_id} has no sentences")
            if not (60.0 < voice.base_f0 < 400.0):
                raise ValidationError(f"voice {voice.speaker_id}: base_f0 outside 60-400 Hz")


def _phone_prototype(symbol_id: int, harmonics: int) -> np.ndarray:
    """Speaker-independent harmonic amplitude profile for one phoneme."""
    rng = np.random.default_rng([777, symbol_id])
    return rng.uniform(0.05, 1.0, harmonics)


def _utterance_audio(
    seq: PhonemeSequence,
    voice: SyntheticVoice,
    config: SyntheticCorpusConfig,
    rng: np.random.Generator,
    table: SymbolTable,
) -> tuple[AudioClip, np.ndarray]:
    """Waveform plus per-frame senone labels (= symbol ids)."""
    hop, sr = config.hop, config.sample_rate
    h_idx = np.arange(1, config.harmonics + 1, dtype=np.float64)
    tilt = h_idx ** (-voice.tilt)
    pieces = []
    labels = []
    phases = rng.uniform(0.0, 2.0 * np.pi, config.harmonics)
    for sym_id in seq.ids:
        frames = int(rng.integers(config.min_frames_per_phone, config.max_frames_per_phone + 1))
        n = frames * hop
        labels.extend([sym_id] * frames)
        if sym_id in (table.pause_id, table.eos_id):
            pieces.append(np.zeros(n))
            continue
        f0 = voice.base_f0 * float(rng.uniform(0.96, 1.04))
        amps = _phone_prototype(sym_id, config.harmonics) * tilt
        t = np.arange(n) / sr
        seg = np.zeros(n)
        for h, (amp, ph) in enumerate(zip(amps, phases), start=1):
            if h * f0 < 0.45 * sr:
                seg += amp * np.sin(2.0 * np.pi * h * f0 * t + ph)
        phases = (phases + 2.0 * np.pi * h_idx * f0 * n / sr) % (2.0 * np.pi)
        pieces.append(seg)
    x = np.concatenate(pieces)
    peak = np.max(np.abs(x))
    if peak > 0.0:
        x = x * (config.amplitude / peak)
    return AudioClip(x), np.asarray(labels, dtype=np.int64)


def make_synthetic_corpus(
    out_dir,
    seed: int = 0,
    config: SyntheticCorpusConfig | None = None,
    table: SymbolTable | None = None,
    lexicon: BilingualLexicon | None = None,
) -> Path:
    """Generate audio + manifest + senone labels; returns the manifest path.

    Deterministic: the same (seed, config) yields bit-identical files.
    """
    config = config if config is not None else SyntheticCorpusConfig()
    config.validate()
    table = table if table is not None else default_symbol_table()
    lexicon = lexicon if lexicon is not None else load_lexicon()
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)

    entries = []
    all_labels = []
    for vi, voice in enumerate(config.voices):
        for k in range(config.utterances_per_speaker):
            text = voice.sentences[k % len(voice.sentences)]
            if voice.language is Language.EN:
                seq = tokenize_english(text, lexicon, table)
            elif voice.language is Language.ZH:
                seq = tokenize_mandarin(text, lexicon, table)
            else:
                raise ValidationError("synthetic voices must be EN or ZH")
            rng = np.random.default_rng([seed, vi, k])
            clip, labels = _utterance_audio(seq, voice, config, rng, table)
            uid = f"{voice.speaker_id}-{k:04d}"
            write_wav(out_dir / "audio" / f"{uid}.wav", clip)
            all_labels.append(SenoneLabels(uid, labels))
            entries.append(
                ManifestEntry(
                    utterance_id=uid,
                    audio=f"audio/{uid}.wav",
                    transcript=text,
                    language=voice.language,
                    speaker_id=voice.speaker_id,
                    synthetic=False,
                )
            )
    write_senone_labels(out_dir / "labels.tsv", all_labels)
    manifest = CorpusManifest(entries=entries)
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(manifest_path, manifest)
    return manifest_path
