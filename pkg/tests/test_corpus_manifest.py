import numpy as np
import pytest

from crossvox.audio import read_wav
from crossvox.corpus import (
    CorpusManifest,
    Language,
    ManifestEntry,
    SyntheticCorpusConfig,
    make_synthetic_corpus,
    read_manifest,
    write_manifest,
)
from crossvox.errors import FormatError, ValidationError
from crossvox.features import extract_logf0, extract_mfcc, fit_f0_stats
from crossvox.ppg import read_senone_labels


def sample_manifest():
    return CorpusManifest(
        entries=[
            ManifestEntry("u1", "audio/u1.wav", "hello world.", Language.EN, "spk_a"),
            ManifestEntry("u2", "audio/u2.wav", "ni3 hao3.", Language.ZH, "spk_b"),
            ManifestEntry(
                "u3", "audio/u3.wav", "hello ni3", Language.CS, "spk_a", synthetic=True
            ),
        ]
    )


def test_manifest_round_trip_byte_identical(tmp_path):
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    write_manifest(p1, sample_manifest())
    write_manifest(p2, read_manifest(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_manifest_preserves_fields(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest(path, sample_manifest())
    back = read_manifest(path)
    assert [e.utterance_id for e in back.entries] == ["u1", "u2", "u3"]
    assert back.entries[1].language is Language.ZH
    assert back.entries[2].synthetic is True
    assert back.speakers() == ["spk_a", "spk_b"]
    assert [e.utterance_id for e in back.for_speaker("spk_a")] == ["u1", "u3"]


def test_empty_manifest_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("")
    with pytest.raises(FormatError, match="empty"):
        read_manifest(path)


def test_bad_header_names_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(FormatError, match=r":1"):
        read_manifest(path)


def test_wrong_format_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"format": "something-else", "version": 1}\n')
    with pytest.raises(FormatError, match="crossvox-manifest"):
        read_manifest(path)


def test_wrong_version_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"format": "crossvox-manifest", "version": 99}\n')
    with pytest.raises(FormatError, match="99"):
        read_manifest(path)


def test_bad_entry_names_path_and_line(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest(path, sample_manifest())
    lines = path.read_text().splitlines()
    lines[2] = '{"utterance_id": "u2"}'  # drop required fields
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match=r"m\.jsonl:3"):
        read_manifest(path)


def test_validate_duplicate_ids():
    manifest = sample_manifest()
    manifest.entries.append(manifest.entries[0])
    with pytest.raises(ValidationError, match="u1"):
        manifest.validate()


def test_validate_missing_audio(tmp_path):
    with pytest.raises(ValidationError, match="u1"):
        sample_manifest().validate(base_dir=tmp_path)


def test_unknown_language_rejected():
    with pytest.raises(ValueError):
        ManifestEntry("u", "a.wav", "t", "FR", "spk")


# --- synthetic corpus ------------------------------------------------------

def test_synthetic_corpus_bit_identical(tmp_path):
    config = SyntheticCorpusConfig(utterances_per_speaker=2)
    p1 = make_synthetic_corpus(tmp_path / "one", seed=7, config=config)
    p2 = make_synthetic_corpus(tmp_path / "two", seed=7, config=config)
    assert p1.read_bytes() == p2.read_bytes()
    assert (p1.parent / "labels.tsv").read_bytes() == (p2.parent / "labels.tsv").read_bytes()
    for entry in read_manifest(p1).entries:
        a = (p1.parent / entry.audio).read_bytes()
        b = (p2.parent / entry.audio).read_bytes()
        assert a == b, entry.utterance_id


def test_synthetic_corpus_seed_changes_audio(tmp_path):
    config = SyntheticCorpusConfig(utterances_per_speaker=1)
    p1 = make_synthetic_corpus(tmp_path / "one", seed=0, config=config)
    p2 = make_synthetic_corpus(tmp_path / "two", seed=1, config=config)
    entry = read_manifest(p1).entries[0]
    assert (p1.parent / entry.audio).read_bytes() != (p2.parent / entry.audio).read_bytes()


def test_synthetic_corpus_structure(tmp_path, feature_config):
    config = SyntheticCorpusConfig(utterances_per_speaker=3)
    path = make_synthetic_corpus(tmp_path / "corpus", seed=3, config=config)
    manifest = read_manifest(path)
    manifest.validate(base_dir=path.parent)
    assert len(manifest.entries) == 6
    assert manifest.speakers() == ["spk_en", "spk_zh"]
    for entry in manifest.entries:
        assert not entry.synthetic
        assert entry.language in (Language.EN, Language.ZH)


def test_senone_labels_match_mfcc_frames(tmp_path, feature_config):
    config = SyntheticCorpusConfig(utterances_per_speaker=2)
    path = make_synthetic_corpus(tmp_path / "corpus", seed=5, config=config)
    manifest = read_manifest(path)
    labels = {item.utterance_id: item.labels for item in read_senone_labels(path.parent / "labels.tsv")}
    assert set(labels) == {e.utterance_id for e in manifest.entries}
    for entry in manifest.entries:
        clip = read_wav(path.parent / entry.audio)
        mfcc = extract_mfcc(clip, feature_config)
        assert len(labels[entry.utterance_id]) == mfcc.num_frames, entry.utterance_id


def test_speaker_f0_separation(tmp_path, feature_config):
    # the two stock voices sit > 0.2 log-Hz apart so normalization transfer
    # is a real test, not a no-op
    config = SyntheticCorpusConfig(utterances_per_speaker=3)
    path = make_synthetic_corpus(tmp_path / "corpus", seed=9, config=config)
    manifest = read_manifest(path)
    means = {}
    for speaker in manifest.speakers():
        tracks = [
            extract_logf0(read_wav(path.parent / e.audio), feature_config)
            for e in manifest.for_speaker(speaker)
        ]
        means[speaker] = fit_f0_stats(tracks, speaker_id=speaker).mean_logf0
    assert abs(means["spk_en"] - means["spk_zh"]) > 0.2


def test_bad_synthetic_config_rejected():
    with pytest.raises(ValidationError):
        SyntheticCorpusConfig(utterances_per_speaker=0).validate()
    with pytest.raises(ValidationError):
        SyntheticCorpusConfig(min_frames_per_phone=1).validate()
