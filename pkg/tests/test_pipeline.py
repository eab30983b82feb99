import json

import pytest

from crossvox.cli import main
from crossvox.corpus import SyntheticCorpusConfig, make_synthetic_corpus, read_manifest
from crossvox.errors import PipelineError, ValidationError
from crossvox.features import FeatureConfig
from crossvox.pipeline import (
    PipelineConfig,
    Workspace,
    cmd_build_bilingual,
    cmd_prepare,
    cmd_synthesize,
    cmd_train_ppg,
    stage_lock,
)


@pytest.fixture()
def corpus(tmp_path):
    config = SyntheticCorpusConfig(utterances_per_speaker=2)
    return make_synthetic_corpus(tmp_path / "corpus", seed=11, config=config)


def test_prepare_extracts_all_tracks(corpus, tmp_path):
    work_dir = tmp_path / "work"
    result = cmd_prepare(corpus, work_dir, PipelineConfig())
    assert result["extracted"] == 4
    assert result["skipped"] == 0
    work = Workspace(work_dir)
    assert len(list(work.features.glob("*.f32"))) == 12  # 3 tracks x 4 utterances
    assert sorted(p.name for p in work.stats.glob("*.json")) == [
        "spk_en.f0.json",
        "spk_zh.f0.json",
    ]
    assert (work.records / "prepare.json").exists()


def test_prepare_rerun_is_a_noop(corpus, tmp_path):
    work_dir = tmp_path / "work"
    cmd_prepare(corpus, work_dir, PipelineConfig())
    mtimes = {p: p.stat().st_mtime_ns for p in Workspace(work_dir).features.glob("*.f32")}
    again = cmd_prepare(corpus, work_dir, PipelineConfig())
    assert again["extracted"] == 0
    assert again["skipped"] == 4
    assert {p: p.stat().st_mtime_ns for p in Workspace(work_dir).features.glob("*.f32")} == mtimes


def test_prepare_feature_change_recomputes(corpus, tmp_path):
    work_dir = tmp_path / "work"
    cmd_prepare(corpus, work_dir, PipelineConfig())
    changed = PipelineConfig(feature=FeatureConfig(mel_filters=30))
    again = cmd_prepare(corpus, work_dir, changed)
    assert again["extracted"] == 4


def test_prepare_missing_audio_names_utterance(corpus, tmp_path):
    manifest = read_manifest(corpus)
    victim = manifest.entries[0]
    (corpus.parent / victim.audio).unlink()
    with pytest.raises(ValidationError, match=victim.utterance_id):
        cmd_prepare(corpus, tmp_path / "work", PipelineConfig())


def test_prepare_missing_manifest(tmp_path):
    with pytest.raises(PipelineError, match="manifest"):
        cmd_prepare(tmp_path / "nope.jsonl", tmp_path / "work", PipelineConfig())


def test_train_ppg_requires_labels(corpus, tmp_path):
    (corpus.parent / "labels.tsv").unlink()
    cmd_prepare(corpus, tmp_path / "work", PipelineConfig())
    with pytest.raises(PipelineError, match="labels"):
        cmd_train_ppg(corpus, tmp_path / "work", PipelineConfig())


def test_train_ppg_requires_prepare(corpus, tmp_path):
    with pytest.raises(PipelineError, match="prepare"):
        cmd_train_ppg(corpus, tmp_path / "work", PipelineConfig())


def test_build_bilingual_requires_ppg_checkpoint(corpus, tmp_path):
    cmd_prepare(corpus, tmp_path / "work", PipelineConfig())
    with pytest.raises(PipelineError, match="train-ppg"):
        cmd_build_bilingual(corpus, tmp_path / "work", PipelineConfig())


def test_synthesize_requires_checkpoint(tmp_path):
    with pytest.raises(PipelineError, match="tts_tacotron2"):
        cmd_synthesize(["hello"], tmp_path / "work", PipelineConfig())


def test_stage_lock_exclusive(tmp_path):
    work = Workspace(tmp_path / "work")
    with stage_lock(work, "train-ppg"):
        assert (work.locks / "train-ppg.lock").exists()
        with pytest.raises(PipelineError, match="train-ppg"):
            with stage_lock(work, "train-ppg"):
                pass
    assert not (work.locks / "train-ppg.lock").exists()
    with stage_lock(work, "train-ppg"):
        pass  # reacquire after release


def test_stale_lock_reported_with_path(tmp_path):
    work = Workspace(tmp_path / "work")
    work.locks.mkdir(parents=True)
    (work.locks / "train-vc-spk.lock").write_text("12345\n")
    with pytest.raises(PipelineError, match="remove the file"):
        with stage_lock(work, "train-vc-spk"):
            pass


# --- config ---------------------------------------------------------------

def test_config_unknown_override_rejected():
    with pytest.raises(ValidationError, match="bogus"):
        PipelineConfig(ppg={"bogus": 1}).validate()


def test_config_reserved_key_rejected():
    with pytest.raises(ValidationError, match="num_classes"):
        PipelineConfig(ppg={"num_classes": 10}).validate()
    with pytest.raises(ValidationError, match="vocab_size"):
        PipelineConfig(tts={"transformer": {"vocab_size": 10}}).validate()


def test_config_unknown_arch_rejected():
    with pytest.raises(ValidationError, match="wavenet"):
        PipelineConfig(tts={"wavenet": {}}).validate()


def test_config_round_trip():
    config = PipelineConfig(
        seed=3,
        workers=2,
        ppg={"epochs": 5, "hidden_size": 32},
        tts={"transformer": {"epochs": 7, "d_model": 32}},
    )
    config.validate()
    back = PipelineConfig.from_dict(config.to_dict())
    assert back.to_dict() == config.to_dict()
    assert back.stage_params("transformer")["epochs"] == 7
    assert back.stage_params("tacotron2")["epochs"] == 300


def test_config_from_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 9, "vc": {"epochs": 3}}))
    config = PipelineConfig.from_json(path)
    assert config.seed == 9
    assert config.stage_params("vc")["epochs"] == 3


def test_config_bad_json_key(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"sede": 9}))
    with pytest.raises(ValidationError, match="sede"):
        PipelineConfig.from_json(path)


# --- CLI ------------------------------------------------------------------

def test_cli_make_corpus_and_prepare(tmp_path, capsys):
    corpus_dir = tmp_path / "corpus"
    assert main(["make-synthetic-corpus", str(corpus_dir), "--seed", "4"]) == 0
    manifest = corpus_dir / "manifest.jsonl"
    assert manifest.exists()
    work = tmp_path / "work"
    assert main(["prepare", str(manifest), "--work", str(work)]) == 0
    out = capsys.readouterr().out
    assert "prepare" in out
    assert len(list((work / "features").glob("*.f32"))) == 60


def test_cli_failure_exits_nonzero(tmp_path, caplog):
    rc = main(["prepare", str(tmp_path / "missing.jsonl"), "--work", str(tmp_path / "w")])
    assert rc == 1


def test_cli_synthesize_without_text(tmp_path):
    assert main(["synthesize", "--work", str(tmp_path / "w")]) == 2


def test_cli_unknown_command():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
