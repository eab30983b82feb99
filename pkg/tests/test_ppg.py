import math

import numpy as np
import pytest
import torch
from helpers import random_mfcc_track

from crossvox.errors import DataError, ValidationError
from crossvox.ppg import (
    PPGConfig,
    PPGModel,
    SenoneLabels,
    downsample_ppg,
    extract_ppg,
    read_senone_labels,
    train_ppg_extractor,
    write_senone_labels,
)
from crossvox.tracks import FeatureKind, FeatureTrack


def separable_dataset(num_classes=2, utterances=4, frames=30, dim=13, seed=0):
    """Distinct per-class spectral prototypes plus small noise."""
    rng = np.random.default_rng(seed)
    prototypes = rng.standard_normal((num_classes, dim)) * 3.0
    dataset = []
    for u in range(utterances):
        labels = rng.integers(0, num_classes, size=frames)
        data = prototypes[labels] + 0.05 * rng.standard_normal((frames, dim))
        dataset.append(
            (
                FeatureTrack(data, 0.01, FeatureKind.MFCC),
                SenoneLabels(f"utt-{u}", labels),
            )
        )
    return dataset


def test_overfit_two_class_separable():
    dataset = separable_dataset()
    config = PPGConfig(num_classes=2, input_dim=13, num_layers=1, hidden_size=16)
    model, losses = train_ppg_extractor(dataset, config, epochs=30, lr=1e-2, seed=0)
    correct = total = 0
    for track, labels in dataset:
        ppg = extract_ppg(model, track)
        correct += int((ppg.data.argmax(axis=1) == labels.labels).sum())
        total += len(labels.labels)
    assert correct / total >= 0.99
    assert losses[-1] < losses[0]


def test_posterior_dim_matches_classes():
    config = PPGConfig(num_classes=37, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    ppg = extract_ppg(model, random_mfcc_track(np.random.default_rng(0), 12))
    assert ppg.data.shape == (12, 37)
    assert ppg.feature_kind is FeatureKind.PPG


def test_untrained_loss_near_log_s():
    torch.manual_seed(0)
    num_classes = 11
    config = PPGConfig(num_classes=num_classes, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    rng = np.random.default_rng(1)
    track = random_mfcc_track(rng, 400)
    labels = torch.from_numpy(rng.integers(0, num_classes, size=400))
    logits = model(torch.from_numpy(track.data).float().unsqueeze(0)).squeeze(0)
    loss = torch.nn.functional.cross_entropy(logits, labels)
    assert abs(float(loss) - math.log(num_classes)) < 0.2


def test_rows_on_simplex():
    config = PPGConfig(num_classes=5, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    rng = np.random.default_rng(2)
    for _ in range(5):
        ppg = extract_ppg(model, random_mfcc_track(rng, int(rng.integers(1, 40))))
        assert (ppg.data >= 0).all()
        assert np.abs(ppg.data.sum(axis=1) - 1.0).max() < 1e-5


def test_extract_deterministic():
    config = PPGConfig(num_classes=4, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    track = random_mfcc_track(np.random.default_rng(3), 20)
    assert np.array_equal(extract_ppg(model, track).data, extract_ppg(model, track).data)


def test_dim_mismatch_type_error():
    config = PPGConfig(num_classes=4, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    with pytest.raises(TypeError):
        extract_ppg(model, FeatureTrack(np.zeros((5, 7)), 0.01, FeatureKind.MFCC))


def test_length_mismatch_data_error():
    track = FeatureTrack(np.zeros((10, 13)), 0.01, FeatureKind.MFCC)
    labels = SenoneLabels("utt", np.zeros(9, dtype=np.int64))
    config = PPGConfig(num_classes=2, input_dim=13, num_layers=1, hidden_size=8)
    with pytest.raises(DataError, match="utt"):
        train_ppg_extractor([(track, labels)], config, epochs=1)


def test_downsample_identity_and_lengths():
    rng = np.random.default_rng(4)
    raw = rng.random((10, 6))
    ppg = FeatureTrack(raw / raw.sum(axis=1, keepdims=True), 0.01, FeatureKind.PPG)
    same = downsample_ppg(ppg, 1)
    assert np.array_equal(same.data, ppg.data)
    half = downsample_ppg(ppg, 2)
    assert half.data.shape[0] == 5
    assert half.frame_shift == pytest.approx(0.02)
    # rows stay on the simplex
    assert np.abs(half.data.sum(axis=1) - 1.0).max() < 1e-12


def test_downsample_uniform_rows_unchanged():
    ppg = FeatureTrack(np.full((9, 4), 0.25), 0.01, FeatureKind.PPG)
    out = downsample_ppg(ppg, 2)
    assert np.allclose(out.data, 0.25)
    assert out.data.shape[0] == 5  # ceil(9/2), final partial group averaged


def test_downsample_composition_length():
    rng = np.random.default_rng(6)
    raw = rng.random((12, 3))
    ppg = FeatureTrack(raw / raw.sum(axis=1, keepdims=True), 0.01, FeatureKind.PPG)
    assert downsample_ppg(ppg, 6).data.shape[0] == downsample_ppg(downsample_ppg(ppg, 2), 3).data.shape[0]


def test_downsample_bad_factor():
    ppg = FeatureTrack(np.full((4, 2), 0.5), 0.01, FeatureKind.PPG)
    with pytest.raises(ValidationError):
        downsample_ppg(ppg, 0)


def test_senone_labels_round_trip(tmp_path):
    items = [
        SenoneLabels("a", np.array([0, 1, 2])),
        SenoneLabels("b", np.array([3, 3])),
    ]
    path = tmp_path / "labels.tsv"
    write_senone_labels(path, items)
    back = read_senone_labels(path)
    assert [l.utterance_id for l in back] == ["a", "b"]
    assert all(np.array_equal(x.labels, y.labels) for x, y in zip(items, back))


def test_model_checkpoint_round_trip(tmp_path):
    config = PPGConfig(num_classes=3, input_dim=13, num_layers=1, hidden_size=8)
    model = PPGModel(config)
    path = tmp_path / "ppg.pt"
    model.save(path)
    back = PPGModel.load(path)
    assert back.config == config
    track = random_mfcc_track(np.random.default_rng(8), 15)
    assert np.array_equal(extract_ppg(model, track).data, extract_ppg(back, track).data)
