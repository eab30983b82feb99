"""Cross-speaker voice conversion, step by step.

Builds a tiny seeded corpus with two synthetic voices (a low-pitched English
speaker and a high-pitched Mandarin speaker), trains the phonetic
posteriorgram extractor and one conversion model, then converts a Mandarin
utterance into the English speaker's voice.  The content comes from the
source; the voice comes from the target.

Run from the repository root: python3 demos/voice_conversion_walkthrough.py
Outputs land in demo_out/vc/.
"""

from pathlib import Path

import numpy as np

from crossvox.audio import read_wav, write_wav
from crossvox.corpus import SyntheticCorpusConfig, make_synthetic_corpus, read_manifest
from crossvox.features import FeatureConfig, extract_logf0, extract_mfcc, fit_f0_stats
from crossvox.frontend import default_symbol_table
from crossvox.ppg import PPGConfig, read_senone_labels, train_ppg_extractor
from crossvox.vc import VCConfig, VCModel, convert, train_vc, vc_example_from_clip
from crossvox.vocoder import render

out_dir = Path("demo_out/vc")
out_dir.mkdir(parents=True, exist_ok=True)
feature_config = FeatureConfig()
table = default_symbol_table()

# --- 1. a corpus small enough to train on while you read this file ----------
corpus_dir = out_dir / "corpus"
manifest = read_manifest(
    make_synthetic_corpus(corpus_dir, seed=3, config=SyntheticCorpusConfig(utterances_per_speaker=5))
)
labels = {l.utterance_id: l for l in read_senone_labels(corpus_dir / "labels.tsv")}
clips = {e.utterance_id: read_wav(corpus_dir / e.audio) for e in manifest.entries}
print(f"corpus: {len(manifest.entries)} utterances from {manifest.speakers()}")

# the two voices sit in clearly different pitch ranges; conversion has to
# bridge that gap, which is exactly what the F0 z-scoring is for
for speaker in manifest.speakers():
    tracks = [extract_logf0(clips[e.utterance_id], feature_config) for e in manifest.for_speaker(speaker)]
    stats = fit_f0_stats(tracks, speaker)
    print(f"  {speaker}: mean F0 {np.exp(stats.mean_logf0):.0f} Hz "
          f"over {stats.num_voiced_frames} voiced frames")

# --- 2. the PPG extractor turns audio into speaker-independent content ------
ppg_dataset = [
    (extract_mfcc(clips[e.utterance_id], feature_config), labels[e.utterance_id])
    for e in manifest.entries
]
ppg_model, losses = train_ppg_extractor(
    ppg_dataset, PPGConfig(num_classes=len(table.symbols)), epochs=150, lr=3e-3, seed=0
)
print(f"\nPPG extractor trained, final loss {losses[-1]:.4f}")

# --- 3. one conversion model per target voice --------------------------------
# trained only on the target's own corpus: PPG+F0 in, the target's own
# spectral frames out; no parallel data between speakers is ever needed
target = "spk_en"
target_entries = manifest.for_speaker(target)
target_stats = fit_f0_stats(
    [extract_logf0(clips[e.utterance_id], feature_config) for e in target_entries], target
)
vc_config = VCConfig(ppg_dim=len(table.symbols))
examples = [
    vc_example_from_clip(e.utterance_id, target, clips[e.utterance_id],
                         ppg_model, target_stats, vc_config, feature_config)
    for e in target_entries
]
vc_model, history = train_vc(
    VCModel(vc_config), examples, epochs=500, lr=2e-3, seed=0,
    mse_threshold=0.02, diagonality_threshold=0.9,
)
print(f"VC model for {target} trained: {len(history)} steps, "
      f"final MSE {history[-1]['mse_after']:.4f}, "
      f"alignment diagonality {history[-1]['diagonality']:.2f}")

# --- 4. convert a Mandarin utterance into the English speaker's voice -------
source = next(e for e in manifest.entries if e.speaker_id == "spk_zh")
source_stats = fit_f0_stats(
    [extract_logf0(clips[e.utterance_id], feature_config) for e in manifest.for_speaker("spk_zh")],
    "spk_zh",
)
# source F0 is normalized with the SOURCE speaker's stats; the decoder then
# re-expresses it in the target's learned range
converted = convert(clips[source.utterance_id], ppg_model, vc_model, source_stats, feature_config)
print(f"\nconverted {source.utterance_id} ({source.transcript!r}): "
      f"{converted.num_frames} frames")

write_wav(out_dir / "source.wav", clips[source.utterance_id])
write_wav(out_dir / "converted.wav", render(converted, config=feature_config))

# the rendered clip should sit near the target's pitch range, not the source's
out_f0 = extract_logf0(read_wav(out_dir / "converted.wav"), feature_config)
voiced = out_f0.data[np.isfinite(out_f0.data[:, 0]), 0]
if voiced.size:
    print(f"converted speech mean F0: {np.exp(voiced.mean()):.0f} Hz "
          f"(target speaker sits at {np.exp(target_stats.mean_logf0):.0f} Hz)")
print(f"\nwrote {out_dir}/source.wav and {out_dir}/converted.wav")
