"""Command line entry point.

Stages mirror the pipeline: make-synthetic-corpus, prepare, train-ppg,
train-vc, convert, build-bilingual, train-tts, extract-durations, augment,
synthesize.  Global flags: --config (JSON), --seed, --workers, --out.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import CrossvoxError
from .tts import ARCHITECTURES

log = logging.getLogger("crossvox")


def _add_common(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument(
        "--workers", type=int, default=default, help="worker pool size for per-utterance stages"
    )
    parser.add_argument(
        "--out", type=Path, default=default, help="output path override (stage-dependent)"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="debug logging",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossvox",
        description="Bilingual voice conversion and code-switched speech synthesis.",
    )
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name, help_text, manifest=True):
        p = sub.add_parser(name, help=help_text)
        if manifest:
            p.add_argument("manifest", type=Path, help="corpus manifest (JSON lines)")
        p.add_argument("--work", type=Path, default=Path("work"), help="working directory")
        _add_common(p, suppress=True)
        return p

    stage("prepare", "extract acoustic features and per-speaker F0 stats")
    stage("train-ppg", "train the phonetic posteriorgram extractor")
    p = stage("train-vc", "train voice conversion into one speaker's voice")
    p.add_argument("--speaker", required=True, help="target speaker id")
    p = stage("convert", "convert a single utterance into another voice")
    p.add_argument("--utterance", required=True, help="source utterance id")
    p.add_argument("--speaker", required=True, help="target speaker id")
    stage("build-bilingual", "build per-speaker bilingual corpora via conversion")
    p = stage("train-tts", "train a TTS architecture on a manifest")
    p.add_argument("--arch", choices=ARCHITECTURES, default="tacotron2")
    p.add_argument("--resume", action="store_true", help="continue from the existing checkpoint")
    p.add_argument("--durations", type=Path, help="durations TSV (fastspeech)")
    stage("extract-durations", "teacher-forced attention durations to TSV")
    p = stage("augment", "synthesize code-switched sentences into the corpus")
    p.add_argument("sentences", type=Path, help="text file, one code-switched sentence per line")
    p = stage("synthesize", "synthesize text to WAV", manifest=False)
    p.add_argument("texts", nargs="*", help="sentences to synthesize")
    p.add_argument("--text-file", type=Path, help="file with one sentence per line")
    p.add_argument("--arch", choices=ARCHITECTURES, default="tacotron2")
    p.add_argument("--model", type=Path, help="explicit TTS checkpoint path")
    p = sub.add_parser("make-synthetic-corpus", help="generate the two-speaker synthetic corpus")
    p.add_argument("directory", type=Path, help="output corpus directory")
    _add_common(p, suppress=True)
    return parser


def _load_config(args) -> pipeline.PipelineConfig:
    if args.config is not None:
        config = pipeline.PipelineConfig.from_json(args.config)
    else:
        config = pipeline.PipelineConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args)
        if args.command == "make-synthetic-corpus":
            path = pipeline.cmd_make_synthetic_corpus(args.directory, config, seed=args.seed)
            print(f"wrote {path}")
        elif args.command == "prepare":
            result = pipeline.cmd_prepare(args.manifest, args.work, config, workers=args.workers)
            print(f"prepared {result['extracted']} utterance(s), skipped {result['skipped']}")
        elif args.command == "train-ppg":
            ckpt = pipeline.cmd_train_ppg(args.manifest, args.work, config, seed=args.seed)
            print(f"PPG checkpoint: {ckpt}")
        elif args.command == "train-vc":
            ckpt = pipeline.cmd_train_vc(
                args.manifest, args.work, config, args.speaker, seed=args.seed
            )
            print(f"VC checkpoint: {ckpt}")
        elif args.command == "convert":
            wav = pipeline.cmd_convert(args.manifest, args.work, config, args.utterance, args.speaker)
            print(f"converted audio: {wav}")
        elif args.command == "build-bilingual":
            outs = pipeline.cmd_build_bilingual(args.manifest, args.work, config, workers=args.workers)
            for speaker, path in outs.items():
                print(f"{speaker}: {path}")
        elif args.command == "train-tts":
            ckpt = pipeline.cmd_train_tts(
                args.manifest,
                args.work,
                config,
                args.arch,
                seed=args.seed,
                resume=args.resume,
                durations_path=args.durations,
            )
            print(f"TTS checkpoint ({args.arch}): {ckpt}")
        elif args.command == "extract-durations":
            path = pipeline.cmd_extract_durations(args.manifest, args.work, config, out_path=args.out)
            print(f"durations: {path}")
        elif args.command == "augment":
            result = pipeline.cmd_augment(args.manifest, args.sentences, args.work, config, seed=args.seed)
            print(
                f"augmented manifest: {result['manifest']} "
                f"(+{result['added']}, {len(result['skipped'])} skipped)"
            )
        elif args.command == "synthesize":
            texts = list(args.texts)
            if args.text_file is not None:
                texts += [
                    line.strip()
                    for line in args.text_file.read_text(encoding="utf-8").splitlines()
                    if line.strip()
                ]
            if not texts:
                log.error("nothing to synthesize: pass sentences or --text-file")
                return 2
            paths = pipeline.cmd_synthesize(
                texts, args.work, config, arch=args.arch, model_path=args.model, out_dir=args.out
            )
            for path in paths:
                print(path)
    except CrossvoxError as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
