"""Text-to-speech architectures sharing one training and synthesis surface."""

from .api import (
    ARCHITECTURES,
    SynthesisResult,
    augment_with_code_switch,
    build_tts_model,
    default_tts_config,
    load_tts_model,
    save_tts_model,
    synthesize,
    train_tts,
)
from .durations import (
    DurationSequence,
    durations_from_attention,
    extract_durations,
    read_durations,
    write_durations,
)
from .fastspeech import (
    FastSpeechTTS,
    FastSpeechTTSConfig,
    length_regulate,
    round_preserving_total,
)
from .tacotron import TacotronTTS, TacotronTTSConfig
from .transformer import TransformerTTS, TransformerTTSConfig

__all__ = [
    "ARCHITECTURES",
    "SynthesisResult",
    "augment_with_code_switch",
    "build_tts_model",
    "default_tts_config",
    "load_tts_model",
    "save_tts_model",
    "synthesize",
    "train_tts",
    "DurationSequence",
    "durations_from_attention",
    "extract_durations",
    "read_durations",
    "write_durations",
    "FastSpeechTTS",
    "FastSpeechTTSConfig",
    "length_regulate",
    "round_preserving_total",
    "TacotronTTS",
    "TacotronTTSConfig",
    "TransformerTTS",
    "TransformerTTSConfig",
]
