"""crossvox: bilingual and code-switched speech synthesis at desk scale.

Pipeline: monolingual corpora -> phonetic-posterior voice conversion ->
bilingual corpora -> code-switch augmentation -> neural TTS (three
architectures), with a deterministic DSP vocoder fallback for audible output.
"""

__version__ = "0.1.0"
