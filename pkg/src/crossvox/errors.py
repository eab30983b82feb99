"""Exception types shared across the toolkit."""


class CrossvoxError(Exception):
    """Base class for all toolkit errors."""


class FormatError(CrossvoxError, ValueError):
    """Input file or payload violates a required format (names the offending property)."""


class EmptyInputError(CrossvoxError, ValueError):
    """Input too short or empty to process."""


class InsufficientDataError(CrossvoxError, ValueError):
    """Not enough usable data to compute the requested statistic."""


class DataError(CrossvoxError, ValueError):
    """Dataset-level inconsistency (length mismatch, mixed speakers, bad ids)."""


class SymbolLookupError(CrossvoxError, KeyError):
    """Unknown word, syllable, or phoneme symbol."""

    def __str__(self) -> str:  # KeyError quotes its arg; keep plain message
        return ", ".join(str(a) for a in self.args)


class ValidationError(CrossvoxError, ValueError):
    """Configuration or inventory failed validation."""


class VocoderError(CrossvoxError, RuntimeError):
    """External vocoder invocation failed."""


class PipelineError(CrossvoxError, RuntimeError):
    """A pipeline stage failed (missing inputs, held lock, failed utterances)."""
