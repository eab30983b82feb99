"""Self-describing model checkpoints.

Every checkpoint carries its kind, a config echo, and optional extras next to
the state dict, so loading can refuse mismatched architectures instead of
failing deep inside ``load_state_dict``.
"""

from pathlib import Path

import torch

from .errors import FormatError

FORMAT_NAME = "crossvox-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, kind: str, config: dict, state_dict, extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": dict(config),
        "state_dict": state_dict,
        "extra": dict(extra) if extra else {},
    }
    torch.save(payload, path)


def load_checkpoint(path, kind: str) -> dict:
    """Load and validate a checkpoint of the given kind."""
    path = Path(path)
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise FormatError(f"{path}: not a {FORMAT_NAME} file")
    if payload.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {payload.get('format_version')}")
    if payload.get("kind") != kind:
        raise FormatError(f"{path}: checkpoint kind {payload.get('kind')!r}, expected {kind!r}")
    return payload
