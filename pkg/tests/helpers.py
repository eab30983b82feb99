"""Shared signal builders and small utilities for the test suite."""

import numpy as np
import torch

from crossvox.audio import AudioClip
from crossvox.tracks import FeatureKind, FeatureTrack


def periodic_clip(f0: float, seconds: float = 1.0, harmonics: int = 5, sr: int = 16000) -> AudioClip:
    """Multi-harmonic periodic signal; rich enough for stable pitch tracking."""
    t = np.arange(int(round(seconds * sr))) / sr
    x = np.zeros_like(t)
    for h in range(1, harmonics + 1):
        if h * f0 >= 0.45 * sr:
            break
        x += np.sin(2.0 * np.pi * h * f0 * t) / h
    return AudioClip(0.5 * x / np.abs(x).max())


def sawtooth_clip(f0: float, seconds: float = 1.0, sr: int = 16000) -> AudioClip:
    t = np.arange(int(round(seconds * sr))) / sr
    phase = (t * f0) % 1.0
    return AudioClip(0.5 * (2.0 * phase - 1.0))


def silence_clip(seconds: float = 1.0, sr: int = 16000) -> AudioClip:
    return AudioClip(np.zeros(int(round(seconds * sr))))


def random_logf0_track(rng: np.random.Generator, frames: int, voiced_fraction: float = 0.7) -> FeatureTrack:
    values = rng.uniform(np.log(80.0), np.log(350.0), size=frames)
    unvoiced = rng.random(frames) >= voiced_fraction
    values[unvoiced] = np.nan
    return FeatureTrack(values.reshape(-1, 1), 0.01, FeatureKind.LOG_F0)


def random_mfcc_track(rng: np.random.Generator, frames: int, dim: int = 13) -> FeatureTrack:
    return FeatureTrack(rng.standard_normal((frames, dim)), 0.01, FeatureKind.MFCC)


def finite_difference_max_rel_error(
    loss_fn, parameters, eps: float = 1e-5, atol: float = 1e-8
) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn must be deterministic and differentiable; parameters are the
    tensors to check (float64).  Relative error is measured per parameter
    tensor as ||g_analytic - g_fd|| / max(||g_analytic||, ||g_fd||).  Tensors
    where both norms fall under ``atol`` count as exact: a relative error is
    undefined at zero, and central differences of a structurally-zero
    gradient produce pure cancellation noise (e.g. attention key biases,
    which softmax renders inert).
    """
    params = list(parameters)
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        fd = torch.zeros_like(p)
        flat, fd_flat = p.data.view(-1), fd.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            up = float(loss_fn().detach())
            flat[i] = orig - eps
            down = float(loss_fn().detach())
            flat[i] = orig
            fd_flat[i] = (up - down) / (2.0 * eps)
        denom = max(float(analytic.norm()), float(fd.norm()), 1e-12)
        if denom < atol:
            continue
        worst = max(worst, float((analytic - fd).norm()) / denom)
    return worst
