"""Monotonic GMM attention, shared by the VC synthesizer and the Tacotron decoder.

Mixture means only ever move forward (softplus increments), which is what
keeps alignments monotonic without windowing tricks.  The kernel is an
unnormalized Gaussian mixture; weights need not sum to one and the context
must not assume they do.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import DataError

SCALE_EPS = 1e-5

# softplus(x) = 1 at this bias, so fresh models advance roughly one encoder
# step per decoder step (diagonal prior).
DELTA_BIAS_INIT = math.log(math.e - 1.0)


@dataclass
class AttentionState:
    """Per-utterance attention state; means are [batch, K] encoder positions."""

    means: torch.Tensor
    prev_context: torch.Tensor
    step_index: int = 0


def gmm_kernel_weights(
    mix_weights: torch.Tensor,
    means: torch.Tensor,
    scales: torch.Tensor,
    num_positions: int,
) -> torch.Tensor:
    """Unnormalized mixture kernel over 0-indexed positions.

    weights[j] = sum_k w_k * exp(-(j - mu_k)^2 / (2 sigma_k^2)), inputs all
    [batch, K], result [batch, num_positions].
    """
    pos = torch.arange(num_positions, device=means.device, dtype=means.dtype).view(1, 1, -1)
    kernel = torch.exp(-((pos - means.unsqueeze(2)) ** 2) / (2.0 * scales.unsqueeze(2) ** 2))
    return (mix_weights.unsqueeze(2) * kernel).sum(dim=1)


class GMMAttention(nn.Module):
    """Gaussian-mixture attention over encoder steps ("V2" parameterization)."""

    def __init__(self, query_dim: int, num_components: int = 5):
        super().__init__()
        if num_components < 1:
            raise ValueError(f"num_components must be >= 1, got {num_components}")
        self.query_dim = query_dim
        self.num_components = num_components
        self.proj = nn.Linear(query_dim, 3 * num_components)
        nn.init.zeros_(self.proj.bias)
        with torch.no_grad():
            self.proj.bias[num_components : 2 * num_components].fill_(DELTA_BIAS_INIT)

    def initial_state(self, encoder_outputs: torch.Tensor) -> AttentionState:
        batch, _, dim = encoder_outputs.shape
        opts = {"device": encoder_outputs.device, "dtype": encoder_outputs.dtype}
        return AttentionState(
            means=torch.zeros(batch, self.num_components, **opts),
            prev_context=torch.zeros(batch, dim, **opts),
            step_index=0,
        )

    def step(
        self,
        state: AttentionState,
        decoder_state: torch.Tensor,
        encoder_outputs: torch.Tensor,
        memory_lengths: torch.Tensor | None = None,
    ):
        """One decoder step: returns (weights [B, T], context [B, D], new state)."""
        if not torch.isfinite(decoder_state).all():
            raise DataError("non-finite decoder state passed to attention")
        K = self.num_components
        raw = self.proj(decoder_state)
        raw_weights, raw_deltas, raw_scales = raw[:, :K], raw[:, K : 2 * K], raw[:, 2 * K :]
        w = torch.softmax(raw_weights, dim=1)
        means = state.means + nn.functional.softplus(raw_deltas)
        scales = nn.functional.softplus(raw_scales) + SCALE_EPS
        T = encoder_outputs.shape[1]
        weights = gmm_kernel_weights(w, means, scales, T)
        if memory_lengths is not None:
            pos = torch.arange(T, device=raw.device).view(1, T)
            mask = pos < memory_lengths.view(-1, 1)
            weights = weights * mask.to(weights.dtype)
        context = torch.bmm(weights.unsqueeze(1), encoder_outputs).squeeze(1)
        new_state = AttentionState(
            means=means, prev_context=context, step_index=state.step_index + 1
        )
        return weights, context, new_state


def attention_alignment(weight_rows) -> float:
    """Diagonality score: fraction of rows whose argmax does not move backward.

    The first row always counts, so a single-row matrix scores 1.0 and a
    strictly reversed alignment scores 1/decoder_steps.
    """
    rows = np.asarray(
        weight_rows.detach().cpu().numpy() if isinstance(weight_rows, torch.Tensor) else weight_rows,
        dtype=np.float64,
    )
    if rows.ndim != 2 or rows.size == 0:
        raise DataError(f"alignment matrix must be non-empty 2-D, got shape {rows.shape}")
    if (rows < 0.0).any():
        raise DataError("alignment rows must be non-negative")
    peaks = rows.argmax(axis=1)
    ok = 1 + int(np.sum(peaks[1:] >= peaks[:-1]))
    return ok / len(peaks)
