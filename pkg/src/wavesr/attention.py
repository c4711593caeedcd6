"""Self-attention and upsample-attention blocks."""

from __future__ import annotations

from fractions import Fraction

import torch
from torch import Tensor, nn

from . import nn_core
from .errors import AttentionTooLarge, DivisibilityError

MAX_POSITIONS = 4096
REDUCTIONS = (1, 2, 4, 8)


class SelfAttention(nn.Module):
    """Non-local block over all spatial positions, gated by a learned scale.

    ``alpha`` starts at zero, so a fresh block is the identity map.
    """

    def __init__(self, channels: int, k: int = 8, seed: int = 0):
        super().__init__()
        if k not in REDUCTIONS:
            raise ValueError(f"reduction k must be one of {REDUCTIONS}, got {k}")
        if channels % k:
            raise DivisibilityError(f"{channels} channels not divisible by k={k}")
        self.channels = channels
        self.k = k
        self.inner = channels // k
        self.w_f = nn.Parameter(torch.empty(self.inner, channels, 1, 1))
        self.w_g = nn.Parameter(torch.empty(self.inner, channels, 1, 1))
        self.w_h = nn.Parameter(torch.empty(self.inner, channels, 1, 1))
        self.w_v = nn.Parameter(torch.empty(channels, self.inner, 1, 1))
        self.alpha = nn.Parameter(torch.zeros(()))
        nn_core.init_weights(self, seed)

    def attention_map(self, x: Tensor) -> Tensor:
        """beta[n, i, j]: weight of position i when building position j."""
        f = nn_core.conv2d(x, self.w_f).flatten(-2)
        g = nn_core.conv2d(x, self.w_g).flatten(-2)
        scores = f.transpose(-1, -2) @ g
        # normalize over the attending index i (rows), one distribution per column j
        return nn_core.softmax_over(scores, dim=-2)

    def forward(self, x: Tensor) -> Tensor:
        *lead, c, height, width = x.shape
        n = height * width
        if n > MAX_POSITIONS:
            raise AttentionTooLarge(
                f"{height}x{width} = {n} positions exceeds the {MAX_POSITIONS} limit"
            )
        if c != self.channels:
            raise DivisibilityError(f"block built for {self.channels} channels, got {c}")
        beta = self.attention_map(x)
        h = nn_core.conv2d(x, self.w_h).flatten(-2)
        mixed = (h @ beta).unflatten(-1, (height, width))
        o = nn_core.conv2d(mixed, self.w_v)
        return self.alpha * o + x


class UpsampleAttention(nn.Module):
    """Nearest upsampling, 3x3 conv + leaky ReLU, then a sigmoid pixel mask."""

    def __init__(self, channels: int, factor=1, slope: float = nn_core.DEFAULT_LEAKY_SLOPE, seed: int = 0):
        super().__init__()
        self.factor = Fraction(factor)
        self.slope = slope
        self.body = nn_core.Conv(channels, channels, 3)
        self.mask = nn_core.Conv(channels, 1, 1)
        nn_core.init_weights(self, seed)

    def features(self, x: Tensor) -> Tensor:
        u = x if self.factor == 1 else nn_core.interpolate(x, self.factor, "nearest")
        return nn_core.activate(self.body(u), "leaky_relu", self.slope)

    def forward(self, x: Tensor) -> Tensor:
        b = self.features(x)
        gate = nn_core.activate(self.mask(b), "sigmoid")
        return gate * b


def self_attention_forward(x: Tensor, p: SelfAttention) -> Tensor:
    return p(x)


def upsample_attention_forward(x: Tensor, p: UpsampleAttention) -> Tensor:
    return p(x)
