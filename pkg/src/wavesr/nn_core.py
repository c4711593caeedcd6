"""Differentiable primitives shared by every network in the package.

Feature maps are plain ``torch.Tensor`` objects laid out (N, C, H, W) or
(C, H, W); reverse-mode derivatives come from torch autograd, including the
second-order pass the gradient penalty needs.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Literal, Mapping

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .errors import (
    ChannelMismatch,
    GraphDetached,
    NonIntegralOutput,
    NonOddKernel,
    NotScalar,
    OddDimension,
)

Padding = Literal["same", "valid"]

DEFAULT_LEAKY_SLOPE = 0.2


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: Padding = "same",
) -> Tensor:
    """Zero-padded cross-correlation.

    ``same`` padding gives ceil(H/stride) x ceil(W/stride) outputs.
    """
    kh, kw = weight.shape[-2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise NonOddKernel(f"kernel size {kh}x{kw} must be odd")
    if stride < 1:
        raise ValueError("stride must be positive")
    c_in = x.shape[-3]
    if c_in != weight.shape[1]:
        raise ChannelMismatch(
            f"input has {c_in} channels, kernel expects {weight.shape[1]}"
        )
    if padding == "same":
        pad = (kh // 2, kw // 2)
    elif padding == "valid":
        pad = (0, 0)
    else:
        raise ValueError(f"unknown padding {padding!r}")
    return F.conv2d(x, weight, bias, stride=stride, padding=pad)


def activate(x: Tensor, mode: str = "relu", slope: float = DEFAULT_LEAKY_SLOPE) -> Tensor:
    if mode == "relu":
        return torch.relu(x)
    if mode == "leaky_relu":
        if not 0 < slope < 1:
            raise ValueError("leaky_relu slope must lie in (0, 1)")
        return F.leaky_relu(x, slope)
    if mode == "sigmoid":
        return torch.sigmoid(x)
    raise ValueError(f"unknown activation {mode!r}")


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2."""
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise OddDimension(f"max_pool2d needs even spatial size, got {h}x{w}")
    return F.max_pool2d(x, kernel_size=2, stride=2)


def softmax_over(x: Tensor, dim: int = -1) -> Tensor:
    """Max-shifted softmax; safe for very large logits."""
    shifted = x - x.amax(dim=dim, keepdim=True).detach()
    e = torch.exp(shifted)
    return e / e.sum(dim=dim, keepdim=True)


def _as_fraction(factor) -> Fraction:
    f = Fraction(factor).limit_denominator(1 << 16) if isinstance(factor, float) else Fraction(factor)
    if f <= 0:
        raise ValueError(f"interpolation factor must be positive, got {factor}")
    return f


def _output_size(n: int, factor: Fraction) -> int:
    out = n * factor
    if out.denominator != 1 or out < 1:
        raise NonIntegralOutput(
            f"size {n} scaled by {factor} gives {float(out):g}, not a positive integer"
        )
    return int(out)


def cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel; ``a=-0.5`` is Catmull-Rom."""
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def bicubic_matrix(n_in: int, n_out: int, antialias: bool = True) -> np.ndarray:
    """(n_out, n_in) resampling matrix with pixel-centre alignment.

    Downscaling widens the kernel by the scale ratio when ``antialias`` is
    set. Rows are normalized to sum to one and borders replicate edge pixels.
    """
    scale = n_out / n_in
    support = 2.0
    stretch = 1.0
    if antialias and scale < 1:
        stretch = 1.0 / scale
        support *= stretch
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    left = np.floor(centers - support).astype(int) + 1
    taps = int(math.ceil(2 * support)) + 1
    idx = left[:, None] + np.arange(taps)[None, :]
    weights = cubic_kernel((centers[:, None] - idx) / stretch)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), taps)
    np.add.at(mat, (rows, idx.ravel()), weights.ravel())
    return mat


def interpolate(x: Tensor, factor, mode: str = "nearest", antialias: bool = True) -> Tensor:
    """Resample the last two axes by a positive rational ``factor``."""
    f = _as_fraction(factor)
    h, w = x.shape[-2:]
    oh, ow = _output_size(h, f), _output_size(w, f)
    if mode == "nearest":
        rows = torch.tensor([int(i / f) for i in range(oh)])
        cols = torch.tensor([int(j / f) for j in range(ow)])
        return x.index_select(-2, rows).index_select(-1, cols)
    if mode == "bicubic":
        if f == 1:
            return x.clone()
        mh = torch.as_tensor(bicubic_matrix(h, oh, antialias), dtype=x.dtype)
        mw = torch.as_tensor(bicubic_matrix(w, ow, antialias), dtype=x.dtype)
        return mh @ x @ mw.transpose(0, 1)
    raise ValueError(f"unknown interpolation mode {mode!r}")


def backward(output: Tensor, params: Mapping[str, Tensor] | Iterable[Tensor]) -> None:
    """Populate ``.grad`` of every parameter with d(output)/d(param).

    Parameters the output does not depend on receive zero gradients.
    """
    if output.numel() != 1:
        raise NotScalar(f"backward needs a scalar output, got shape {tuple(output.shape)}")
    plist = list(params.values()) if isinstance(params, Mapping) else list(params)
    if not output.requires_grad or output.grad_fn is None:
        raise GraphDetached("output is not connected to any recorded operation")
    grads = torch.autograd.grad(output.reshape(()), plist, allow_unused=True)
    if all(g is None for g in grads):
        raise GraphDetached("output does not depend on any of the given parameters")
    for p, g in zip(plist, grads):
        p.grad = torch.zeros_like(p) if g is None else g.detach()


def param_set(module: nn.Module) -> dict[str, Tensor]:
    """Named parameters in deterministic (sorted) order."""
    return dict(sorted(module.named_parameters()))


class Conv(nn.Module):
    """Trainable convolution calling :func:`conv2d`."""

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, stride: int = 1, bias: bool = True):
        super().__init__()
        if kernel % 2 == 0:
            raise NonOddKernel(f"kernel size {kernel} must be odd")
        self.stride = stride
        self.weight = nn.Parameter(torch.empty(c_out, c_in, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(c_out)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, "same")


class Affine(nn.Module):
    def __init__(self, n_in: int, n_out: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(n_out, n_in))
        self.bias = nn.Parameter(torch.zeros(n_out))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


def init_weights(module: nn.Module, seed: int) -> nn.Module:
    """He-normal kernels (std sqrt(2/fan_in)), zero biases, seeded."""
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for name, p in sorted(module.named_parameters()):
            if p.dim() >= 2:
                fan_in = p[0].numel()
                p.copy_(torch.randn(p.shape, generator=gen) * math.sqrt(2.0 / fan_in))
            elif name.endswith("bias"):
                p.zero_()
    return module
