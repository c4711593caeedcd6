"""Generator, WGAN critic and perceptual autoencoder."""

from __future__ import annotations

import dataclasses
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import torch
from torch import Tensor, nn

from . import nn_core
from .attention import SelfAttention, UpsampleAttention
from .errors import InputTooSmall, ShapeMismatch
from .wavelet import SubbandSet

MODES = ("pre_interpolated", "progressive")
SCALES = (2, 4)


@dataclass
class GeneratorConfig:
    base_width: int = 64
    rho: int = 4
    k: int = 8
    mode: str = "pre_interpolated"
    scale: int = 2
    # False gives the plain-CNN generator of the non-attention loss variants
    attention: bool = True

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError("rho must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}, got {self.scale}")
        if self.base_width < 1:
            raise ValueError("base_width must be positive")

    @property
    def upsample_factor(self) -> int:
        return self.scale if self.mode == "progressive" else 1


@dataclass
class CriticConfig:
    base_width: int = 32
    n_stages: int = 4
    attention_stage: int = 2
    k: int = 8
    in_channels: int = 1

    def __post_init__(self):
        if self.n_stages < 1:
            raise ValueError("n_stages must be at least 1")
        if not 0 <= self.attention_stage <= self.n_stages:
            raise ValueError("attention_stage must lie in [0, n_stages]")

    def widths(self) -> list[int]:
        return [self.base_width * min(2**i, 8) for i in range(self.n_stages)]


@dataclass
class PerceptualEncoderConfig:
    filters: tuple[int, ...] = (32, 32, 64, 64, 128, 128)
    pool_after: tuple[int, ...] = (2, 4)
    in_channels: int = 1

    def __post_init__(self):
        self.filters = tuple(self.filters)
        self.pool_after = tuple(self.pool_after)
        if len(self.filters) != 6:
            raise ValueError("the perceptual encoder has exactly six conv layers")

    @property
    def reduction(self) -> int:
        return 2 ** len(self.pool_after)


class ResidualAttentionBlock(nn.Module):
    def __init__(self, width: int, k: int, attention: bool = True):
        super().__init__()
        self.conv1 = nn_core.Conv(width, width, 3)
        self.conv2 = nn_core.Conv(width, width, 3)
        self.attn = SelfAttention(width, k) if attention else None

    def forward(self, x: Tensor) -> Tensor:
        r = self.conv2(nn_core.activate(self.conv1(x), "leaky_relu"))
        if self.attn is not None:
            r = self.attn(r)
        return x + r


class PlainUpsample(nn.Module):
    """Attention-free counterpart of :class:`UpsampleAttention`."""

    def __init__(self, width: int, factor=1):
        super().__init__()
        self.factor = Fraction(factor)
        self.body = nn_core.Conv(width, width, 3)

    def forward(self, x: Tensor) -> Tensor:
        u = x if self.factor == 1 else nn_core.interpolate(x, self.factor, "nearest")
        return nn_core.activate(self.body(u), "leaky_relu")


class Generator(nn.Module):
    """Predicts HR subbands as a residual over the (resampled) input subbands."""

    def __init__(self, cfg: GeneratorConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg = cfg or GeneratorConfig()
        c = cfg.base_width
        self.head = nn_core.Conv(4, c, 3)
        self.blocks = nn.ModuleList(
            ResidualAttentionBlock(c, cfg.k, cfg.attention) for _ in range(cfg.rho)
        )
        up = UpsampleAttention if cfg.attention else PlainUpsample
        self.upsample = up(c, cfg.upsample_factor)
        self.tail = nn_core.Conv(c, 4, 3)
        nn_core.init_weights(self, seed)
        # zero residual at init: the untrained pipeline reproduces its bicubic input
        with torch.no_grad():
            self.tail.weight.zero_()

    def forward(self, subbands: Tensor) -> Tensor:
        if subbands.dim() != 4 or subbands.shape[1] != 4:
            raise ShapeMismatch(
                f"generator expects (N, 4, h, w) subband stacks, got {tuple(subbands.shape)}"
            )
        feat = self.head(subbands)
        for block in self.blocks:
            feat = block(feat)
        residual = self.tail(self.upsample(feat))
        factor = self.cfg.upsample_factor
        skip = subbands if factor == 1 else nn_core.interpolate(subbands, factor, "bicubic")
        return skip + residual


class Critic(nn.Module):
    """Strided conv stages, one self-attention block, global mean, affine score."""

    def __init__(self, cfg: CriticConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg = cfg or CriticConfig()
        widths = cfg.widths()
        chans = [cfg.in_channels] + widths
        self.stages = nn.ModuleList(
            nn_core.Conv(chans[i], chans[i + 1], 3, stride=2) for i in range(cfg.n_stages)
        )
        self.attn = (
            SelfAttention(widths[cfg.attention_stage - 1], cfg.k) if cfg.attention_stage else None
        )
        self.head = nn_core.Affine(widths[-1], 1)
        nn_core.init_weights(self, seed)

    @property
    def min_input(self) -> int:
        return 2**self.cfg.n_stages

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        if min(h, w) < self.min_input:
            raise InputTooSmall(
                f"critic with {self.cfg.n_stages} stages needs inputs of at least "
                f"{self.min_input}x{self.min_input}, got {h}x{w}"
            )
        for i, stage in enumerate(self.stages, start=1):
            x = nn_core.activate(stage(x), "leaky_relu")
            if self.attn is not None and i == self.cfg.attention_stage:
                x = self.attn(x)
        pooled = x.mean(dim=(-2, -1))
        return self.head(pooled).squeeze(-1)


class PerceptualEncoder(nn.Module):
    def __init__(self, cfg: PerceptualEncoderConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg = cfg or PerceptualEncoderConfig()
        chans = (cfg.in_channels,) + cfg.filters
        self.convs = nn.ModuleList(nn_core.Conv(chans[i], chans[i + 1], 3) for i in range(6))
        nn_core.init_weights(self, seed)

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        if min(h, w) < self.cfg.reduction:
            raise InputTooSmall(f"perceptual encoder needs at least 4x4 inputs, got {h}x{w}")
        for i, conv in enumerate(self.convs, start=1):
            x = nn_core.activate(conv(x), "relu")
            if i in self.cfg.pool_after:
                x = nn_core.max_pool2d(x)
        return x


class PerceptualDecoder(nn.Module):
    """Mirror of the encoder, used only while pretraining it."""

    def __init__(self, cfg: PerceptualEncoderConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg = cfg or PerceptualEncoderConfig()
        rev = cfg.filters[::-1] + (cfg.in_channels,)
        self.convs = nn.ModuleList(nn_core.Conv(rev[i], rev[i + 1], 3) for i in range(6))
        # upsample before the conv that mirrors each encoder pool
        self.upsample_before = {len(cfg.filters) - p + 1 for p in cfg.pool_after}
        nn_core.init_weights(self, seed)

    def forward(self, z: Tensor) -> Tensor:
        for i, conv in enumerate(self.convs, start=1):
            if i in self.upsample_before:
                z = nn_core.interpolate(z, 2, "nearest")
            z = conv(z)
            if i < len(self.convs):
                z = nn_core.activate(z, "relu")
        return z


class AutoEncoder(nn.Module):
    def __init__(self, cfg: PerceptualEncoderConfig | None = None, seed: int = 0):
        super().__init__()
        self.encoder = PerceptualEncoder(cfg, seed)
        self.decoder = PerceptualDecoder(cfg, seed + 1)

    def forward(self, x: Tensor) -> Tensor:
        return self.decoder(self.encoder(x))


def generator_forward(subbands: SubbandSet, g: Generator) -> SubbandSet:
    x = torch.as_tensor(subbands.stack(), dtype=torch.float32).unsqueeze(0)
    with torch.no_grad():
        y = g(x)[0].numpy()
    return SubbandSet.from_stack(y)


def critic_forward(x: Tensor, c: Critic) -> Tensor:
    return c(x)


def perceptual_encode(x: Tensor | np.ndarray, e: PerceptualEncoder) -> Tensor:
    if isinstance(x, np.ndarray):
        x = torch.as_tensor(x, dtype=torch.float32)
    while x.dim() < 4:
        x = x.unsqueeze(0)
    return e(x)


# -- architecture manifests -------------------------------------------------

def _flatten(prefix: str, obj) -> dict[str, str]:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(i) for i in v)
        out[f"{prefix}.{f.name}"] = str(v)
    return out


def _coerce(value: str, like: Any):
    if isinstance(like, bool):
        if value.lower() not in ("true", "false"):
            raise ValueError(f"expected true/false, got {value!r}")
        return value.lower() == "true"
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        return tuple(int(v) for v in value.split(",") if v.strip())
    return value


def config_to_manifest(prefix: str, cfg) -> dict[str, str]:
    return _flatten(prefix, cfg)


def config_from_manifest(prefix: str, cls, manifest: dict[str, str]):
    default = cls()
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}.{f.name}"
        if key in manifest:
            kwargs[f.name] = _coerce(manifest[key], getattr(default, f.name))
    return cls(**kwargs)


# -- complexity ---------------------------------------------------------------

def _count_macs(model: nn.Module, example: Tensor) -> int:
    total = 0

    def conv_hook(mod, inputs, out):
        nonlocal total
        w = mod.weight
        total += w.shape[0] * w.shape[1] * w.shape[2] * w.shape[3] * out.shape[-2] * out.shape[-1]

    def affine_hook(mod, inputs, out):
        nonlocal total
        total += mod.weight.numel()

    def attention_hook(mod, inputs, out):
        nonlocal total
        n = out.shape[-2] * out.shape[-1]
        c, l = mod.channels, mod.inner
        total += 4 * c * l * n + 2 * n * n * l

    hooks = []
    for m in model.modules():
        if isinstance(m, nn_core.Conv):
            hooks.append(m.register_forward_hook(conv_hook))
        elif isinstance(m, nn_core.Affine):
            hooks.append(m.register_forward_hook(affine_hook))
        elif isinstance(m, SelfAttention):
            hooks.append(m.register_forward_hook(attention_hook))
    try:
        with torch.no_grad():
            model(example)
    finally:
        for h in hooks:
            h.remove()
    return total


def default_input_shape(model: nn.Module) -> tuple[int, ...]:
    if isinstance(model, Generator):
        return (1, 4, 32, 32)
    if isinstance(model, Critic):
        return (1, model.cfg.in_channels, 64, 64)
    return (1, 1, 64, 64)


def complexity_report(model: nn.Module, input_shape: tuple[int, ...] | None = None, runs: int = 5) -> dict:
    """Parameter count, f32 weight memory, FLOPs (2 x MACs) and median latency.

    FLOPs count multiply-accumulates of convolutions, affine layers and the
    attention products for one forward pass at ``input_shape``.
    """
    input_shape = tuple(input_shape or default_input_shape(model))
    n_params = sum(p.numel() for p in model.parameters())
    example = torch.zeros(input_shape)
    macs = _count_macs(model, example)
    times = []
    with torch.no_grad():
        for _ in range(runs):
            t0 = time.perf_counter()
            model(example)
            times.append(time.perf_counter() - t0)
    return {
        "parameter_count": n_params,
        "memory_bytes_f32": 4 * n_params,
        "flops_estimate": 2 * macs,
        "inference_seconds": statistics.median(times),
        "input_shape": "x".join(str(d) for d in input_shape),
    }
