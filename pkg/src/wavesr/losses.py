"""Training objectives and the loss-variant selector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import torch
from torch import Tensor

from .errors import ShapeMismatch, VariantTermMismatch

# variant -> (generator uses attention blocks, active loss terms)
VARIANTS: dict[str, tuple[bool, frozenset[str]]] = {
    "CNN-VGG": (False, frozenset({"vgg"})),
    "WGAN": (False, frozenset({"adv"})),
    "Perceptual": (True, frozenset({"perceptual"})),
    "WGAN-VGG": (False, frozenset({"adv", "vgg"})),
    "WGAN-MA-P": (True, frozenset({"adv", "perceptual"})),
}


@dataclass
class LossConfig:
    variant: str = "WGAN-MA-P"
    beta: float = 0.1
    lambda_gp: float = 10.0
    critic_steps: int = 5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.beta < 0 or self.lambda_gp < 0:
            raise ValueError("beta and lambda_gp must be non-negative")
        if self.critic_steps < 1:
            raise ValueError("critic_steps must be positive")

    @property
    def terms(self) -> frozenset[str]:
        return VARIANTS[self.variant][1]

    @property
    def adversarial(self) -> bool:
        return "adv" in self.terms

    @property
    def uses_attention(self) -> bool:
        return VARIANTS[self.variant][0]

    @property
    def feature_term(self) -> str | None:
        """'perceptual', 'vgg' or None, whichever encoder-based term is active."""
        for t in ("perceptual", "vgg"):
            if t in self.terms:
                return t
        return None


def _check_shapes(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    _check_shapes(a, b)
    return ((a - b) ** 2).mean()


def perceptual_loss(encoder: Callable[[Tensor], Tensor], sr: Tensor, hr: Tensor) -> Tensor:
    """Squared feature distance divided by the feature map's D*H*W, batch-averaged."""
    _check_shapes(sr, hr)
    diff = encoder(sr) - encoder(hr)
    return (diff**2).mean()


def gradient_penalty(
    critic: Callable[[Tensor], Tensor],
    real: Tensor,
    fake: Tensor,
    eps: Tensor | None = None,
    generator: torch.Generator | None = None,
) -> Tensor:
    """mean((||grad d(x_hat)||_2 - 1)^2) at x_hat = eps*real + (1-eps)*fake.

    The result stays differentiable w.r.t. the critic parameters.
    """
    _check_shapes(real, fake)
    n = real.shape[0]
    if eps is None:
        eps = torch.rand((n,) + (1,) * (real.dim() - 1), generator=generator, dtype=real.dtype)
    # the input-gradient is needed even when called under no_grad (e.g. evaluation)
    with torch.enable_grad():
        x_hat = (eps * real.detach() + (1 - eps) * fake.detach()).requires_grad_(True)
        scores = critic(x_hat)
        if scores.requires_grad:
            (grad,) = torch.autograd.grad(
                scores.sum(), x_hat, create_graph=True, allow_unused=True, materialize_grads=True
            )
        else:
            # a critic that ignores its input has zero input-gradient
            grad = torch.zeros_like(x_hat)
    norms = grad.reshape(n, -1).norm(dim=1)
    return ((norms - 1) ** 2).mean()


class CriticLoss(NamedTuple):
    total: Tensor
    wasserstein: Tensor  # mean d(real) - mean d(fake)
    penalty: Tensor


def critic_loss(
    critic: Callable[[Tensor], Tensor],
    real: Tensor,
    fake: Tensor,
    lambda_gp: float = 10.0,
    eps: Tensor | None = None,
    generator: torch.Generator | None = None,
) -> CriticLoss:
    _check_shapes(real, fake)
    d_real = critic(real).mean()
    d_fake = critic(fake.detach()).mean()
    if lambda_gp:
        gp = gradient_penalty(critic, real, fake, eps, generator)
    else:
        gp = torch.zeros((), dtype=real.dtype)
    total = -d_real + d_fake + lambda_gp * gp
    return CriticLoss(total, (d_real - d_fake).detach(), gp.detach())


def generator_adv_loss(critic: Callable[[Tensor], Tensor], fake: Tensor) -> Tensor:
    return -critic(fake).mean()


def total_generator_loss(cfg: LossConfig, parts: Mapping[str, Tensor]) -> Tensor:
    supplied = frozenset(k for k, v in parts.items() if v is not None)
    if supplied != cfg.terms:
        raise VariantTermMismatch(
            f"variant {cfg.variant} needs terms {sorted(cfg.terms)}, got {sorted(supplied)}"
        )
    if not cfg.adversarial:
        # single reconstruction term, unweighted
        (term,) = cfg.terms
        return parts[term]
    total = parts["adv"]
    feature = cfg.feature_term
    if feature is not None:
        total = total + cfg.beta * parts[feature]
    return total
