import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import check_params
from wavesr.errors import ShapeMismatch, VariantTermMismatch
from wavesr.losses import (
    VARIANTS,
    LossConfig,
    critic_loss,
    generator_adv_loss,
    gradient_penalty,
    mse_loss,
    perceptual_loss,
    total_generator_loss,
)
from wavesr.networks import PerceptualEncoder, PerceptualEncoderConfig

T = lambda v: torch.tensor(v, dtype=torch.float64)  # noqa: E731


def const_critic(value):
    return lambda x: torch.full((x.shape[0],), float(value), dtype=x.dtype)


def linear_critic(x):
    return 3.0 * x.reshape(x.shape[0], -1).sum(dim=1)


def test_mse_examples():
    a = torch.rand(3, 4)
    assert mse_loss(a, a).item() == 0
    assert mse_loss(torch.zeros(5), torch.ones(5)).item() == 1
    assert mse_loss(T([0.0, 2.0]), T([1.0, 1.0])).item() == 1
    with pytest.raises(ShapeMismatch):
        mse_loss(torch.zeros(2), torch.zeros(3))


def test_perceptual_identity_encoder_reduces_to_mse():
    a, b = torch.rand(2, 1, 8, 8), torch.rand(2, 1, 8, 8)
    assert perceptual_loss(lambda x: x, a, b).item() == pytest.approx(mse_loss(a, b).item(), rel=1e-6)
    assert perceptual_loss(lambda x: x, a, a).item() == 0


def test_perceptual_matches_elementwise_oracle():
    enc = PerceptualEncoder(PerceptualEncoderConfig(filters=(4, 4, 8, 8, 6, 6)), seed=11).double()
    rng = np.random.default_rng(0)
    sr = torch.from_numpy(rng.random((1, 1, 8, 8)))
    hr = torch.from_numpy(rng.random((1, 1, 8, 8)))
    fa = enc(sr)[0].detach().numpy()
    fb = enc(hr)[0].detach().numpy()
    d, h, w = fa.shape
    total = 0.0
    for c in range(d):
        for i in range(h):
            for j in range(w):
                total += (fa[c, i, j] - fb[c, i, j]) ** 2
    assert perceptual_loss(enc, sr, hr).item() == pytest.approx(total / (d * h * w), rel=1e-12)


def test_critic_loss_constant_scores():
    real, fake = torch.zeros(4, 1, 2, 2), torch.zeros(4, 1, 2, 2)
    closs = critic_loss(lambda x: torch.where(x.sum() == 0, 2.0, 5.0) * torch.ones(x.shape[0]), real, fake + 1, 0.0)
    assert closs.total.item() == pytest.approx(3.0)
    assert closs.wasserstein.item() == pytest.approx(-3.0)


def test_gradient_penalty_linear_critic_is_40():
    gen = torch.Generator().manual_seed(0)
    real = torch.rand(6, 1, dtype=torch.float64, generator=gen)
    fake = torch.rand(6, 1, dtype=torch.float64, generator=gen)
    closs = critic_loss(linear_critic, real, fake, lambda_gp=10.0, generator=gen)
    wass_part = -linear_critic(real).mean() + linear_critic(fake).mean()
    assert abs((closs.total - wass_part).item() - 40.0) <= 1e-6
    assert abs(closs.penalty.item() - 4.0) <= 1e-7


def test_gradient_penalty_zero_critic_is_10():
    real, fake = torch.rand(3, 1, 4, 4), torch.rand(3, 1, 4, 4)
    for critic in (const_critic(0.0), lambda x: 0.0 * x.sum(dim=(1, 2, 3))):
        closs = critic_loss(critic, real, fake, lambda_gp=10.0)
        assert abs(closs.total.item() - 10.0) <= 1e-6


def test_gradient_penalty_zero_for_unit_norm_critic():
    real, fake = torch.rand(5, 1, 3, 3), torch.rand(5, 1, 3, 3)
    unit = lambda x: x.reshape(x.shape[0], -1).sum(1) / 3.0  # noqa: E731  gradient norm exactly 1
    assert gradient_penalty(unit, real, fake).item() == pytest.approx(0.0, abs=1e-10)


def test_penalty_uses_per_sample_eps():
    real = torch.ones(2, 1, 2, 2)
    fake = torch.zeros(2, 1, 2, 2)
    seen = {}

    def critic(x):
        seen["x"] = x.detach().clone()
        return (x**2).reshape(2, -1).sum(1)

    eps = torch.tensor([0.25, 0.75]).view(2, 1, 1, 1)
    gp = gradient_penalty(critic, real, fake, eps=eps)
    assert torch.allclose(seen["x"][0], torch.full((1, 2, 2), 0.25))
    assert torch.allclose(seen["x"][1], torch.full((1, 2, 2), 0.75))
    # grad = 2 x, norm = 2 * eps * 2
    expected = ((torch.tensor([1.0, 3.0]) - 1) ** 2).mean()
    assert gp.item() == pytest.approx(expected.item(), rel=1e-6)


def test_penalty_is_differentiable_in_critic_parameters():
    w = torch.tensor([0.5, -1.5], dtype=torch.float64, requires_grad=True)

    def critic(x):
        return (x.reshape(x.shape[0], -1) * w).sum(1) ** 2

    real = torch.rand(3, 2, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    fake = torch.rand(3, 2, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    eps = torch.rand(3, 1, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    module = torch.nn.Module()
    module.w = torch.nn.Parameter(w.detach().clone())

    def loss():
        return gradient_penalty(lambda x: (x * module.w).sum(1) ** 2, real, fake, eps=eps)

    check_params(loss, module)


def test_critic_loss_monotone_in_real_score():
    real, fake = torch.zeros(2, 1, 2, 2), torch.zeros(2, 1, 2, 2)
    lo = critic_loss(const_critic(1.0), real, fake, 0.0).total
    assert critic_loss(lambda x: torch.ones(2) * 3.0, real, fake + 0, 0.0).total <= lo


def test_generator_adv_loss():
    assert generator_adv_loss(const_critic(5.0), torch.zeros(3, 1, 2, 2)).item() == -5
    assert generator_adv_loss(const_critic(0.0), torch.zeros(3, 1, 2, 2)).item() == 0


def test_generator_adv_loss_fd_two_parameter_generator():
    gen = torch.nn.Module()
    gen.a = torch.nn.Parameter(torch.tensor(0.7, dtype=torch.float64))
    gen.b = torch.nn.Parameter(torch.tensor(-0.2, dtype=torch.float64))
    z = torch.linspace(-1, 1, 8, dtype=torch.float64).view(2, 1, 2, 2)

    def critic(x):
        return torch.tanh(x).reshape(2, -1).sum(1) + (x**2).reshape(2, -1).mean(1)

    check_params(lambda: generator_adv_loss(critic, gen.a * z + gen.b), gen)


def test_total_loss_examples():
    assert total_generator_loss(LossConfig("WGAN"), {"adv": T(-5.0)}).item() == -5
    v = total_generator_loss(LossConfig("WGAN-MA-P", beta=0.1), {"adv": T(-5.0), "perceptual": T(2.0)})
    assert v.item() == pytest.approx(-4.8)
    with pytest.raises(VariantTermMismatch):
        total_generator_loss(LossConfig("Perceptual"), {"adv": T(1.0), "perceptual": T(1.0)})
    with pytest.raises(VariantTermMismatch):
        total_generator_loss(LossConfig("WGAN-VGG"), {"adv": T(1.0)})


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(VARIANTS)), st.floats(0, 5), st.floats(-5, 5), st.floats(0, 5))
def test_variant_selector_property(variant, beta, adv, feat):
    cfg = LossConfig(variant, beta=beta)
    expected_terms = {
        "CNN-VGG": {"vgg"},
        "WGAN": {"adv"},
        "Perceptual": {"perceptual"},
        "WGAN-VGG": {"adv", "vgg"},
        "WGAN-MA-P": {"adv", "perceptual"},
    }[variant]
    assert cfg.terms == expected_terms
    assert cfg.adversarial == ("adv" in expected_terms)
    parts = {"adv": T(adv), "perceptual": T(feat), "vgg": T(feat)}
    chosen = {k: parts[k] for k in expected_terms}
    out = total_generator_loss(cfg, chosen).item()
    if cfg.adversarial:
        ref = adv + (beta * feat if cfg.feature_term else 0.0)
    else:
        ref = feat
    assert out == pytest.approx(ref, abs=1e-9)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig("GAN")
    with pytest.raises(ValueError):
        LossConfig(beta=-1)
    with pytest.raises(ValueError):
        LossConfig(critic_steps=0)
