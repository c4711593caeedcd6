"""Optimization loops, checkpoint plumbing and the experiment harness.

All randomness inside a run is a pure function of ``(seed, epoch, step)``,
so a run resumed from a checkpoint replays exactly the batches, critic
samples and interpolation weights the uninterrupted run would have used.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import Tensor, nn

from . import nn_core
from .checkpoint import ModelCheckpoint
from .data import PairedDataset, PatchPair
from .errors import (
    ArchitectureMismatch,
    Diverged,
    EmptyDataset,
    MissingGrad,
    MissingPerceptualEncoder,
)
from .losses import (
    LossConfig,
    critic_loss,
    generator_adv_loss,
    mse_loss,
    perceptual_loss,
    total_generator_loss,
)
from .networks import (
    AutoEncoder,
    Critic,
    CriticConfig,
    Generator,
    GeneratorConfig,
    PerceptualEncoder,
    PerceptualEncoderConfig,
    complexity_report,
    config_from_manifest,
    config_to_manifest,
)
from .pipeline import evaluate_pairs, sr_forward, to_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 180
    batch: int = 16
    seed: int = 0
    lr_decay_every: int = 60
    lr_decay_factor: float = 0.5
    checkpoint_every: int = 0
    # global cap on optimizer steps; 0 means run all epochs
    max_steps: int = 0
    # epochs without validation improvement before perceptual pretraining stops
    patience: int = 3
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 1 <= self.batch <= 128:
            raise ValueError("batch must lie in [1, 128]")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")

    def lr_at(self, epoch: int) -> float:
        if self.lr_decay_every <= 0:
            return self.lr
        return self.lr * self.lr_decay_factor ** (epoch // self.lr_decay_every)


@dataclass
class ExperimentConfig:
    name: str = "run"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    critic: CriticConfig = field(default_factory=CriticConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def for_variant(cls, variant: str, name: str | None = None, **kw) -> ExperimentConfig:
        """Config whose generator uses attention exactly when the loss variant does."""
        exp = cls(name=name or variant, **kw)
        exp.train = replace(exp.train, loss=replace(exp.train.loss, variant=variant))
        exp.generator = replace(exp.generator, attention=exp.train.loss.uses_attention)
        return exp


# -- Adam -------------------------------------------------------------------------

@dataclass
class AdamState:
    t: int = 0
    m: dict[str, Tensor] = field(default_factory=dict)
    v: dict[str, Tensor] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update, in place."""
    for name, p in params.items():
        if p.grad is None:
            raise MissingGrad(f"parameter {name} has no gradient")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    with torch.no_grad():
        for name, p in params.items():
            g = p.grad
            m = state.m.get(name)
            if m is None:
                m = state.m[name] = torch.zeros_like(p)
                state.v[name] = torch.zeros_like(p)
            v = state.v[name]
            m.mul_(beta1).add_(g, alpha=1 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
            p.sub_(lr * (m / c1) / ((v / c2).sqrt() + eps))
    return params, state


class Adam:
    def __init__(self, module: nn.Module, cfg: TrainConfig):
        self.params = nn_core.param_set(module)
        self.cfg = cfg
        self.state = AdamState()

    def step(self, lr: float) -> None:
        adam_step(self.params, self.state, lr, self.cfg.beta1, self.cfg.beta2, self.cfg.eps)

    def export(self, prefix: str) -> tuple[dict[str, np.ndarray], dict[str, str]]:
        tensors = {}
        for name in self.params:
            if name in self.state.m:
                tensors[f"{prefix}.m.{name}"] = self.state.m[name].numpy().copy()
                tensors[f"{prefix}.v.{name}"] = self.state.v[name].numpy().copy()
        return tensors, {f"{prefix}.t": str(self.state.t)}

    def restore(self, prefix: str, ckpt: ModelCheckpoint) -> None:
        self.state = AdamState(t=int(ckpt.manifest.get(f"{prefix}.t", 0)))
        m, v = ckpt.subset(f"{prefix}.m"), ckpt.subset(f"{prefix}.v")
        for name in self.params:
            if name in m:
                self.state.m[name] = torch.from_numpy(m[name].copy())
                self.state.v[name] = torch.from_numpy(v[name].copy())


# -- module <-> checkpoint ---------------------------------------------------------

def export_module(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": p.detach().numpy().copy()
        for name, p in nn_core.param_set(module).items()
    }


def load_module(module: nn.Module, tensors: dict[str, np.ndarray], what: str) -> nn.Module:
    params = nn_core.param_set(module)
    if set(params) != set(tensors):
        missing = sorted(set(params) - set(tensors))[:3]
        extra = sorted(set(tensors) - set(params))[:3]
        raise ArchitectureMismatch(f"{what}: missing {missing}, unexpected {extra}")
    with torch.no_grad():
        for name, p in params.items():
            src = tensors[name]
            if tuple(src.shape) != tuple(p.shape):
                raise ArchitectureMismatch(
                    f"{what}.{name}: checkpoint shape {src.shape}, model shape {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(src.copy()))
    return module


def load_generator(ckpt: ModelCheckpoint, cfg: GeneratorConfig | None = None) -> Generator:
    """Rebuild the generator from the manifest (or check it against ``cfg``)."""
    stored = config_from_manifest("generator", GeneratorConfig, ckpt.manifest)
    if cfg is not None and cfg != stored:
        raise ArchitectureMismatch(f"checkpoint generator {stored} does not match {cfg}")
    return load_module(Generator(stored), ckpt.subset("generator"), "generator")


def load_encoder(ckpt: ModelCheckpoint) -> PerceptualEncoder:
    cfg = config_from_manifest("encoder", PerceptualEncoderConfig, ckpt.manifest)
    enc = load_module(PerceptualEncoder(cfg), ckpt.subset("encoder"), "encoder")
    enc.requires_grad_(False)
    return enc


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _torch_gen(*key: int) -> torch.Generator:
    seed = np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0]
    return torch.Generator().manual_seed(int(seed))


def _finite(x: Tensor | float) -> bool:
    return math.isfinite(float(x.detach() if isinstance(x, Tensor) else x))


def _train_config_manifest(cfg: TrainConfig) -> dict[str, str]:
    out = {f"train.{k}": str(v) for k, v in vars(cfg).items() if k != "loss"}
    out.update(config_to_manifest("loss", cfg.loss))
    return out


class _JsonLog:
    def __init__(self, path):
        self.fh = open(path, "a", encoding="utf-8") if path else None
        self.t0 = time.perf_counter()

    def write(self, rec: dict) -> None:
        if self.fh:
            rec = dict(rec, wall_seconds=round(time.perf_counter() - self.t0, 4))
            self.fh.write(json.dumps(rec) + "\n")
            self.fh.flush()

    def close(self):
        if self.fh:
            self.fh.close()


# -- perceptual pretraining -------------------------------------------------------

def pretrain_perceptual(
    dataset: PairedDataset,
    cfg: TrainConfig,
    enc_cfg: PerceptualEncoderConfig | None = None,
    log_path=None,
) -> ModelCheckpoint:
    """Fit encoder + mirror decoder on MSE reconstruction; keep the best encoder.

    Stops early once validation MSE has not improved for ``cfg.patience``
    consecutive epochs.
    """
    if not dataset.train_images:
        raise EmptyDataset("no training images for perceptual pretraining")
    enc_cfg = enc_cfg or PerceptualEncoderConfig()
    model = AutoEncoder(enc_cfg, seed=cfg.seed)
    opt = Adam(model, cfg)
    spe = _steps_per_epoch(dataset, cfg.batch)
    total = cfg.epochs * spe if not cfg.max_steps else min(cfg.max_steps, cfg.epochs * spe)
    val_hr = to_batch([p.hr for p in dataset.val_pairs()]) if dataset.val_images else None
    best_mse, best_state, stale = math.inf, None, 0
    val_history: list[float] = []
    train_mse = math.nan
    jlog = _JsonLog(log_path)
    step = 0
    try:
        while step < total:
            epoch, pos = divmod(step, spe)
            pairs = dataset.train_pairs(epoch)
            idx = _batch_indices(pairs, cfg, epoch, pos)
            hr = to_batch([pairs[i].hr for i in idx])
            loss = mse_loss(model(hr), hr)
            if not _finite(loss):
                raise Diverged(f"perceptual pretraining loss became {float(loss.detach())} at step {step}")
            nn_core.backward(loss, opt.params)
            opt.step(cfg.lr_at(epoch))
            train_mse = float(loss.detach())
            step += 1
            jlog.write({"step": step, "epoch": epoch, "recon_mse": train_mse})
            if step % spe == 0 or step == total:
                if val_hr is None:
                    continue
                with torch.no_grad():
                    vm = float(mse_loss(model(val_hr), val_hr))
                val_history.append(vm)
                jlog.write({"step": step, "epoch": epoch, "val_recon_mse": vm})
                if vm < best_mse:
                    best_mse, stale = vm, 0
                    best_state = copy.deepcopy(model.encoder.state_dict())
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        log.info("early stop at epoch %d (val mse %.6g)", epoch, vm)
                        break
    finally:
        jlog.close()
    if best_state is not None:
        model.encoder.load_state_dict(best_state)
    manifest = {"kind": "perceptual_encoder", "step": str(step), "seed": str(cfg.seed)}
    manifest.update(config_to_manifest("encoder", enc_cfg))
    manifest.update(_train_config_manifest(cfg))
    manifest["history.final_train_mse"] = repr(train_mse)
    manifest["history.val_mse"] = ",".join(f"{v:.6g}" for v in val_history)
    return ModelCheckpoint(manifest, export_module(model.encoder, "encoder"))


def _steps_per_epoch(dataset: PairedDataset, batch: int) -> int:
    n = len(dataset.train_images) * dataset.spec.patches_per_image
    if n == 0:
        raise EmptyDataset("training split is empty")
    return max(1, n // batch)


def _batch_indices(pairs: Sequence[PatchPair], cfg: TrainConfig, epoch: int, pos: int) -> np.ndarray:
    order = _rng(cfg.seed, 3, epoch).permutation(len(pairs))
    b = min(cfg.batch, len(pairs))
    return order[pos * b : (pos + 1) * b]


# -- adversarial / perceptual SR training ------------------------------------------

@dataclass
class StepRecord:
    step: int
    epoch: int
    terms: dict[str, float]
    generator_loss: float
    critic_loss: float | None = None
    wasserstein_estimate: float | None = None
    gradient_penalty: float | None = None

    def as_dict(self) -> dict:
        d = {"step": self.step, "epoch": self.epoch, "generator_loss": self.generator_loss}
        d.update({f"loss_{k}": v for k, v in self.terms.items()})
        if self.critic_loss is not None:
            d.update(
                critic_loss=self.critic_loss,
                wasserstein_estimate=self.wasserstein_estimate,
                gradient_penalty=self.gradient_penalty,
            )
        return d


class SRTrainer:
    """Owns one training run: networks, optimizers, step counter and history."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        encoder: PerceptualEncoder | None = None,
        encoder_tensors: dict[str, np.ndarray] | None = None,
    ):
        self.cfg = cfg
        tc = cfg.train
        self.loss_cfg = tc.loss
        self.generator = Generator(cfg.generator, seed=tc.seed)
        self.critic = Critic(cfg.critic, seed=tc.seed + 1) if self.loss_cfg.adversarial else None
        self.encoder = encoder
        self.encoder_manifest: dict[str, str] = {}
        if self.loss_cfg.feature_term and encoder is None:
            raise MissingPerceptualEncoder(
                f"variant {self.loss_cfg.variant} needs a pretrained perceptual encoder"
            )
        if encoder is not None:
            encoder.requires_grad_(False)
        self.opt_g = Adam(self.generator, tc)
        self.opt_c = Adam(self.critic, tc) if self.critic is not None else None
        self.step = 0
        self.history: list[StepRecord] = []
        self.validation: list[tuple[int, float, float]] = []
        self.lineage: list[str] = []
        self.last_checkpoint: str | None = None
        # extra manifest entries (e.g. the effective run config) for every checkpoint
        self.extra_manifest: dict[str, str] = {}

    # checkpoint round trip

    def to_checkpoint(self, extra: dict[str, str] | None = None) -> ModelCheckpoint:
        tensors = export_module(self.generator, "generator")
        manifest = {"kind": "sr_model", "step": str(self.step), "name": self.cfg.name}
        manifest.update(config_to_manifest("generator", self.cfg.generator))
        manifest.update(config_to_manifest("critic", self.cfg.critic))
        manifest.update(_train_config_manifest(self.cfg.train))
        t, m = self.opt_g.export("opt_g")
        tensors.update(t)
        manifest.update(m)
        if self.critic is not None:
            tensors.update(export_module(self.critic, "critic"))
            t, m = self.opt_c.export("opt_c")
            tensors.update(t)
            manifest.update(m)
        if self.encoder is not None:
            tensors.update(export_module(self.encoder, "encoder"))
            manifest.update(config_to_manifest("encoder", self.encoder.cfg))
        spe = getattr(self, "_spe", None)
        if spe:
            manifest["epoch"] = str(self.step // spe)
            manifest["steps_per_epoch"] = str(spe)
        manifest["seed"] = str(self.cfg.train.seed)
        manifest["lineage"] = ",".join(self.lineage)
        manifest["parent_checkpoint"] = self.lineage[-1] if self.lineage else ""
        manifest.update(self._history_summary())
        manifest.update(self.extra_manifest)
        manifest.update(extra or {})
        return ModelCheckpoint(manifest, tensors)

    def _history_summary(self) -> dict[str, str]:
        out = {}
        if self.history:
            last = self.history[-1]
            out["history.final_generator_loss"] = repr(last.generator_loss)
            tail = [r.generator_loss for r in self.history[-10:]]
            out["history.mean_generator_loss_last10"] = repr(float(np.mean(tail)))
            if last.wasserstein_estimate is not None:
                out["history.final_wasserstein_estimate"] = repr(last.wasserstein_estimate)
                out["history.final_critic_loss"] = repr(last.critic_loss)
        if self.validation:
            s, p, q = self.validation[-1]
            out["history.val_psnr"] = repr(p)
            out["history.val_ssim"] = repr(q)
        return out

    def check_architecture(self, ckpt: ModelCheckpoint) -> None:
        stored = config_from_manifest("generator", GeneratorConfig, ckpt.manifest)
        if stored != self.cfg.generator:
            raise ArchitectureMismatch(
                f"checkpoint generator {stored} is incompatible with {self.cfg.generator}"
            )

    def load_weights(self, ckpt: ModelCheckpoint) -> None:
        self.check_architecture(ckpt)
        load_module(self.generator, ckpt.subset("generator"), "generator")
        if self.critic is not None and ckpt.subset("critic"):
            stored = config_from_manifest("critic", CriticConfig, ckpt.manifest)
            if stored != self.cfg.critic:
                raise ArchitectureMismatch(f"checkpoint critic {stored} does not match {self.cfg.critic}")
            load_module(self.critic, ckpt.subset("critic"), "critic")

    def resume_from(self, ckpt: ModelCheckpoint) -> None:
        self.load_weights(ckpt)
        self.opt_g.restore("opt_g", ckpt)
        if self.critic is not None:
            if not ckpt.subset("critic"):
                raise ArchitectureMismatch("checkpoint has no critic to resume")
            self.opt_c.restore("opt_c", ckpt)
        self.step = int(ckpt.manifest.get("step", 0))
        lineage = ckpt.manifest.get("lineage", "")
        self.lineage = [x for x in lineage.split(",") if x]

    # the loop

    def run(
        self,
        dataset: PairedDataset,
        checkpoint_dir=None,
        log_path=None,
        on_step: Callable[[StepRecord], None] | None = None,
        limit: int | None = None,
    ) -> ModelCheckpoint:
        """Train until the epoch budget, ``max_steps`` or ``limit`` more steps."""
        tc = self.cfg.train
        lc = self.loss_cfg
        spe = self._spe = _steps_per_epoch(dataset, tc.batch)
        total = tc.epochs * spe
        if tc.max_steps:
            total = min(total, tc.max_steps)
        if limit is not None:
            total = min(total, self.step + limit)
        t0 = time.perf_counter()
        gen_params = nn_core.param_set(self.generator)
        critic_params = nn_core.param_set(self.critic) if self.critic is not None else {}
        jlog = _JsonLog(log_path)
        try:
            while self.step < total:
                epoch, pos = divmod(self.step, spe)
                pairs = dataset.train_pairs(epoch)
                lr_now = tc.lr_at(epoch)
                rec = StepRecord(self.step + 1, epoch, {}, math.nan)

                if self.critic is not None:
                    for k in range(lc.critic_steps):
                        pick = _rng(tc.seed, 4, self.step, k).choice(
                            len(pairs), size=min(tc.batch, len(pairs)), replace=False
                        )
                        real = to_batch([pairs[i].hr for i in pick])
                        with torch.no_grad():
                            fake = sr_forward(self.generator, to_batch([pairs[i].lr for i in pick]))
                        closs = critic_loss(
                            self.critic, real, fake, lc.lambda_gp,
                            generator=_torch_gen(tc.seed, 5, self.step, k),
                        )
                        if not _finite(closs.total):
                            raise Diverged(
                                f"critic loss became {float(closs.total.detach())} at step {self.step + 1}",
                                self.last_checkpoint,
                            )
                        nn_core.backward(closs.total, critic_params)
                        self.opt_c.step(lr_now)
                    rec.critic_loss = float(closs.total.detach())
                    rec.wasserstein_estimate = float(closs.wasserstein)
                    rec.gradient_penalty = float(closs.penalty)

                idx = _batch_indices(pairs, tc, epoch, pos)
                hr = to_batch([pairs[i].hr for i in idx])
                sr = sr_forward(self.generator, to_batch([pairs[i].lr for i in idx]))
                parts: dict[str, Tensor] = {}
                if lc.adversarial:
                    parts["adv"] = generator_adv_loss(self.critic, sr)
                if lc.feature_term:
                    parts[lc.feature_term] = perceptual_loss(self.encoder, sr, hr)
                gloss = total_generator_loss(lc, parts)
                if not _finite(gloss):
                    raise Diverged(
                        f"generator loss became {float(gloss.detach())} at step {self.step + 1}",
                        self.last_checkpoint,
                    )
                nn_core.backward(gloss, gen_params)
                self.opt_g.step(lr_now)
                self.step += 1
                rec.generator_loss = float(gloss.detach())
                rec.terms = {k: float(v.detach()) for k, v in parts.items()}
                self.history.append(rec)
                jlog.write({**rec.as_dict(), "wall_seconds": round(time.perf_counter() - t0, 3)})
                if on_step:
                    on_step(rec)

                if self.step % spe == 0:
                    self._end_of_epoch(dataset, epoch, jlog, checkpoint_dir)
        finally:
            jlog.close()
        return self.to_checkpoint()

    def _end_of_epoch(self, dataset, epoch, jlog, checkpoint_dir) -> None:
        if dataset.val_images:
            p, s = evaluate_pairs(self.generator, dataset.val_pairs())
            self.validation.append((self.step, p, s))
            jlog.write({"step": self.step, "epoch": epoch, "val_psnr": p, "val_ssim": s})
        every = self.cfg.train.checkpoint_every
        if checkpoint_dir and every and (epoch + 1) % every == 0:
            path = Path(checkpoint_dir) / f"epoch_{epoch + 1:04d}"
            self.to_checkpoint().save(path)
            self.last_checkpoint = str(path)


def _encoder_from(ckpt: ModelCheckpoint | None) -> PerceptualEncoder | None:
    if ckpt is None or not ckpt.subset("encoder"):
        return None
    return load_encoder(ckpt)


def train(
    dataset: PairedDataset,
    cfg: ExperimentConfig,
    initial: ModelCheckpoint | None = None,
    *,
    encoder: ModelCheckpoint | PerceptualEncoder | None = None,
    checkpoint_dir=None,
    log_path=None,
    on_step=None,
    extra_manifest: dict[str, str] | None = None,
) -> ModelCheckpoint:
    """Train (or resume, when ``initial`` is given) a super-resolution run."""
    if isinstance(encoder, ModelCheckpoint):
        encoder = load_encoder(encoder)
    if encoder is None:
        encoder = _encoder_from(initial)
    trainer = SRTrainer(cfg, encoder)
    trainer.extra_manifest = dict(extra_manifest or {})
    if initial is not None:
        trainer.resume_from(initial)
    return trainer.run(dataset, checkpoint_dir, log_path, on_step)


def finetune(
    checkpoint: ModelCheckpoint,
    dataset: PairedDataset,
    cfg: ExperimentConfig,
    *,
    encoder: ModelCheckpoint | PerceptualEncoder | None = None,
    checkpoint_dir=None,
    log_path=None,
    extra_manifest: dict[str, str] | None = None,
    steps: int | None = None,
) -> ModelCheckpoint:
    """Start from ``checkpoint``'s weights with fresh optimizer state and step 0.

    ``steps`` caps the number of updates; ``steps=0`` returns the parent
    weights unchanged under a new lineage.
    """
    if isinstance(encoder, ModelCheckpoint):
        encoder = load_encoder(encoder)
    if encoder is None:
        encoder = _encoder_from(checkpoint)
    trainer = SRTrainer(cfg, encoder)
    trainer.extra_manifest = dict(extra_manifest or {})
    trainer.load_weights(checkpoint)
    parent_lineage = [x for x in checkpoint.manifest.get("lineage", "").split(",") if x]
    trainer.lineage = parent_lineage + [checkpoint.checkpoint_id]
    return trainer.run(dataset, checkpoint_dir, log_path, limit=steps)


# -- experiment matrix ---------------------------------------------------------------

REPORT_COLUMNS = (
    "name", "variant", "rho", "status", "parameter_count", "memory_mb",
    "flops", "log10_flops", "inference_seconds", "psnr_db", "ssim",
    "bicubic_psnr_db", "bicubic_ssim", "final_generator_loss", "final_wasserstein",
)


@dataclass
class ExperimentReport:
    rows: list[dict]
    header: str = ""

    def to_tsv(self) -> str:
        lines = [f"# {self.header}"] if self.header else []
        lines.append("\t".join(REPORT_COLUMNS))
        for row in self.rows:
            lines.append("\t".join(_fmt(row.get(c, "")) for c in REPORT_COLUMNS))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def run_experiment_matrix(
    specs: Sequence[ExperimentConfig],
    dataset: PairedDataset,
    *,
    encoder: ModelCheckpoint | None = None,
    pretrain_cfg: TrainConfig | None = None,
    enc_cfg: PerceptualEncoderConfig | None = None,
    header: str = "",
) -> ExperimentReport:
    """Train and score every config on the same corpus, one report row each.

    A failing run is recorded with its error and does not stop the others.
    """
    if not specs:
        raise ValueError("experiment matrix needs at least one config")
    val = dataset.val_pairs()
    bic_p, bic_s = evaluate_pairs(None, val)
    rows = []
    for spec in specs:
        row = {"name": spec.name, "variant": spec.train.loss.variant, "rho": spec.generator.rho}
        try:
            if spec.train.loss.feature_term and encoder is None:
                encoder = pretrain_perceptual(dataset, pretrain_cfg or spec.train, enc_cfg)
            ckpt = train(dataset, spec, encoder=encoder if spec.train.loss.feature_term else None)
            gen = load_generator(ckpt)
            h, w = dataset.spec.patch_size, dataset.spec.patch_size
            sub = (h // 2 // spec.generator.upsample_factor, w // 2 // spec.generator.upsample_factor)
            cx = complexity_report(gen, (1, 4) + sub)
            p, s = evaluate_pairs(gen, val)
            row.update(
                status="ok",
                parameter_count=cx["parameter_count"],
                memory_mb=cx["memory_bytes_f32"] / 2**20,
                flops=cx["flops_estimate"],
                log10_flops=math.log10(cx["flops_estimate"]),
                inference_seconds=cx["inference_seconds"],
                psnr_db=p,
                ssim=s,
                final_generator_loss=float(ckpt.manifest.get("history.final_generator_loss", "nan")),
                final_wasserstein=float(ckpt.manifest.get("history.final_wasserstein_estimate", "nan")),
            )
        except Exception as exc:  # noqa: BLE001 - report and continue
            log.exception("experiment %s failed", spec.name)
            row["status"] = f"failed: {type(exc).__name__}: {exc}".replace("\t", " ")
        row.update(bicubic_psnr_db=bic_p, bicubic_ssim=bic_s)
        rows.append(row)
    return ExperimentReport(rows, header)
