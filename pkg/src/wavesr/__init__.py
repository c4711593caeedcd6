"""Wavelet-domain super-resolution with attention and a WGAN-GP critic."""

from .checkpoint import ModelCheckpoint
from .data import DatasetSpec, PairedDataset, PatchPair, build_dataset, dataset_from_images, degrade, load_image, save_image
from .losses import LossConfig, critic_loss, gradient_penalty, perceptual_loss
from .metrics import SsimConfig, psnr, ssim
from .networks import Critic, CriticConfig, Generator, GeneratorConfig, PerceptualEncoder, PerceptualEncoderConfig
from .pipeline import super_resolve
from .trainer import ExperimentConfig, TrainConfig, finetune, pretrain_perceptual, run_experiment_matrix, train
from .wavelet import Image, SubbandSet, dwt2_haar, idwt2_haar

__version__ = "0.1.0"
