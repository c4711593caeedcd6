"""Image I/O, patch extraction, bicubic degradation and dataset splits."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import (
    EmptyDataset,
    ImageTooSmall,
    IndivisibleDims,
    UnreadableImage,
    UnsupportedFormat,
)
from .networks import MODES
from .nn_core import interpolate
from .wavelet import Image

SUPPORTED_FORMATS = {"PNG", "PPM"}  # PIL reports PGM/PPM/PNM as PPM
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def load_image(path) -> Image:
    """Read a PNG or PGM/PPM file as a unit-range grayscale :class:`Image`."""
    return Image(read_pixels(path), "unit", str(path))


def read_pixels(path) -> np.ndarray:
    """Unit-range grayscale pixels of a PNG or PGM/PPM file, any size.

    Unlike :func:`load_image` this accepts rasters thinner than 2 pixels,
    which stored subbands of 2-pixel images are.
    """
    path = Path(path)
    try:
        pil = PILImage.open(path)
        pil.load()
    except (FileNotFoundError, IsADirectoryError, UnidentifiedImageError, OSError) as exc:
        raise UnreadableImage(f"cannot read image {path}: {exc}") from exc
    if pil.format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"{path}: format {pil.format} is not PNG or PGM/PPM")

    mode = pil.mode
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        px = np.asarray(pil, dtype=np.float64) / 65535.0
    elif mode in ("L", "1", "P", "LA", "PA"):
        px = np.asarray(pil.convert("L"), dtype=np.float64) / 255.0
    elif mode in ("RGB", "RGBA"):
        rgb = np.asarray(pil.convert("RGB"), dtype=np.float64) / 255.0
        px = rgb @ np.array(LUMA_WEIGHTS)
    else:
        raise UnsupportedFormat(f"{path}: pixel mode {mode} not supported")
    return np.clip(px, 0.0, 1.0)


def save_image(path, image: Image | np.ndarray, bits: int = 8) -> Path:
    """Write a unit-range image as an 8- or 16-bit grayscale PNG."""
    path = Path(path)
    px = image.to_unit().pixels if isinstance(image, Image) else np.asarray(image)
    px = np.clip(px, 0.0, 1.0)
    if bits == 8:
        pil = PILImage.fromarray(np.round(px * 255.0).astype(np.uint8), mode="L")
    elif bits == 16:
        pil = PILImage.fromarray(np.round(px * 65535.0).astype(np.uint16))
    else:
        raise ValueError("bits must be 8 or 16")
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")
    return path


@dataclass
class DatasetSpec:
    root: str = "."
    glob: str = "*.png"
    train_fraction: float = 0.8
    val_fraction: float = 0.2
    patch_size: int = 56
    patches_per_image: int = 4
    seed: int = 0
    scale: int = 2
    mode: str = "pre_interpolated"

    def __post_init__(self):
        if abs(self.train_fraction + self.val_fraction - 1.0) > 1e-9:
            raise ValueError("train_fraction and val_fraction must sum to 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.patch_size % (2 * self.scale):
            raise ValueError(
                f"patch_size {self.patch_size} must be divisible by 2*scale = {2 * self.scale}"
            )
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.patches_per_image < 1:
            raise ValueError("patches_per_image must be positive")


@dataclass(frozen=True)
class PatchPair:
    hr: Image
    scale: int
    mode: str
    lr_pre: Image | None = None
    lr_raw: Image | None = None
    source_id: str = ""

    def __post_init__(self):
        h, w = self.hr.shape
        s = self.scale
        if h % (2 * s) or w % (2 * s):
            raise IndivisibleDims(f"hr patch {h}x{w} not divisible by 2*scale={2 * s}")
        if self.mode == "pre_interpolated":
            if self.lr_pre is None or self.lr_pre.shape != (h, w):
                raise ValueError("pre_interpolated pairs need lr_pre at hr size")
        elif self.lr_raw is None or self.lr_raw.shape != (h // s, w // s):
            raise ValueError("progressive pairs need lr_raw at hr size / scale")

    @property
    def lr(self) -> Image:
        """The network-side input for this pair's pipeline mode."""
        return self.lr_pre if self.mode == "pre_interpolated" else self.lr_raw


def crop_origins(shape: tuple[int, int], patch: int, n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    h, w = shape
    if h < patch or w < patch:
        raise ImageTooSmall(f"image {h}x{w} is smaller than patch size {patch}")
    ys = rng.integers(0, h - patch + 1, size=n)
    xs = rng.integers(0, w - patch + 1, size=n)
    return [(int(y), int(x)) for y, x in zip(ys, xs)]


def extract_patches(img: Image, spec: DatasetSpec, n: int | None = None, seed: int | None = None) -> list[Image]:
    n = spec.patches_per_image if n is None else n
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    p = spec.patch_size
    return [
        Image(img.pixels[y : y + p, x : x + p], img.range_tag, img.source_path)
        for y, x in crop_origins(img.shape, p, n, rng)
    ]


def resize_bicubic(px: np.ndarray, factor) -> np.ndarray:
    t = torch.as_tensor(np.asarray(px, dtype=np.float64))
    return interpolate(t, factor, "bicubic").numpy()


def degrade(hr: Image, s: int, mode: str = "pre_interpolated") -> PatchPair:
    """Bicubic downsample by ``s``; pre_interpolated mode re-upsamples to hr size."""
    h, w = hr.shape
    if h % (2 * s) or w % (2 * s):
        raise IndivisibleDims(f"image {h}x{w} not divisible by 2*scale={2 * s}")
    hr = hr.to_unit()
    small = np.clip(resize_bicubic(hr.pixels, Fraction(1, s)), 0.0, 1.0)
    src = hr.source_path or ""
    if mode == "pre_interpolated":
        up = np.clip(resize_bicubic(small, s), 0.0, 1.0)
        return PatchPair(hr, s, mode, lr_pre=Image(up, "unit", src), source_id=src)
    if mode == "progressive":
        return PatchPair(hr, s, mode, lr_raw=Image(small, "unit", src), source_id=src)
    raise ValueError(f"unknown mode {mode!r}")


def bicubic_upscale(lr: Image, s: int) -> Image:
    return Image(np.clip(resize_bicubic(lr.to_unit().pixels, s), 0.0, 1.0), "unit", lr.source_path)


@dataclass
class PairedDataset:
    """Train/val images after a file-level split; pairs are generated on demand."""

    spec: DatasetSpec
    train_images: list[Image]
    val_images: list[Image]
    _train_cache: dict = field(default_factory=dict, repr=False)
    _val_cache: list | None = field(default=None, repr=False)

    def train_pairs(self, epoch: int = 0) -> list[PatchPair]:
        """Seeded random crops for ``epoch``; the same epoch always gives the same list."""
        if epoch not in self._train_cache:
            self._train_cache.clear()
            seed = np.random.SeedSequence([self.spec.seed, 1, epoch])
            self._train_cache[epoch] = self._pairs(self.train_images, seed)
        return self._train_cache[epoch]

    def val_pairs(self) -> list[PatchPair]:
        if self._val_cache is None:
            seed = np.random.SeedSequence([self.spec.seed, 2])
            self._val_cache = self._pairs(self.val_images, seed)
        return self._val_cache

    def _pairs(self, images: Sequence[Image], seed: np.random.SeedSequence) -> list[PatchPair]:
        rng = np.random.default_rng(seed)
        out = []
        for img in images:
            for y, x in crop_origins(img.shape, self.spec.patch_size, self.spec.patches_per_image, rng):
                p = self.spec.patch_size
                patch = Image(img.pixels[y : y + p, x : x + p], "unit", img.source_path)
                out.append(degrade(patch, self.spec.scale, self.spec.mode))
        return out

    def iter_train(self, epoch: int = 0) -> Iterator[PatchPair]:
        yield from self.train_pairs(epoch)


def split_files(items: Sequence, spec: DatasetSpec) -> tuple[list, list]:
    if len(items) < 2:
        raise EmptyDataset(f"need at least 2 images to split, found {len(items)}")
    order = list(items)
    random.Random(spec.seed).shuffle(order)
    n_train = int(round(spec.train_fraction * len(order)))
    n_train = min(max(n_train, 1), len(order) - 1)
    return order[:n_train], order[n_train:]


def dataset_from_images(images: Sequence[Image], spec: DatasetSpec) -> PairedDataset:
    train, val = split_files(list(images), spec)
    return PairedDataset(spec, train, val)


def build_dataset(spec: DatasetSpec) -> PairedDataset:
    root = Path(spec.root)
    files = sorted(p for p in root.glob(spec.glob) if p.is_file())
    if len(files) < 2:
        raise EmptyDataset(f"{root}/{spec.glob} matched {len(files)} file(s); need at least 2")
    train_files, val_files = split_files(files, spec)
    return PairedDataset(
        spec,
        [load_image(p) for p in train_files],
        [load_image(p) for p in val_files],
    )


# -- synthetic corpus -------------------------------------------------------------

def synthetic_shapes(n: int, size: int = 64, seed: int = 0) -> list[Image]:
    """Piecewise-smooth test images: gradients, rectangles, discs and bars."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    images = []
    for i in range(n):
        gx, gy = rng.uniform(-0.3, 0.3, size=2)
        img = rng.uniform(0.2, 0.6) + gx * (xx - 0.5) + gy * (yy - 0.5)
        for _ in range(rng.integers(3, 7)):
            kind = rng.integers(0, 3)
            level = rng.uniform(0.0, 1.0)
            if kind == 0:
                x0, y0 = rng.uniform(0, 0.8, size=2)
                w, h = rng.uniform(0.1, 0.5, size=2)
                mask = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
            elif kind == 1:
                cx, cy = rng.uniform(0.1, 0.9, size=2)
                r = rng.uniform(0.05, 0.3)
                mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
            else:
                angle = rng.uniform(0, np.pi)
                offset = rng.uniform(-0.4, 0.4)
                width = rng.uniform(0.02, 0.08)
                d = (xx - 0.5) * np.cos(angle) + (yy - 0.5) * np.sin(angle) - offset
                mask = np.abs(d) < width
            img = np.where(mask, level, img)
        images.append(Image(np.clip(img, 0.0, 1.0), "unit", f"shape_{i:03d}"))
    return images


def write_synthetic_corpus(folder, n: int = 32, size: int = 64, seed: int = 0) -> list[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    return [
        save_image(folder / f"shape_{i:03d}.png", img)
        for i, img in enumerate(synthetic_shapes(n, size, seed))
    ]
