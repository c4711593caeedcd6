"""PSNR and SSIM on byte-range images, plus folder evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .errors import (
    ImageSmallerThanWindow,
    MissingCounterpart,
    RangeTagMismatch,
    ShapeMismatch,
)
from .wavelet import Image

PEAK = 255.0


@dataclass(frozen=True)
class SsimConfig:
    mode: str = "windowed"
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = PEAK

    def __post_init__(self):
        if self.mode not in ("global", "windowed"):
            raise ValueError(f"ssim mode must be 'global' or 'windowed', got {self.mode!r}")

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2

    def describe(self) -> str:
        s = f"ssim_mode={self.mode} K1={self.k1} K2={self.k2} L={self.data_range:g}"
        if self.mode == "windowed":
            s += f" window={self.window} sigma={self.sigma}"
        return s


def _byte_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Bring both inputs to float64 byte range, checking tags and shapes.

    Bare arrays are taken to be byte range already.
    """
    if isinstance(a, Image) or isinstance(b, Image):
        tag_a = a.range_tag if isinstance(a, Image) else "byte"
        tag_b = b.range_tag if isinstance(b, Image) else "byte"
        if tag_a != tag_b:
            raise RangeTagMismatch(f"range tags differ: {tag_a} vs {tag_b}")
        if isinstance(a, Image):
            a = a.to_byte().pixels
        if isinstance(b, Image):
            b = b.to_byte().pixels
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def psnr(s, s_hat) -> float:
    x, y = _byte_pair(s, s_hat)
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(PEAK**2 / mse))


def _ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2):
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, y, cfg: SsimConfig | None = None) -> float:
    cfg = cfg or SsimConfig()
    a, b = _byte_pair(x, y)
    if cfg.mode == "global":
        mu_a, mu_b = a.mean(), b.mean()
        da, db = a - mu_a, b - mu_b
        var_a = np.mean(da * da)
        var_b = np.mean(db * db)
        cov = np.mean(da * db)
        return float(_ssim_formula(mu_a, mu_b, var_a, var_b, cov, cfg.c1, cfg.c2))

    if min(a.shape) < cfg.window:
        raise ImageSmallerThanWindow(
            f"image {a.shape[0]}x{a.shape[1]} is smaller than the {cfg.window}x{cfg.window} window"
        )
    win = gaussian_window(cfg.window, cfg.sigma)

    def filt(z):
        return convolve2d(z, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    smap = _ssim_formula(mu_a, mu_b, var_a, var_b, cov, cfg.c1, cfg.c2)
    return float(smap.mean())


@dataclass
class MetricTable:
    rows: list[tuple[str, float, float]]
    cfg: SsimConfig
    header_note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> tuple[float, float]:
        if not self.rows:
            return (math.nan, math.nan)
        p = float(np.mean([r[1] for r in self.rows]))
        s = float(np.mean([r[2] for r in self.rows]))
        return p, s

    def header(self) -> str:
        note = f" {self.header_note}" if self.header_note else ""
        return f"# {self.cfg.describe()}{note}"

    def to_tsv(self) -> str:
        lines = [self.header(), "filename\tpsnr_db\tssim"]
        for name, p, s in self.rows:
            lines.append(f"{name}\t{p:.4f}\t{s:.6f}")
        mp, ms = self.mean
        lines.append(f"mean\t{mp:.4f}\t{ms:.6f}")
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        recs = [{"config": self.cfg.describe(), "note": self.header_note}]
        recs += [{"filename": n, "psnr_db": p, "ssim": s} for n, p, s in self.rows]
        mp, ms = self.mean
        recs.append({"filename": "mean", "psnr_db": mp, "ssim": ms})
        # json has no infinity literal; keep the python spelling for readability
        return "\n".join(json.dumps(r, allow_nan=True) for r in recs) + "\n"


IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


def _list_images(folder: Path) -> list[Path]:
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def evaluate_folder(sr_dir, hr_dir, cfg: SsimConfig | None = None) -> MetricTable:
    """Score every HR image against the same-named file in ``sr_dir``."""
    from .data import load_image

    cfg = cfg or SsimConfig()
    sr_dir, hr_dir = Path(sr_dir), Path(hr_dir)
    hr_files = _list_images(hr_dir)
    for hr in hr_files:
        if not (sr_dir / hr.name).exists():
            raise MissingCounterpart(f"no counterpart for {hr.name} in {sr_dir}")
    rows = []
    for hr in hr_files:
        ref = load_image(hr).to_byte()
        out = load_image(sr_dir / hr.name).to_byte()
        rows.append((hr.name, psnr(ref, out), ssim(ref, out, cfg)))
    return MetricTable(rows, cfg, header_note="inputs rescaled from unit range x255")
