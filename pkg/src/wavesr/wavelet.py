"""Level-1 Haar wavelet analysis/synthesis on 2-D grayscale rasters.

Forward transform uses block averages (scale 1/4) so that the synthesis
step has unit coefficients. For every 2x2 block::

    A B      ll = (A + B + C + D) / 4     A = ll + lh + hl + hh
    C D      lh = (A - B + C - D) / 4     B = ll - lh + hl - hh
             hl = (A + B - C - D) / 4     C = ll + lh - hl - hh
             hh = (A - B - C + D) / 4     D = ll - lh - hl + hh

``lh`` carries the column difference (vertical edges), ``hl`` the row
difference (horizontal edges) and ``hh`` the diagonal detail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import torch

from .errors import OddDimension, ShapeMismatch

FORWARD_SCALE = 0.25
BANDS = ("ll", "lh", "hl", "hh")

RangeTag = Literal["unit", "byte"]
# float round-off allowance when checking the declared range
RANGE_TOLERANCE = 1e-5
_RANGE_MAX = {"unit": 1.0, "byte": 255.0}


@dataclass(frozen=True)
class Image:
    """A single-channel raster with a declared value range."""

    pixels: np.ndarray
    range_tag: RangeTag = "unit"
    source_path: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"image must be 2-D, got shape {px.shape}")
        if px.shape[0] < 2 or px.shape[1] < 2:
            raise ValueError(f"image must be at least 2x2, got {px.shape}")
        if self.range_tag not in _RANGE_MAX:
            raise ValueError(f"unknown range tag {self.range_tag!r}")
        if not np.all(np.isfinite(px)):
            raise ValueError("image contains non-finite values")
        peak = _RANGE_MAX[self.range_tag]
        tol = RANGE_TOLERANCE * peak
        if px.min() < -tol or px.max() > peak + tol:
            raise ValueError(
                f"values outside the {self.range_tag} range "
                f"[0, {_RANGE_MAX[self.range_tag]:g}]"
            )
        if not np.issubdtype(px.dtype, np.floating):
            px = px.astype(np.float64)
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def peak(self) -> float:
        return _RANGE_MAX[self.range_tag]

    def to_byte(self) -> Image:
        if self.range_tag == "byte":
            return self
        return Image(self.pixels * 255.0, "byte", self.source_path)

    def to_unit(self) -> Image:
        if self.range_tag == "unit":
            return self
        return Image(self.pixels / 255.0, "unit", self.source_path)


@dataclass(frozen=True)
class SubbandSet:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    parent_shape: tuple[int, int] = field(default=None)

    def __post_init__(self):
        shapes = {np.shape(b) for b in self.bands()}
        if len(shapes) != 1:
            raise ShapeMismatch(f"subbands differ in shape: {sorted(shapes)}")
        (shape,) = shapes
        if len(shape) != 2:
            raise ShapeMismatch(f"subbands must be 2-D, got {shape}")
        expected = (2 * shape[0], 2 * shape[1])
        if self.parent_shape is None:
            object.__setattr__(self, "parent_shape", expected)
        elif tuple(self.parent_shape) != expected:
            raise ShapeMismatch(
                f"parent_shape {tuple(self.parent_shape)} does not match "
                f"subband shape {shape} (expected {expected})"
            )

    def bands(self) -> tuple[np.ndarray, ...]:
        return (self.ll, self.lh, self.hl, self.hh)

    def stack(self) -> np.ndarray:
        """Bands as a (4, h, w) array in LL, LH, HL, HH order."""
        return np.stack(self.bands())

    @classmethod
    def from_stack(cls, arr: np.ndarray) -> SubbandSet:
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise ShapeMismatch(f"expected a (4, h, w) stack, got {arr.shape}")
        return cls(arr[0], arr[1], arr[2], arr[3])


def _analysis(x):
    # works on numpy arrays and torch tensors alike; last two axes are spatial
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    ll = (a + b + c + d) * FORWARD_SCALE
    lh = (a - b + c - d) * FORWARD_SCALE
    hl = (a + b - c - d) * FORWARD_SCALE
    hh = (a - b - c + d) * FORWARD_SCALE
    return ll, lh, hl, hh


def _synthesis_blocks(ll, lh, hl, hh):
    return (
        ll + lh + hl + hh,
        ll - lh + hl - hh,
        ll + lh - hl - hh,
        ll - lh - hl + hh,
    )


def _check_even(h: int, w: int) -> None:
    if h % 2 or w % 2:
        which = "height" if h % 2 else "width"
        raise OddDimension(
            f"image {which} is odd ({h}x{w}); crop or pad to even size first"
        )


def dwt2_haar(image: Image | np.ndarray) -> SubbandSet:
    px = image.pixels if isinstance(image, Image) else np.asarray(image)
    h, w = px.shape
    _check_even(h, w)
    ll, lh, hl, hh = _analysis(px)
    return SubbandSet(ll, lh, hl, hh, parent_shape=(h, w))


def idwt2_haar(subbands: SubbandSet, range_tag: RangeTag | str | None = "auto") -> Image | np.ndarray:
    """Exact inverse of :func:`dwt2_haar`.

    ``range_tag="auto"`` tags the result with the narrowest range that holds
    it. ``range_tag=None`` returns the bare array, for reconstructions that
    may overshoot (network outputs before clipping).
    """
    bands = [np.asarray(b) for b in subbands.bands()]
    if len({b.shape for b in bands}) != 1:
        raise ShapeMismatch("subbands differ in shape")
    h, w = bands[0].shape
    out = np.empty((2 * h, 2 * w), dtype=np.result_type(*bands))
    A, B, C, D = _synthesis_blocks(*bands)
    out[0::2, 0::2] = A
    out[0::2, 1::2] = B
    out[1::2, 0::2] = C
    out[1::2, 1::2] = D
    if range_tag is None:
        return out
    if range_tag == "auto":
        range_tag = _narrowest_tag(out)
    return Image(out, range_tag)


def _narrowest_tag(px: np.ndarray) -> RangeTag:
    lo, hi = float(px.min()), float(px.max())
    for tag, peak in _RANGE_MAX.items():
        tol = RANGE_TOLERANCE * peak
        if lo >= -tol and hi <= peak + tol:
            return tag
    raise ValueError(
        f"reconstruction spans [{lo:g}, {hi:g}], outside every image range; "
        "pass range_tag=None for the raw array"
    )


def dwt2_haar_tensor(x: torch.Tensor) -> torch.Tensor:
    """Batched, differentiable analysis: (N, 1, H, W) -> (N, 4, H/2, W/2)."""
    if x.dim() != 4 or x.shape[1] != 1:
        raise ShapeMismatch(f"expected (N, 1, H, W), got {tuple(x.shape)}")
    _check_even(x.shape[-2], x.shape[-1])
    return torch.cat(_analysis(x), dim=1)


def idwt2_haar_tensor(s: torch.Tensor) -> torch.Tensor:
    """Batched, differentiable synthesis: (N, 4, h, w) -> (N, 1, 2h, 2w)."""
    if s.dim() != 4 or s.shape[1] != 4:
        raise ShapeMismatch(f"expected (N, 4, h, w), got {tuple(s.shape)}")
    n, _, h, w = s.shape
    A, B, C, D = _synthesis_blocks(s[:, 0], s[:, 1], s[:, 2], s[:, 3])
    top = torch.stack((A, B), dim=-1).reshape(n, h, 2 * w)
    bottom = torch.stack((C, D), dim=-1).reshape(n, h, 2 * w)
    return torch.stack((top, bottom), dim=2).reshape(n, 1, 2 * h, 2 * w)
