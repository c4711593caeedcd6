import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavesr.data import save_image
from wavesr.errors import (
    ImageSmallerThanWindow,
    MissingCounterpart,
    RangeTagMismatch,
    ShapeMismatch,
)
from wavesr.metrics import SsimConfig, evaluate_folder, gaussian_window, psnr, ssim
from wavesr.wavelet import Image

GLOBAL = SsimConfig("global")
byte_images = arrays(np.float64, (12, 12), elements=st.floats(0, 255))


def direct_global_ssim(x, y, k1=0.01, k2=0.03, peak=255.0):
    n = x.size
    mx = sum(x.ravel()) / n
    my = sum(y.ravel()) / n
    vx = sum((a - mx) ** 2 for a in x.ravel()) / n
    vy = sum((b - my) ** 2 for b in y.ravel()) / n
    cxy = sum((a - mx) * (b - my) for a, b in zip(x.ravel(), y.ravel())) / n
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))


def test_psnr_examples():
    a = np.full((4, 4), 100.0)
    assert psnr(a, a) == math.inf
    assert psnr(a, a + 1) == pytest.approx(20 * math.log10(255), abs=1e-9)
    assert psnr(a, a + 1) == pytest.approx(48.1308, abs=1e-3)
    assert psnr(np.zeros((3, 3)), np.full((3, 3), 255.0)) == pytest.approx(0.0, abs=1e-12)


def test_psnr_unit_images_are_rescaled():
    a = Image(np.zeros((4, 4)), "unit")
    b = Image(np.full((4, 4), 1 / 255), "unit")
    assert psnr(a, b) == pytest.approx(48.1308, abs=1e-3)


def test_metric_errors():
    with pytest.raises(ShapeMismatch):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(RangeTagMismatch):
        psnr(Image(np.zeros((2, 2)), "unit"), Image(np.zeros((2, 2)), "byte"))
    with pytest.raises(ImageSmallerThanWindow):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_ssim_constant_pair_closed_form():
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    expected = (c1 * c2) / ((255**2 + c1) * c2)
    got = ssim(np.zeros((8, 8)), np.full((8, 8), 255.0), GLOBAL)
    assert got == pytest.approx(expected, abs=1e-15)
    assert abs(got - 9.9998e-5) <= 1e-8


def test_ssim_global_matches_direct_recomputation():
    rng = np.random.default_rng(4)
    x, y = rng.uniform(0, 255, (8, 8)), rng.uniform(0, 255, (8, 8))
    assert abs(ssim(x, y, GLOBAL) - direct_global_ssim(x, y)) <= 1e-10


def brute_windowed_ssim(x, y, cfg):
    win = gaussian_window(cfg.window, cfg.sigma)
    k = cfg.window
    vals = []
    for i in range(x.shape[0] - k + 1):
        for j in range(x.shape[1] - k + 1):
            a, b = x[i : i + k, j : j + k], y[i : i + k, j : j + k]
            ma, mb = (win * a).sum(), (win * b).sum()
            va = (win * (a - ma) ** 2).sum()
            vb = (win * (b - mb) ** 2).sum()
            cov = (win * (a - ma) * (b - mb)).sum()
            vals.append(((2 * ma * mb + cfg.c1) * (2 * cov + cfg.c2)) / ((ma**2 + mb**2 + cfg.c1) * (va + vb + cfg.c2)))
    return float(np.mean(vals))


def test_windowed_ssim_matches_window_loop():
    rng = np.random.default_rng(5)
    x, y = rng.uniform(0, 255, (14, 13)), rng.uniform(0, 255, (14, 13))
    cfg = SsimConfig()
    assert ssim(x, y, cfg) == pytest.approx(brute_windowed_ssim(x, y, cfg), abs=1e-9)


def test_gaussian_window():
    w = gaussian_window()
    assert w.shape == (11, 11) and w.sum() == pytest.approx(1.0)
    assert w[5, 5] == w.max()


@settings(max_examples=50, deadline=None)
@given(byte_images)
def test_self_similarity_is_exactly_one(x):
    assert ssim(x, x, GLOBAL) == 1.0
    assert ssim(x, x, SsimConfig()) == 1.0


@settings(max_examples=50, deadline=None)
@given(byte_images, byte_images)
def test_symmetry(x, y):
    assert psnr(x, y) == psnr(y, x)
    assert ssim(x, y, GLOBAL) == ssim(y, x, GLOBAL)
    assert ssim(x, y) == ssim(y, x)


def test_psnr_monotone_in_noise():
    rng = np.random.default_rng(0)
    base = rng.uniform(50, 200, (32, 32))
    noise = rng.standard_normal((32, 32))
    values = [psnr(base, base + a * noise) for a in (1, 4, 16)]
    assert values[0] > values[1] > values[2]


def test_metrics_are_pure():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 255, (16, 16)), rng.uniform(0, 255, (16, 16))
    assert psnr(x, y) == psnr(x, y)
    assert ssim(x, y) == ssim(x, y)


def test_ssim_config_constants_and_description():
    cfg = SsimConfig()
    assert cfg.c1 == pytest.approx(6.5025)
    assert cfg.c2 == pytest.approx(58.5225)
    assert "windowed" in cfg.describe() and "global" in GLOBAL.describe()
    with pytest.raises(ValueError):
        SsimConfig("local")


def _folder(tmp_path, name, arrays_):
    d = tmp_path / name
    d.mkdir()
    for fname, arr in arrays_.items():
        save_image(d / fname, Image(arr / 255.0))
    return d


def test_evaluate_folder_identical(tmp_path):
    rng = np.random.default_rng(2)
    imgs = {f"im{i}.png": np.round(rng.uniform(0, 255, (16, 16))) for i in range(3)}
    hr = _folder(tmp_path, "hr", imgs)
    sr = _folder(tmp_path, "sr", imgs)
    table = evaluate_folder(sr, hr)
    assert [r[0] for r in table.rows] == ["im0.png", "im1.png", "im2.png"]
    assert all(r[1] == math.inf and r[2] == 1.0 for r in table.rows)


def test_evaluate_folder_mean_and_outputs(tmp_path):
    rng = np.random.default_rng(3)
    base = {n: np.round(rng.uniform(0, 255, (16, 16))) for n in ("b.png", "a.png")}
    noisy = {n: np.clip(v + rng.integers(-9, 10, v.shape), 0, 255) for n, v in base.items()}
    table = evaluate_folder(_folder(tmp_path, "sr", noisy), _folder(tmp_path, "hr", base), GLOBAL)
    assert [r[0] for r in table.rows] == ["a.png", "b.png"]
    mp, ms = table.mean
    assert mp == pytest.approx((table.rows[0][1] + table.rows[1][1]) / 2)
    assert ms == pytest.approx((table.rows[0][2] + table.rows[1][2]) / 2)
    tsv = table.to_tsv().splitlines()
    assert tsv[0].startswith("# ssim_mode=global")
    assert tsv[1] == "filename\tpsnr_db\tssim"
    assert tsv[-1].startswith("mean\t")
    recs = [json.loads(line) for line in table.to_jsonl().splitlines()]
    assert recs[-1]["filename"] == "mean" and len(recs) == 4


def test_evaluate_folder_missing(tmp_path):
    img = {"x.png": np.zeros((12, 12))}
    hr = _folder(tmp_path, "hr", {**img, "y.png": np.zeros((12, 12))})
    sr = _folder(tmp_path, "sr", img)
    with pytest.raises(MissingCounterpart, match="y.png"):
        evaluate_folder(sr, hr)
