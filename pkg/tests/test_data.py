import numpy as np
import pytest
from PIL import Image as PILImage

from wavesr.data import (
    DatasetSpec,
    PatchPair,
    build_dataset,
    crop_origins,
    dataset_from_images,
    degrade,
    extract_patches,
    load_image,
    save_image,
    synthetic_shapes,
    write_synthetic_corpus,
)
from wavesr.errors import (
    EmptyDataset,
    ImageTooSmall,
    IndivisibleDims,
    UnreadableImage,
    UnsupportedFormat,
)
from wavesr.metrics import psnr
from wavesr.wavelet import Image


def test_load_gray_8bit(tmp_path):
    p = tmp_path / "g.png"
    PILImage.fromarray(np.full((4, 6), 128, np.uint8), "L").save(p)
    img = load_image(p)
    assert img.shape == (4, 6) and img.range_tag == "unit"
    assert img.pixels[0, 0] == 128 / 255


def test_load_red_rgb(tmp_path):
    p = tmp_path / "r.png"
    rgb = np.zeros((2, 2, 3), np.uint8)
    rgb[..., 0] = 255
    PILImage.fromarray(rgb, "RGB").save(p)
    assert load_image(p).pixels[0, 0] == pytest.approx(0.299)


def test_load_16bit_and_pgm(tmp_path):
    p16 = tmp_path / "w.png"
    PILImage.fromarray(np.full((3, 3), 65535 // 5, np.uint16)).save(p16)
    assert load_image(p16).pixels[1, 1] == pytest.approx((65535 // 5) / 65535)
    pgm = tmp_path / "x.pgm"
    PILImage.fromarray(np.full((4, 4), 51, np.uint8), "L").save(pgm)
    assert load_image(pgm).pixels[0, 0] == pytest.approx(0.2)


def test_load_errors(tmp_path):
    with pytest.raises(UnreadableImage):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(UnreadableImage):
        load_image(bad)
    bmp = tmp_path / "a.bmp"
    PILImage.fromarray(np.zeros((2, 2), np.uint8), "L").save(bmp)
    with pytest.raises(UnsupportedFormat):
        load_image(bmp)


def test_save_load_round_trip(tmp_path):
    px = np.round(np.random.default_rng(0).random((6, 8)) * 255) / 255
    for bits in (8, 16):
        p = save_image(tmp_path / f"r{bits}.png", Image(px), bits)
        np.testing.assert_allclose(load_image(p).pixels, px, atol=1e-12)


def test_extract_patches():
    spec = DatasetSpec(patch_size=56, seed=3)
    img = Image(np.random.default_rng(0).random((56, 56)))
    patches = extract_patches(img, spec, n=5)
    assert len(patches) == 5 and all(np.array_equal(p.pixels, img.pixels) for p in patches)
    big = Image(np.random.default_rng(1).random((80, 90)))
    a = extract_patches(big, spec, n=6)
    b = extract_patches(big, spec, n=6)
    assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))
    assert all(p.shape == (56, 56) for p in a)
    with pytest.raises(ImageTooSmall):
        extract_patches(Image(np.zeros((40, 40))), spec)


def test_crop_origins_inside_image():
    rng = np.random.default_rng(7)
    for y, x in crop_origins((70, 61), 16, 200, rng):
        assert 0 <= y <= 70 - 16 and 0 <= x <= 61 - 16


def test_degrade_sizes_and_constants():
    hr = Image(np.random.default_rng(0).random((56, 56)))
    pre = degrade(hr, 2, "pre_interpolated")
    prog = degrade(hr, 2, "progressive")
    assert pre.lr_pre.shape == (56, 56) and pre.lr is pre.lr_pre
    assert prog.lr_raw.shape == (28, 28) and prog.lr is prog.lr_raw
    const = degrade(Image(np.full((16, 16), 0.4)), 4, "pre_interpolated")
    assert np.max(np.abs(const.lr_pre.pixels - 0.4)) < 1e-12
    p = psnr(hr.to_byte(), pre.lr_pre.to_byte())
    assert np.isfinite(p)
    with pytest.raises(IndivisibleDims):
        degrade(Image(np.zeros((18, 18))), 4)


def test_degrade_is_reproducible():
    hr = Image(np.random.default_rng(5).random((32, 32)))
    a, b = degrade(hr, 2), degrade(hr, 2)
    assert np.array_equal(a.lr_pre.pixels, b.lr_pre.pixels)


def test_patch_pair_invariants():
    hr = Image(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        PatchPair(hr, 2, "pre_interpolated", lr_pre=Image(np.zeros((4, 4))))
    with pytest.raises(IndivisibleDims):
        PatchPair(Image(np.zeros((6, 6))), 2, "progressive", lr_raw=Image(np.zeros((3, 3))))


def test_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec(train_fraction=0.7, val_fraction=0.2)
    with pytest.raises(ValueError):
        DatasetSpec(patch_size=54, scale=4)


def test_build_dataset_split(tmp_path):
    write_synthetic_corpus(tmp_path, n=10, size=32)
    spec = DatasetSpec(root=str(tmp_path), patch_size=16, seed=4)
    ds = build_dataset(spec)
    assert len(ds.train_images) == 8 and len(ds.val_images) == 2
    again = build_dataset(spec)
    assert [i.source_path for i in ds.val_images] == [i.source_path for i in again.val_images]
    train_src = {i.source_path for i in ds.train_images}
    assert not train_src & {i.source_path for i in ds.val_images}
    assert all(p.source_id in train_src for p in ds.train_pairs(0))
    assert all(p.source_id not in train_src for p in ds.val_pairs())


def test_pairs_are_seeded_per_epoch():
    ds = dataset_from_images(synthetic_shapes(6, 32), DatasetSpec(patch_size=16, patches_per_image=3))
    e0 = [p.hr.pixels for p in ds.train_pairs(0)]
    e1 = [p.hr.pixels for p in ds.train_pairs(1)]
    e0b = [p.hr.pixels for p in ds.train_pairs(0)]
    assert all(np.array_equal(a, b) for a, b in zip(e0, e0b))
    assert not all(np.array_equal(a, b) for a, b in zip(e0, e1))
    assert len(e0) == len(ds.train_images) * 3


def test_too_few_images(tmp_path):
    write_synthetic_corpus(tmp_path, n=1, size=16)
    with pytest.raises(EmptyDataset):
        build_dataset(DatasetSpec(root=str(tmp_path), patch_size=16))


def test_synthetic_shapes_deterministic():
    a, b = synthetic_shapes(3, 32, seed=1), synthetic_shapes(3, 32, seed=1)
    assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))
    assert all(0 <= x.pixels.min() and x.pixels.max() <= 1 for x in a)
