import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavesr.errors import OddDimension, ShapeMismatch
from wavesr.wavelet import (
    Image,
    SubbandSet,
    dwt2_haar,
    dwt2_haar_tensor,
    idwt2_haar,
    idwt2_haar_tensor,
)


def brute_dwt(px):
    """Per-block loop over the four textbook Haar formulas."""
    h, w = px.shape
    out = np.zeros((4, h // 2, w // 2))
    for i in range(h // 2):
        for j in range(w // 2):
            a, b = px[2 * i, 2 * j], px[2 * i, 2 * j + 1]
            c, d = px[2 * i + 1, 2 * j], px[2 * i + 1, 2 * j + 1]
            out[:, i, j] = [(a + b + c + d) / 4, (a - b + c - d) / 4, (a + b - c - d) / 4, (a - b - c + d) / 4]
    return out


even_images = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda hw: arrays(np.float64, (2 * hw[0], 2 * hw[1]), elements=st.floats(0, 1))
)


def test_hand_example_forward():
    sub = dwt2_haar(Image(np.array([[1.0, 2.0], [3.0, 4.0]]), "byte"))
    assert sub.ll.tolist() == [[2.5]]
    assert sub.lh.tolist() == [[-0.5]]
    assert sub.hl.tolist() == [[-1.0]]
    assert sub.hh.tolist() == [[0.0]]
    assert sub.parent_shape == (2, 2)


def test_hand_example_inverse():
    sub = SubbandSet(np.array([[2.5]]), np.array([[-0.5]]), np.array([[-1.0]]), np.array([[0.0]]))
    img = idwt2_haar(sub)
    assert img.pixels.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert img.range_tag == "unit" or img.range_tag == "byte"


def test_constant_image_has_no_detail():
    sub = dwt2_haar(np.full((2, 2), 4.0))
    assert sub.ll.tolist() == [[4.0]]
    assert not sub.lh.any() and not sub.hl.any() and not sub.hh.any()


def test_odd_dimension_names_axis():
    with pytest.raises(OddDimension, match="height"):
        dwt2_haar(np.zeros((3, 2)))
    with pytest.raises(OddDimension, match="width"):
        dwt2_haar(np.zeros((4, 5)))


def test_zero_subbands_give_zero_image():
    z = np.zeros((3, 5))
    out = idwt2_haar(SubbandSet(z, z, z, z))
    assert out.shape == (6, 10) and not out.pixels.any()


def test_subband_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        SubbandSet(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(ShapeMismatch):
        SubbandSet(*(np.zeros((2, 2)),) * 4, parent_shape=(4, 6))


def test_idwt_overshoot_needs_raw_mode():
    sub = SubbandSet(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    with pytest.raises(ValueError):
        idwt2_haar(sub, "unit")
    raw = idwt2_haar(sub, None)
    assert raw.tolist() == [[4.0, 0.0], [0.0, 0.0]]


@settings(max_examples=60, deadline=None)
@given(even_images)
def test_matches_brute_force(px):
    sub = dwt2_haar(px)
    np.testing.assert_allclose(sub.stack(), brute_dwt(px), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(even_images)
def test_perfect_reconstruction_64bit(px):
    back = idwt2_haar(dwt2_haar(Image(px)), None)
    assert np.max(np.abs(back - px)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(even_images, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(px, a, b):
    y = np.flipud(px).copy()
    lhs = dwt2_haar(a * px + b * y).stack()
    rhs = a * dwt2_haar(px).stack() + b * dwt2_haar(y).stack()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(even_images)
def test_energy_bound(px):
    assert np.abs(dwt2_haar(px).ll).max() <= np.abs(px).max() + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.floats(-5, 5))
def test_constant_property(h, w, c):
    sub = dwt2_haar(np.full((2 * h, 2 * w), c))
    assert np.all(sub.ll == c)
    assert not (sub.lh.any() or sub.hl.any() or sub.hh.any())


def test_tensor_versions_agree_with_numpy():
    rng = np.random.default_rng(3)
    px = rng.random((2, 1, 6, 8))
    t = dwt2_haar_tensor(torch.from_numpy(px))
    for n in range(2):
        np.testing.assert_allclose(t[n].numpy(), dwt2_haar(px[n, 0]).stack(), atol=1e-15)
    back = idwt2_haar_tensor(t)
    np.testing.assert_allclose(back.numpy(), px, atol=1e-12)


def test_tensor_shape_checks():
    with pytest.raises(ShapeMismatch):
        dwt2_haar_tensor(torch.zeros(1, 2, 4, 4))
    with pytest.raises(OddDimension):
        dwt2_haar_tensor(torch.zeros(1, 1, 4, 3))
    with pytest.raises(ShapeMismatch):
        idwt2_haar_tensor(torch.zeros(1, 3, 2, 2))


def test_image_validation():
    with pytest.raises(ValueError):
        Image(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        Image(np.array([[0.0, np.nan], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        Image(np.full((2, 2), 2.0), "unit")
    img = Image(np.full((2, 2), 200, dtype=np.uint8), "byte")
    assert img.pixels.dtype == np.float64
    np.testing.assert_allclose(img.to_unit().to_byte().pixels, 200.0)
