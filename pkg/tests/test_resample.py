import cv2
import numpy as np
import pytest

from libra import resample
from libra.errors import ShapeMismatch


@pytest.mark.parametrize("shape", [(40, 40, 12, 18), (7, 9, 30, 31), (64, 48, 16, 16)])
def test_bilinear_matches_cv2(rng, shape):
    h, w, H, W = shape
    img = rng.uniform(0, 1, (3, h, w))
    ref = np.moveaxis(cv2.resize(np.moveaxis(img, 0, -1), (W, H), interpolation=cv2.INTER_LINEAR), -1, 0)
    np.testing.assert_allclose(resample.resize_bilinear(img, H, W), ref, atol=1e-5)


def test_block_mean(rng):
    x = rng.uniform(0, 1, (3, 8, 12))
    ref = x.reshape(3, 2, 4, 3, 4).mean(axis=(2, 4))
    np.testing.assert_allclose(resample.downsample(x, 4), ref, atol=1e-15)
    np.testing.assert_array_equal(resample.downsample(x, 1), x)
    with pytest.raises(ShapeMismatch):
        resample.downsample(x, 5)


def test_adjoints(rng):
    x = rng.standard_normal((3, 12, 16))
    y = rng.standard_normal((3, 3, 4))
    assert np.isclose(np.sum(resample.downsample(x, 4) * y), np.sum(x * resample.downsample_adjoint(y, 4)))
    z = rng.standard_normal((3, 12, 16))
    assert np.isclose(np.sum(resample.upsample(y, 4) * z), np.sum(y * resample.resize_bilinear_adjoint(z, 3, 4)))


def test_upsample_add_clamp(rng):
    d = rng.standard_normal((3, 4, 6)) * 0.3
    base = rng.uniform(0, 1, (3, 16, 24))
    np.testing.assert_allclose(resample.upsample_add_clamp(d, base),
                               np.clip(base + resample.upsample(d, 4), 0, 1), atol=1e-12)


def test_warp_integer_shift(rng):
    img = rng.uniform(0, 1, (3, 10, 12))
    flow = np.stack([np.full((10, 12), 2.0), np.full((10, 12), -1.0)])
    w, valid = resample.warp(img, flow)
    np.testing.assert_allclose(w[:, :9, 2:], img[:, 1:, :10])
    assert valid[:9, 2:].all() and not valid[:, :2].any() and not valid[9].any()


def test_warp_zero_flow_identity(rng):
    img = rng.uniform(0, 1, (10, 12))
    w, valid = resample.warp(img, np.zeros((2, 10, 12)))
    np.testing.assert_array_equal(w, img)
    assert valid.all()
