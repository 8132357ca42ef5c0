import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from libra import asm, scenes
from libra.asm import HazeParams
from libra.errors import DomainError, EmptyMask, ShapeMismatch
from libra.grid import apply_affine


def test_transmission_values():
    assert np.all(asm.transmission(np.zeros((4, 4)), 1.3) == 1.0)
    np.testing.assert_allclose(asm.transmission(np.ones((4, 4)), np.log(2)), 0.5)
    with pytest.raises(DomainError):
        asm.transmission(np.zeros((2, 2)), 0.0)
    with pytest.raises(DomainError):
        asm.transmission(np.full((2, 2), 1.01), 1.0)
    asm.transmission(np.full((2, 2), 1 + 5e-7), 1.0)


def test_params_validation():
    p = HazeParams(1.0, 0.8)
    assert p.A_inf == (0.8, 0.8, 0.8)
    assert p.a_inf.shape == (3, 1, 1)
    for bad in ((0.0, 0.5), (-1, 0.5), (1.0, 1.2), (1.0, (0.5, -0.1, 0.5))):
        with pytest.raises(DomainError):
            HazeParams(*bad)


def test_synthesize_examples():
    J = np.random.default_rng(0).uniform(0, 1, (3, 8, 8))
    p = HazeParams(1.0, 0.8)
    np.testing.assert_array_equal(asm.synthesize(J, np.ones((8, 8)), p), J)
    assert np.abs(asm.synthesize(J, np.full((8, 8), 1e-4), p) - 0.8).max() <= 2e-4
    np.testing.assert_allclose(asm.synthesize(np.full((3, 2, 2), 0.2), np.full((2, 2), 0.5), p), 0.5)
    with pytest.raises(ShapeMismatch):
        asm.synthesize(J, np.ones((7, 8)), p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.0, 1.0), st.floats(1e-3, 1.0))
def test_synthesize_convex(seed, a, tmin):
    r = np.random.default_rng(seed)
    J = r.uniform(0, 1, (3, 5, 5))
    t = r.uniform(tmin, 1, (5, 5))
    I = asm.synthesize(J, t, HazeParams(1.0, a))
    assert np.all(I >= np.minimum(J, a) - 1e-12) and np.all(I <= np.maximum(J, a) + 1e-12)


def test_invert_examples():
    p = HazeParams(0.5, 0.8)
    a, b = asm.oracle_gain_offset(np.full((1, 1), 0.5), p)
    assert np.isclose(a.item(), 2.0) and np.allclose(b, -0.8)
    I = np.full((3, 4, 4), 0.8)
    np.testing.assert_allclose(asm.invert_oracle(I, np.full((4, 4), 0.3), p), 0.8)
    with pytest.raises(DomainError):
        asm.invert_oracle(I, np.ones((4, 4)), p, t_floor=0.5)


def test_round_trip_random(rng):
    J = rng.uniform(0, 1, (3, 256, 256))
    t = rng.uniform(0.05, 1, (256, 256))
    p = HazeParams(1.2, (0.7, 0.8, 0.9))
    assert np.abs(asm.invert_oracle(asm.synthesize(J, t, p), t, p) - J).max() <= 1e-5


def test_oracle_coeffs_values():
    p = HazeParams(1.0, 0.8)
    assert not asm.oracle_coeffs(np.ones((3, 3)), p).any()
    c = asm.oracle_coeffs(np.full((2, 2), 0.5), p)
    np.testing.assert_allclose(c[0], 2 / 3)
    np.testing.assert_allclose(c[[1, 2, 3, 5, 6, 7]], 0)
    np.testing.assert_allclose(asm.oracle_coeffs(np.full((2, 2), 1 / 3), p)[4], 1.0)


def test_oracle_coeffs_match_invert_through_cayley(rng):
    p = HazeParams(1.0, (0.75, 0.8, 0.85))
    t = rng.uniform(0.1, 1, (64, 64))
    I = asm.synthesize(rng.uniform(0, 1, (3, 64, 64)), t, p)
    np.testing.assert_allclose(apply_affine(asm.oracle_coeffs(t, p), I), asm.invert_oracle(I, t, p),
                               atol=1e-6)


def test_gradient_attenuation_constant_depth():
    sc = scenes.make_scene(64, 64, "constant")
    dev, frac = asm.gradient_attenuation_check(sc.hazy[0], sc.clean[0], sc.trans[0])
    assert dev <= 1e-6 and frac == 1.0


def test_gradient_attenuation_two_plane():
    sc = scenes.make_scene(64, 64, "two_plane")
    dev, frac = asm.gradient_attenuation_check(sc.hazy[0], sc.clean[0], sc.trans[0])
    assert dev <= 1e-6 and 0.9 < frac < 1.0
    # the boundary column itself violates the relation
    I, J, t = sc.hazy[0], sc.clean[0], sc.trans[0]
    gx = np.abs(np.diff(I, axis=2) - t[:, :-1] * np.diff(J, axis=2)).max(axis=(0, 1))
    assert gx.argmax() == 31 and gx.max() > 1e-3


def test_gradient_attenuation_no_haze(rng):
    J = rng.uniform(0, 1, (3, 16, 16))
    dev, frac = asm.gradient_attenuation_check(J, J, np.ones((16, 16)))
    assert dev == 0 and frac == 1


def test_gradient_attenuation_mask_excludes_varying_t(rng):
    t = rng.uniform(0.2, 1, (8, 8))
    J = rng.uniform(0, 1, (3, 8, 8))
    # with replicate boundaries only the bottom-right corner has zero gradient
    dev, frac = asm.gradient_attenuation_check(asm.synthesize(J, t, HazeParams(1, 0.8)), J, t)
    assert frac == 1 / 64 and dev == 0


def test_gradient_attenuation_empty_mask():
    with pytest.raises(EmptyMask):
        asm.gradient_attenuation_check(np.zeros((3, 0, 0)), np.zeros((3, 0, 0)), np.zeros((0, 0)))
