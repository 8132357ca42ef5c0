import numpy as np
import pytest

from libra import synthpipe as sp
from libra.asm import HazeParams, transmission
from libra.errors import DegenerateField, ShapeMismatch
from libra.resample import resize_bilinear
from libra.scenes import smooth_clean, translating_clean


def box_oracle(x, r):
    """Direct window average, clipped at the borders."""
    H, W = x.shape
    out = np.empty_like(x)
    for i in range(H):
        for j in range(W):
            out[i, j] = x[max(i - r, 0):i + r + 1, max(j - r, 0):j + r + 1].mean()
    return out


@pytest.fixture(scope="module")
def bundle():
    frames, flows = translating_clean(48, 48, 5, shift=(0, 1), seed=2)
    disp, _ = translating_clean(48, 48, 5, shift=(0, 1), seed=7)
    raw = [10.0 * d[0] for d in disp]
    return sp.build_sequence(frames, raw, flows, HazeParams(1.0, 0.8))


def test_normalize_identity_on_unit_range():
    raw = np.linspace(0, 1, 400).reshape(20, 20)
    np.testing.assert_allclose(sp.normalize_depth(raw, 0, 100), raw, atol=1e-9)


def test_normalize_constant_is_degenerate():
    with pytest.raises(DegenerateField):
        sp.normalize_depth(np.full((8, 8), 3.0))


def test_normalize_flip_turns_disparity_into_depth():
    raw = np.zeros((10, 10))
    raw[3:6, 3:6] = 1.0  # near object has high disparity
    d = sp.normalize_depth(raw, 0, 100, flip=True)
    assert np.all(d[3:6, 3:6] == 0.0)
    assert d[0, 0] == 1.0


def test_normalize_clips_outliers_and_pools_the_clip():
    a = np.linspace(0, 1, 100).reshape(10, 10)
    a[0, 0] = 1e6
    d = sp.normalize_depth(a, 1, 99)
    assert d.min() == 0.0 and d.max() == 1.0
    stack = np.stack([np.zeros((4, 4)), np.ones((4, 4))])
    d = sp.normalize_depth(stack, 0, 100)
    assert np.all(d[0] == 0) and np.all(d[1] == 1)


def test_normalize_rejects_bad_percentiles():
    with pytest.raises(ValueError):
        sp.normalize_depth(np.eye(3), 50, 50)


def test_smooth_blend_zero_is_identity(rng):
    ds = [rng.uniform(0, 1, (8, 8)) for _ in range(4)]
    fl = [rng.uniform(-2, 2, (2, 8, 8)) for _ in range(3)]
    for a, b in zip(sp.temporal_smooth_depth(ds, fl, 0.0), ds):
        np.testing.assert_array_equal(a, b)


def test_smooth_static_depth_unchanged(rng):
    d = rng.uniform(0, 1, (8, 8))
    out = sp.temporal_smooth_depth([d] * 4, [np.zeros((2, 8, 8))] * 3, 0.6)
    for x in out:
        np.testing.assert_allclose(x, d, atol=1e-15)


def test_smooth_alternating_recurrence():
    a, b = np.full((4, 4), 0.2), np.full((4, 4), 0.8)
    out = sp.temporal_smooth_depth([a, b, a, b], [np.zeros((2, 4, 4))] * 3, 0.5)
    # hand evaluation of d'_k = (d_k + d'_{k-1}) / 2
    np.testing.assert_allclose([x[0, 0] for x in out], [0.2, 0.5, 0.35, 0.575])


def test_smooth_out_of_bounds_falls_back():
    d0, d1 = np.zeros((4, 4)), np.ones((4, 4))
    flow = np.stack([np.full((4, 4), 1.0), np.zeros((4, 4))])
    out = sp.temporal_smooth_depth([d0, d1], [flow], 0.5)
    np.testing.assert_allclose(out[1][:, 0], 1.0)  # sample at x = -1 is outside
    np.testing.assert_allclose(out[1][:, 1:], 0.5)


def test_smooth_never_widens_range(rng):
    ds = [rng.uniform(0.2, 0.7, (12, 12)) for _ in range(5)]
    fl = [rng.uniform(-3, 3, (2, 12, 12)) for _ in range(4)]
    out = np.stack(sp.temporal_smooth_depth(ds, fl, 0.4))
    assert out.min() >= np.min(ds) - 1e-15 and out.max() <= np.max(ds) + 1e-15


def test_smooth_shape_errors(rng):
    with pytest.raises(ShapeMismatch):
        sp.temporal_smooth_depth([np.zeros((4, 4))] * 3, [np.zeros((2, 4, 4))], 0.3)
    with pytest.raises(ValueError):
        sp.temporal_smooth_depth([np.zeros((4, 4))] * 2, [np.zeros((2, 4, 4))], 1.0)


def test_box_mean_matches_direct_windows(rng):
    x = rng.standard_normal((9, 13))
    for r in (1, 3, 20):
        np.testing.assert_allclose(sp.box_mean(x, r), box_oracle(x, r), atol=1e-12)


def test_guided_constant_guide_is_box_smoothing(rng):
    low = rng.uniform(0, 1, (8, 8))
    guide = np.full((3, 24, 24), 0.4)
    out = sp.guided_upsample(low, guide, radius=2, eps=1e-4)
    up = resize_bilinear(low, 24, 24)
    np.testing.assert_allclose(out, box_oracle(box_oracle(up, 2), 2), atol=1e-10)


def test_guided_exact_on_affine_model():
    g = smooth_clean(32, 32, seed=4)
    lum = sp.luminance(g)
    low = 0.3 * lum + 0.1
    out = sp.guided_upsample(low, g, radius=3, eps=1e-9)
    assert np.abs(out - low).max() <= 1e-3


def test_guided_large_eps_tends_to_box_mean(rng):
    low = rng.uniform(0, 1, (16, 16))
    g = rng.uniform(0, 1, (3, 16, 16))
    var = np.var(sp.luminance(g))
    out = sp.guided_upsample(low, g, radius=2, eps=1e6 * var)
    np.testing.assert_allclose(out, box_oracle(box_oracle(low, 2), 2), atol=1e-5)


def test_guided_near_idempotent_on_smooth_field():
    # depth that follows the image, with the window small against the frame
    g = smooth_clean(256, 256, seed=1)
    low = sp.luminance(smooth_clean(64, 64, seed=1))
    once = sp.guided_upsample(low, g, 8, 1e-4)
    twice = sp.guided_upsample(once, g, 8, 1e-4)
    assert np.sqrt(np.mean((twice - once) ** 2)) <= 1e-3


def test_guided_rejects_bad_sizes():
    with pytest.raises(ShapeMismatch):
        sp.guided_upsample(np.zeros((20, 20)), np.zeros((3, 10, 10)))
    with pytest.raises(ValueError):
        sp.guided_upsample(np.zeros((5, 5)), np.zeros((3, 10, 10)), radius=0)


def test_render_thin_haze_bound(rng):
    J = [rng.uniform(0, 1, (3, 16, 16))]
    d = [rng.uniform(0, 1, (16, 16))]
    params = HazeParams(0.1, 0.8)
    out = sp.render_sequence(sp.SequenceBundle(J, d, []), params)
    bound = (1 - np.exp(-0.1)) * np.abs(J[0] - 0.8)
    assert np.all(np.abs(out.hazy[0] - J[0]) <= bound + 1e-12)


def test_render_identical_frames_bitwise(rng):
    J = rng.uniform(0, 1, (3, 16, 16))
    d = rng.uniform(0, 1, (16, 16))
    out = sp.render_sequence(sp.SequenceBundle([J, J.copy()], [d, d.copy()], []), HazeParams(1.3, 0.9))
    assert out.hazy[0].tobytes() == out.hazy[1].tobytes()


def test_regimes_order_transmission_by_beta():
    d = np.linspace(0, 1, 256).reshape(16, 16)
    assert len(sp.HAZE_REGIMES) == 9
    by_beta = sorted(sp.HAZE_REGIMES.values())
    means = [transmission(d, beta).mean() for beta, _ in by_beta]
    assert all(b <= a for a, b in zip(means, means[1:]))
    assert sp.regime_params("dense-bright").beta == 2.0
    with pytest.raises(KeyError):
        sp.regime_params("foggy")


def test_flow_resized_scales_displacement():
    f = sp.FlowField(np.full((4, 4), 1.0), np.full((4, 4), -2.0))
    g = f.resized(8, 12)
    np.testing.assert_allclose(g.u, 3.0)
    np.testing.assert_allclose(g.v, -4.0)


def test_synth_config_text():
    cfg = sp.SynthConfig.from_text("blend = 0.5\nflip = yes\nradius = 4\n")
    assert cfg.blend == 0.5 and cfg.flip is True and cfg.radius == 4
    with pytest.raises(Exception, match="unknown synthesis key"):
        sp.SynthConfig.from_text("speed = 3\n")


def test_fresh_bundle_passes_all_checks(bundle):
    report = sp.qa_checks(bundle)
    assert [c.name for c in report.checks] == list(sp.QA_NAMES)
    assert report.passed, report.to_text()


def test_roundtrip_estimator_recovers_airlight(bundle):
    for I, J, t in zip(bundle.hazy, bundle.clean, bundle.trans):
        est = sp.airlight_estimates(I, J, t)
        assert est.shape[1] > 0
        assert np.median(np.abs(est - 0.8)) <= 1e-6


def test_airlight_perturbation_fails_that_frame(bundle):
    hazy = list(bundle.hazy)
    hazy[2] = hazy[2] + 0.05 * (1 - bundle.trans[2])
    bad = sp.SequenceBundle(bundle.clean, bundle.depth, bundle.flow, bundle.params, hazy, bundle.trans)
    r = sp.qa_checks(bad)["airlight_roundtrip"]
    assert not r.passed
    assert "failed frames [2]" in r.detail


def test_dropped_flow_fails_alignment(bundle):
    bad = sp.SequenceBundle(bundle.clean, bundle.depth, bundle.flow[:-1], bundle.params,
                            bundle.hazy, bundle.trans)
    r = sp.qa_checks(bad)["alignment"]
    assert not r.passed
    assert "flow has 3 fields, expected 4" in r.detail


def test_build_is_deterministic(bundle):
    frames, flows = translating_clean(48, 48, 5, shift=(0, 1), seed=2)
    disp, _ = translating_clean(48, 48, 5, shift=(0, 1), seed=7)
    again = sp.build_sequence(frames, [10.0 * d[0] for d in disp], flows, HazeParams(1.0, 0.8))
    for a, b in zip(again.hazy, bundle.hazy):
        assert a.tobytes() == b.tobytes()


def test_out_of_range_depth_fails_pixel_range(bundle):
    depth = list(bundle.depth)
    depth[0] = depth[0] + 0.5
    bad = sp.SequenceBundle(bundle.clean, depth, bundle.flow, bundle.params, bundle.hazy, bundle.trans)
    assert not sp.qa_checks(bad)["pixel_range"].passed
