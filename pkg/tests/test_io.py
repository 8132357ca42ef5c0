import struct

import numpy as np
import pytest

from libra import io as lio
from libra.errors import FormatError
from libra.fit import FILE_KEYS, FitConfig
from libra.grid import ChromaticGrid, TemporalGrid


def test_grid_roundtrip_both_kinds(tmp_path, rng):
    for cls, D in ((ChromaticGrid, 8), (TemporalGrid, 5)):
        g = cls(rng.standard_normal((12, D, 16, 16)))
        p = tmp_path / f"{cls.__name__}.lbg"
        lio.write_grid(p, g)
        back = lio.read_grid(p)
        assert type(back) is cls
        np.testing.assert_array_equal(back.coeffs, g.coeffs.astype(np.float32))


def test_grid_header_layout(tmp_path):
    p = tmp_path / "g.lbg"
    lio.write_grid(p, TemporalGrid(np.zeros((12, 5, 4, 3))))
    data = p.read_bytes()
    assert data[:4] == b"LBG1"
    assert struct.unpack("<B4I", data[4:21]) == (1, 12, 5, 4, 3)
    assert len(data) == 21 + 4 * 12 * 5 * 4 * 3


def test_grid_bad_magic_names_both(tmp_path):
    p = tmp_path / "bad.lbg"
    p.write_bytes(b"XXXX" + b"\0" * 40)
    with pytest.raises(FormatError, match="magic mismatch.*LBG1.*XXXX"):
        lio.read_grid(p)


def test_grid_truncated_payload(tmp_path):
    p = tmp_path / "g.lbg"
    lio.write_grid(p, ChromaticGrid(np.zeros((12, 8, 4, 4))))
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(FormatError, match="payload"):
        lio.read_grid(p)


def test_field_roundtrip_scalar_and_flow(tmp_path, rng):
    d = rng.uniform(0, 1, (7, 9))
    lio.write_field(tmp_path / "d.lbf", d)
    np.testing.assert_allclose(lio.read_field(tmp_path / "d.lbf"), d, atol=1e-7)
    f = rng.standard_normal((2, 7, 9))
    lio.write_field(tmp_path / "f.lbf", f)
    back = lio.read_field(tmp_path / "f.lbf")
    assert back.shape == (2, 7, 9)
    np.testing.assert_allclose(back, f, rtol=1e-6)


def test_field_channels_interleaved_last(tmp_path):
    f = np.stack([np.full((2, 2), 1.0), np.full((2, 2), 2.0)])
    lio.write_field(tmp_path / "f.lbf", f)
    data = (tmp_path / "f.lbf").read_bytes()
    assert struct.unpack("<B2I", data[4:13]) == (2, 2, 2)
    payload = np.frombuffer(data, "<f4", offset=13)
    np.testing.assert_array_equal(payload, [1, 2, 1, 2, 1, 2, 1, 2])


def test_field_rejects_bad_magic_and_channels(tmp_path):
    (tmp_path / "a.lbf").write_bytes(b"LBG1" + b"\0" * 20)
    with pytest.raises(FormatError, match="magic mismatch"):
        lio.read_field(tmp_path / "a.lbf")
    (tmp_path / "b.lbf").write_bytes(b"LBF1" + struct.pack("<B2I", 3, 1, 1) + b"\0" * 12)
    with pytest.raises(FormatError, match="channel"):
        lio.read_field(tmp_path / "b.lbf")
    with pytest.raises(FormatError):
        lio.write_field(tmp_path / "c.lbf", np.zeros((3, 2, 2)))


def test_png_16bit_roundtrip(tmp_path, rng):
    f = rng.uniform(0, 1, (3, 10, 12))
    lio.write_frame(tmp_path / "f.png", f)
    back = lio.read_frame(tmp_path / "f.png")
    assert back.shape == (3, 10, 12)
    assert np.abs(back - f).max() <= 0.5 / 65535 + 1e-12


def test_png_8bit_input_keeps_channel_order(tmp_path):
    import cv2

    bgr = np.zeros((4, 4, 3), np.uint8)
    bgr[..., 2] = 255  # red in OpenCV order
    cv2.imwrite(str(tmp_path / "r.png"), bgr)
    f = lio.read_frame(tmp_path / "r.png")
    np.testing.assert_array_equal(f[0], 1.0)
    np.testing.assert_array_equal(f[1:], 0.0)


def test_read_frame_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        lio.read_frame(tmp_path / "nope.png")


def test_manifest_roundtrip_relative_paths(tmp_path):
    m = lio.Manifest(beta=1.5, a_inf=(0.7, 0.8, 0.9), fps=5.0)
    m.clean = [tmp_path / "clean" / "0000.png", tmp_path / "clean" / "0001.png"]
    m.flow = [tmp_path / "flow" / "0000.lbf"]
    lio.write_manifest(tmp_path / "manifest.txt", m)
    text = (tmp_path / "manifest.txt").read_text()
    assert "clean = clean/0000.png" in text
    back = lio.read_manifest(tmp_path / "manifest.txt")
    assert back.clean == m.clean and back.flow == m.flow
    assert back.beta == 1.5 and back.a_inf == (0.7, 0.8, 0.9) and back.fps == 5.0


def test_manifest_scalar_airlight_and_unknown_key(tmp_path):
    (tmp_path / "m.txt").write_text("beta = 1\na_inf = 0.8  # grey\n")
    assert lio.read_manifest(tmp_path / "m.txt").a_inf == (0.8, 0.8, 0.8)
    (tmp_path / "m.txt").write_text("beta = 1\ncolour = red\n")
    with pytest.raises(FormatError, match="m.txt:2"):
        lio.read_manifest(tmp_path / "m.txt")


def test_keyvalue_requires_equals():
    with pytest.raises(FormatError, match=":1:"):
        list(lio.parse_keyvalue("just words"))


def test_fit_config_roundtrip(tmp_path):
    cfg = FitConfig(lambda_sp=0.5, max_iters=17, p=2, seed=3)
    lio.write_fit_config(tmp_path / "c.txt", cfg)
    keys = [k for k, _, _ in lio.parse_keyvalue((tmp_path / "c.txt").read_text())]
    assert tuple(keys) == FILE_KEYS
    back = lio.load_fit_config(tmp_path / "c.txt")
    assert back == cfg
    assert isinstance(back.max_iters, int)


def test_fit_config_partial_and_invalid(tmp_path):
    (tmp_path / "c.txt").write_text("max_iters = 5\nmomentum = 0.5\n")
    cfg = lio.load_fit_config(tmp_path / "c.txt")
    assert cfg.max_iters == 5 and cfg.momentum == 0.5 and cfg.lambda_id == FitConfig().lambda_id
    (tmp_path / "c.txt").write_text("learning_rate = 1\n")
    with pytest.raises(FormatError, match="unknown config key"):
        lio.load_fit_config(tmp_path / "c.txt")
    (tmp_path / "c.txt").write_text("p = four\n")
    with pytest.raises(FormatError, match="needs a number"):
        lio.load_fit_config(tmp_path / "c.txt")
