import io

import numpy as np
import pytest

from libra import bench


@pytest.fixture(scope="module")
def records():
    return bench.run_bench([(32, 32), (64, 48), (128, 128)], repeats=3, thumb=64)


def test_records_positive_and_consistent(records):
    assert [r.resolution for r in records] == [(32, 32), (64, 48), (128, 128)]
    for r in records:
        parts = (r.fit_or_predict_time_ms, r.slice_time_ms, r.apply_time_ms)
        assert all(t > 0 for t in parts)
        assert r.total_fps == pytest.approx(1e3 / sum(parts))
        assert r.path_fps == pytest.approx(1e3 / (r.slice_time_ms + r.apply_time_ms))


def test_csv_roundtrip(records, tmp_path):
    bench.write_csv(tmp_path / "b.csv", records)
    back = bench.read_csv(tmp_path / "b.csv")
    for a, b in zip(back, records):
        assert (a.height, a.width) == (b.height, b.width)
        assert a.slice_time_ms == pytest.approx(b.slice_time_ms, abs=1e-6)
    buf = io.StringIO()
    bench.write_csv(buf, records[:1])
    assert buf.getvalue().splitlines()[0].startswith("height,width,fit_or_predict_time_ms")


def test_loglog_slope_recovers_power():
    px = np.array([1e4, 1e5, 1e6])
    assert bench.loglog_slope(px, 3 * px ** 1.2) == pytest.approx(1.2)


def test_fixed_grids_are_seeded():
    a, b = bench.fixed_grids(seed=4), bench.fixed_grids(seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert a[0].shape == (12, 8, 16, 16) and a[2].shape == (12, 5, 16, 16)


def test_repeats_floor():
    with pytest.raises(ValueError):
        bench.run_bench([(16, 16)], repeats=2)
