import numpy as np
import pytest

from sdesample.synth import (
    FpgaSynthConfig,
    SynthError,
    WaferSynthConfig,
    disk_mask,
    gen_fpga,
    gen_fpga_devices,
    gen_wafer,
    smooth_field,
)


def test_wafer_deterministic():
    a = gen_wafer(WaferSynthConfig(approx_devices=1000, seed=4))
    b = gen_wafer(WaferSynthConfig(approx_devices=1000, seed=4))
    assert a == b
    c = gen_wafer(WaferSynthConfig(approx_devices=1000, seed=5))
    assert not np.array_equal(a.value, c.value)


def test_wafer_default_size_and_disk():
    d = gen_wafer(WaferSynthConfig())
    assert 5700 <= len(d) <= 6300
    assert d.grid_width == d.grid_height
    centre = (d.grid_width - 1) / 2
    r = np.hypot(d.x - centre, d.y - centre)
    assert r.max() <= d.grid_width / 2
    assert np.all(np.isfinite(d.value)) and d.valid.all()
    assert d.metadata["family"] == "wafer"


def test_wafer_constant_when_all_terms_off():
    cfg = WaferSynthConfig(approx_devices=500, radial_trend_amplitude=0, field_amplitude=0,
                           noise_std=0, base_level=3.5)
    d = gen_wafer(cfg)
    assert np.all(d.value == 3.5)


def test_wafer_config_validation():
    with pytest.raises(SynthError):
        WaferSynthConfig(approx_devices=10)
    with pytest.raises(SynthError):
        WaferSynthConfig(field_length_scale=0)


def test_disk_mask_symmetric():
    m = disk_mask(21)
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_array_equal(m, m[::-1])
    assert m[10, 10] and not m[0, 0]


def test_smooth_field_is_smooth():
    f = smooth_field(60, 60, 8.0, np.random.default_rng(0))
    assert f.shape == (60, 60)
    centred = f - f.mean()

    def lag_corr(k):
        a, b = centred[:-k].ravel(), centred[k:].ravel()
        return float(a @ b / np.sqrt((a @ a) * (b @ b)))

    assert lag_corr(1) > 0.9
    assert lag_corr(1) > lag_corr(10)


def test_fpga_shape():
    paths = gen_fpga(FpgaSynthConfig())
    assert len(paths) == 32
    for p in paths:
        assert len(p) == 3173
        assert (p.grid_width, p.grid_height) == (33, 120)
        np.testing.assert_array_equal(p.x, paths[0].x)
        np.testing.assert_array_equal(p.y, paths[0].y)
    assert len({p.metadata["path"] for p in paths}) == 32


def test_fpga_devices_share_layout_but_not_values():
    devs = gen_fpga_devices(FpgaSynthConfig(n_paths=2), n_devices=3)
    assert [d[0].metadata["unit_id"] for d in devs] == ["fpga-01", "fpga-02", "fpga-03"]
    np.testing.assert_array_equal(devs[0][0].x, devs[2][0].x)
    assert not np.array_equal(devs[0][0].value, devs[1][0].value)


def test_fpga_single_path_and_validation():
    assert len(gen_fpga(FpgaSynthConfig(n_paths=1))) == 1
    with pytest.raises(SynthError, match="capacity"):
        FpgaSynthConfig(width=10, height=10, n_points=101)
