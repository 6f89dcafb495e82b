import numpy as np
import pytest

from fbgforce import (ForceVector, MeasuredCurvature, MeasurementFormatError, NodeGrid, NoiseModel,
                      SensorLayout, model_curvature, read_measurement, simulate_fbg, write_measurement)
from fbgforce.sensors import CSV_HEADER

FV = ForceVector.of((0.16, 0.4, -0.25), (0.25, -0.2, 0.3))


def test_default_layout(rod):
    lay = SensorLayout()
    assert lay.count == 14 and lay.locations[0] == pytest.approx(0.02)
    assert lay.last == pytest.approx(0.28)
    lay.check_fits(rod.length)
    with pytest.raises(ValueError):
        SensorLayout(count=15).check_fits(rod.length)
    with pytest.raises(ValueError):
        simulate_fbg(FV, rod, SensorLayout(count=15))
    with pytest.raises(ValueError):
        NoiseModel(-0.1)


def test_noiseless_matches_forward_model(rod, grid250):
    meas = simulate_fbg(FV, rod, q=250)
    ux, uy = model_curvature(FV, rod, grid250).sample(SensorLayout().locations)
    np.testing.assert_array_equal(meas.u_x, ux)
    np.testing.assert_array_equal(meas.u_y, uy)


def test_empty_forces_read_zero(rod):
    meas = simulate_fbg(ForceVector(), rod)
    assert np.all(meas.u_x == 0) and np.all(meas.u_y == 0)


def test_seed_determinism(rod):
    a = simulate_fbg(FV, rod, noise=NoiseModel(0.02, 7))
    b = simulate_fbg(FV, rod, noise=NoiseModel(0.02, 7))
    c = simulate_fbg(FV, rod, noise=NoiseModel(0.02, 8))
    np.testing.assert_array_equal(a.u_x, b.u_x)
    assert not np.array_equal(a.u_x, c.u_x)


def test_noise_scale_statistics(rod):
    clean = simulate_fbg(FV, rod)
    expected = 0.02 * np.max(np.hypot(clean.u_x, clean.u_y))
    draws = [simulate_fbg(FV, rod, noise=NoiseModel(0.02, k)) for k in range(50)]
    for comp in ("u_x", "u_y"):
        sd = np.std([getattr(m, comp) for m in draws], axis=0, ddof=1)
        assert np.all(np.abs(sd / expected - 1) < 0.3)


def test_interpolation_refines_second_order(rod):
    s = SensorLayout().locations
    vals = [simulate_fbg(FV, rod, q=q).u_x for q in (117, 233, 465)]
    e1, e2 = np.max(np.abs(vals[0] - vals[2])), np.max(np.abs(vals[1] - vals[2]))
    assert e2 < e1 / 2.5
    assert s.size == vals[0].size


def test_csv_round_trip(tmp_path, rod):
    meas = simulate_fbg(FV, rod, noise=NoiseModel(0.03, 1))
    path = tmp_path / "m.csv"
    write_measurement(path, meas)
    raw = path.read_bytes()
    assert raw.startswith(",".join(CSV_HEADER).encode() + b"\n") and b"\r" not in raw
    back = read_measurement(path)
    assert back.count == 14
    np.testing.assert_allclose(back.u_x, meas.u_x, rtol=0, atol=1e-12)
    np.testing.assert_allclose(back.u_y, meas.u_y, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(back.grating_locations, meas.grating_locations)


@pytest.mark.parametrize("body,needle", [
    ("", ":1: empty file"),
    ("s_m,u_x_per_m,u_y_per_m\n", "no data rows"),
    ("s,ux,uy\n0.1,0,0\n", ":1: bad header"),
    ("s_m,u_x_per_m,u_y_per_m\n0.1,0,0\n0.2,abc,0\n", ":3: non-numeric"),
    ("s_m,u_x_per_m,u_y_per_m\n0.1,0,0\n0.2,0\n", ":3: expected 3 columns"),
    ("s_m,u_x_per_m,u_y_per_m\n0.1,0,0\n0.1,0,0\n", ":3: grating location"),
    ("s_m,u_x_per_m,u_y_per_m\n0.1,0,0\n0.2,nan,0\n", ":3: non-finite"),
    ("s_m,u_x_per_m,u_y_per_m\n0.1,0,0\n", "at least"),
])
def test_malformed_files(tmp_path, body, needle):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(MeasurementFormatError, match=needle):
        read_measurement(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_measurement(tmp_path / "nope.csv")
