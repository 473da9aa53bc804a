import numpy as np
import pytest

from terraseg.export import (PGM_MAX, load_snapshot, read_pgm, read_terrain_csv, save_snapshot,
                             terrain_csv, terrain_pgm)
from terraseg.grid import GridMap


def sample_map(rng, dims=9):
    m = GridMap(0.33, dims, center=(3.3, -1.0))
    m.layers["elevation"] = rng.normal(size=m.shape)
    m.layers["confidence"] = rng.uniform(size=m.shape)
    m.layers["hits"] = rng.integers(0, 50, m.shape).astype(m.layers["hits"].dtype)
    return m


def test_snapshot_round_trip(tmp_path, rng):
    m = sample_map(rng)
    m.recenter((5.0, 2.0))
    save_snapshot(m, tmp_path / "s.npz")
    back = load_snapshot(tmp_path / "s.npz")
    for name in ("elevation", "confidence", "hits"):
        np.testing.assert_array_equal(back.layers[name], m.layers[name])
    np.testing.assert_array_equal(back.center, m.center)
    np.testing.assert_array_equal(back.cell_to_world(0, 0), m.cell_to_world(0, 0))


def test_snapshot_missing_layer(tmp_path):
    np.savez(tmp_path / "bad.npz", resolution=0.33, dims=3)
    with pytest.raises(ValueError):
        load_snapshot(tmp_path / "bad.npz")


def test_csv_round_trip(rng):
    m = sample_map(rng)
    x, y, g, c = read_terrain_csv(terrain_csv(m))
    xs, ys = m.cell_centers()
    assert x.size == 81
    np.testing.assert_array_equal(g, m.elevation.ravel())
    np.testing.assert_array_equal(c, m.confidence.ravel())
    np.testing.assert_allclose(x, xs.ravel(), atol=1e-9)
    np.testing.assert_allclose(y, ys.ravel(), atol=1e-9)


def test_csv_header_required():
    with pytest.raises(ValueError):
        read_terrain_csv("a,b\n1,2\n")


def test_pgm_constant_is_mid_gray():
    data, side = terrain_pgm(GridMap(0.33, 5, elevation=1.2))
    img = read_pgm(data)
    assert img.shape == (5, 5) and (img == 32768).all()
    assert "min = 1.2" in side and "max = 1.2" in side


def test_pgm_ramp_north_up(rng):
    m = GridMap(1.0, 7)
    xs, ys = m.cell_centers()
    m.layers["elevation"] = ys * 0.5
    img = read_pgm(terrain_pgm(m)[0])
    # image row 0 is the highest y
    assert img[0, 0] == PGM_MAX and img[-1, 0] == 0
    assert (np.diff(img[:, 3]) < 0).all()


def test_pgm_dequantizes_within_half_step(rng):
    m = sample_map(rng, 15)
    data, side = terrain_pgm(m)
    meta = dict(line.split(" = ") for line in side.splitlines())
    lo, hi = float(meta["min"]), float(meta["max"])
    back = lo + read_pgm(data)[::-1] * (hi - lo) / PGM_MAX
    assert np.abs(back - m.elevation).max() <= 0.5 * (hi - lo) / PGM_MAX + 1e-12


def test_pgm_whitespace_pixels_survive():
    # a first sample of 0x0A20 ("\n ") must not be eaten by the header parser
    m = GridMap(1.0, 3)
    m.layers["elevation"] = np.array([[0.0, 1.0, 1.0], [1.0, 1.0, 1.0], [2570.0 / PGM_MAX, 1.0, 1.0]])
    data, _ = terrain_pgm(m)
    assert read_pgm(data)[0, 0] == 2570


@pytest.mark.parametrize("data", [b"P2\n1 1\n65535\n\0\0", b"P5\n2 2\n65535\n\0\0", b"P5\n1 1\n255\n\0", b"P5\n1"])
def test_pgm_rejects(data):
    with pytest.raises(ValueError):
        read_pgm(data)
