import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from terraseg.config import Config, ConfigError, dump_config, load_config
from terraseg.kitti import (FormatError, Pose, Sequence, format_calib, format_pose_line, read_calib,
                            read_labels, read_poses, read_velodyne_bin, velodyne_finite_mask,
                            write_labels, write_velodyne_bin)


class TestVelodyne:
    def test_empty(self):
        assert len(read_velodyne_bin(b"")) == 0

    def test_single_record(self):
        cloud = read_velodyne_bin(struct.pack("<4f", 1.0, 2.0, 3.0, 0.5))
        np.testing.assert_array_equal(cloud.points, [[1.0, 2.0, 3.0, 0.5]])

    def test_misaligned(self):
        with pytest.raises(FormatError):
            read_velodyne_bin(b"\0" * 17)

    def test_non_finite_dropped(self):
        data = struct.pack("<8f", 1, 2, 3, 0, float("nan"), 0, 0, 0)
        cloud = read_velodyne_bin(data)
        assert len(cloud) == 1 and cloud.dropped == 1
        assert velodyne_finite_mask(data).tolist() == [True, False]

    def test_million_points_no_loss(self, rng):
        pts = rng.uniform(-100, 100, (1_000_000, 4)).astype(np.float32)
        cloud = read_velodyne_bin(write_velodyne_bin(pts))
        assert len(cloud) == 1_000_000 and cloud.dropped == 0
        np.testing.assert_array_equal(cloud.points, pts.astype(np.float64))

    @given(st.lists(st.tuples(*[st.floats(-1e4, 1e4, width=32)] * 4), max_size=50))
    def test_round_trip(self, rows):
        pts = np.array(rows, dtype=np.float32).reshape(-1, 4)
        data = write_velodyne_bin(pts)
        assert write_velodyne_bin(read_velodyne_bin(data).points) == data


class TestLabels:
    def test_semantic_bits(self):
        assert read_labels(struct.pack("<I", 0x00000028)).tolist() == [40]
        assert read_labels(struct.pack("<I", 0x00150028)).tolist() == [40]

    def test_empty(self):
        assert read_labels(b"").size == 0

    def test_misaligned(self):
        with pytest.raises(FormatError):
            read_labels(b"\0" * 5)

    @given(st.lists(st.integers(0, 0xFFFF), max_size=100))
    def test_round_trip(self, ids):
        arr = np.array(ids, dtype=np.uint32)
        np.testing.assert_array_equal(read_labels(write_labels(arr)), arr)

    def test_instance_written_high(self):
        data = write_labels(np.array([40]), np.array([0x15]))
        assert struct.unpack("<I", data)[0] == 0x00150028


def pose_line(m):
    return " ".join(repr(float(v)) for v in np.asarray(m)[:3, :].ravel())


class TestPoses:
    def test_identity(self):
        poses = read_poses(pose_line(np.eye(4)) + "\n", format_calib())
        np.testing.assert_array_equal(poses[0].matrix(), np.eye(4))

    def test_translation(self):
        p = np.eye(4)
        p[:3, 3] = [1.5, -2.0, 0.25]
        pose = read_poses(pose_line(p), None)[0]
        np.testing.assert_allclose(pose.translation, [1.5, -2.0, 0.25])

    def test_conjugation_oracle(self):
        p = np.array([[0.0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        tr = np.eye(4)
        tr[0, 3] = 1.0
        pose = read_poses(pose_line(p), format_calib(tr))[0]
        np.testing.assert_allclose(pose.matrix(), np.linalg.inv(tr) @ p @ tr, atol=1e-15)
        # a sensor-frame point through Tr, P and back
        x = np.array([2.0, 3.0, 4.0, 1.0])
        np.testing.assert_allclose(pose.matrix() @ x, np.linalg.inv(tr) @ (p @ (tr @ x)))

    def test_malformed_line_number(self):
        text = pose_line(np.eye(4)) + "\n1 2 3\n"
        with pytest.raises(FormatError, match="line 2"):
            read_poses(text, None)

    def test_calib_requires_tr(self):
        with pytest.raises(FormatError):
            read_calib("P0: 1 2 3\n")

    def test_pose_validation(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.1, np.zeros(3))

    def test_format_round_trip(self):
        th = 0.3
        rot = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
        pose = Pose(rot, np.array([1.0, 2.0, 3.0]))
        back = read_poses(format_pose_line(pose), None)[0]
        np.testing.assert_array_equal(back.matrix(), pose.matrix())


class TestSequence:
    def test_empty_dir(self, tmp_path):
        (tmp_path / "velodyne").mkdir()
        with pytest.raises(FileNotFoundError):
            Sequence.open(tmp_path)

    def test_missing_poses(self, tmp_path):
        (tmp_path / "velodyne").mkdir()
        (tmp_path / "velodyne" / "000000.bin").write_bytes(b"")
        with pytest.raises(FileNotFoundError):
            Sequence.open(tmp_path)

    def test_load_applies_pose(self, tmp_path):
        (tmp_path / "velodyne").mkdir()
        (tmp_path / "velodyne" / "000000.bin").write_bytes(struct.pack("<4f", 1, 0, 0, 0))
        p = np.eye(4)
        p[:3, 3] = [10.0, 0.0, 2.0]
        (tmp_path / "poses.txt").write_text(pose_line(p) + "\n")
        seq = Sequence.open(tmp_path)
        cloud = seq.load(0)
        np.testing.assert_allclose(cloud.xyz, [[11.0, 0.0, 2.0]])
        np.testing.assert_allclose(cloud.sensor_origin, [10.0, 0.0, 2.0])


class TestConfig:
    def test_empty_is_defaults(self):
        cfg = load_config("")
        assert cfg == Config()
        assert (cfg.resolution, cfg.d_sf, cfg.t_minv, cfg.theta) == (0.33, 1e-5, 5e-5, 5.0)
        assert (cfg.g_minp, cfg.o_minc, cfg.h_g, cfg.h_o) == (0.25, 1.25, 0.3, 0.1)
        assert (cfg.s, cfg.o_t, cfg.d_ps, cfg.d_pv, cfg.v_np) == (20.0, 0.1, 20.0, 0.4, 10)

    def test_single_override(self):
        cfg = load_config("h_g = 0.5\n")
        assert cfg.h_g == 0.5
        assert cfg == Config(h_g=0.5)

    def test_theta_invariant(self):
        with pytest.raises(ConfigError) as exc:
            load_config("theta = 0.5")
        assert exc.value.key == "theta"

    @pytest.mark.parametrize("text,key", [
        ("bogus = 1", "bogus"),
        ("h_g = abc", "h_g"),
        ("g_minp = 1.5", "g_minp"),
        ("s = 0", "s"),
        ("dims = 360", "dims"),
        ("h_g = 0.3\nh_g = 0.4", "h_g"),
    ])
    def test_errors_name_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            load_config(text)
        assert exc.value.key == key

    def test_t_minv_follows_d_sf(self):
        assert load_config("d_sf = 2e-5").t_minv == pytest.approx(1e-4)
        assert load_config("d_sf = 2e-5\nt_minv = 3e-5").t_minv == 3e-5

    def test_comments_and_aliases(self):
        cfg = load_config("# tuned\nR = 0.5  # coarser\nworkers = 4\n")
        assert cfg.resolution == 0.5 and cfg.worker_count == 4

    def test_id_sets(self):
        cfg = load_config("ground_ids = 40, 48\nignore_ids = 0")
        assert cfg.ground_ids == {40, 48} and cfg.ignore_ids == {0}

    def test_dump_round_trip(self):
        cfg = Config(h_g=0.4, worker_count=3, ground_ids=frozenset({40}))
        assert load_config(dump_config(cfg)) == cfg
