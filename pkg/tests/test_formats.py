import numpy as np
import pytest

from esmap import (
    KernelParams,
    MapConfig,
    MapFormatError,
    ParseError,
    SemanticPoint,
    VoxelMap,
    deserialize_map,
    read_ground_truth,
    read_poses,
    read_scan,
    serialize_map,
    write_ground_truth,
    write_poses,
    write_scan,
)
from esmap.formats import map_config_entries, map_config_from_file, parse_key_values

from test_geometry import random_pose


def random_points(rng, n, k):
    return [SemanticPoint.from_evidence(rng.uniform(-40, 40, 3) * rng.uniform(0.001, 1000),
                                        rng.uniform(0, 30, k) * rng.choice([1e-6, 1.0, 1e4]))
            for _ in range(n)]


class TestScanFiles:
    def test_empty_scan_round_trip(self, tmp_path):
        path = tmp_path / "s.esm"
        write_scan(path, [], 4)
        points, k = read_scan(path)
        assert points == [] and k == 4

    def test_single_point_round_trip(self, tmp_path):
        path = tmp_path / "s.esm"
        write_scan(path, [SemanticPoint.from_evidence([0.1, -0.2, 0.3], [1.5, 0.0, 2.5])], 3)
        points, k = read_scan(path)
        assert k == 3 and len(points) == 1
        np.testing.assert_array_equal(points[0].position, [0.1, -0.2, 0.3])
        np.testing.assert_array_equal(points[0].evidence, [1.5, 0.0, 2.5])

    def test_round_trip_is_exact_on_random_points(self, tmp_path):
        rng = np.random.default_rng(17)
        pts = random_points(rng, 1000, 5)
        path = tmp_path / "s.esm"
        write_scan(path, pts, 5)
        back, k = read_scan(path)
        assert k == 5 and len(back) == 1000
        for orig, rt in zip(pts, back):
            np.testing.assert_array_equal(orig.position, rt.position)
            np.testing.assert_array_equal(orig.evidence, rt.evidence)

    def test_hard_labels_encoded_as_evidence(self, tmp_path):
        path = tmp_path / "s.esm"
        write_scan(path, [SemanticPoint.from_label([0, 0, 0], 1, 0.5)], 3)
        points, _ = read_scan(path)
        e = points[0].evidence
        assert e[1] > 0 and e[0] == 0 and e[2] == 0

    @pytest.mark.parametrize("content,fragment", [
        ("", "header"),
        ("ESM2 1 3\n0 0 0 1 1 1\n", "header"),
        ("ESM1 1\n", "header"),
        ("ESM1 one 3\n", "integers"),
        ("ESM1 1 1\n0 0 0 1\n", "K must be >= 2"),
        ("ESM1 2 3\n0 0 0 1 1 1\n", "declares 2 points"),
        ("ESM1 1 3\n0 0 0 1 1\n", "expected 6 values"),
        ("ESM1 1 3\n0 0 0 1 -1 1\n", "negative evidence"),
        ("ESM1 1 3\n0 0 nan 1 1 1\n", "not finite"),
        ("ESM1 1 3\n0 0 zero 1 1 1\n", "not a number"),
    ])
    def test_parse_errors(self, tmp_path, content, fragment):
        path = tmp_path / "bad.esm"
        path.write_text(content)
        with pytest.raises(ParseError, match=fragment):
            read_scan(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.esm"
        path.write_text("ESM1 2 3\n0 0 0 1 1 1\n0 0 0 1 -2 1\n")
        with pytest.raises(ParseError, match=":3:"):
            read_scan(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            read_scan(tmp_path / "nope.esm")


class TestPoseFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(23)
        poses = [random_pose(rng) for _ in range(10)]
        path = tmp_path / "poses.txt"
        write_poses(path, poses)
        back = read_poses(path)
        assert len(back) == 10
        for orig, rt in zip(poses, back):
            np.testing.assert_array_equal(orig.matrix, rt.matrix)

    def test_rejects_wrong_arity(self, tmp_path):
        path = tmp_path / "poses.txt"
        path.write_text("1 0 0 0 0 1 0 0 0 0 1\n")
        with pytest.raises(ParseError, match="12 numbers"):
            read_poses(path)

    def test_rejects_invalid_rotation(self, tmp_path):
        path = tmp_path / "poses.txt"
        path.write_text("2 0 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(ParseError, match="invalid pose"):
            read_poses(path)


class TestMapFiles:
    def cfg(self, **kw):
        base = dict(resolution=0.25, num_classes=4, prior_alpha=0.001,
                    kernel=KernelParams(0.4, 1.1), weight_floor=0.05,
                    label_mode="soft_probs", weighting="one_minus_vacuity")
        base.update(kw)
        return MapConfig(**base)

    def test_empty_map_round_trip(self, tmp_path):
        vmap = VoxelMap(self.cfg())
        path = tmp_path / "m.esmmap"
        serialize_map(vmap, path)
        back = deserialize_map(path)
        assert back.config == vmap.config
        assert len(back) == 0 and back.scan_count == 0

    def test_single_voxel_round_trip(self, tmp_path):
        vmap = VoxelMap(self.cfg())
        vmap.update_scan([SemanticPoint.from_evidence([0.1, 0.1, 0.1], [5, 0, 0, 0])])
        path = tmp_path / "m.esmmap"
        serialize_map(vmap, path)
        back = deserialize_map(path)
        assert set(back.keys()) == set(vmap.keys())
        assert back.scan_count == 1

    def test_large_random_map_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(29)
        vmap = VoxelMap(self.cfg())
        keys = {tuple(int(v) for v in rng.integers(-500, 500, 3)) for _ in range(10_000)}
        for key in keys:
            vmap._cells[key] = vmap.config.prior_alpha + rng.uniform(0, 100, 4)
        vmap.scan_count = 17
        path = tmp_path / "m.esmmap"
        serialize_map(vmap, path)
        back = deserialize_map(path)
        assert back.config == vmap.config
        assert back.scan_count == 17
        assert set(back.keys()) == set(vmap.keys())
        for key in keys:
            orig, rt = vmap.alpha(key), back.alpha(key)
            assert np.array_equal(orig, rt), f"voxel {key} not bit-identical"

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "m.esmmap"
        path.write_bytes(b"ESMMAP2" + b"\x00" * 64)
        with pytest.raises(MapFormatError, match="magic"):
            deserialize_map(path)

    def test_rejects_truncation(self, tmp_path):
        vmap = VoxelMap(self.cfg())
        vmap.update_scan([SemanticPoint.from_evidence([0.1, 0.1, 0.1], [5, 0, 0, 0])])
        path = tmp_path / "m.esmmap"
        serialize_map(vmap, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(MapFormatError, match="bytes"):
            deserialize_map(path)
        path.write_bytes(blob[:12])
        with pytest.raises(MapFormatError, match="truncated"):
            deserialize_map(path)

    def test_rejects_invariant_violation(self, tmp_path):
        vmap = VoxelMap(self.cfg())
        vmap._cells[(0, 0, 0)] = np.array([0.0005, 1.0, 1.0, 1.0])  # below prior
        path = tmp_path / "m.esmmap"
        serialize_map(vmap, path)
        with pytest.raises(MapFormatError, match="invariant"):
            deserialize_map(path)


class TestGroundTruthFiles:
    def test_round_trip(self, tmp_path):
        truth = {(0, 0, 0): 1, (-5, 3, 2): 0, (100, -7, 4): 3}
        path = tmp_path / "truth.txt"
        write_ground_truth(path, truth)
        assert read_ground_truth(path) == truth

    def test_rejects_malformed(self, tmp_path):
        path = tmp_path / "truth.txt"
        path.write_text("0 0 0\n")
        with pytest.raises(ParseError, match="i j k class_id"):
            read_ground_truth(path)
        path.write_text("0 0 0 -1\n")
        with pytest.raises(ParseError, match="negative class"):
            read_ground_truth(path)
        path.write_text("0 0 0 x\n")
        with pytest.raises(ParseError, match="integers"):
            read_ground_truth(path)


class TestKeyValueFiles:
    def test_parse_with_comments_and_blanks(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# comment\n\na=1\nb = two  # trailing\n")
        assert parse_key_values(path) == {"a": "1", "b": "two"}

    def test_rejects_missing_equals(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("resolution 0.5\n")
        with pytest.raises(ParseError, match="key=value"):
            parse_key_values(path)

    def test_map_config_round_trip(self, tmp_path):
        cfg = MapConfig(resolution=0.5, num_classes=6, prior_alpha=0.01,
                        kernel=KernelParams(0.9, 2.0), weight_floor=0.1,
                        label_mode="soft_probs", weighting="uniform")
        path = tmp_path / "c.txt"
        lines = [f"{k}={v}" for k, v in map_config_entries(cfg).items()]
        path.write_text("\n".join(lines))
        assert map_config_from_file(path) == cfg

    def test_map_config_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("resolutoin=0.5\n")
        with pytest.raises(ParseError, match="unknown config keys"):
            map_config_from_file(path)

    def test_map_config_rejects_bad_values(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("resolution=fast\n")
        with pytest.raises(ParseError):
            map_config_from_file(path)
        path.write_text("weighting=magic\n")
        with pytest.raises(ParseError):
            map_config_from_file(path)
