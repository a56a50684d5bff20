import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import make_random_traverse
from seq2single.store import (
    FORMAT_VERSION,
    TraverseDimensionError,
    TraverseMagicError,
    TraverseMetadataError,
    TraverseMissingFileError,
    TraverseTruncationError,
    TraverseValueError,
    TraverseVersionError,
    load_tensor,
    load_traverse,
    save_tensor,
    save_traverse,
    subsample_by_distance,
    tensor_path,
)
from seq2single.tensors import ActivationTensor
from seq2single.traverse import traverses_equal


def _dir_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


class TestRoundTrip:
    def test_save_load_structural_equality(self, tmp_path):
        t = make_random_traverse(0, n_frames=6, channels=3, dim=5)
        save_traverse(t, tmp_path / "t")
        assert traverses_equal(load_traverse(tmp_path / "t"), t)

    def test_save_twice_byte_identical(self, tmp_path):
        t = make_random_traverse(1, n_frames=4, channels=2, dim=3)
        save_traverse(t, tmp_path / "a")
        save_traverse(t, tmp_path / "b")
        assert _dir_bytes(tmp_path / "a") == _dir_bytes(tmp_path / "b")

    def test_many_random_traverses(self, tmp_path):
        rng = np.random.default_rng(2)
        for i in range(25):
            t = make_random_traverse(
                100 + i,
                n_frames=int(rng.integers(1, 8)),
                channels=int(rng.integers(1, 6)),
                dim=int(rng.integers(1, 7)),
            )
            d = tmp_path / f"t{i}"
            save_traverse(t, d)
            assert traverses_equal(load_traverse(d), t)


class TestCorruption:
    @pytest.fixture
    def saved(self, tmp_path):
        save_traverse(make_random_traverse(3, n_frames=5, channels=3, dim=4), tmp_path / "t")
        return tmp_path / "t"

    def test_missing_files(self, saved):
        for name in ("meta.txt", "poses.csv", "frames.bin"):
            backup = (saved / name).read_bytes()
            (saved / name).unlink()
            with pytest.raises(TraverseMissingFileError):
                load_traverse(saved)
            (saved / name).write_bytes(backup)

    def test_bad_magic(self, saved):
        data = bytearray((saved / "frames.bin").read_bytes())
        data[:4] = b"XXXX"
        (saved / "frames.bin").write_bytes(bytes(data))
        with pytest.raises(TraverseMagicError):
            load_traverse(saved)

    def test_bad_binary_version(self, saved):
        data = bytearray((saved / "frames.bin").read_bytes())
        data[4:8] = struct.pack("<I", 99)
        (saved / "frames.bin").write_bytes(bytes(data))
        with pytest.raises(TraverseVersionError):
            load_traverse(saved)

    def test_bad_meta_version(self, saved):
        text = (saved / "meta.txt").read_text().replace("format_version=1", "format_version=9")
        (saved / "meta.txt").write_text(text)
        with pytest.raises(TraverseVersionError):
            load_traverse(saved)

    def test_truncated_frames_names_frame(self, saved):
        data = (saved / "frames.bin").read_bytes()
        (saved / "frames.bin").write_bytes(data[: len(data) - 10])
        with pytest.raises(TraverseTruncationError, match="frame 4"):
            load_traverse(saved)

    def test_trailing_bytes_rejected(self, saved):
        with open(saved / "frames.bin", "ab") as f:
            f.write(b"\x00\x00\x00")
        with pytest.raises(TraverseDimensionError):
            load_traverse(saved)

    def test_non_finite_descriptor(self, saved):
        t = make_random_traverse(4, n_frames=2, channels=2, dim=3)
        t.frames[1].descriptors[0, 1] = np.inf
        d = saved.parent / "nf"
        save_traverse(t, d)
        with pytest.raises(TraverseValueError, match="frame 1"):
            load_traverse(d)

    def test_negative_depth(self, saved):
        t = make_random_traverse(5, n_frames=2, channels=2, dim=3)
        t.frames[0].keypoint_depths[1] = -4.0
        d = saved.parent / "nd"
        save_traverse(t, d)
        with pytest.raises(TraverseValueError, match="channel 1"):
            load_traverse(d)

    def test_pose_row_count_mismatch(self, saved):
        lines = (saved / "poses.csv").read_text().splitlines()
        (saved / "poses.csv").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(TraverseMetadataError):
            load_traverse(saved)

    def test_bad_poses_header(self, saved):
        lines = (saved / "poses.csv").read_text().splitlines()
        lines[0] = "id,x,y,h,s"
        (saved / "poses.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(TraverseMetadataError):
            load_traverse(saved)

    def test_unknown_meta_key(self, saved):
        with open(saved / "meta.txt", "a") as f:
            f.write("extra=1\n")
        with pytest.raises(TraverseMetadataError):
            load_traverse(saved)

    def test_missing_meta_key(self, saved):
        lines = [l for l in (saved / "meta.txt").read_text().splitlines() if not l.startswith("condition=")]
        (saved / "meta.txt").write_text("\n".join(lines) + "\n")
        with pytest.raises(TraverseMetadataError):
            load_traverse(saved)

    def test_frame_count_mismatch(self, saved):
        text = (saved / "meta.txt").read_text().replace("frame_count=5", "frame_count=4")
        (saved / "meta.txt").write_text(text)
        with pytest.raises(TraverseMetadataError):
            load_traverse(saved)


class TestTensorFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        t = ActivationTensor(rng.normal(size=(4, 3, 5)).astype(np.float32).astype(np.float64))
        path = tensor_path(tmp_path, 7)
        save_tensor(path, t)
        loaded = load_tensor(path)
        assert loaded.values.shape == (4, 3, 5)
        assert np.array_equal(loaded.values, t.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.vpra"
        p.write_bytes(b"NOPE" + struct.pack("<III", 1, 1, 1) + b"\x00" * 4)
        with pytest.raises(TraverseMagicError):
            load_tensor(p)

    def test_truncation_and_trailing(self, tmp_path):
        rng = np.random.default_rng(7)
        t = ActivationTensor(rng.normal(size=(2, 2, 2)))
        p = tmp_path / "t.vpra"
        save_tensor(p, t)
        data = p.read_bytes()
        p.write_bytes(data[:-4])
        with pytest.raises(TraverseTruncationError):
            load_tensor(p)
        p.write_bytes(data + b"\x00")
        with pytest.raises(TraverseDimensionError):
            load_tensor(p)

    def test_missing(self, tmp_path):
        with pytest.raises(TraverseMissingFileError):
            load_tensor(tmp_path / "absent.vpra")


class TestSubsampleByDistance:
    def test_exact_spacing(self):
        poses = np.array([[0.0, 0], [1, 0], [2, 0], [3, 0], [4, 0]])
        assert subsample_by_distance(poses, 2.0) == [0, 2, 4]

    def test_spacing_beyond_path(self):
        poses = np.array([[0.0, 0], [1, 0], [2, 0]])
        assert subsample_by_distance(poses, 10.0) == [0]

    def test_matches_greedy_oracle(self):
        rng = np.random.default_rng(8)
        poses = np.cumsum(rng.normal(0, 1.0, size=(200, 2)), axis=0)
        spacing = 3.0

        retained = [0]
        acc = 0.0
        for i in range(1, len(poses)):
            acc += float(np.linalg.norm(poses[i] - poses[i - 1]))
            if acc >= spacing:
                retained.append(i)
                acc = 0.0
        assert subsample_by_distance(poses, spacing) == retained

    def test_errors(self):
        with pytest.raises(ValueError):
            subsample_by_distance(np.zeros((0, 2)), 1.0)
        with pytest.raises(ValueError):
            subsample_by_distance(np.zeros((3, 2)), 0.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=2, max_value=60), st.floats(min_value=0.5, max_value=5.0), st.integers(0, 2**31 - 1))
    def test_retained_indices_spaced(self, n, spacing, seed):
        rng = np.random.default_rng(seed)
        poses = np.cumsum(rng.normal(0, 1.0, size=(n, 2)), axis=0)
        retained = subsample_by_distance(poses, spacing)
        assert retained[0] == 0
        assert all(b > a for a, b in zip(retained, retained[1:]))
        seg = np.linalg.norm(np.diff(poses, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        for a, b in zip(retained, retained[1:]):
            assert cum[b] - cum[a] >= spacing - 1e-9
