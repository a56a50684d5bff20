"""On-disk traverse and tensor formats, plus GPS distance subsampling.

Traverse directory layout (format_version 1, everything little-endian):

    meta.txt    key=value metadata in a fixed key order
    poses.csv   frame_id,x_m,y_m,heading_rad,s_m  (floats repr'd, exact round-trip)
    frames.bin  magic "VPRT", uint32 version, then per frame:
                  uint32 frame_id
                  C x (int32 x, int32 y, float64 depth_m; NaN depth = invalid)
                  C*D float32 descriptors (channel-major)
                  D float32 global descriptor
    tensors/    optional activation tensors, one "<frame_id>.vpra" per frame:
                  magic "VPRA", uint32 W, H, C, then W*H*C float32 values
                  (channel-major: index k*H*W + y*W + x)

Saving the same traverse twice produces byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensors import ActivationTensor
from .traverse import FrameRecord, Pose, Traverse, TraverseMeta

FRAMES_MAGIC = b"VPRT"
TENSOR_MAGIC = b"VPRA"
FORMAT_VERSION = 1

_META_KEYS = (
    "format_version",
    "name",
    "direction",
    "condition",
    "spacing_m",
    "channels",
    "descriptor_dim",
    "frame_count",
)
_POSES_HEADER = "frame_id,x_m,y_m,heading_rad,s_m"
_KEYPOINT_DTYPE = np.dtype([("x", "<i4"), ("y", "<i4"), ("depth", "<f8")])


class TraverseStoreError(Exception):
    """Base class for every on-disk validation failure."""


class TraverseMissingFileError(TraverseStoreError):
    pass


class TraverseMagicError(TraverseStoreError):
    pass


class TraverseVersionError(TraverseStoreError):
    pass


class TraverseDimensionError(TraverseStoreError):
    pass


class TraverseTruncationError(TraverseStoreError):
    pass


class TraverseValueError(TraverseStoreError):
    pass


class TraverseMetadataError(TraverseStoreError):
    pass


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise TraverseMissingFileError(f"missing file: {path}")
    return path


def save_traverse(traverse: Traverse, directory) -> None:
    """Write the traverse directory; rewriting an identical traverse is byte-identical."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = traverse.meta
    for label, value in (("name", meta.name), ("direction", meta.direction), ("condition", meta.condition)):
        if "\n" in value or "\r" in value:
            raise ValueError(f"metadata {label} must not contain newlines")

    meta_values = {
        "format_version": str(FORMAT_VERSION),
        "name": meta.name,
        "direction": meta.direction,
        "condition": meta.condition,
        "spacing_m": repr(float(meta.spacing_m)),
        "channels": str(meta.channels),
        "descriptor_dim": str(meta.descriptor_dim),
        "frame_count": str(len(traverse)),
    }
    meta_text = "".join(f"{k}={meta_values[k]}\n" for k in _META_KEYS)
    (directory / "meta.txt").write_text(meta_text, encoding="utf-8")

    pose_lines = [_POSES_HEADER]
    for f in traverse.frames:
        p = f.pose
        pose_lines.append(f"{f.frame_id},{p.x!r},{p.y!r},{p.heading!r},{p.s!r}")
    (directory / "poses.csv").write_text("\n".join(pose_lines) + "\n", encoding="utf-8")

    chunks = [FRAMES_MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for f in traverse.frames:
        rec = np.empty(meta.channels, dtype=_KEYPOINT_DTYPE)
        rec["x"] = f.keypoints[:, 0]
        rec["y"] = f.keypoints[:, 1]
        rec["depth"] = f.keypoint_depths
        chunks.append(struct.pack("<I", f.frame_id))
        chunks.append(rec.tobytes())
        chunks.append(np.ascontiguousarray(f.descriptors, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(f.global_descriptor, dtype="<f4").tobytes())
    (directory / "frames.bin").write_bytes(b"".join(chunks))


def _parse_meta(path: Path) -> dict:
    raw = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise TraverseMetadataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        if key in raw:
            raise TraverseMetadataError(f"{path}: duplicate key {key!r}")
        raw[key] = value
    missing = [k for k in _META_KEYS if k not in raw]
    unknown = [k for k in raw if k not in _META_KEYS]
    if missing or unknown:
        raise TraverseMetadataError(f"{path}: missing keys {missing}, unknown keys {unknown}")
    if raw["format_version"] != str(FORMAT_VERSION):
        raise TraverseVersionError(f"{path}: unsupported format_version {raw['format_version']!r}")
    try:
        parsed = {
            "name": raw["name"],
            "direction": raw["direction"],
            "condition": raw["condition"],
            "spacing_m": float(raw["spacing_m"]),
            "channels": int(raw["channels"]),
            "descriptor_dim": int(raw["descriptor_dim"]),
            "frame_count": int(raw["frame_count"]),
        }
    except ValueError as e:
        raise TraverseMetadataError(f"{path}: {e}") from e
    if not (np.isfinite(parsed["spacing_m"]) and parsed["spacing_m"] > 0):
        raise TraverseMetadataError(f"{path}: spacing_m must be positive, got {parsed['spacing_m']}")
    if parsed["channels"] < 1 or parsed["descriptor_dim"] < 1 or parsed["frame_count"] < 0:
        raise TraverseMetadataError(f"{path}: non-positive dimension in metadata")
    return parsed


def _parse_poses(path: Path, frame_count: int) -> list[tuple[int, Pose]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _POSES_HEADER:
        raise TraverseMetadataError(f"{path}: expected header {_POSES_HEADER!r}")
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != frame_count:
        raise TraverseMetadataError(f"{path}: expected {frame_count} pose rows, got {len(rows)}")
    poses = []
    for lineno, line in enumerate(rows, 2):
        parts = line.split(",")
        if len(parts) != 5:
            raise TraverseMetadataError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            frame_id = int(parts[0])
            vals = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise TraverseMetadataError(f"{path}:{lineno}: {e}") from e
        if not all(np.isfinite(v) for v in vals):
            raise TraverseValueError(f"{path}:{lineno}: non-finite pose value")
        poses.append((frame_id, Pose(vals[0], vals[1], vals[2], vals[3])))
    return poses


def load_traverse(directory) -> Traverse:
    """Read and fully validate a traverse directory."""
    directory = Path(directory)
    meta_path = _require_file(directory / "meta.txt")
    poses_path = _require_file(directory / "poses.csv")
    frames_path = _require_file(directory / "frames.bin")

    meta = _parse_meta(meta_path)
    channels, dim, frame_count = meta["channels"], meta["descriptor_dim"], meta["frame_count"]
    poses = _parse_poses(poses_path, frame_count)

    data = frames_path.read_bytes()
    if len(data) < 8:
        raise TraverseTruncationError(f"{frames_path}: header truncated ({len(data)} bytes)")
    if data[:4] != FRAMES_MAGIC:
        raise TraverseMagicError(f"{frames_path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack("<I", data[4:8])
    if version != FORMAT_VERSION:
        raise TraverseVersionError(f"{frames_path}: unsupported version {version}")

    frame_size = 4 + channels * _KEYPOINT_DTYPE.itemsize + (channels * dim + dim) * 4
    body = len(data) - 8
    if body < frame_count * frame_size:
        raise TraverseTruncationError(
            f"{frames_path}: frame {body // frame_size} truncated "
            f"({body} bytes for {frame_count} frames of {frame_size})"
        )
    if body > frame_count * frame_size:
        raise TraverseDimensionError(f"{frames_path}: {body - frame_count * frame_size} trailing bytes")

    frames = []
    offset = 8
    last_id = None
    for i in range(frame_count):
        (frame_id,) = struct.unpack_from("<I", data, offset)
        offset += 4
        rec = np.frombuffer(data, dtype=_KEYPOINT_DTYPE, count=channels, offset=offset)
        offset += channels * _KEYPOINT_DTYPE.itemsize
        desc = np.frombuffer(data, dtype="<f4", count=channels * dim, offset=offset).reshape(channels, dim)
        offset += channels * dim * 4
        gd = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += dim * 4

        if last_id is not None and frame_id <= last_id:
            raise TraverseMetadataError(f"{frames_path}: frame ids not strictly increasing at record {i}")
        last_id = frame_id
        pose_id, pose = poses[i]
        if pose_id != frame_id:
            raise TraverseMetadataError(
                f"{directory}: frame {i} id mismatch (frames.bin={frame_id}, poses.csv={pose_id})"
            )
        if np.any(rec["x"] < 0) or np.any(rec["y"] < 0):
            raise TraverseValueError(f"{frames_path}: frame {frame_id} has negative keypoint coordinates")
        depths = rec["depth"]
        bad_depth = ~(np.isnan(depths) | (np.isfinite(depths) & (depths > 0.0)))
        if np.any(bad_depth):
            k = int(np.flatnonzero(bad_depth)[0])
            raise TraverseValueError(
                f"{frames_path}: frame {frame_id} channel {k} depth {depths[k]} is neither positive nor NaN"
            )
        if not np.all(np.isfinite(desc)):
            raise TraverseValueError(f"{frames_path}: frame {frame_id} has non-finite descriptor values")
        if not np.all(np.isfinite(gd)):
            raise TraverseValueError(f"{frames_path}: frame {frame_id} has a non-finite global descriptor")

        frames.append(
            FrameRecord(
                frame_id=int(frame_id),
                keypoints=np.stack([rec["x"], rec["y"]], axis=1).astype(np.int32),
                keypoint_depths=depths.astype(np.float64),
                descriptors=desc.copy(),
                global_descriptor=gd.copy(),
                pose=pose,
            )
        )

    return Traverse(
        meta=TraverseMeta(
            name=meta["name"],
            direction=meta["direction"],
            condition=meta["condition"],
            spacing_m=meta["spacing_m"],
            channels=channels,
            descriptor_dim=dim,
        ),
        frames=frames,
    )


def tensor_path(directory, frame_id: int) -> Path:
    return Path(directory) / "tensors" / f"{frame_id:06d}.vpra"


def save_tensor(path, tensor: ActivationTensor) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = TENSOR_MAGIC + struct.pack("<III", tensor.width, tensor.height, tensor.channels)
    path.write_bytes(header + np.ascontiguousarray(tensor.values, dtype="<f4").tobytes())


def load_tensor(path) -> ActivationTensor:
    path = _require_file(Path(path))
    data = path.read_bytes()
    if len(data) < 16:
        raise TraverseTruncationError(f"{path}: header truncated ({len(data)} bytes)")
    if data[:4] != TENSOR_MAGIC:
        raise TraverseMagicError(f"{path}: bad magic {data[:4]!r}")
    w, h, c = struct.unpack("<III", data[4:16])
    if w < 1 or h < 1 or c < 1:
        raise TraverseDimensionError(f"{path}: non-positive dims {w}x{h}x{c}")
    expected = 16 + w * h * c * 4
    if len(data) < expected:
        raise TraverseTruncationError(f"{path}: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TraverseDimensionError(f"{path}: {len(data) - expected} trailing bytes")
    values = np.frombuffer(data, dtype="<f4", count=w * h * c, offset=16)
    if not np.all(np.isfinite(values)):
        raise TraverseValueError(f"{path}: non-finite tensor values")
    return ActivationTensor.from_flat(w, h, c, values)


def subsample_by_distance(positions, spacing: float) -> list[int]:
    """Greedy selection of pose indices at least `spacing` apart along the path.

    Index 0 is always retained; each later pose is retained once the cumulative
    polyline distance since the last retained pose reaches the spacing.
    """
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
        raise ValueError(f"expected a non-empty (N, 2) position array, got shape {pts.shape}")
    if not (np.isfinite(spacing) and spacing > 0):
        raise ValueError(f"spacing must be positive, got {spacing}")
    retained = [0]
    acc = 0.0
    for i in range(1, pts.shape[0]):
        acc += float(np.hypot(*(pts[i] - pts[i - 1])))
        if acc >= spacing:
            retained.append(i)
            acc = 0.0
    return retained
