"""Per-channel keypoints and descriptors from dense activation tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Keypoint(NamedTuple):
    """Maximally-activated cell of one channel."""

    channel: int
    x: int
    y: int


@dataclass(frozen=True)
class ActivationTensor:
    """Dense activation volume stored as a (channels, height, width) array.

    The canonical flat layout is channel-major: value (k, y, x) lives at
    flat index k*H*W + y*W + x.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.size == 0:
            raise ValueError(f"expected a non-empty (C, H, W) array, got shape {np.shape(self.values)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("activation tensor contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_flat(cls, width: int, height: int, channels: int, flat) -> "ActivationTensor":
        if width < 1 or height < 1 or channels < 1:
            raise ValueError(f"tensor dims must be positive, got {width}x{height}x{channels}")
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != width * height * channels:
            raise ValueError(f"expected {width * height * channels} values, got {flat.size}")
        return cls(flat.reshape(channels, height, width))

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        """Channel-major flat copy of the values."""
        return self.values.ravel().copy()


def extract_keypoints(tensor: ActivationTensor) -> list[Keypoint]:
    """One keypoint per channel at that channel's maximum activation.

    Ties resolve to the smallest row-major index y*W + x.
    """
    c, h, w = tensor.values.shape
    flat_idx = np.argmax(tensor.values.reshape(c, h * w), axis=1)
    return [Keypoint(k, int(i % w), int(i // w)) for k, i in enumerate(flat_idx)]


def descriptor_at(tensor: ActivationTensor, x: int, y: int) -> np.ndarray:
    """The C-dimensional vector along the channel axis at cell (x, y)."""
    if not (0 <= x < tensor.width and 0 <= y < tensor.height):
        raise IndexError(f"cell ({x}, {y}) outside {tensor.width}x{tensor.height} tensor")
    return tensor.values[:, y, x].copy()


def cosine_distance(a, b) -> float:
    """1 - cos(a, b) in [0, 2]; any zero-norm input scores the uninformative 1.0."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"descriptor length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0
    return float(1.0 - np.dot(a, b) / (na * nb))
