"""Spike-train generators and MNIST-style IDX file handling.

All randomness flows through an explicit numpy Generator created by
``make_rng`` (PCG64), so the same seed reproduces the same trains bit for bit
on any platform.  Generators consume random values in row-major scan order over
(neuron, step); that order is part of the reproducibility contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .neurons import SpikeTrain

__all__ = [
    "RNG_ALGORITHM",
    "make_rng",
    "bernoulli_train",
    "rate_encode_image",
    "class_target_train",
    "decode_spike_count",
    "LabeledImages",
    "load_idx",
    "save_idx",
    "IdxError",
    "BadMagicError",
    "TruncatedPayloadError",
    "CountMismatchError",
]

RNG_ALGORITHM = "pcg64"

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxError(Exception):
    """Base class for IDX container parsing failures."""


class BadMagicError(IdxError):
    """File does not start with the expected IDX magic number."""


class TruncatedPayloadError(IdxError):
    """Payload length disagrees with the counts announced in the header."""


class CountMismatchError(IdxError):
    """Image file and label file announce different item counts."""


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit generator (PCG64) for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def bernoulli_train(
    n_neurons: int, n_steps: int, p: float, rng: np.random.Generator
) -> SpikeTrain:
    """Independent spikes with probability p per neuron and step."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"spike probability must be in [0, 1], got {p}")
    draws = rng.random((n_neurons, n_steps))
    return SpikeTrain((draws < p).astype(np.uint8))


def rate_encode_image(
    pixels, n_steps: int, p_max: float, rng: np.random.Generator
) -> SpikeTrain:
    """Bernoulli rate coding: pixel intensity 0..255 maps linearly to a
    per-step spike probability in [0, p_max], one neuron per pixel."""
    if not 0.0 < p_max <= 1.0:
        raise ValueError(f"p_max must be in (0, 1], got {p_max}")
    pixels = np.asarray(pixels, dtype=np.float64).ravel()
    probs = pixels / 255.0 * p_max
    draws = rng.random((pixels.size, n_steps))
    return SpikeTrain((draws < probs[:, None]).astype(np.uint8))


def class_target_train(
    class_idx: int, n_classes: int, n_steps: int, period: int
) -> SpikeTrain:
    """Desired output for one class: the class neuron fires every ``period``
    steps (at period-1, 2*period-1, ...), all other neurons stay silent."""
    if not 0 <= class_idx < n_classes:
        raise ValueError(f"class index {class_idx} out of range for {n_classes} classes")
    if period < 1:
        raise ValueError(f"period must be >= 1, got {period}")
    data = np.zeros((n_classes, n_steps), dtype=np.uint8)
    data[class_idx, period - 1 :: period] = 1
    return SpikeTrain(data)


def decode_spike_count(output: SpikeTrain) -> int:
    """Predicted class: row with the most spikes, lowest index on ties."""
    return int(np.argmax(output.data.sum(axis=1)))


@dataclass(eq=False)
class LabeledImages:
    """Grayscale images flattened to (n_images, n_pixels) uint8 rows with
    digit labels 0-9."""

    pixels: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.uint8)
        if pixels.ndim != 2:
            raise ValueError(f"pixels must be 2-D (n_images, n_pixels), got {pixels.shape}")
        if labels.ndim != 1 or labels.shape[0] != pixels.shape[0]:
            raise CountMismatchError(
                f"{pixels.shape[0]} images but {labels.shape[0]} labels"
            )
        if labels.size and labels.max() > 9:
            raise ValueError("labels must be digits 0-9")
        self.pixels = pixels
        self.labels = labels

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def subset(self, start: int, stop: int) -> "LabeledImages":
        return LabeledImages(self.pixels[start:stop], self.labels[start:stop])


def load_idx(path_images, path_labels) -> LabeledImages:
    """Parse a big-endian IDX image/label file pair.

    Image files carry magic 0x00000803 then count/rows/cols and raw bytes;
    label files carry magic 0x00000801 then count and raw bytes.  The two
    counts must agree.
    """
    img_bytes = Path(path_images).read_bytes()
    lbl_bytes = Path(path_labels).read_bytes()

    if len(img_bytes) < 16:
        raise TruncatedPayloadError(f"{path_images}: header needs 16 bytes, file has {len(img_bytes)}")
    magic, n_images, rows, cols = struct.unpack(">IIII", img_bytes[:16])
    if magic != IMAGE_MAGIC:
        raise BadMagicError(f"{path_images}: magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = n_images * rows * cols
    payload = img_bytes[16:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path_images}: expected {expected} pixel bytes, found {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(n_images, rows * cols)

    if len(lbl_bytes) < 8:
        raise TruncatedPayloadError(f"{path_labels}: header needs 8 bytes, file has {len(lbl_bytes)}")
    magic, n_labels = struct.unpack(">II", lbl_bytes[:8])
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"{path_labels}: magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    payload = lbl_bytes[8:]
    if len(payload) != n_labels:
        raise TruncatedPayloadError(
            f"{path_labels}: expected {n_labels} label bytes, found {len(payload)}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8)

    if n_images != n_labels:
        raise CountMismatchError(f"{n_images} images but {n_labels} labels")
    return LabeledImages(pixels.copy(), labels.copy())


def save_idx(path_images, path_labels, data: LabeledImages, rows: int, cols: int) -> None:
    """Write a LabeledImages set back out as an IDX image/label file pair
    (the exact inverse of load_idx; handy for carving out subsets)."""
    n = len(data)
    if rows * cols != data.pixels.shape[1]:
        raise ValueError(
            f"rows*cols = {rows * cols} does not match {data.pixels.shape[1]} pixels per image"
        )
    with open(path_images, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        f.write(data.pixels.astype(np.uint8).tobytes())
    with open(path_labels, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, n))
        f.write(data.labels.astype(np.uint8).tobytes())
