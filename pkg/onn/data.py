"""
Datasets: the multi-input XOR and MNIST digits in a low-k Fourier representation.
"""

from dataclasses import dataclass
from functools import lru_cache
import gzip
import itertools
import logging
import math
from pathlib import Path
import struct
from typing import Literal, Tuple
import zlib

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
XOR_HIGH = 0.2
XOR_LOW = 0.0


class IDXFormatError(ValueError):
    """Raised when an IDX file cannot be parsed."""


class IDXMagicError(IDXFormatError):
    """The file does not start with the expected magic number."""


class IDXTruncatedError(IDXFormatError):
    """The file ends before the data its header announces."""


class IDXCountMismatchError(IDXFormatError):
    """Image and label files disagree on the number of items."""


@dataclass(frozen=True)
class LabeledExample:
    """One network input with its regression target or class label."""

    # Complex input field
    input: NDArray[np.complex128]

    # Target power (regression) or class index (classification)
    target: float


@dataclass(frozen=True)
class Dataset:
    """Inputs stacked along the first axis with one target per row."""

    inputs: NDArray[np.complex128]
    targets: NDArray
    kind: Literal["regression", "classification"]

    def __post_init__(self):
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        if len(self.targets) != len(self.inputs):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.targets)} targets")

    def __len__(self) -> int:
        return len(self.inputs)

    def __getitem__(self, index: int) -> LabeledExample:
        return LabeledExample(input=self.inputs[index], target=self.targets[index])

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(inputs=self.inputs[indices], targets=self.targets[indices], kind=self.kind)


def xor_dataset(n_inputs: int, high: float = XOR_HIGH, low: float = XOR_LOW) -> Dataset:
    """
    Every binary input pattern of an N-input XOR with its parity target.

    Patterns are enumerated in lexicographic order and normalized to unit L2
    norm; the all-zero pattern stays the zero vector.

    Args:
        n_inputs: Number of inputs, 1 to 16
        high: Target for odd parity
        low: Target for even parity

    Returns:
        A regression dataset of 2^N examples
    """
    if not 1 <= n_inputs <= 16:
        raise ValueError(f"n_inputs must be between 1 and 16, got {n_inputs}")
    patterns = np.array(list(itertools.product((0, 1), repeat=n_inputs)), dtype=np.float64)
    norms = np.linalg.norm(patterns, axis=1, keepdims=True)
    inputs = np.divide(patterns, norms, out=np.zeros_like(patterns), where=norms > 0)
    parity = patterns.sum(axis=1).astype(int) % 2
    targets = np.where(parity == 1, high, low)
    return Dataset(inputs=inputs.astype(np.complex128), targets=targets, kind="regression")


def _open_idx(path: Path):
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path: Path, magic: int, n_dims: int) -> Tuple[Tuple[int, ...], bytes]:
    try:
        with _open_idx(path) as f:
            raw = f.read()
    except (EOFError, gzip.BadGzipFile, zlib.error) as e:
        raise IDXTruncatedError(f"{path}: compressed stream is truncated or corrupt ({e})") from e
    header_size = 4 + 4 * n_dims
    if len(raw) < header_size:
        raise IDXTruncatedError(f"{path}: header needs {header_size} bytes, file has {len(raw)}")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IDXMagicError(f"{path}: magic number 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{n_dims}I", raw[4:header_size])
    expected = math.prod(dims)
    payload = raw[header_size:]
    if len(payload) < expected:
        raise IDXTruncatedError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    return dims, payload[:expected]


def load_mnist_idx(images_path, labels_path) -> Tuple[NDArray[np.float64], NDArray[np.uint8]]:
    """
    Read an MNIST image/label file pair in IDX format.

    The image file has magic 0x00000803 followed by big-endian count, rows and
    columns; the label file has magic 0x00000801 followed by the count. Paths
    ending in `.gz` are decompressed on the fly.

    Args:
        images_path: Path to the image file
        labels_path: Path to the label file

    Returns:
        Tuple of (images in [0, 1] with shape (count, rows, cols), labels)

    Raises:
        FileNotFoundError: If either file is missing
        IDXMagicError: If a magic number is wrong
        IDXTruncatedError: If a file is shorter than its header announces
        IDXCountMismatchError: If the two files hold different item counts
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    for path in (images_path, labels_path):
        if not path.exists():
            raise FileNotFoundError(f"MNIST file not found: {path}")

    (count, rows, cols), pixels = _read_idx(images_path, IMAGE_MAGIC, 3)
    (label_count,), label_bytes = _read_idx(labels_path, LABEL_MAGIC, 1)
    if count != label_count:
        raise IDXCountMismatchError(f"{images_path} holds {count} images but {labels_path} holds {label_count} labels")

    images = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(label_bytes, dtype=np.uint8).copy()
    logger.info("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return images, labels


@lru_cache(maxsize=None)
def _low_k_order(rows: int, cols: int) -> Tuple[NDArray[np.intp], NDArray[np.intp]]:
    """Indices into the unshifted spectrum sorted by |k|, ties by (k_x, k_y)."""
    qx = np.arange(-(rows // 2), rows - rows // 2)
    qy = np.arange(-(cols // 2), cols - cols // 2)
    kx, ky = np.meshgrid(2.0 * np.pi * qx / rows, 2.0 * np.pi * qy / cols, indexing="ij")
    kx, ky = kx.ravel(), ky.ravel()
    k = np.sqrt(kx**2 + ky**2)
    # lexsort keys go from least to most significant
    order = np.lexsort((ky, kx, np.round(k, 12)))
    ix, iy = np.meshgrid(qx % rows, qy % cols, indexing="ij")
    return ix.ravel()[order], iy.ravel()[order]


def fourier_spectrum(images) -> NDArray[np.complex128]:
    """
    Unshifted 2-D spectrum c(k_x, k_y) = Σ exp(i·k_x·m + i·k_y·n)·g(m, n).

    The row index m pairs with k_x and the column index n with k_y.
    """
    images = np.asarray(images, dtype=np.float64)
    rows, cols = images.shape[-2:]
    return np.fft.ifft2(images, axes=(-2, -1)) * (rows * cols)


def fourier_features_batch(images, n_coeffs: int) -> NDArray[np.complex128]:
    """
    Lowest-|k| Fourier coefficients of each image, normalized to unit L2 norm.

    Args:
        images: Array of shape (count, rows, cols)
        n_coeffs: Number of coefficients kept per image

    Returns:
        Array of shape (count, n_coeffs)
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"expected a stack of 2-D images, got shape {images.shape}")
    rows, cols = images.shape[1:]
    if not 1 <= n_coeffs <= rows * cols:
        raise ValueError(f"n_coeffs must be between 1 and {rows * cols}, got {n_coeffs}")
    ix, iy = _low_k_order(rows, cols)
    selected = fourier_spectrum(images)[:, ix[:n_coeffs], iy[:n_coeffs]]
    norms = np.linalg.norm(selected, axis=1, keepdims=True)
    return np.divide(selected, norms, out=np.zeros_like(selected), where=norms > 0)


def fourier_features(image, n_coeffs: int) -> NDArray[np.complex128]:
    """
    Lowest-|k| Fourier coefficients of a 28×28 image, normalized to unit L2 norm.

    Raises:
        ValueError: If the image is not 28×28 or n_coeffs exceeds 784
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (28, 28):
        raise ValueError(f"expected a 28x28 image, got shape {image.shape}")
    return fourier_features_batch(image[None], n_coeffs)[0]


def spectral_power_fraction(image, n_coeffs: int) -> float:
    """Share of the total spectral power carried by the n_coeffs lowest-|k| coefficients."""
    spectrum = fourier_spectrum(image)
    ix, iy = _low_k_order(*spectrum.shape)
    power = np.abs(spectrum) ** 2
    return float(np.sum(power[ix[:n_coeffs], iy[:n_coeffs]]) / np.sum(power))


def mnist_dataset(images, labels, n_coeffs: int) -> Dataset:
    """Classification dataset of Fourier features."""
    return Dataset(
        inputs=fourier_features_batch(images, n_coeffs),
        targets=np.asarray(labels, dtype=np.intp),
        kind="classification",
    )


def write_feature_cache(features, path) -> None:
    """
    Write features as [count:u32][dim:u32] followed by interleaved little-endian re, im float64 pairs.
    """
    features = np.asarray(features, dtype=np.complex128)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    count, dim = features.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<II", count, dim))
        f.write(features.astype("<c16").tobytes())


def read_feature_cache(path) -> NDArray[np.complex128]:
    """Read features written by write_feature_cache."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise IDXTruncatedError(f"{path}: feature cache header is incomplete")
    count, dim = struct.unpack("<II", raw[:8])
    expected = count * dim * 16
    if len(raw) - 8 != expected:
        raise IDXTruncatedError(f"{path}: expected {expected} feature bytes, found {len(raw) - 8}")
    return np.frombuffer(raw[8:], dtype="<c16").reshape(count, dim).astype(np.complex128)
