"""Dataset ingestion, augmentation, and thermometer binarization.

Images are numpy uint8 arrays shaped (channels, height, width) with
intensities in [0, 255].  Binarization turns each pixel into a
thermometer code over `threshold_count` evenly spaced thresholds placed
strictly inside [intensity_low, intensity_high]; the resulting bit
tensor is shaped (channels, thresholds, height, width) and flattens in
C order to the network's input vector.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError, DataError, TruncationError

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801

CIFAR10_RECORD = 1 + 3072
CIFAR100_RECORD = 2 + 3072


@dataclass(frozen=True)
class BinarizationConfig:
    """Thermometer encoding parameters.

    Thresholds are t_k = low + k*(high-low)/(count+1) for k = 1..count,
    strictly inside the (possibly cut-out) intensity range so that a
    clamped minimum pixel maps to the all-zero code and a maximum pixel
    to the all-one code.
    """

    threshold_count: int = 31
    intensity_low: float = 0.0
    intensity_high: float = 255.0

    def __post_init__(self):
        if self.threshold_count < 1:
            raise ConfigError("threshold_count must be >= 1")
        if not 0 <= self.intensity_low < self.intensity_high <= 255:
            raise ConfigError(
                "need 0 <= intensity_low < intensity_high <= 255, got "
                f"[{self.intensity_low}, {self.intensity_high}]"
            )

    def thresholds(self) -> np.ndarray:
        span = self.intensity_high - self.intensity_low
        k = np.arange(1, self.threshold_count + 1, dtype=np.float64)
        return self.intensity_low + k * span / (self.threshold_count + 1)


@dataclass(frozen=True)
class AugmentConfig:
    """Raw-image augmentation switches (applied before binarization)."""

    horizontal_flip: bool = False
    crop_pad: int = 0  # zero-pad this many pixels on every side, then random-crop back

    @property
    def enabled(self) -> bool:
        return self.horizontal_flip or self.crop_pad > 0


@dataclass
class LabeledDataset:
    """Images (raw or binarized) with integer class labels.

    `images` is (N, c, h, w) uint8 raw intensities, or (N, c, t, h, w)
    uint8 bits once binarized.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    binarization: BinarizationConfig | None = None

    def __post_init__(self):
        if len(self.images) == 0:
            raise DataError("dataset is empty")
        if len(self.images) != len(self.labels):
            raise DataFormatError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise DataError(
                f"labels must lie in [0, {self.class_count}), "
                f"found range [{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return len(self.images)

    @property
    def binarized(self) -> bool:
        return self.images.ndim == 5

    @property
    def input_shape(self) -> tuple[int, ...]:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(
            self.images[indices], self.labels[indices], self.class_count, self.binarization
        )


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n, path):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncationError(f"{path}: expected {n} more bytes, got {len(buf)}")
    return buf


def _load_idx_array(path, expected_magic):
    with _open_maybe_gzip(path) as f:
        header = f.read(4)
        if len(header) < 4:
            raise DataFormatError(f"{path}: too short for an IDX header")
        (magic,) = struct.unpack(">I", header)
        if magic != expected_magic:
            raise DataFormatError(
                f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
            )
        ndim = magic & 0xFF
        dims = struct.unpack(f">{ndim}I", _read_exact(f, 4 * ndim, path))
        count = int(np.prod(dims))
        data = np.frombuffer(_read_exact(f, count, path), dtype=np.uint8)
        if f.read(1):
            raise DataFormatError(f"{path}: trailing bytes after payload")
    return data.reshape(dims)


def load_idx(images_path, labels_path, class_count: int | None = None) -> LabeledDataset:
    """Load an MNIST-style IDX image/label file pair (plain or gzipped).

    Raises DataFormatError for bad magics or mismatched record counts and
    TruncationError when a payload is shorter than its header promises.
    """
    images = _load_idx_array(images_path, IDX_MAGIC_IMAGES)
    labels = _load_idx_array(labels_path, IDX_MAGIC_LABELS).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images.shape[0]} images in {images_path} but "
            f"{labels.shape[0]} labels in {labels_path}"
        )
    n, h, w = images.shape
    if class_count is None:
        class_count = int(labels.max()) + 1
    return LabeledDataset(images.reshape(n, 1, h, w), labels, class_count)


def load_cifar_binary(path, coarse: bool = False) -> LabeledDataset:
    """Load one CIFAR-10/100 binary batch file.

    The variant is detected from the record arithmetic: 3073-byte records
    are CIFAR-10 (1 label byte), 3074-byte records are CIFAR-100 (coarse
    then fine label byte).  `coarse` selects the 20-superclass labels for
    CIFAR-100 and is ignored for CIFAR-10.
    """
    with _open_maybe_gzip(path) as f:
        raw = f.read()
    if len(raw) == 0:
        raise DataFormatError(f"{path}: empty file")
    is10 = len(raw) % CIFAR10_RECORD == 0
    is100 = len(raw) % CIFAR100_RECORD == 0
    if is10 and is100:
        raise DataFormatError(f"{path}: length {len(raw)} matches both CIFAR variants")
    if not (is10 or is100):
        raise DataFormatError(
            f"{path}: length {len(raw)} is not a multiple of a CIFAR record size"
        )
    record = CIFAR10_RECORD if is10 else CIFAR100_RECORD
    data = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
    if is10:
        labels = data[:, 0].astype(np.int64)
        pixels = data[:, 1:]
        class_count = 10
    else:
        labels = data[:, 0 if coarse else 1].astype(np.int64)
        pixels = data[:, 2:]
        class_count = 20 if coarse else 100
    images = pixels.reshape(-1, 3, 32, 32)
    return LabeledDataset(np.ascontiguousarray(images), labels, class_count)


def concat_datasets(datasets) -> LabeledDataset:
    first = datasets[0]
    return LabeledDataset(
        np.concatenate([d.images for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        first.class_count,
        first.binarization,
    )


def augment(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    """Randomly flip and/or pad-and-crop one raw (c, h, w) image.

    Identity when every switch is off.  Deterministic for a given rng
    state; flip draws first, then the two crop offsets.
    """
    out = img
    if cfg.horizontal_flip and rng.random() < 0.5:
        out = out[:, :, ::-1]
    if cfg.crop_pad > 0:
        p = cfg.crop_pad
        c, h, w = out.shape
        padded = np.zeros((c, h + 2 * p, w + 2 * p), dtype=out.dtype)
        padded[:, p : p + h, p : p + w] = out
        dr = int(rng.integers(0, 2 * p + 1))
        dc = int(rng.integers(0, 2 * p + 1))
        out = padded[:, dr : dr + h, dc : dc + w]
    return np.ascontiguousarray(out)


def augment_batch(images: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    if not cfg.enabled:
        return images
    return np.stack([augment(img, rng, cfg) for img in images])


def binarize(img: np.ndarray, cfg: BinarizationConfig) -> np.ndarray:
    """Thermometer-encode one raw (c, h, w) image to (c, t, h, w) bits.

    Intensities are clamped to the configured range before thresholding,
    which realizes cut-out ranges such as [20, 255].  Bits are monotone
    non-increasing along the threshold axis.
    """
    return binarize_batch(img[None], cfg)[0]


def binarize_batch(images: np.ndarray, cfg: BinarizationConfig) -> np.ndarray:
    """Vectorized `binarize` over a (N, c, h, w) stack -> (N, c, t, h, w)."""
    t = cfg.thresholds()
    clamped = np.clip(images, cfg.intensity_low, cfg.intensity_high)
    # compare (N, c, 1, h, w) against (t, 1, 1) to land thresholds on axis 2
    bits = clamped[:, :, None, :, :] >= t[:, None, None]
    return bits.astype(np.uint8)


def binarize_dataset(ds: LabeledDataset, cfg: BinarizationConfig) -> LabeledDataset:
    if ds.binarized:
        return ds
    return LabeledDataset(binarize_batch(ds.images, cfg), ds.labels, ds.class_count, cfg)


def make_parity_dataset(bits: int) -> LabeledDataset:
    """All 2^n n-bit strings labeled by their XOR; class_count is 2.

    Bit vectors are shaped (1, 1, 1, n) so they flatten to length n like
    any binarized image.  n is capped at 16 to keep the corpus in memory.
    """
    if bits > 16:
        raise DataError(f"parity dataset capped at 16 bits, requested {bits}")
    if bits < 1:
        raise DataError("parity dataset needs at least 1 bit")
    n = 1 << bits
    codes = np.arange(n, dtype=np.uint32)
    images = (codes[:, None] >> np.arange(bits - 1, -1, -1)) & 1
    labels = images.sum(axis=1).astype(np.int64) % 2
    return LabeledDataset(
        images.astype(np.uint8).reshape(n, 1, 1, 1, bits), labels, 2
    )
