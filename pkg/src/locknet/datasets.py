"""Dataset ingestion and the canonical on-disk container.

Three bit-exact parsers live here: the big-endian IDX format (MNIST,
FashionMNIST), the CIFAR binary record format (CIFAR10/100), and this
package's own canonical container (magic ``MLDS``) that every dataset is
normalized into. Heterogeneous sources (GTSRB, SVHN) are converted to the
canonical format offline and enter through :func:`load_canonical`.

Pixels stay u8 all the way through; the [0,1] float normalization happens
only inside the trainer.
"""

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from locknet.errors import FormatError

CANONICAL_MAGIC = b"MLDS"
CANONICAL_VERSION = 1

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Images (N,H,W,C) u8 with integer labels in [0, class_count)."""

    name: str
    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise FormatError(
                f"images must be N x H x W x C, got shape {self.images.shape}"
            )
        if self.images.dtype != np.uint8:
            raise FormatError(f"pixels must be u8, got {self.images.dtype}")
        if len(self.images) != len(self.labels):
            raise FormatError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if len(self.images) == 0:
            raise FormatError("dataset is empty")
        if self.class_count < 1:
            raise FormatError("class_count must be positive")
        bad = (self.labels < 0) | (self.labels >= self.class_count)
        if bad.any():
            i = int(np.argmax(bad))
            raise FormatError(
                f"label {self.labels[i]} at index {i} outside [0, {self.class_count})"
            )

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, indices, name=None):
        return LabeledDataset(
            name or self.name,
            self.images[indices],
            self.labels[indices],
            self.class_count,
        )

    def with_labels(self, labels, name=None):
        """Same pixels (shared, not copied), new labels."""
        return LabeledDataset(
            name or self.name, self.images, labels, self.class_count
        )


def _read_exact(f, n, what, offset):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}", offset + len(data))
    return data


def load_idx(images_path, labels_path, class_count=None, name=None):
    """Parse an IDX image/label file pair (big-endian, magic-tagged).

    ``class_count`` defaults to max(label)+1 when not given; when given,
    any out-of-range label byte is rejected.
    """
    with open(images_path, "rb") as f:
        header = _read_exact(f, 16, "IDX image header", 0)
        magic, n, h, w = struct.unpack(">IIII", header)
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"bad IDX image magic 0x{magic:08x} (expected 0x{IDX_IMAGE_MAGIC:08x})",
                0,
            )
        pixels = _read_exact(f, n * h * w, "IDX pixel payload", 16)
        if f.read(1):
            raise FormatError("trailing bytes after IDX pixel payload", 16 + n * h * w)
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(n, h, w, 1)

    with open(labels_path, "rb") as f:
        header = _read_exact(f, 8, "IDX label header", 0)
        magic, n_labels = struct.unpack(">II", header)
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"bad IDX label magic 0x{magic:08x} (expected 0x{IDX_LABEL_MAGIC:08x})",
                0,
            )
        if n_labels != n:
            raise FormatError(
                f"label count {n_labels} does not match image count {n}", 4
            )
        labels = np.frombuffer(
            _read_exact(f, n_labels, "IDX label payload", 8), dtype=np.uint8
        )

    k = class_count if class_count is not None else int(labels.max()) + 1
    return LabeledDataset(
        name or os.path.basename(images_path), images, labels, k
    )


def load_cifar_binary(paths, label_mode="cifar10", name=None):
    """Parse CIFAR binary batch files.

    ``label_mode`` is ``cifar10`` (1 label byte per record), or
    ``cifar100-fine`` / ``cifar100-coarse`` (2 label bytes: coarse then
    fine). Channel-planar records are converted to interleaved H x W x C.
    """
    modes = {
        "cifar10": (1, 0, 10),
        "cifar100-coarse": (2, 0, 20),
        "cifar100-fine": (2, 1, 100),
    }
    if label_mode not in modes:
        raise FormatError(
            f"unknown CIFAR label mode {label_mode!r} (expected one of {sorted(modes)})"
        )
    label_bytes, label_index, k = modes[label_mode]
    record = label_bytes + 3072

    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    chunks, labels = [], []
    for path in paths:
        with open(path, "rb") as f:
            data = f.read()
        if len(data) == 0 or len(data) % record:
            raise FormatError(
                f"{path}: length {len(data)} is not a multiple of the "
                f"{record}-byte record size",
                len(data) - len(data) % record,
            )
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
        labels.append(raw[:, label_index].copy())
        planar = raw[:, label_bytes:].reshape(-1, 3, 32, 32)
        chunks.append(planar.transpose(0, 2, 3, 1).copy())

    return LabeledDataset(
        name or f"cifar-{label_mode}",
        np.concatenate(chunks),
        np.concatenate(labels),
        k,
    )


def save_canonical(dataset, path):
    """Write the canonical container (atomic: temp file then rename)."""
    n, h, w, c = dataset.images.shape
    k = dataset.class_count
    wide_labels = k > 256
    header = CANONICAL_MAGIC + struct.pack(
        "<HHIHHB", CANONICAL_VERSION, k, n, h, w, c
    )
    label_dtype = "<u2" if wide_labels else "u1"
    payload = dataset.labels.astype(label_dtype).tobytes()

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".mlds.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(dataset.images).tobytes())
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_canonical(path, name=None):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CANONICAL_MAGIC:
        raise FormatError("not a canonical dataset file (bad magic)", 0)
    header_size = 4 + struct.calcsize("<HHIHHB")
    if len(data) < header_size:
        raise FormatError("truncated canonical header", len(data))
    version, k, n, h, w, c = struct.unpack("<HHIHHB", data[4:header_size])
    if version != CANONICAL_VERSION:
        raise FormatError(f"unsupported canonical version {version}", 4)

    pixel_bytes = n * h * w * c
    label_size = 2 if k > 256 else 1
    expected = header_size + pixel_bytes + n * label_size
    if len(data) != expected:
        raise FormatError(
            f"payload length mismatch: file has {len(data)} bytes, header implies {expected}",
            min(len(data), expected),
        )
    images = (
        np.frombuffer(data, dtype=np.uint8, count=pixel_bytes, offset=header_size)
        .reshape(n, h, w, c)
        .copy()
    )
    labels = np.frombuffer(
        data,
        dtype="<u2" if k > 256 else "u1",
        count=n,
        offset=header_size + pixel_bytes,
    ).astype(np.int64)
    return LabeledDataset(
        name or os.path.splitext(os.path.basename(path))[0], images, labels, k
    )


def split_half(dataset, seed):
    """Seeded shuffle, then exact split into ceil(N/2) + floor(N/2) parts.

    A deterministic partition: disjoint, exhaustive, reproducible per seed.
    """
    n = len(dataset)
    if n < 2:
        raise FormatError(f"cannot split a dataset of {n} sample(s)")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    cut = (n + 1) // 2
    return dataset.subset(order[:cut]), dataset.subset(order[cut:])
