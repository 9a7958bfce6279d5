"""Datasets: seeded Gaussian blobs, header-free CSV and the IDX format."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..core import make_rng
from ..errors import FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Inputs as rows of a (samples, features) array with integer labels."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"inputs {X.shape} and labels {y.shape} do not pair up")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return int(self.labels.size)

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])


def gen_blobs(n_per_class: int, n_classes: int, dim: int, spread: float, seed) -> Dataset:
    """Gaussian clusters with means one unit apart.

    Means are e_c / sqrt(2) when dim >= n_classes, otherwise c * e_1.
    Samples are ordered by class.
    """
    if n_per_class < 1 or n_classes < 1 or dim < 1 or spread < 0:
        raise ValueError("blob sizes must be positive and spread nonnegative")
    rng = make_rng(seed)
    means = np.zeros((n_classes, dim))
    if dim >= n_classes:
        means[np.arange(n_classes), np.arange(n_classes)] = 1.0 / np.sqrt(2.0)
    else:
        means[:, 0] = np.arange(n_classes)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    X = means[labels] + spread * rng.standard_normal((labels.size, dim))
    return Dataset(X, labels, n_classes)


def split(data: Dataset, fraction: float, seed):
    """Shuffle and split into (first, second) with ``fraction`` in the first part."""
    perm = make_rng(seed).permutation(len(data))
    cut = int(round(fraction * len(data)))
    a, b = perm[:cut], perm[cut:]
    return (Dataset(data.inputs[a], data.labels[a], data.n_classes),
            Dataset(data.inputs[b], data.labels[b], data.n_classes))


def load_csv(path, n_classes: int | None = None) -> Dataset:
    """Header-free CSV: integer label first, features after."""
    raw = open(path, "rb").read()
    rows, labels = [], []
    offset = 0
    for line in raw.splitlines(keepends=True):
        text = line.decode("utf-8", errors="replace").strip()
        if text:
            fields = text.split(",")
            try:
                label = int(fields[0])
                feats = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise FormatError(f"unparsable CSV row ({exc})", offset, path) from None
            if rows and len(feats) != len(rows[0]):
                raise FormatError(f"row has {len(feats)} features, expected {len(rows[0])}", offset, path)
            if label < 0:
                raise FormatError(f"negative label {label}", offset, path)
            rows.append(feats)
            labels.append(label)
        offset += len(line)
    if not rows:
        raise FormatError("no data rows", 0, path)
    k = max(labels) + 1 if n_classes is None else n_classes
    return Dataset(np.array(rows), np.array(labels), k)


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = open(path, "rb").read()
    if len(raw) < 4:
        raise FormatError("file too short for IDX magic", len(raw), path)
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"bad IDX magic 0x{got:08x}, expected 0x{magic:08x}", 0, path)
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise FormatError("truncated IDX dimension header", len(raw), path)
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    need = head + int(np.prod(dims))
    if len(raw) < need:
        raise FormatError(f"truncated IDX payload: need {need} bytes, have {len(raw)}", len(raw), path)
    if len(raw) > need:
        raise FormatError("trailing bytes after IDX payload", need, path)
    return np.frombuffer(raw, dtype=np.uint8, count=need - head, offset=head).reshape(dims)


def load_idx(images_path, labels_path, n_classes: int | None = None, scale: float = 1.0 / 255.0) -> Dataset:
    """Unsigned-byte IDX images (magic 0x00000803) and labels (0x00000801)."""
    imgs = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1).astype(np.int64)
    if imgs.shape[0] != labels.shape[0]:
        raise FormatError(f"{imgs.shape[0]} images but {labels.shape[0]} labels", 4, labels_path)
    k = int(labels.max()) + 1 if n_classes is None else n_classes
    return Dataset(imgs.reshape(imgs.shape[0], -1).astype(np.float64) * scale, labels, k)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (N, rows, cols) and labels (N,) in IDX format."""
    imgs = np.asarray(images, dtype=np.uint8)
    lab = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *imgs.shape))
        f.write(imgs.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, lab.shape[0]))
        f.write(lab.tobytes())
