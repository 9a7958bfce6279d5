"""Little-endian binary weight files.

Layout: b"SHDW", u32 version (1), u32 matrix count, then per matrix
u64 rows, u64 cols and rows*cols f64 values in row-major order.
Biases are stored as 1 x n matrices.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError
from ..model import ShadowNet
from ..train.mlp import MlpParams

MAGIC = b"SHDW"
VERSION = 1


def _matrices(obj) -> list:
    if isinstance(obj, ShadowNet):
        return list(obj.weights)
    if isinstance(obj, MlpParams):
        out = []
        for W, b in zip(obj.weights, obj.biases):
            out += [W, b.reshape(1, -1)]
        return out
    return [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in obj]


def save_weights(obj, path) -> None:
    """Write a ShadowNet, MlpParams (W1, b1, W2, b2, W3, b3) or a list of matrices."""
    mats = _matrices(obj)
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", VERSION, len(mats)))
        for M in mats:
            M = np.ascontiguousarray(M, dtype="<f8")
            if M.ndim != 2:
                raise ValueError(f"can only store 2-d matrices, got shape {M.shape}")
            f.write(struct.pack("<QQ", *M.shape))
            f.write(M.tobytes())


def load_weights(path) -> list:
    """Read the matrices of a weight file, checking magic, version and length."""
    raw = open(path, "rb").read()
    if len(raw) < 12:
        raise FormatError("file shorter than the 12-byte header", len(raw), path)
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}", 0, path)
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4, path)
    off, mats = 12, []
    for _ in range(count):
        if off + 16 > len(raw):
            raise FormatError("truncated matrix header", off, path)
        rows, cols = struct.unpack_from("<QQ", raw, off)
        off += 16
        size = 8 * rows * cols
        if off + size > len(raw):
            raise FormatError(f"truncated data for a {rows}x{cols} matrix", off, path)
        mats.append(np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols).astype(np.float64))
        off += size
    if off != len(raw):
        raise FormatError("trailing bytes after the last matrix", off, path)
    return mats


def mlp_from_matrices(mats) -> MlpParams:
    if len(mats) != 6:
        raise ValueError(f"an MLP file holds 6 matrices, got {len(mats)}")
    return MlpParams([mats[0], mats[2], mats[4]], [mats[1].ravel(), mats[3].ravel(), mats[5].ravel()])


def net_from_matrices(mats, sparsities, mode: str = "bernoulli") -> ShadowNet:
    widths = tuple(M.shape[0] for M in mats) + (mats[-1].shape[1],)
    return ShadowNet(list(mats), widths, tuple(sparsities), (), mode)
