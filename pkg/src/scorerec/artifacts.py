"""Binary artifact formats and atomic file writes.

All multi-byte values are little-endian; matrices are row-major float32.

    CRM1  u32 d, u64 n_users, u64 n_items, user rows, item rows
    ADP1/ADP2  u32 D, f64 tau, W
    EMB1  u32 D, u64 count, count x (u32 len, utf-8 id), rows
"""
from __future__ import annotations

import io
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

# mkstemp creates 0600 files; artifacts get ordinary permissions
_MODE = 0o644


class ArtifactError(Exception):
    pass


@contextmanager
def atomic_open(path, mode: str = "wb", **kw):
    """Write to a sibling temp file and rename over `path` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **kw) as f:
            yield f
        os.chmod(tmp, _MODE)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    with atomic_open(path, "wb") as f:
        f.write(data)


def atomic_write_text(path, text: str) -> None:
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise ArtifactError("truncated artifact")
    return b


def _read_f32(f, rows: int, cols: int) -> np.ndarray:
    return np.frombuffer(_read_exact(f, 4 * rows * cols), dtype="<f4").reshape(rows, cols).astype(np.float64)


def _check_magic(f, magic: bytes) -> None:
    got = f.read(4)
    if got != magic:
        raise ArtifactError(f"bad magic: expected {magic!r}, got {got!r}")


def write_crm_file(path, user_factors: np.ndarray, item_factors: np.ndarray) -> None:
    d = user_factors.shape[1]
    if item_factors.shape[1] != d:
        raise ValueError("user/item factor widths differ")
    header = b"CRM1" + struct.pack("<IQQ", d, user_factors.shape[0], item_factors.shape[0])
    atomic_write_bytes(path, header + _f32(user_factors) + _f32(item_factors))


def read_crm_file(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as f:
        _check_magic(f, b"CRM1")
        d, nu, ni = struct.unpack("<IQQ", _read_exact(f, 20))
        return _read_f32(f, nu, d), _read_f32(f, ni, d)


def write_adapter_file(path, magic: bytes, W: np.ndarray, tau: float) -> None:
    D = W.shape[0]
    atomic_write_bytes(path, magic + struct.pack("<Id", D, tau) + _f32(W))


def read_adapter_file(path, magic: bytes) -> tuple[np.ndarray, float]:
    with open(path, "rb") as f:
        _check_magic(f, magic)
        D, tau = struct.unpack("<Id", _read_exact(f, 12))
        return _read_f32(f, D, D), tau


def write_index_file(path, ids: list[str], rows: np.ndarray) -> None:
    buf = io.BytesIO()
    buf.write(b"EMB1" + struct.pack("<IQ", rows.shape[1], len(ids)))
    for uid in ids:
        b = uid.encode("utf-8")
        buf.write(struct.pack("<I", len(b)) + b)
    buf.write(_f32(rows))
    atomic_write_bytes(path, buf.getvalue())


def read_index_file(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as f:
        _check_magic(f, b"EMB1")
        D, n = struct.unpack("<IQ", _read_exact(f, 12))
        ids = []
        for _ in range(n):
            (k,) = struct.unpack("<I", _read_exact(f, 4))
            ids.append(_read_exact(f, k).decode("utf-8"))
        return ids, _read_f32(f, n, D)
