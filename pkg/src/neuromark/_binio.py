"""Little-endian binary primitives shared by the bundle/model file formats."""
from __future__ import annotations

import io
import os
import struct
import tempfile

import numpy as np

from .core import CorruptBundleError


class Writer:
    def __init__(self):
        self._buf = io.BytesIO()

    def magic(self, tag: bytes):
        assert len(tag) == 4
        self._buf.write(tag)

    def u8(self, value: int):
        self._buf.write(struct.pack("<B", value))

    def u32(self, value: int):
        self._buf.write(struct.pack("<I", value))

    def f64(self, value: float):
        self._buf.write(struct.pack("<d", value))

    def text(self, value: str):
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self._buf.write(raw)

    def f64_array(self, arr: np.ndarray):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        self.u32(arr.size)
        self._buf.write(arr.tobytes())

    def f64_tensor(self, arr: np.ndarray):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        self.u32(arr.ndim)
        for dim in arr.shape:
            self.u32(dim)
        self._buf.write(arr.tobytes())

    def u8_array(self, arr: np.ndarray):
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        self.u32(arr.size)
        self._buf.write(arr.tobytes())

    def getvalue(self) -> bytes:
        return self._buf.getvalue()


class Reader:
    def __init__(self, data: bytes, label: str = "bundle"):
        self._data = data
        self._pos = 0
        self._label = label

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CorruptBundleError(f"truncated {self._label}: ran out of bytes")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def magic(self, expected: bytes):
        tag = self._take(4)
        if tag != expected:
            raise CorruptBundleError(
                f"bad {self._label} magic {tag!r}, expected {expected!r}")

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def text(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")

    def f64_array(self) -> np.ndarray:
        n = self.u32()
        return np.frombuffer(self._take(8 * n), dtype="<f8").copy()

    def f64_tensor(self) -> np.ndarray:
        ndim = self.u32()
        shape = tuple(self.u32() for _ in range(ndim))
        count = 1
        for dim in shape:
            count *= dim
        flat = np.frombuffer(self._take(8 * count), dtype="<f8").copy()
        return flat.reshape(shape)

    def u8_array(self) -> np.ndarray:
        n = self.u32()
        return np.frombuffer(self._take(n), dtype=np.uint8).copy()

    def expect_end(self):
        if self._pos != len(self._data):
            raise CorruptBundleError(
                f"{self._label} has {len(self._data) - self._pos} trailing bytes")


def write_atomic(path, data: bytes):
    """Write-then-rename so partially written files never appear."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
