"""Little-endian binary containers with a magic tag, version and CRC32 trailer.

All artifact files of the package share this framing::

    magic (4 bytes) | version (u32) | payload ... | crc32 of everything before (u32)

Writers build the payload in memory and replace the target atomically, so a
crashed write never leaves a half-written artifact under the final name.
"""

import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import CorruptionError, FormatError


class Writer:
    def __init__(self, magic, version):
        if len(magic) != 4:
            raise ValueError("magic must be 4 bytes")
        self._parts = [magic, struct.pack("<I", version)]

    def u32(self, value):
        self._parts.append(struct.pack("<I", int(value)))

    def f64(self, value):
        self._parts.append(struct.pack("<d", float(value)))

    def text(self, value):
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self._parts.append(raw)

    def meta(self, mapping):
        """Length-prefixed UTF-8 key/value block, keys in sorted order."""
        self.u32(len(mapping))
        for key in sorted(mapping):
            self.text(str(key))
            self.text(str(mapping[key]))

    def array(self, arr):
        self._parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def raw(self, data):
        self._parts.append(bytes(data))

    def getvalue(self):
        body = b"".join(self._parts)
        return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)

    def save(self, path):
        atomic_write(path, self.getvalue())


def atomic_write(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Reader:
    """Sequential reader over a verified container body."""

    def __init__(self, data, magic, versions, name="artifact"):
        self.name = name
        if len(data) < 12:
            raise CorruptionError(f"{name}: file too short ({len(data)} bytes)")
        if data[:4] != magic:
            raise FormatError(
                f"{name}: bad magic {data[:4]!r}, expected {magic!r}")
        body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise CorruptionError(f"{name}: CRC32 mismatch, file is corrupted")
        (self.version,) = struct.unpack_from("<I", body, 4)
        if self.version not in versions:
            raise FormatError(
                f"{name}: unsupported version {self.version}, "
                f"expected one of {sorted(versions)}")
        self._buf = body
        self._pos = 8

    @classmethod
    def open(cls, path, magic, versions):
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise FormatError(f"cannot read {path}: {exc}") from exc
        return cls(data, magic, versions, name=os.fspath(path))

    def _take(self, n):
        if self._pos + n > len(self._buf):
            raise CorruptionError(f"{self.name}: unexpected end of data")
        chunk = self._buf[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def f64(self):
        return struct.unpack("<d", self._take(8))[0]

    def text(self):
        n = self.u32()
        try:
            return self._take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptionError(f"{self.name}: invalid UTF-8 string") from exc

    def meta(self):
        count = self.u32()
        return {self.text(): self.text() for _ in range(count)}

    def array(self, shape):
        count = int(np.prod(shape, dtype=np.int64))
        raw = self._take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    def raw(self, nbytes):
        return self._take(nbytes)

    def finish(self):
        if self._pos != len(self._buf):
            raise CorruptionError(
                f"{self.name}: {len(self._buf) - self._pos} trailing bytes")
