"""Framing shared by the binary artifact formats.

Both file kinds are ``magic | payload | crc32(payload)`` with everything
little-endian. The CRC is verified before any payload field is trusted, so a
single flipped byte anywhere in the payload (or the CRC itself) surfaces as
``ChecksumError``.
"""

from __future__ import annotations

import struct
import zlib

from .errors import BadMagicError, ChecksumError, TruncatedFileError


def write_framed(path: str, magic: bytes, payload: bytes) -> None:
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def read_framed(path: str, magic: bytes) -> bytes:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(magic):
        raise TruncatedFileError(f"{path}: shorter than the magic header")
    if blob[: len(magic)] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}")
    if len(blob) < len(magic) + 4:
        raise TruncatedFileError(f"{path}: missing checksum")
    payload = blob[len(magic) : -4]
    (stored,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise ChecksumError(f"{path}: CRC32 mismatch")
    return payload


class Cursor:
    """Sequential reader over a verified payload; short reads raise."""

    def __init__(self, payload: bytes, path: str = "<bytes>"):
        self._buf = payload
        self._pos = 0
        self._path = path

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._buf):
            raise TruncatedFileError(
                f"{self._path}: payload ends {self._pos + n - len(self._buf)} bytes early"
            )
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def remaining(self) -> int:
        return len(self._buf) - self._pos
