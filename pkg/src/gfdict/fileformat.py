"""Sectioned single-file container and k-bit word packing.

Layout (all integers little endian)::

    magic  b"GFD1"
    version u16, section count u16
    count x (tag 4 bytes, offset u64, length u64)
    section bodies, in table order, back to back

Payload words are packed contiguously: word i occupies stream bits
[i*k, (i+1)*k), and stream bit j is bit (j % 8) of byte j // 8.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CorruptFile

MAGIC = b"GFD1"
VERSION = 1
_HEAD = struct.Struct("<4sHH")
_ENTRY = struct.Struct("<4sQQ")


def write_container(sections: list[tuple[bytes, bytes]]) -> bytes:
    tags = [t for t, _ in sections]
    if len(set(tags)) != len(tags):
        raise ValueError("duplicate section tag")
    offset = _HEAD.size + _ENTRY.size * len(sections)
    table, bodies = [], []
    for tag, body in sections:
        if len(tag) != 4:
            raise ValueError(f"section tag {tag!r} must be 4 bytes")
        table.append(_ENTRY.pack(tag, offset, len(body)))
        bodies.append(body)
        offset += len(body)
    return _HEAD.pack(MAGIC, VERSION, len(sections)) + b"".join(table) + b"".join(bodies)


def read_container(buf: bytes) -> dict[bytes, bytes]:
    if len(buf) < _HEAD.size:
        raise CorruptFile("file too short for header")
    magic, version, count = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CorruptFile(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptFile(f"unsupported version {version}")
    table_end = _HEAD.size + _ENTRY.size * count
    if len(buf) < table_end:
        raise CorruptFile("truncated section table")
    out: dict[bytes, bytes] = {}
    spans = []
    for i in range(count):
        tag, off, length = _ENTRY.unpack_from(buf, _HEAD.size + i * _ENTRY.size)
        if off < table_end or off + length > len(buf):
            raise CorruptFile(f"section {tag!r} lies outside the file")
        if tag in out:
            raise CorruptFile(f"duplicate section {tag!r}")
        spans.append((off, off + length, tag))
        out[tag] = buf[off:off + length]
    spans.sort()
    for (_, end, tag), (start, _, nxt) in zip(spans, spans[1:]):
        if start < end:
            raise CorruptFile(f"sections {tag!r} and {nxt!r} overlap")
    return out


def pack_words(words, k: int) -> bytes:
    arr = np.asarray(words, dtype=np.uint64)
    if arr.size == 0:
        return b""
    if k in (8, 16, 32, 64):
        return arr.astype(f"<u{k // 8}").tobytes()
    bits = ((arr[:, None] >> np.arange(k, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def unpack_words(buf: bytes, count: int, k: int) -> np.ndarray:
    need = (count * k + 7) // 8
    if len(buf) < need:
        raise CorruptFile("payload shorter than its declared word count")
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    if k in (8, 16, 32, 64):
        return np.frombuffer(buf[:need], dtype=f"<u{k // 8}").astype(np.uint64)
    bits = np.unpackbits(np.frombuffer(buf[:need], dtype=np.uint8), bitorder="little")
    bits = bits[:count * k].reshape(count, k).astype(np.uint64)
    return np.bitwise_or.reduce(bits << np.arange(k, dtype=np.uint64), axis=1)


def packed_len(count: int, k: int) -> int:
    return (count * k + 7) // 8


class Reader:
    """Little-endian cursor over a section body."""

    def __init__(self, buf: bytes, name: str = "section"):
        self.buf = buf
        self.pos = 0
        self.name = name

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptFile(f"{self.name} truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size))

    def rest(self) -> bytes:
        out = self.buf[self.pos:]
        self.pos = len(self.buf)
        return out
