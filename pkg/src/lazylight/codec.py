"""Canonical byte encoding and the domain-separated hash.

Encoding rules, applied recursively:

* integers are 8-byte big-endian and must fit in 64 bits;
* every variable-length byte field is prefixed by its length (8-byte big-endian);
* lists are prefixed by their element count; digest lists carry no per-item prefix
  because every digest has the same width;
* a transaction starts with a one-byte kind (0 genesis placeholder, 1 transfer,
  2 utxo spend, 3 opaque).

The hash is SHA-256 by default. Setting ``LAZYLIGHT_HASH_BITS`` to any other
multiple of 8 up to 512 before import switches to BLAKE2b with that digest size.
"""

from __future__ import annotations

import hashlib
import os
from enum import IntEnum
from functools import singledispatch
from typing import Optional, Sequence

from .errors import DecodeError
from .objects import AugmentedEntry, Header, OpaqueTx, Transaction, Transfer, UtxoSpend

HASH_BITS = int(os.environ.get("LAZYLIGHT_HASH_BITS", "256"))
if HASH_BITS % 8 or not 64 <= HASH_BITS <= 512:
    raise ImportError(f"unsupported LAZYLIGHT_HASH_BITS={HASH_BITS}")
DIGEST_SIZE = HASH_BITS // 8
HASH_NAME = "sha256" if HASH_BITS == 256 else f"blake2b-{HASH_BITS}"

U64_MAX = (1 << 64) - 1


class Tag(IntEnum):
    LEAF = 0x00
    INNER = 0x01
    PEAK_BAG = 0x02
    TRANSACTION = 0x03
    STATE_LEAF = 0x04
    HEADER = 0x05


if HASH_BITS == 256:

    def _new_hasher():
        return hashlib.sha256()

else:

    def _new_hasher():
        return hashlib.blake2b(digest_size=DIGEST_SIZE)


def hash_tagged(tag: int, payload: bytes) -> bytes:
    h = _new_hasher()
    h.update(bytes((tag,)))
    h.update(payload)
    return h.digest()


def new_tagged_hasher(tag: int):
    """Return a hasher already primed with ``tag``; callers ``copy()`` it per use."""
    h = _new_hasher()
    h.update(bytes((tag,)))
    return h


def u64(n: int) -> bytes:
    if not 0 <= n <= U64_MAX:
        raise ValueError(f"integer {n} outside the 64-bit unsigned range")
    return n.to_bytes(8, "big")


def encode_bytes(data: bytes) -> bytes:
    return u64(len(data)) + bytes(data)


def encode_digests(digests: Sequence[bytes]) -> bytes:
    return u64(len(digests)) + b"".join(digests)


def encode_varint(n: int) -> bytes:
    if n < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        low = n & 0x7F
        n >>= 7
        if n:
            out.append(low | 0x80)
        else:
            out.append(low)
            return bytes(out)


def encode_tx(tx: Optional[Transaction]) -> bytes:
    if tx is None:
        return b"\x00"
    if isinstance(tx, Transfer):
        return b"\x01" + u64(tx.sender) + u64(tx.recipient) + u64(tx.amount) + u64(tx.nonce)
    if isinstance(tx, UtxoSpend):
        parts = [b"\x02", u64(len(tx.inputs))]
        parts.extend(u64(k) for k in tx.inputs)
        parts.append(u64(len(tx.outputs)))
        for key, amount in tx.outputs:
            parts.append(u64(key) + u64(amount))
        return b"".join(parts)
    if isinstance(tx, OpaqueTx):
        return b"\x03" + encode_bytes(tx.payload)
    raise TypeError(f"not a transaction: {tx!r}")


def encode_entry(entry: AugmentedEntry) -> bytes:
    return encode_bytes(encode_tx(entry.tx)) + encode_bytes(entry.st)


def encode_header(header: Header) -> bytes:
    return u64(header.height) + encode_bytes(header.tx_root) + u64(header.tx_count)


def header_digest(header: Header) -> bytes:
    return hash_tagged(Tag.HEADER, encode_header(header))


def tx_digest(tx: Transaction) -> bytes:
    return hash_tagged(Tag.TRANSACTION, encode_tx(tx))


@singledispatch
def encode(value) -> bytes:
    """Canonical encoding of any protocol object."""
    if isinstance(value, (list, tuple)) and all(
        isinstance(d, (bytes, bytearray)) and len(d) == DIGEST_SIZE for d in value
    ):
        return encode_digests(value)
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


@encode.register(bytes)
@encode.register(bytearray)
def _(value) -> bytes:
    return encode_bytes(value)


@encode.register(AugmentedEntry)
def _(value) -> bytes:
    return encode_entry(value)


@encode.register(Transfer)
@encode.register(UtxoSpend)
@encode.register(OpaqueTx)
def _(value) -> bytes:
    return encode_tx(value)


@encode.register(Header)
def _(value) -> bytes:
    return encode_header(value)


class Reader:
    """Cursor over a byte string; every read raises DecodeError on truncation."""

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def count(self, item_size: int = 1) -> int:
        n = self.u64()
        if n * item_size > len(self.data) - self.pos:
            raise DecodeError("count exceeds remaining input")
        return n

    def bytes_field(self) -> bytes:
        return self.take(self.count())

    def digest(self) -> bytes:
        return self.take(DIGEST_SIZE)

    def digests(self) -> list[bytes]:
        n = self.count(DIGEST_SIZE)
        return [self.digest() for _ in range(n)]

    def varint(self) -> int:
        shift = 0
        value = 0
        while True:
            byte = self.u8()
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                if byte == 0 and shift:
                    raise DecodeError("non-minimal varint")
                return value
            shift += 7
            if shift > 63:
                raise DecodeError("varint too long")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes")


def decode_whole(data: bytes, parse):
    """Apply ``parse(reader)`` and require that it consumes the entire input."""
    reader = Reader(data)
    value = parse(reader)
    reader.done()
    return value


def read_tx(reader: Reader) -> Optional[Transaction]:
    kind = reader.u8()
    if kind == 0:
        return None
    if kind == 1:
        return Transfer(reader.u64(), reader.u64(), reader.u64(), reader.u64())
    if kind == 2:
        inputs = tuple(reader.u64() for _ in range(reader.count(8)))
        outputs = tuple((reader.u64(), reader.u64()) for _ in range(reader.count(16)))
        return UtxoSpend(inputs, outputs)
    if kind == 3:
        return OpaqueTx(reader.bytes_field())
    raise DecodeError(f"unknown transaction kind {kind}")


def read_entry(reader: Reader) -> AugmentedEntry:
    tx = decode_whole(reader.bytes_field(), read_tx)
    st = reader.bytes_field()
    if len(st) != DIGEST_SIZE:
        raise DecodeError("state commitment has wrong width")
    return AugmentedEntry(tx, st)


def read_header(reader: Reader) -> Header:
    height = reader.u64()
    root = reader.bytes_field()
    if len(root) != DIGEST_SIZE:
        raise DecodeError("tx root has wrong width")
    return Header(height, root, reader.u64())


def decode_tx(data: bytes) -> Optional[Transaction]:
    return decode_whole(data, read_tx)


def decode_entry(data: bytes) -> AugmentedEntry:
    return decode_whole(data, read_entry)


def decode_header(data: bytes) -> Header:
    return decode_whole(data, read_header)


def decode_digests(data: bytes) -> list[bytes]:
    return decode_whole(data, Reader.digests)


def decode_varint(data: bytes) -> int:
    return decode_whole(data, Reader.varint)


def encode_entries(entries: Sequence[AugmentedEntry]) -> bytes:
    return u64(len(entries)) + b"".join(encode_bytes(encode_entry(e)) for e in entries)


def read_entries(reader: Reader) -> list[AugmentedEntry]:
    return [decode_entry(reader.bytes_field()) for _ in range(reader.count(8))]
