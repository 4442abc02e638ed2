"""Canonical byte encoding used everywhere bytes are signed or encrypted.

Fields are encoded in declared order:

* ``bytes``/``str`` -> 4-byte big-endian length prefix, then the raw bytes
  (strings as UTF-8);
* ``int``           -> 8 bytes big-endian, unsigned;
* list/tuple of str -> 4-byte big-endian element count, then each element
  length-prefixed.

The length prefixes make the encoding injective for a fixed field schema,
which the token- and ticket-uniqueness guarantees rely on.  Decoding is
schema-driven and strict: truncated input, trailing bytes, or a type
mismatch raise :class:`SerializationError`.
"""

from __future__ import annotations

from .errors import SerializationError

_U32_MAX = 2**32 - 1
_U64_MAX = 2**64 - 1

Field = bytes | str | int | list | tuple


def encode_fields(*fields: Field) -> bytes:
    """Serialize `fields` in order into one canonical byte string."""
    out = bytearray()
    for f in fields:
        if isinstance(f, bool):
            raise SerializationError("bool is not an encodable field type")
        if isinstance(f, bytes):
            _put_bytes(out, f)
        elif isinstance(f, str):
            _put_bytes(out, f.encode("utf-8"))
        elif isinstance(f, int):
            _put_int(out, f)
        elif isinstance(f, (list, tuple)):
            if len(f) > _U32_MAX:
                raise SerializationError("list too long")
            out += len(f).to_bytes(4, "big")
            for item in f:
                if not isinstance(item, str):
                    raise SerializationError("only lists of str are encodable")
                _put_bytes(out, item.encode("utf-8"))
        else:
            raise SerializationError(f"unencodable field type {type(f).__name__}")
    return bytes(out)


def decode_fields(data: bytes, schema: tuple[str, ...]) -> tuple:
    """Parse `data` against `schema` (entries: "bytes", "str", "int", "strlist").

    The whole input must be consumed; anything else raises SerializationError.
    """
    pos = 0
    values: list = []
    for kind in schema:
        if kind == "bytes":
            raw, pos = _take_bytes(data, pos)
            values.append(raw)
        elif kind == "str":
            raw, pos = _take_bytes(data, pos)
            try:
                values.append(raw.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise SerializationError("invalid utf-8 in str field") from exc
        elif kind == "int":
            if pos + 8 > len(data):
                raise SerializationError("truncated int field")
            values.append(int.from_bytes(data[pos : pos + 8], "big"))
            pos += 8
        elif kind == "strlist":
            if pos + 4 > len(data):
                raise SerializationError("truncated list header")
            count = int.from_bytes(data[pos : pos + 4], "big")
            pos += 4
            items = []
            for _ in range(count):
                raw, pos = _take_bytes(data, pos)
                try:
                    items.append(raw.decode("utf-8"))
                except UnicodeDecodeError as exc:
                    raise SerializationError("invalid utf-8 in list item") from exc
            values.append(tuple(items))
        else:
            raise SerializationError(f"unknown schema entry {kind!r}")
    if pos != len(data):
        raise SerializationError(f"{len(data) - pos} trailing bytes after schema")
    return tuple(values)


def _put_bytes(out: bytearray, raw: bytes) -> None:
    if len(raw) > _U32_MAX:
        raise SerializationError("byte field too long")
    out += len(raw).to_bytes(4, "big")
    out += raw


def _put_int(out: bytearray, value: int) -> None:
    if not 0 <= value <= _U64_MAX:
        raise SerializationError(f"int field {value} outside unsigned 64-bit range")
    out += value.to_bytes(8, "big")


def _take_bytes(data: bytes, pos: int) -> tuple[bytes, int]:
    if pos + 4 > len(data):
        raise SerializationError("truncated length prefix")
    n = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    if pos + n > len(data):
        raise SerializationError("length prefix exceeds remaining input")
    return data[pos : pos + n], pos + n
