"""Wire envelope carried over the simulated network.

Fixed binary layout: 1 tag byte, 8-byte big-endian session id, 4-byte
big-endian body length, body bytes.  The tag fixes the body schema; the
session id ties all messages of one logical exchange together.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import SerializationError


class Tag(IntEnum):
    # ticket protocol
    AS_REQUEST = 0x01
    M_A = 0x02
    M_B = 0x03
    M_C = 0x04
    M_D = 0x05
    M_E = 0x06
    M_F = 0x07
    M_G = 0x08
    M_H = 0x09
    REJECT = 0x0A
    # secure channel handshake
    HELLO = 0x10
    SELECT = 0x11
    KEY_EXCHANGE = 0x12
    # sealed application data
    RECORD = 0x20


_HEADER_LEN = 1 + 8 + 4
_SESSION_MAX = 2**64 - 1


@dataclass(frozen=True)
class Envelope:
    tag: Tag
    session_id: int
    body: bytes

    def encode(self) -> bytes:
        if not 0 <= self.session_id <= _SESSION_MAX:
            raise SerializationError("session id outside unsigned 64-bit range")
        return (
            bytes([self.tag])
            + self.session_id.to_bytes(8, "big")
            + len(self.body).to_bytes(4, "big")
            + self.body
        )

    @classmethod
    def decode(cls, data: bytes) -> "Envelope":
        if len(data) < _HEADER_LEN:
            raise SerializationError("envelope shorter than its header")
        try:
            tag = Tag(data[0])
        except ValueError:
            raise SerializationError(f"unknown envelope tag 0x{data[0]:02x}") from None
        session_id = int.from_bytes(data[1:9], "big")
        body_len = int.from_bytes(data[9:13], "big")
        if len(data) != _HEADER_LEN + body_len:
            raise SerializationError("envelope length field disagrees with input size")
        return cls(tag, session_id, data[_HEADER_LEN:])
