"""Binary wire format for frames and acknowledgements.

Frame message (408 bytes, little-endian)::

    magic "TADL" | version u8 | type u8 (0) | seq u32 | timestamp i64 |
    rows u8 | cols u8 | 192 x i16 centi-degrees | crc32 u32

Ack message (14 bytes)::

    magic "TADL" | version u8 | type u8 (1) | seq u32 | crc32 u32

The CRC is CRC-32 (IEEE) over every byte preceding it.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..model import COLS, N_PIXELS, ROWS, ThermalFrame

MAGIC = b"TADL"
VERSION = 1
MSG_FRAME = 0
MSG_ACK = 1

_FRAME_HEAD = struct.Struct("<4sBBIqBB")
_ACK_HEAD = struct.Struct("<4sBBI")
_CRC = struct.Struct("<I")
_PAYLOAD = np.dtype("<i2")

FRAME_LEN = _FRAME_HEAD.size + N_PIXELS * 2 + _CRC.size
ACK_LEN = _ACK_HEAD.size + _CRC.size
CENTI_MAX = 32767


class DecodeError(ValueError):
    pass


class BadMagic(DecodeError):
    pass


class BadVersion(DecodeError):
    pass


class BadLength(DecodeError):
    pass


class BadCrc(DecodeError):
    pass


@dataclass(frozen=True, eq=False)
class FrameMessage:
    msg_type: int
    seq: int
    timestamp: int | None = None
    centi: np.ndarray | None = None

    @property
    def is_ack(self) -> bool:
        return self.msg_type == MSG_ACK

    @property
    def frame(self) -> ThermalFrame:
        if self.centi is None:
            raise ValueError("ack messages carry no frame")
        return ThermalFrame(self.timestamp, self.centi / 100.0)

    def __eq__(self, other):
        if not isinstance(other, FrameMessage):
            return NotImplemented
        same_payload = (self.centi is None and other.centi is None) or (
            self.centi is not None and other.centi is not None and np.array_equal(self.centi, other.centi)
        )
        return (self.msg_type, self.seq, self.timestamp) == (other.msg_type, other.seq, other.timestamp) and same_payload


def to_centi(temps) -> np.ndarray:
    """Degrees C -> int16 centi-degrees, rounding half away from zero.

    Rounding is applied to the decimal value (22.005 -> 2201), so binary
    representation error of the float input does not flip halves.
    """
    t = np.asarray(temps, dtype=np.float64)
    scaled = np.round(np.abs(t) * 100.0, 6)
    centi = np.sign(t) * np.floor(scaled + 0.5)
    if np.any(np.abs(centi) > CENTI_MAX):
        raise ValueError("temperature outside the +-327.67 C wire range")
    return centi.astype(np.int16)


def encode(frame: ThermalFrame, seq: int) -> bytes:
    if frame.pixels.size != N_PIXELS:
        raise ValueError(f"expected {N_PIXELS} pixels, got {frame.pixels.size}")
    if not 0 <= seq <= 0xFFFFFFFF:
        raise ValueError("seq must fit in 32 bits")
    head = _FRAME_HEAD.pack(MAGIC, VERSION, MSG_FRAME, seq, frame.timestamp, ROWS, COLS)
    body = head + to_centi(frame.pixels).astype(_PAYLOAD).tobytes()
    return body + _CRC.pack(zlib.crc32(body))


def encode_ack(seq: int) -> bytes:
    body = _ACK_HEAD.pack(MAGIC, VERSION, MSG_ACK, seq)
    return body + _CRC.pack(zlib.crc32(body))


def decode(data: bytes) -> FrameMessage:
    """Parse one message.

    Checks run in the order length floor, CRC, magic, version, then the
    exact length for the message type; the first failure is raised.
    """
    data = bytes(data)
    if len(data) < ACK_LEN:
        raise BadLength(f"{len(data)} bytes is shorter than any message")
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[:-_CRC.size]) != crc:
        raise BadCrc("checksum mismatch")
    if data[:4] != MAGIC:
        raise BadMagic(f"magic {data[:4]!r}")
    if data[4] != VERSION:
        raise BadVersion(f"version {data[4]}")
    msg_type = data[5]
    if msg_type == MSG_ACK:
        if len(data) != ACK_LEN:
            raise BadLength(f"ack of {len(data)} bytes")
        _, _, _, seq = _ACK_HEAD.unpack_from(data)
        return FrameMessage(MSG_ACK, seq)
    if msg_type != MSG_FRAME or len(data) != FRAME_LEN:
        raise BadLength(f"type {msg_type} message of {len(data)} bytes")
    _, _, _, seq, ts, rows, cols = _FRAME_HEAD.unpack_from(data)
    if (rows, cols) != (ROWS, COLS):
        raise BadLength(f"geometry {rows}x{cols}")
    centi = np.frombuffer(data, dtype=_PAYLOAD, count=N_PIXELS, offset=_FRAME_HEAD.size).astype(np.int16)
    return FrameMessage(MSG_FRAME, seq, ts, centi)
