"""Minimal peer wire protocol: enough to learn how complete a peer is.

Handshake layout (68 bytes):

    offset  size  field
    0       1     0x13, length of the protocol string
    1       19    "BitTorrent protocol"
    20      8     reserved flag bytes, captured but ignored
    28      20    infohash
    48      20    peer id

Every later message is a 4-byte big-endian length prefix followed by that many
payload bytes; length 0 is a keep-alive, otherwise the first payload byte is
the message id. Only Bitfield (id 5) carries information this module cares
about; everything else is passed through as an opaque id.

The probe sequence is connect, handshake, read until a bitfield arrives or the
timeout passes, disconnect. A peer that never sends a bitfield counts as a
leecher with nothing downloaded.
"""

from __future__ import annotations

import os
import socket
import struct
from dataclasses import dataclass
from typing import Callable, Union

from .metainfo import InfoHash
from .tracker import PeerEndpoint

PROTOCOL = b"BitTorrent protocol"
HANDSHAKE_LEN = 68

MSG_CHOKE = 0
MSG_UNCHOKE = 1
MSG_INTERESTED = 2
MSG_NOT_INTERESTED = 3
MSG_HAVE = 4
MSG_BITFIELD = 5
MSG_REQUEST = 6
MSG_PIECE = 7
MSG_CANCEL = 8


class PeerWireError(ValueError):
    pass


class Truncated(PeerWireError):
    """Input ended inside a handshake or message."""


class BadProtocolString(PeerWireError):
    """Handshake does not open with the BitTorrent protocol string."""


class LengthMismatch(PeerWireError):
    """Bitfield byte length disagrees with the declared piece count."""


class SpareBitSet(PeerWireError):
    """A bit beyond the last piece is set."""


@dataclass(frozen=True)
class Handshake:
    infohash: InfoHash
    peer_id: bytes
    reserved: bytes = b"\x00" * 8


@dataclass(frozen=True)
class Bitfield:
    bits: bytes
    num_pieces: int


@dataclass(frozen=True)
class KeepAlive:
    pass


@dataclass(frozen=True)
class BitfieldMsg:
    payload: bytes


@dataclass(frozen=True)
class Other:
    id: int


Message = Union[KeepAlive, BitfieldMsg, Other]


def encode_handshake(infohash: InfoHash, peer_id: bytes, reserved: bytes = b"\x00" * 8) -> bytes:
    if len(peer_id) != 20:
        raise ValueError(f"peer_id must be 20 bytes, got {len(peer_id)}")
    if len(reserved) != 8:
        raise ValueError(f"reserved must be 8 bytes, got {len(reserved)}")
    return bytes([len(PROTOCOL)]) + PROTOCOL + reserved + infohash.digest + peer_id


def decode_handshake(data: bytes) -> Handshake:
    if len(data) < HANDSHAKE_LEN:
        raise Truncated(f"handshake needs {HANDSHAKE_LEN} bytes, got {len(data)}")
    if data[0] != len(PROTOCOL) or data[1:20] != PROTOCOL:
        raise BadProtocolString(f"unexpected protocol header {data[:20]!r}")
    return Handshake(
        infohash=InfoHash(data[28:48]),
        peer_id=data[48:68],
        reserved=data[20:28],
    )


def parse_message(data: bytes) -> tuple[Message, int]:
    """Parse one length-prefixed message from the front of data."""
    if len(data) < 4:
        raise Truncated("message length prefix incomplete")
    (length,) = struct.unpack_from(">I", data)
    if length == 0:
        return KeepAlive(), 4
    end = 4 + length
    if len(data) < end:
        raise Truncated(f"message declares {length} bytes, input ends early")
    msg_id = data[4]
    if msg_id == MSG_BITFIELD:
        return BitfieldMsg(bytes(data[5:end])), end
    return Other(msg_id), end


class MessageStream:
    """Incremental reader; arbitrary chunk splits yield the same messages."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[Message]:
        self._buf += chunk
        out: list[Message] = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = struct.unpack_from(">I", self._buf)
            end = 4 + length
            if len(self._buf) < end:
                return out
            message, consumed = parse_message(bytes(self._buf[:end]))
            del self._buf[:consumed]
            out.append(message)

    @property
    def pending(self) -> int:
        return len(self._buf)


def completion(bitfield: Bitfield) -> tuple[float, bool]:
    """Fraction of pieces present and whether the peer is a full seeder."""
    bits, num_pieces = bitfield.bits, bitfield.num_pieces
    if num_pieces <= 0:
        raise LengthMismatch(f"piece count {num_pieces} must be positive")
    expected = (num_pieces + 7) // 8
    if len(bits) != expected:
        raise LengthMismatch(f"bitfield has {len(bits)} bytes, {expected} expected for {num_pieces} pieces")
    spare = expected * 8 - num_pieces
    if spare and bits[-1] & ((1 << spare) - 1):
        raise SpareBitSet(f"{spare} spare bits must be zero")
    have = sum(byte.bit_count() for byte in bits)
    return have / num_pieces, have == num_pieces


# transport(endpoint, outbound) returns whatever the peer sent back, handshake included
Transport = Callable[[PeerEndpoint, bytes], bytes]


def default_peer_id() -> bytes:
    return b"-TG0100-" + os.urandom(6).hex().encode()


def probe_peer(
    endpoint: PeerEndpoint,
    infohash: InfoHash,
    transport: Transport,
    num_pieces: int,
    peer_id: bytes | None = None,
) -> Bitfield | None:
    """Handshake with a peer and return its bitfield, or None when it has none.

    Transport failures, protocol garbage, and infohash mismatches all come
    back as None: the caller treats such peers as empty leechers.
    """
    outbound = encode_handshake(infohash, peer_id or default_peer_id())
    try:
        inbound = transport(endpoint, outbound)
    except OSError:
        return None
    try:
        theirs = decode_handshake(inbound)
    except PeerWireError:
        return None
    if theirs.infohash != infohash:
        return None
    for message in MessageStream().feed(inbound[HANDSHAKE_LEN:]):
        if isinstance(message, BitfieldMsg):
            return Bitfield(bits=message.payload, num_pieces=num_pieces)
    return None


def tcp_transport(timeout: float = 10.0, max_bytes: int = 1 << 16) -> Transport:
    """Live transport: one TCP conversation per probe, stops at the first bitfield."""

    def transport(endpoint: PeerEndpoint, outbound: bytes) -> bytes:
        with socket.create_connection((endpoint.ip, endpoint.port), timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(outbound)
            received = bytearray()
            while len(received) < max_bytes:
                try:
                    chunk = sock.recv(4096)
                except TimeoutError:
                    break
                if not chunk:
                    break
                received += chunk
                if _bitfield_complete(received):
                    break
            return bytes(received)

    return transport


def _bitfield_complete(data: bytearray) -> bool:
    pos = HANDSHAKE_LEN
    while pos + 4 <= len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        if pos + 4 + length > len(data):
            return False
        if length > 0 and data[pos + 4] == MSG_BITFIELD:
            return True
        pos += 4 + length
    return False
