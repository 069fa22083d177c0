"""Strict bencode codec.

Decoding accepts only canonical input: dictionary keys strictly ascending in
raw byte order, no leading zeros, no negative zero, integers within the signed
64-bit range. encode(decode(b)[0]) == b therefore holds for every accepted b.
"""

from __future__ import annotations

from typing import Union

BValue = Union[int, bytes, list, dict]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# guards fuzz input from blowing the interpreter stack; two frames per level
_MAX_DEPTH = 256


class BencodeError(ValueError):
    pass


class Truncated(BencodeError):
    """Input ended in the middle of a value."""


class Malformed(BencodeError):
    """Input violates the grammar or canonical form."""


class DuplicateKey(Malformed):
    """Dictionary keys repeated or out of canonical byte order."""


def decode(data: bytes) -> tuple[BValue, int]:
    """Decode one value from the front of data, returning (value, consumed).

    Trailing bytes after the first complete value are left unread; callers
    that require full consumption compare consumed against len(data).
    """
    if isinstance(data, (bytearray, memoryview)):
        data = bytes(data)
    if not isinstance(data, bytes):
        raise TypeError(f"expected bytes, got {type(data).__name__}")
    if not data:
        raise Truncated("empty input")
    return _value(data, 0, 0)


def encode(value: BValue) -> bytes:
    """Encode a value canonically (dict keys sorted by raw byte value)."""
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _value(data: bytes, pos: int, depth: int) -> tuple[BValue, int]:
    if pos >= len(data):
        raise Truncated(f"input ends at offset {pos}, value expected")
    c = data[pos]
    if c == 0x69:  # i
        return _int(data, pos)
    if 0x30 <= c <= 0x39:  # 0-9
        return _bytestring(data, pos)
    if depth >= _MAX_DEPTH:
        raise Malformed(f"nesting deeper than {_MAX_DEPTH} at offset {pos}")
    if c == 0x6C:  # l
        return _list(data, pos, depth)
    if c == 0x64:  # d
        return _dict(data, pos, depth)
    raise Malformed(f"unexpected byte 0x{c:02x} at offset {pos}")


def _int(data: bytes, pos: int) -> tuple[int, int]:
    end = data.find(b"e", pos + 1)
    if end < 0:
        raise Truncated(f"unterminated integer at offset {pos}")
    token = data[pos + 1 : end]
    digits = token[1:] if token[:1] == b"-" else token
    if not digits.isdigit():
        raise Malformed(f"bad integer {token!r} at offset {pos}")
    if digits[:1] == b"0" and (len(digits) > 1 or token[:1] == b"-"):
        # covers leading zeros and negative zero; "i0e" is the one legal zero
        raise Malformed(f"non-canonical integer {token!r} at offset {pos}")
    n = int(token)
    if not INT64_MIN <= n <= INT64_MAX:
        raise Malformed(f"integer {n} outside signed 64-bit range")
    return n, end + 1


def _bytestring(data: bytes, pos: int) -> tuple[bytes, int]:
    colon = pos
    while colon < len(data) and 0x30 <= data[colon] <= 0x39:
        colon += 1
    if colon >= len(data):
        raise Truncated(f"unterminated string length at offset {pos}")
    if data[colon] != 0x3A:  # :
        raise Malformed(f"bad string length at offset {pos}")
    if data[pos] == 0x30 and colon > pos + 1:
        raise Malformed(f"leading zero in string length at offset {pos}")
    n = int(data[pos:colon])
    end = colon + 1 + n
    if end > len(data):
        raise Truncated(f"string at offset {pos} needs {n} bytes, input ends early")
    return data[colon + 1 : end], end


def _list(data: bytes, pos: int, depth: int) -> tuple[list, int]:
    items: list[BValue] = []
    pos += 1
    while True:
        if pos >= len(data):
            raise Truncated("unterminated list")
        if data[pos] == 0x65:  # e
            return items, pos + 1
        item, pos = _value(data, pos, depth + 1)
        items.append(item)


def _dict(data: bytes, pos: int, depth: int) -> tuple[dict, int]:
    result: dict[bytes, BValue] = {}
    prev: bytes | None = None
    pos += 1
    while True:
        if pos >= len(data):
            raise Truncated("unterminated dictionary")
        if data[pos] == 0x65:  # e
            return result, pos + 1
        if not 0x30 <= data[pos] <= 0x39:
            raise Malformed(f"dictionary key at offset {pos} is not a string")
        key, pos = _bytestring(data, pos)
        if prev is not None:
            if key == prev:
                raise DuplicateKey(f"duplicate key {key!r}")
            if key < prev:
                raise DuplicateKey(f"key {key!r} out of order after {prev!r}")
        prev = key
        value, pos = _value(data, pos, depth + 1)
        result[key] = value


def _encode(value: BValue, out: bytearray) -> None:
    if isinstance(value, bool):
        raise TypeError("bool is not bencodable")
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise Malformed(f"integer {value} outside signed 64-bit range")
        out += b"i%de" % value
    elif isinstance(value, (bytes, bytearray)):
        out += b"%d:" % len(value)
        out += value
    elif isinstance(value, list):
        out += b"l"
        for item in value:
            _encode(item, out)
        out += b"e"
    elif isinstance(value, dict):
        out += b"d"
        for key in sorted(value):
            if not isinstance(key, (bytes, bytearray)):
                raise TypeError(f"dictionary key must be bytes, got {type(key).__name__}")
            _encode(bytes(key), out)
            _encode(value[key], out)
        out += b"e"
    else:
        raise TypeError(f"{type(value).__name__} is not bencodable")
