"""Torrent metainfo and magnet link parsing.

The infohash is the SHA-1 of the info dictionary's verbatim bytes as they
appear in the file. parse_torrent records that byte span during the walk and
hashes the original slice; re-encoding is never involved, so files whose info
dictionary carries unknown keys hash exactly as published.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
from dataclasses import dataclass, field
from urllib.parse import parse_qsl, quote

from . import bencode
from .bencode import Malformed


class MetainfoError(ValueError):
    pass


class MissingField(MetainfoError):
    """A required torrent field is absent."""


class BadPieces(MetainfoError):
    """Piece geometry is inconsistent with the declared lengths."""


class NoInfohash(MetainfoError):
    """Magnet URI carries no decodable urn:btih exact topic."""


class BadLength(MetainfoError):
    """btih token is neither 40 hex chars nor 32 base32 chars."""


@dataclass(frozen=True)
class InfoHash:
    digest: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.digest, bytes) or len(self.digest) != 20:
            raise ValueError("infohash digest must be exactly 20 bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "InfoHash":
        try:
            digest = bytes.fromhex(text)
        except ValueError:
            raise ValueError(f"not a hex infohash: {text!r}") from None
        return cls(digest)

    def __str__(self) -> str:
        return self.hex


@dataclass
class Metainfo:
    announce_urls: list[str]
    name: str
    piece_length: int
    piece_count: int
    total_length: int
    infohash: InfoHash
    raw_info_bytes: bytes


@dataclass
class MagnetLink:
    infohash: InfoHash
    display_name: str | None = None
    trackers: list[str] = field(default_factory=list)


def compute_infohash(raw_info: bytes) -> InfoHash:
    return InfoHash(hashlib.sha1(raw_info).digest())


def parse_torrent(data: bytes) -> Metainfo:
    """Parse .torrent bytes, hashing the info dictionary's original slice."""
    top, consumed = bencode.decode(data)
    if not isinstance(top, dict):
        raise Malformed("top-level value is not a dictionary")
    if consumed != len(data):
        raise Malformed(f"{len(data) - consumed} trailing bytes after torrent dictionary")

    span = _info_span(data)
    if span is None:
        raise MissingField("info")
    raw_info = data[span[0] : span[1]]

    if b"announce" not in top:
        raise MissingField("announce")
    announce_urls = _announce_urls(top)

    info = top[b"info"]
    if not isinstance(info, dict):
        raise Malformed("info is not a dictionary")
    name = _required_bytes(info, b"name").decode("utf-8", "replace")
    piece_length = _required_int(info, b"piece length")
    if piece_length <= 0:
        raise BadPieces(f"piece length {piece_length} must be positive")
    pieces = _required_bytes(info, b"pieces")
    if len(pieces) % 20:
        raise BadPieces(f"pieces length {len(pieces)} is not a multiple of 20")
    piece_count = len(pieces) // 20
    total_length = _total_length(info)
    expected = -(-total_length // piece_length)
    if piece_count != expected:
        raise BadPieces(
            f"{piece_count} pieces cannot cover {total_length} bytes"
            f" at piece length {piece_length}"
        )

    return Metainfo(
        announce_urls=announce_urls,
        name=name,
        piece_length=piece_length,
        piece_count=piece_count,
        total_length=total_length,
        infohash=compute_infohash(raw_info),
        raw_info_bytes=raw_info,
    )


def _info_span(data: bytes) -> tuple[int, int] | None:
    # walks the already-validated top-level dictionary by re-decoding each
    # element from its slice; offsets are relative to the original buffer
    pos = 1
    while data[pos] != 0x65:
        key, klen = bencode.decode(data[pos:])
        pos += klen
        _, vlen = bencode.decode(data[pos:])
        if key == b"info":
            return pos, pos + vlen
        pos += vlen
    return None


def _announce_urls(top: dict) -> list[str]:
    announce = top[b"announce"]
    if not isinstance(announce, bytes):
        raise Malformed("announce is not a string")
    urls = [announce.decode("utf-8", "replace")]
    tiers = top.get(b"announce-list")
    if isinstance(tiers, list):
        for tier in tiers:
            if not isinstance(tier, list):
                continue
            for url in tier:
                if isinstance(url, bytes):
                    urls.append(url.decode("utf-8", "replace"))
    seen: set[str] = set()
    unique = []
    for url in urls:
        if url not in seen:
            seen.add(url)
            unique.append(url)
    return unique


def _required_bytes(info: dict, key: bytes) -> bytes:
    if key not in info:
        raise MissingField(f"info.{key.decode()}")
    value = info[key]
    if not isinstance(value, bytes):
        raise Malformed(f"info.{key.decode()} is not a string")
    return value


def _required_int(info: dict, key: bytes) -> int:
    if key not in info:
        raise MissingField(f"info.{key.decode()}")
    value = info[key]
    if not isinstance(value, int):
        raise Malformed(f"info.{key.decode()} is not an integer")
    return value


def _total_length(info: dict) -> int:
    if b"length" in info:
        length = info[b"length"]
        if not isinstance(length, int) or length < 0:
            raise Malformed("info.length is not a non-negative integer")
        return length
    files = info.get(b"files")
    if files is None:
        raise MissingField("info.length or info.files")
    if not isinstance(files, list) or not files:
        raise Malformed("info.files is not a non-empty list")
    total = 0
    for entry in files:
        if not isinstance(entry, dict):
            raise Malformed("info.files entry is not a dictionary")
        length = entry.get(b"length")
        if not isinstance(length, int) or length < 0:
            raise Malformed("info.files entry length is not a non-negative integer")
        total += length
    return total


_BASE32_ALPHABET = set("ABCDEFGHIJKLMNOPQRSTUVWXYZ234567")


def parse_magnet(uri: str) -> MagnetLink:
    """Parse a magnet URI; the first urn:btih exact topic wins."""
    if uri[:8].lower() != "magnet:?":
        raise NoInfohash("not a magnet URI")
    params = parse_qsl(uri[8:], keep_blank_values=True)

    infohash: InfoHash | None = None
    for key, value in params:
        if key != "xt" or not value.lower().startswith("urn:btih:"):
            continue
        infohash = _decode_btih(value[9:])
        break
    if infohash is None:
        raise NoInfohash("no urn:btih exact topic")

    display_name = next((v for k, v in params if k == "dn"), None)
    trackers = [v for k, v in params if k == "tr"]
    return MagnetLink(infohash=infohash, display_name=display_name, trackers=trackers)


def _decode_btih(token: str) -> InfoHash:
    if len(token) == 40:
        try:
            return InfoHash(bytes.fromhex(token))
        except ValueError:
            raise BadLength(f"40-char btih token is not hex: {token!r}") from None
    if len(token) == 32:
        upper = token.upper()
        if not set(upper) <= _BASE32_ALPHABET:
            raise BadLength(f"32-char btih token is not base32: {token!r}")
        try:
            return InfoHash(base64.b32decode(upper))
        except (binascii.Error, ValueError):
            raise BadLength(f"32-char btih token is not base32: {token!r}") from None
    raise BadLength(f"btih token has length {len(token)}, expected 40 hex or 32 base32")


def render_magnet(infohash: InfoHash, display_name: str | None = None, trackers: tuple[str, ...] | list[str] = ()) -> str:
    parts = [f"magnet:?xt=urn:btih:{infohash.hex}"]
    if display_name is not None:
        parts.append(f"dn={quote(display_name, safe='')}")
    for tracker in trackers:
        parts.append(f"tr={quote(tracker, safe='')}")
    return "&".join(parts)
