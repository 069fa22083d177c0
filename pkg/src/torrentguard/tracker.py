"""HTTP tracker announce client.

Transport is an injected fetch callable (url -> response body bytes) so tests
and the simulator swap in canned responses; http_fetch is the live default.
UDP trackers are not handled.
"""

from __future__ import annotations

import ipaddress
import struct
import threading
import urllib.request
from dataclasses import dataclass, field
from typing import Callable
from urllib.parse import quote, urlsplit

from . import bencode
from .bencode import BencodeError, Malformed
from .metainfo import InfoHash

FetchFn = Callable[[str], bytes]

ANNOUNCE_EVENTS = ("none", "started")


class TrackerError(ValueError):
    pass


class UnsupportedScheme(TrackerError):
    """Tracker URL scheme is not http(s)."""


class TrackerFailure(TrackerError):
    """Tracker answered with a failure reason."""


class BadCompactLength(TrackerError):
    """Compact peer blob length is not a multiple of the entry size."""


@dataclass(frozen=True, order=True)
class PeerEndpoint:
    ip: str
    port: int

    def __post_init__(self) -> None:
        if not 0 < self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")


@dataclass
class AnnounceResponse:
    interval_s: int = 1800
    seeders: int = 0
    leechers: int = 0
    peers: list[PeerEndpoint] = field(default_factory=list)


def build_announce_request(
    tracker_url: str,
    infohash: InfoHash,
    peer_id: bytes,
    listen_port: int,
    numwant: int = 50,
    event: str = "none",
    left: int = 0,
) -> str:
    """Build the announce GET URL; info_hash and peer_id are percent-encoded byte-wise."""
    scheme = urlsplit(tracker_url).scheme.lower()
    if scheme not in ("http", "https"):
        raise UnsupportedScheme(f"tracker scheme {scheme!r} is not http(s)")
    if len(peer_id) != 20:
        raise ValueError(f"peer_id must be 20 bytes, got {len(peer_id)}")
    if event not in ANNOUNCE_EVENTS:
        raise ValueError(f"event must be one of {ANNOUNCE_EVENTS}, got {event!r}")
    query = (
        f"info_hash={quote(infohash.digest, safe='')}"
        f"&peer_id={quote(peer_id, safe='')}"
        f"&port={listen_port}"
        f"&uploaded=0&downloaded=0&left={left}"
        f"&numwant={numwant}&compact=1"
    )
    if event != "none":
        query += f"&event={event}"
    joiner = "&" if "?" in tracker_url else "?"
    return tracker_url + joiner + query


def parse_announce_response(body: bytes) -> AnnounceResponse:
    """Parse a bencoded announce response, compact or dictionary peer form."""
    top, consumed = bencode.decode(body)
    if not isinstance(top, dict):
        raise Malformed("announce response is not a dictionary")
    if consumed != len(body):
        raise Malformed("trailing bytes after announce response")

    if b"failure reason" in top:
        reason = top[b"failure reason"]
        text = reason.decode("utf-8", "replace") if isinstance(reason, bytes) else str(reason)
        raise TrackerFailure(text)

    response = AnnounceResponse(
        interval_s=_count(top, b"interval", default=1800),
        seeders=_count(top, b"complete"),
        leechers=_count(top, b"incomplete"),
    )

    peers = top.get(b"peers", b"")
    if isinstance(peers, bytes):
        response.peers.extend(parse_compact_peers(peers))
    elif isinstance(peers, list):
        response.peers.extend(_dict_form_peers(peers))
    else:
        raise Malformed("peers is neither a compact blob nor a list")

    peers6 = top.get(b"peers6")
    if isinstance(peers6, bytes):
        response.peers.extend(_compact_peers6(peers6))
    return response


def parse_compact_peers(blob: bytes) -> list[PeerEndpoint]:
    """Decode 6-byte groups: 4 address bytes then a big-endian port."""
    if len(blob) % 6:
        raise BadCompactLength(f"compact peers length {len(blob)} is not a multiple of 6")
    peers = []
    for off in range(0, len(blob), 6):
        a, b, c, d, port = struct.unpack_from(">4BH", blob, off)
        if port == 0:
            continue  # unconnectable, drop
        peers.append(PeerEndpoint(ip=f"{a}.{b}.{c}.{d}", port=port))
    return peers


def encode_compact_peers(peers: list[PeerEndpoint]) -> bytes:
    out = bytearray()
    for peer in peers:
        out += bytes(int(part) for part in peer.ip.split("."))
        out += struct.pack(">H", peer.port)
    return bytes(out)


def _compact_peers6(blob: bytes) -> list[PeerEndpoint]:
    if len(blob) % 18:
        raise BadCompactLength(f"compact peers6 length {len(blob)} is not a multiple of 18")
    peers = []
    for off in range(0, len(blob), 18):
        addr = ipaddress.IPv6Address(blob[off : off + 16]).compressed
        (port,) = struct.unpack_from(">H", blob, off + 16)
        if port == 0:
            continue
        peers.append(PeerEndpoint(ip=addr, port=port))
    return peers


def _dict_form_peers(entries: list) -> list[PeerEndpoint]:
    peers = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise Malformed("peer entry is not a dictionary")
        ip = entry.get(b"ip")
        port = entry.get(b"port")
        if not isinstance(ip, bytes) or not isinstance(port, int):
            raise Malformed("peer entry lacks ip/port")
        if not 0 <= port <= 65535:
            raise Malformed(f"peer port {port} out of range")
        if port == 0:
            continue
        peers.append(PeerEndpoint(ip=ip.decode("utf-8", "replace"), port=port))
    return peers


def _count(top: dict, key: bytes, default: int = 0) -> int:
    value = top.get(key, default)
    if not isinstance(value, int) or value < 0:
        raise Malformed(f"{key.decode()} is not a non-negative integer")
    return value


def http_fetch(url: str, timeout: float = 20.0) -> bytes:
    request = urllib.request.Request(url, headers={"User-Agent": "torrentguard/0.1"})
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.read()


class TrackerClient:
    """Announce wrapper holding the fetch callable and an in-flight cap."""

    def __init__(self, fetch: FetchFn = http_fetch, max_parallel: int = 4):
        if max_parallel < 1:
            raise ValueError("max_parallel must be at least 1")
        self._fetch = fetch
        self._slots = threading.BoundedSemaphore(max_parallel)

    def announce(
        self,
        tracker_url: str,
        infohash: InfoHash,
        peer_id: bytes,
        listen_port: int = 6881,
        numwant: int = 50,
        event: str = "none",
        left: int = 0,
    ) -> AnnounceResponse:
        url = build_announce_request(
            tracker_url, infohash, peer_id, listen_port, numwant, event, left
        )
        with self._slots:
            body = self._fetch(url)
        return parse_announce_response(body)


# fuzz callers catch this pair; everything else is a bug
PARSE_ERRORS = (BencodeError, TrackerError)
