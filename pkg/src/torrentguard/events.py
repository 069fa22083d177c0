"""Detection event stream: the four event kinds and their JSON line forms.

Every event carries a producer-assigned sequence number, strictly increasing
within one stream, and a timestamp in epoch seconds (simulated runs count from
zero). The JSON form is versioned so old logs stay readable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from .metainfo import InfoHash
from .tracker import PeerEndpoint

STORE_VERSION = 1


@dataclass(frozen=True)
class TorrentPublished:
    seq: int
    at: float
    infohash: InfoHash
    title: str
    username: str


@dataclass(frozen=True)
class SeederResolved:
    """Outcome of a birth-time seeder resolution: an endpoint or a failure tag."""

    seq: int
    at: float
    infohash: InfoHash
    endpoint: PeerEndpoint | None = None
    failure: str | None = None

    def __post_init__(self) -> None:
        if (self.endpoint is None) == (self.failure is None):
            raise ValueError("exactly one of endpoint/failure must be set")


@dataclass(frozen=True)
class AccountRemoved:
    seq: int
    at: float
    username: str


@dataclass(frozen=True)
class SwarmSample:
    seq: int
    at: float
    infohash: InfoHash
    endpoints: tuple[PeerEndpoint, ...]


DetectionEvent = Union[TorrentPublished, SeederResolved, AccountRemoved, SwarmSample]


def event_to_json(event: DetectionEvent) -> str:
    record: dict = {"v": STORE_VERSION, "seq": event.seq, "at": event.at}
    if isinstance(event, TorrentPublished):
        record.update(
            type="torrent_published",
            infohash=event.infohash.hex,
            title=event.title,
            username=event.username,
        )
    elif isinstance(event, SeederResolved):
        record.update(type="seeder_resolved", infohash=event.infohash.hex)
        if event.endpoint is not None:
            record.update(ip=event.endpoint.ip, port=event.endpoint.port)
        else:
            record.update(failure=event.failure)
    elif isinstance(event, AccountRemoved):
        record.update(type="account_removed", username=event.username)
    elif isinstance(event, SwarmSample):
        record.update(
            type="swarm_sample",
            infohash=event.infohash.hex,
            peers=[[ep.ip, ep.port] for ep in event.endpoints],
        )
    else:
        raise TypeError(f"not a detection event: {type(event).__name__}")
    return json.dumps(record, separators=(",", ":"))


def event_from_json(line: str) -> DetectionEvent:
    """Parse one JSON line; raises ValueError on any structural problem."""
    record = json.loads(line)
    if not isinstance(record, dict):
        raise ValueError("event record is not an object")
    if record.get("v") != STORE_VERSION:
        raise ValueError(f"unsupported record version {record.get('v')!r}")
    seq = record.get("seq")
    at = record.get("at")
    if not isinstance(seq, int) or isinstance(at, bool) or not isinstance(at, (int, float)):
        raise ValueError("event record lacks integer seq / numeric at")
    kind = record.get("type")
    if kind == "torrent_published":
        return TorrentPublished(
            seq=seq,
            at=float(at),
            infohash=InfoHash.from_hex(_req_str(record, "infohash")),
            title=_req_str(record, "title"),
            username=_req_str(record, "username"),
        )
    if kind == "seeder_resolved":
        infohash = InfoHash.from_hex(_req_str(record, "infohash"))
        if "failure" in record:
            return SeederResolved(seq=seq, at=float(at), infohash=infohash, failure=_req_str(record, "failure"))
        port = record.get("port")
        if not isinstance(port, int):
            raise ValueError("seeder_resolved record lacks integer port")
        endpoint = PeerEndpoint(ip=_req_str(record, "ip"), port=port)
        return SeederResolved(seq=seq, at=float(at), infohash=infohash, endpoint=endpoint)
    if kind == "account_removed":
        return AccountRemoved(seq=seq, at=float(at), username=_req_str(record, "username"))
    if kind == "swarm_sample":
        peers = record.get("peers")
        if not isinstance(peers, list):
            raise ValueError("swarm_sample record lacks peer list")
        endpoints = []
        for entry in peers:
            if not isinstance(entry, list) or len(entry) != 2 or not isinstance(entry[1], int):
                raise ValueError(f"bad swarm_sample peer entry: {entry!r}")
            endpoints.append(PeerEndpoint(ip=str(entry[0]), port=entry[1]))
        return SwarmSample(
            seq=seq,
            at=float(at),
            infohash=InfoHash.from_hex(_req_str(record, "infohash")),
            endpoints=tuple(endpoints),
        )
    raise ValueError(f"unknown event type {kind!r}")


def _req_str(record: dict, key: str) -> str:
    value = record.get(key)
    if not isinstance(value, str):
        raise ValueError(f"event record lacks string {key!r}")
    return value
