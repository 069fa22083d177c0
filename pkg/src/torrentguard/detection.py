"""Detection core: an event-sourced fold from the portal event stream to
torrent classifications, publisher records, and IP reputation.

Rules, in the order a single event applies them:

- A removed account makes every torrent it published fake. Classification is
  terminal; nothing ever un-flags a torrent.
- Each removed account counts once toward every IP observed seeding that
  account's torrents. An IP with k distinct removed accounts (default 3) is
  fake from that moment on.
- When an IP turns fake, its not-yet-flagged torrents flag retroactively; a
  torrent later resolved to an already-fake IP flags at birth, the instant the
  resolution event lands.

The fold is pure in the event stream: replaying the same log always rebuilds
byte-identical blacklists.
"""

from __future__ import annotations

import ipaddress
import threading
from dataclasses import dataclass, field
from enum import Enum

from .events import (
    AccountRemoved,
    DetectionEvent,
    SeederResolved,
    SwarmSample,
    TorrentPublished,
)
from .metainfo import InfoHash
from .swarm import SwarmObserver

DEFAULT_THRESHOLD = 3

STATE_VERSION = 1


class Classification(str, Enum):
    UNKNOWN = "unknown"
    FAKE_BY_ACCOUNT_REMOVAL = "fake_by_account_removal"
    FAKE_AT_BIRTH = "fake_at_birth"
    FAKE_RETROACTIVE = "fake_retroactive"

    @property
    def is_fake(self) -> bool:
        return self is not Classification.UNKNOWN


class IpState(str, Enum):
    CLEAN = "clean"
    POTENTIAL = "potential"
    FAKE = "fake"


class DetectionError(ValueError):
    pass


class OutOfOrder(DetectionError):
    """Event sequence number does not exceed the last ingested one."""


class UnknownTorrent(DetectionError):
    """SeederResolved for an infohash that was never published."""


@dataclass
class TorrentRecord:
    infohash: InfoHash
    title: str
    username: str
    published_at: float
    seeder_ip: str | None = None
    resolution_failure: str | None = None
    classification: Classification = Classification.UNKNOWN
    flagged_at: float | None = None


@dataclass
class PublisherRecord:
    username: str
    removed_at: float | None = None
    ips: list[str] = field(default_factory=list)
    torrents: list[InfoHash] = field(default_factory=list)

    @property
    def removed(self) -> bool:
        return self.removed_at is not None


@dataclass
class IpReputation:
    ip: str
    removed_usernames: set[str] = field(default_factory=set)
    fake_since: float | None = None

    def state(self, k: int) -> IpState:
        n = len(self.removed_usernames)
        if n >= k:
            return IpState.FAKE
        return IpState.POTENTIAL if n else IpState.CLEAN


@dataclass(frozen=True)
class StateChange:
    kind: str
    subject: str
    detail: str = ""


@dataclass(frozen=True)
class Verdict:
    infohash: InfoHash
    classification: Classification
    reason: str
    username: str | None = None
    ip: str | None = None
    flagged_at: float | None = None


class DetectionEngine:
    """Single-writer fold over the event stream; queries are lock-consistent."""

    def __init__(self, k: int = DEFAULT_THRESHOLD):
        if k < 1:
            raise ValueError(f"removal threshold k must be >= 1, got {k}")
        self.k = k
        self.swarm = SwarmObserver()
        self._lock = threading.Lock()
        self._last_seq = 0
        self._torrents: dict[InfoHash, TorrentRecord] = {}
        self._publishers: dict[str, PublisherRecord] = {}
        self._ips: dict[str, IpReputation] = {}
        self._torrents_by_ip: dict[str, list[InfoHash]] = {}

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def ingest_event(self, event: DetectionEvent) -> list[StateChange]:
        with self._lock:
            if event.seq <= self._last_seq:
                raise OutOfOrder(f"event seq {event.seq} does not exceed {self._last_seq}")
            if isinstance(event, TorrentPublished):
                changes = self._on_published(event)
            elif isinstance(event, SeederResolved):
                changes = self._on_resolved(event)
            elif isinstance(event, AccountRemoved):
                changes = self._on_removed(event)
            elif isinstance(event, SwarmSample):
                changes = self._on_sample(event)
            else:
                raise TypeError(f"not a detection event: {type(event).__name__}")
            # seq advances only after the event applied cleanly
            self._last_seq = event.seq
            return changes

    def _on_published(self, event: TorrentPublished) -> list[StateChange]:
        publisher = self._publishers.setdefault(event.username, PublisherRecord(event.username))
        if event.infohash in self._torrents:
            return []  # repeat listing, first publication wins
        record = TorrentRecord(
            infohash=event.infohash,
            title=event.title,
            username=event.username,
            published_at=event.at,
        )
        self._torrents[event.infohash] = record
        publisher.torrents.append(event.infohash)
        changes = [StateChange("torrent_indexed", event.infohash.hex)]
        if publisher.removed:
            # the portal no longer lists this account; anything still arriving
            # under its name is fake on arrival
            changes += self._flag(record, Classification.FAKE_BY_ACCOUNT_REMOVAL, event.at)
        return changes

    def _on_resolved(self, event: SeederResolved) -> list[StateChange]:
        record = self._torrents.get(event.infohash)
        if record is None:
            raise UnknownTorrent(f"seeder resolved for unpublished {event.infohash.hex}")
        if event.endpoint is None:
            if record.seeder_ip is None and record.resolution_failure is None:
                record.resolution_failure = event.failure
            return [StateChange("seeder_unresolved", event.infohash.hex, event.failure or "")]
        if record.seeder_ip is not None:
            return []  # birth-time resolution is one-shot, later answers ignored
        ip = event.endpoint.ip
        record.seeder_ip = ip
        record.resolution_failure = None
        self._torrents_by_ip.setdefault(ip, []).append(event.infohash)
        changes = [StateChange("seeder_recorded", event.infohash.hex, ip)]

        publisher = self._publishers[record.username]
        if ip not in publisher.ips:
            publisher.ips.append(ip)
        reputation = self._ips.setdefault(ip, IpReputation(ip))
        if publisher.removed and record.username not in reputation.removed_usernames:
            # binding arrived after the removal; the attribution still counts
            changes += self._attribute(reputation, record.username, event.at)
        if reputation.state(self.k) is IpState.FAKE:
            changes += self._flag(record, Classification.FAKE_AT_BIRTH, event.at)
        return changes

    def _on_removed(self, event: AccountRemoved) -> list[StateChange]:
        publisher = self._publishers.setdefault(event.username, PublisherRecord(event.username))
        if publisher.removed:
            return []
        publisher.removed_at = event.at
        changes = [StateChange("publisher_removed", event.username)]
        for infohash in publisher.torrents:
            changes += self._flag(
                self._torrents[infohash], Classification.FAKE_BY_ACCOUNT_REMOVAL, event.at
            )
        for ip in publisher.ips:
            reputation = self._ips[ip]
            if event.username not in reputation.removed_usernames:
                changes += self._attribute(reputation, event.username, event.at)
        return changes

    def _on_sample(self, event: SwarmSample) -> list[StateChange]:
        self.swarm.record_sample(event.infohash, event.endpoints, event.at)
        return [StateChange("sample_recorded", event.infohash.hex, str(len(event.endpoints)))]

    def _attribute(self, reputation: IpReputation, username: str, at: float) -> list[StateChange]:
        reputation.removed_usernames.add(username)
        n = len(reputation.removed_usernames)
        if n == self.k:
            reputation.fake_since = at
            changes = [StateChange("ip_fake", reputation.ip, f"{n}/{self.k}")]
            for infohash in self._torrents_by_ip.get(reputation.ip, []):
                changes += self._flag(
                    self._torrents[infohash], Classification.FAKE_RETROACTIVE, at
                )
            return changes
        if n < self.k:
            return [StateChange("ip_potential", reputation.ip, f"{n}/{self.k}")]
        return []  # already fake, count just grows

    def _flag(self, record: TorrentRecord, classification: Classification, at: float) -> list[StateChange]:
        if record.classification.is_fake:
            return []  # terminal, first flag wins
        record.classification = classification
        record.flagged_at = at
        return [StateChange("torrent_flagged", record.infohash.hex, classification.value)]

    def query_verdict(self, infohash: InfoHash) -> Verdict:
        with self._lock:
            record = self._torrents.get(infohash)
            if record is None:
                return Verdict(infohash, Classification.UNKNOWN, "not indexed")
            return Verdict(
                infohash=infohash,
                classification=record.classification,
                reason=self._reason(record),
                username=record.username,
                ip=record.seeder_ip,
                flagged_at=record.flagged_at,
            )

    def _reason(self, record: TorrentRecord) -> str:
        c = record.classification
        if c is Classification.FAKE_BY_ACCOUNT_REMOVAL:
            return f"publisher account {record.username!r} was removed"
        if c is Classification.FAKE_AT_BIRTH:
            return f"published from blacklisted ip {record.seeder_ip}"
        if c is Classification.FAKE_RETROACTIVE:
            return f"seeder ip {record.seeder_ip} crossed the removal threshold"
        return "no evidence against this torrent"

    def torrent_record(self, infohash: InfoHash) -> TorrentRecord | None:
        with self._lock:
            return self._torrents.get(infohash)

    def torrent_records(self) -> list[TorrentRecord]:
        with self._lock:
            return list(self._torrents.values())

    def publisher_records(self) -> list[PublisherRecord]:
        with self._lock:
            return list(self._publishers.values())

    def ip_reputations(self) -> list[IpReputation]:
        with self._lock:
            return list(self._ips.values())

    def export_blacklists(self) -> tuple[list[str], list[str]]:
        """Fake infohashes in hex order; fake IPs in numeric address order."""
        with self._lock:
            infohashes = sorted(
                record.infohash.hex
                for record in self._torrents.values()
                if record.classification.is_fake
            )
            ips = sorted(
                (ip for ip, rep in self._ips.items() if rep.state(self.k) is IpState.FAKE),
                key=_ip_sort_key,
            )
            return infohashes, ips

    def state_dict(self) -> dict:
        """Snapshot of the full fold state; insertion orders are preserved."""
        with self._lock:
            return {
                "version": STATE_VERSION,
                "k": self.k,
                "last_seq": self._last_seq,
                "torrents": [
                    {
                        "infohash": r.infohash.hex,
                        "title": r.title,
                        "username": r.username,
                        "published_at": r.published_at,
                        "seeder_ip": r.seeder_ip,
                        "resolution_failure": r.resolution_failure,
                        "classification": r.classification.value,
                        "flagged_at": r.flagged_at,
                    }
                    for r in self._torrents.values()
                ],
                "publishers": [
                    {
                        "username": p.username,
                        "removed_at": p.removed_at,
                        "ips": list(p.ips),
                        "torrents": [ih.hex for ih in p.torrents],
                    }
                    for p in self._publishers.values()
                ],
                "ips": [
                    {
                        "ip": rep.ip,
                        "removed_usernames": sorted(rep.removed_usernames),
                        "fake_since": rep.fake_since,
                    }
                    for rep in self._ips.values()
                ],
                "swarm": self.swarm.state_dict(),
            }

    @classmethod
    def from_state(cls, state: dict) -> "DetectionEngine":
        if state.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported state version {state.get('version')!r}")
        engine = cls(k=state["k"])
        engine._last_seq = state["last_seq"]
        for entry in state["torrents"]:
            infohash = InfoHash.from_hex(entry["infohash"])
            record = TorrentRecord(
                infohash=infohash,
                title=entry["title"],
                username=entry["username"],
                published_at=entry["published_at"],
                seeder_ip=entry["seeder_ip"],
                resolution_failure=entry["resolution_failure"],
                classification=Classification(entry["classification"]),
                flagged_at=entry["flagged_at"],
            )
            engine._torrents[infohash] = record
            if record.seeder_ip is not None:
                engine._torrents_by_ip.setdefault(record.seeder_ip, []).append(infohash)
        for entry in state["publishers"]:
            engine._publishers[entry["username"]] = PublisherRecord(
                username=entry["username"],
                removed_at=entry["removed_at"],
                ips=list(entry["ips"]),
                torrents=[InfoHash.from_hex(h) for h in entry["torrents"]],
            )
        for entry in state["ips"]:
            engine._ips[entry["ip"]] = IpReputation(
                ip=entry["ip"],
                removed_usernames=set(entry["removed_usernames"]),
                fake_since=entry["fake_since"],
            )
        engine.swarm = SwarmObserver.from_state(state["swarm"])
        return engine


def _ip_sort_key(ip: str):
    addr = ipaddress.ip_address(ip)
    return (addr.version, int(addr))


def render_blacklist(lines: list[str]) -> str:
    """One entry per line, newline-terminated; empty list renders empty."""
    return "".join(line + "\n" for line in lines)
