"""Portal monitoring: new-listing feeds and account liveness.

The portal is reached through an adapter (feed bytes, account pages, torrent
files), so the same monitor runs against fixture directories, a synthetic
portal, or a live site. Feeds are RSS 2.0 or Atom; an entry without a
username cannot drive reputation and is skipped with a warning.
"""

from __future__ import annotations

import email.utils
import logging
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Protocol

from .events import AccountRemoved, DetectionEvent, TorrentPublished
from .metainfo import InfoHash, MetainfoError, parse_magnet, parse_torrent
from .bencode import BencodeError

logger = logging.getLogger(__name__)

ATOM = "{http://www.w3.org/2005/Atom}"
DC = "{http://purl.org/dc/elements/1.1/}"

DEFAULT_REMOVED_MARKERS = (b"account has been removed", b"user not found")


class MalformedXml(ValueError):
    pass


class AccountStatus(Enum):
    ACTIVE = "active"
    REMOVED = "removed"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class FeedEntry:
    title: str
    username: str
    link: str
    published_at: float | None = None


def parse_feed(xml_bytes: bytes) -> list[FeedEntry]:
    """Parse an RSS 2.0 or Atom feed into entries; username-less items drop."""
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    if root.tag == "rss":
        channel = root.find("channel")
        if channel is None:
            raise MalformedXml("rss feed without channel")
        return _entries(channel.findall("item"), _rss_entry)
    if root.tag == ATOM + "feed":
        return _entries(root.findall(ATOM + "entry"), _atom_entry)
    raise MalformedXml(f"unrecognized feed root {root.tag!r}")


def _entries(items, build) -> list[FeedEntry]:
    entries = []
    for item in items:
        entry = build(item)
        if entry.username:
            entries.append(entry)
        else:
            logger.warning("feed entry %r has no username, skipped", entry.title)
    return entries


def _rss_entry(item) -> FeedEntry:
    username = (item.findtext("author") or item.findtext(DC + "creator") or "").strip()
    link = (item.findtext("link") or "").strip()
    if not link:
        enclosure = item.find("enclosure")
        if enclosure is not None:
            link = enclosure.get("url", "")
    published_at = None
    pub_date = item.findtext("pubDate")
    if pub_date:
        try:
            published_at = email.utils.parsedate_to_datetime(pub_date).timestamp()
        except (TypeError, ValueError):
            logger.warning("unparseable pubDate %r", pub_date)
    return FeedEntry(
        title=(item.findtext("title") or "").strip(),
        username=username,
        link=link,
        published_at=published_at,
    )


def _atom_entry(item) -> FeedEntry:
    username = (item.findtext(f"{ATOM}author/{ATOM}name") or "").strip()
    link = ""
    for element in item.findall(ATOM + "link"):
        link = element.get("href", "")
        if element.get("rel") in (None, "alternate", "enclosure"):
            break
    published_at = None
    stamp = item.findtext(ATOM + "published") or item.findtext(ATOM + "updated")
    if stamp:
        try:
            published_at = datetime.fromisoformat(stamp.replace("Z", "+00:00")).timestamp()
        except ValueError:
            logger.warning("unparseable atom timestamp %r", stamp)
    return FeedEntry(
        title=(item.findtext(ATOM + "title") or "").strip(),
        username=username,
        link=link,
        published_at=published_at,
    )


def check_account_status(
    username: str,
    fetch,
    removed_markers=DEFAULT_REMOVED_MARKERS,
    active_markers=(),
) -> AccountStatus:
    """Classify a profile page: 404 or a removal marker means gone.

    fetch(username) returns (http status, body bytes); transport errors come
    back as UNKNOWN so a flaky portal never looks like a removal wave.
    """
    try:
        status, body = fetch(username)
    except OSError:
        return AccountStatus.UNKNOWN
    if status == 404:
        return AccountStatus.REMOVED
    lowered = body.lower()
    if any(marker in lowered for marker in removed_markers):
        return AccountStatus.REMOVED
    if status == 200:
        if not active_markers or any(marker in lowered for marker in active_markers):
            return AccountStatus.ACTIVE
        return AccountStatus.UNKNOWN
    return AccountStatus.UNKNOWN


class PortalAdapter(Protocol):
    def fetch_feed(self) -> bytes: ...

    def fetch_account_page(self, username: str) -> tuple[int, bytes]: ...

    def fetch_torrent(self, link: str) -> bytes: ...


class PortalMonitor:
    """Polls the feed and watched accounts, emitting detection events.

    One tick does at most one feed poll and one account sweep, each gated by
    its own interval. A (infohash, username) listing is emitted once ever;
    an account removal is emitted once ever; an UNKNOWN status is retried on
    the next sweep.
    """

    def __init__(
        self,
        portal: PortalAdapter,
        feed_interval: float = 300.0,
        account_interval: float = 300.0,
        removed_markers=DEFAULT_REMOVED_MARKERS,
        start_seq: int = 0,
        known_listings=(),
        known_removed=(),
    ):
        self.portal = portal
        self.feed_interval = feed_interval
        self.account_interval = account_interval
        self.removed_markers = removed_markers
        self._seq = start_seq
        self._next_feed = 0.0
        self._next_accounts = 0.0
        # restart continuity: listings and removals already in the store
        # must not be emitted again
        self._seen: set[tuple[str, str]] = {(h, u) for h, u in known_listings}
        self._watched: dict[str, bool] = {}  # username -> removal already emitted
        for _, username in known_listings:
            self._watched.setdefault(username, False)
        for username in known_removed:
            self._watched[username] = True

    def tick(self, now: float) -> list[DetectionEvent]:
        events: list[DetectionEvent] = []
        if now >= self._next_feed:
            self._next_feed = now + self.feed_interval
            events.extend(self._poll_feed(now))
        if now >= self._next_accounts:
            self._next_accounts = now + self.account_interval
            events.extend(self._sweep_accounts(now))
        return events

    def _poll_feed(self, now: float) -> list[DetectionEvent]:
        try:
            xml = self.portal.fetch_feed()
            entries = parse_feed(xml)
        except (OSError, MalformedXml) as exc:
            logger.warning("feed poll failed: %s", exc)
            return []
        fresh = []
        for entry in entries:
            infohash = self._infohash_for(entry)
            if infohash is None:
                continue
            key = (infohash.hex, entry.username)
            if key in self._seen:
                continue
            self._seen.add(key)
            self._watched.setdefault(entry.username, False)
            at = min(entry.published_at, now) if entry.published_at else now
            fresh.append((at, entry, infohash))
        # timestamps non-decreasing within the tick, sequence follows time
        fresh.sort(key=lambda item: item[0])
        return [
            TorrentPublished(
                seq=self._next_seq(),
                at=at,
                infohash=infohash,
                title=entry.title,
                username=entry.username,
            )
            for at, entry, infohash in fresh
        ]

    def _infohash_for(self, entry: FeedEntry) -> InfoHash | None:
        if not entry.link:
            logger.warning("entry %r has no link, skipped", entry.title)
            return None
        try:
            if entry.link.startswith("magnet:"):
                return parse_magnet(entry.link).infohash
            return parse_torrent(self.portal.fetch_torrent(entry.link)).infohash
        except (OSError, MetainfoError, BencodeError) as exc:
            logger.warning("entry %r link unusable: %s", entry.title, exc)
            return None

    def _sweep_accounts(self, now: float) -> list[DetectionEvent]:
        events = []
        for username, removal_emitted in self._watched.items():
            if removal_emitted:
                continue
            status = check_account_status(
                username, self.portal.fetch_account_page, self.removed_markers
            )
            if status is AccountStatus.REMOVED:
                self._watched[username] = True
                events.append(AccountRemoved(seq=self._next_seq(), at=now, username=username))
        return events

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq


class FixturePortal:
    """Adapter over a directory of canned portal files.

    Layout: feed.xml (or feed.1.xml, feed.2.xml, ... served in order, last one
    repeating), torrents/<basename> for .torrent links, and accounts/: a
    <username>.removed file marks the account gone, <username>.html serves as
    the profile page, anyone else is a plain active profile.
    """

    def __init__(self, root: str):
        self.root = root
        self._feed_calls = 0

    def fetch_feed(self) -> bytes:
        single = os.path.join(self.root, "feed.xml")
        if os.path.exists(single):
            return _read(single)
        numbered = sorted(
            (name for name in os.listdir(self.root) if name.startswith("feed.") and name.endswith(".xml")),
            key=lambda name: int(name.split(".")[1]),
        )
        if not numbered:
            raise FileNotFoundError(f"no feed fixtures under {self.root}")
        index = min(self._feed_calls, len(numbered) - 1)
        self._feed_calls += 1
        return _read(os.path.join(self.root, numbered[index]))

    def fetch_account_page(self, username: str) -> tuple[int, bytes]:
        if os.path.exists(os.path.join(self.root, "accounts", username + ".removed")):
            return 404, b"<html>user not found</html>"
        page = os.path.join(self.root, "accounts", username + ".html")
        if os.path.exists(page):
            return 200, _read(page)
        return 200, b"<html>profile of " + username.encode() + b"</html>"

    def fetch_torrent(self, link: str) -> bytes:
        basename = link.rsplit("/", 1)[-1]
        return _read(os.path.join(self.root, "torrents", basename))


class SimulatedPortal:
    """Synthetic portal over a scripted world; the driver advances .now.

    listings: (publish_t, title, username, link) tuples; removals: username ->
    removal time; torrents: link basename -> .torrent bytes.
    """

    def __init__(self, listings, removals, torrents=None):
        self.listings = sorted(listings)
        self.removals = dict(removals)
        self.torrents = dict(torrents or {})
        self.now = 0.0

    def fetch_feed(self) -> bytes:
        visible = [entry for entry in self.listings if entry[0] <= self.now]
        return render_rss(
            [
                FeedEntry(title=title, username=username, link=link, published_at=at)
                for at, title, username, link in visible
            ]
        )

    def fetch_account_page(self, username: str) -> tuple[int, bytes]:
        removed_at = self.removals.get(username)
        if removed_at is not None and removed_at <= self.now:
            return 404, b"<html>user not found</html>"
        return 200, b"<html>profile of " + username.encode() + b"</html>"

    def fetch_torrent(self, link: str) -> bytes:
        return self.torrents[link.rsplit("/", 1)[-1]]


def render_rss(entries: list[FeedEntry], title: str = "recent uploads") -> bytes:
    """Render entries as RSS 2.0, the inverse of parse_feed's RSS branch."""
    rss = ET.Element("rss", version="2.0")
    channel = ET.SubElement(rss, "channel")
    ET.SubElement(channel, "title").text = title
    for entry in entries:
        item = ET.SubElement(channel, "item")
        ET.SubElement(item, "title").text = entry.title
        ET.SubElement(item, "author").text = entry.username
        ET.SubElement(item, "link").text = entry.link
        if entry.published_at is not None:
            stamp = datetime.fromtimestamp(entry.published_at, timezone.utc)
            ET.SubElement(item, "pubDate").text = email.utils.format_datetime(stamp)
    return ET.tostring(rss, encoding="utf-8", xml_declaration=True)


def _read(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()
