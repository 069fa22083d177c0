"""Seeded random generators shared by the module and acceptance suites."""

from __future__ import annotations

import random

from torrentguard.bencode import INT64_MAX, INT64_MIN

_INTERESTING_INTS = [0, 1, -1, 7, -63, 255, 65536, INT64_MIN, INT64_MAX]


def random_bvalue(rng: random.Random, depth: int = 0):
    roll = rng.random()
    if depth >= 4 or roll < 0.30:
        if rng.random() < 0.2:
            return rng.choice(_INTERESTING_INTS)
        return rng.randint(-(10**12), 10**12)
    if roll < 0.60:
        return random_key(rng)
    if roll < 0.80:
        return [random_bvalue(rng, depth + 1) for _ in range(rng.randint(0, 5))]
    keys = {random_key(rng) for _ in range(rng.randint(0, 5))}
    return {k: random_bvalue(rng, depth + 1) for k in keys}


def random_key(rng: random.Random) -> bytes:
    return bytes(rng.randrange(256) for _ in range(rng.randint(0, 24)))


def random_peer_list(rng: random.Random, max_len: int = 60) -> list:
    from torrentguard.tracker import PeerEndpoint

    n = rng.randint(0, max_len)
    return [
        PeerEndpoint(
            ip=".".join(str(rng.randrange(256)) for _ in range(4)),
            port=rng.randint(1, 65535),
        )
        for _ in range(n)
    ]


def random_event_log(rng: random.Random, max_events: int = 200) -> list:
    """Valid random event stream: publishes precede their resolves and samples."""
    from torrentguard.events import (
        AccountRemoved,
        SeederResolved,
        SwarmSample,
        TorrentPublished,
    )
    from torrentguard.metainfo import InfoHash
    from torrentguard.tracker import PeerEndpoint

    usernames = [f"user{i}" for i in range(rng.randint(2, 7))]
    ip_pool = [f"10.1.0.{i}" for i in range(1, rng.randint(3, 8))]
    events = []
    published = []
    seq = 0
    t = 0.0
    for _ in range(rng.randint(1, max_events)):
        seq += 1
        t += 0.5 + rng.random() * 300
        roll = rng.random()
        if roll < 0.32 or not published:
            if published and rng.random() < 0.08:
                ih = rng.choice(published)  # repeat listing
            else:
                ih = InfoHash(bytes(rng.randrange(256) for _ in range(20)))
                published.append(ih)
            events.append(
                TorrentPublished(
                    seq=seq, at=t, infohash=ih, title=f"t-{seq}", username=rng.choice(usernames)
                )
            )
        elif roll < 0.62:
            ih = rng.choice(published)
            if rng.random() < 0.75:
                endpoint = PeerEndpoint(rng.choice(ip_pool), rng.randint(1024, 65535))
                events.append(SeederResolved(seq=seq, at=t, infohash=ih, endpoint=endpoint))
            else:
                failure = rng.choice(["empty_swarm", "probe_failed", "no_full_peer", "ambiguous"])
                events.append(SeederResolved(seq=seq, at=t, infohash=ih, failure=failure))
        elif roll < 0.86:
            name = rng.choice(usernames + ["ghost"])  # removals of never-seen names happen
            events.append(AccountRemoved(seq=seq, at=t, username=name))
        else:
            ih = rng.choice(published)
            endpoints = tuple(
                PeerEndpoint(f"172.16.{rng.randrange(4)}.{rng.randrange(1, 255)}", 6881)
                for _ in range(rng.randint(0, 4))
            )
            events.append(SwarmSample(seq=seq, at=t, infohash=ih, endpoints=endpoints))
    return events
