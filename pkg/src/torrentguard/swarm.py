"""Swarm sample accounting: distinct downloader addresses per torrent.

Sampling is scrape-free: each sample is the peer list some observer saw at a
point in time, and download counts are distinct IPs across samples, so a
victim polled in ten samples still counts once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metainfo import InfoHash
from .tracker import PeerEndpoint


class TimeRegression(ValueError):
    """Samples for one torrent must carry non-decreasing timestamps."""


@dataclass
class SwarmSampleLog:
    infohash: InfoHash
    samples: list[tuple[float, tuple[PeerEndpoint, ...]]] = field(default_factory=list)


def record_sample(log: SwarmSampleLog, endpoints, at: float) -> SwarmSampleLog:
    if log.samples and at < log.samples[-1][0]:
        raise TimeRegression(f"sample at {at} precedes last sample at {log.samples[-1][0]}")
    log.samples.append((at, tuple(endpoints)))
    return log


def unique_downloads(log: SwarmSampleLog, until: float = math.inf) -> int:
    """Distinct IPs seen at or before `until`."""
    seen: set[str] = set()
    for at, endpoints in log.samples:
        if at > until:
            break
        seen.update(ep.ip for ep in endpoints)
    return len(seen)


class SwarmObserver:
    """Per-torrent sample logs, keyed by infohash."""

    def __init__(self) -> None:
        self._logs: dict[InfoHash, SwarmSampleLog] = {}

    def record_sample(self, infohash: InfoHash, endpoints, at: float) -> SwarmSampleLog:
        log = self._logs.setdefault(infohash, SwarmSampleLog(infohash))
        return record_sample(log, endpoints, at)

    def log_for(self, infohash: InfoHash) -> SwarmSampleLog | None:
        return self._logs.get(infohash)

    def unique_downloads(self, infohash: InfoHash, until: float = math.inf) -> int:
        log = self._logs.get(infohash)
        return unique_downloads(log, until) if log else 0

    def logs(self) -> list[SwarmSampleLog]:
        return list(self._logs.values())

    def state_dict(self) -> dict:
        return {
            log.infohash.hex: [
                [at, [[ep.ip, ep.port] for ep in endpoints]] for at, endpoints in log.samples
            ]
            for log in self._logs.values()
        }

    @classmethod
    def from_state(cls, state: dict) -> "SwarmObserver":
        observer = cls()
        for hexhash, samples in state.items():
            log = SwarmSampleLog(InfoHash.from_hex(hexhash))
            for at, endpoints in samples:
                log.samples.append(
                    (at, tuple(PeerEndpoint(ip=ip, port=port) for ip, port in endpoints))
                )
            observer._logs[log.infohash] = log
        return observer
