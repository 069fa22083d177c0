"""Initial seeder resolution.

A freshly published torrent has one seeder: whoever uploaded it. The tracker's
seeder count picks the case. A pre-formed swarm (two or more seeders) is
ambiguous; a single seeder alone in the swarm is the answer outright; a single
seeder among few leechers is found by probing everyone and keeping the one
full peer. Probes run through peerwire and any probe failure counts as an
empty leecher, never as evidence of seeding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

from .metainfo import InfoHash
from .peerwire import Bitfield, PeerWireError, Transport, completion, probe_peer
from .tracker import AnnounceResponse, PeerEndpoint

DEFAULT_PROBE_CAP = 16

EMPTY_SWARM = "empty_swarm"
PROBE_FAILED = "probe_failed"
NO_FULL_PEER = "no_full_peer"


@dataclass(frozen=True)
class Resolved:
    endpoint: PeerEndpoint


@dataclass(frozen=True)
class Ambiguous:
    seeder_count: int


@dataclass(frozen=True)
class Unresolved:
    reason: str


SeederResolution = Union[Resolved, Ambiguous, Unresolved]

ProbeFn = Callable[[PeerEndpoint], "Bitfield | None"]


def resolve_initial_seeder(
    announce: AnnounceResponse,
    probe: ProbeFn,
    probe_cap: int = DEFAULT_PROBE_CAP,
) -> SeederResolution:
    """Decide the initial seeder from one announce snapshot.

    The tracker-reported seeder count is trusted for case selection:
    two or more seeders is Ambiguous before any probing happens.
    """
    if announce.seeders >= 2:
        return Ambiguous(seeder_count=announce.seeders)
    if announce.seeders == 0 or not announce.peers:
        return Unresolved(EMPTY_SWARM)

    peers = announce.peers
    if len(peers) == 1:
        return Resolved(endpoint=peers[0])
    if len(peers) > probe_cap:
        return Unresolved(PROBE_FAILED)

    full = [peer for peer in peers if _is_full(probe, peer)]
    if len(full) == 1:
        return Resolved(endpoint=full[0])
    if not full:
        return Unresolved(NO_FULL_PEER)
    return Ambiguous(seeder_count=len(full))


def _is_full(probe: ProbeFn, peer: PeerEndpoint) -> bool:
    try:
        bitfield = probe(peer)
    except Exception:
        bitfield = None
    if bitfield is None:
        return False
    try:
        _, is_seeder = completion(bitfield)
    except PeerWireError:
        return False
    return is_seeder


def make_probe(
    infohash: InfoHash,
    num_pieces: int,
    transport: Transport,
    peer_id: bytes | None = None,
) -> ProbeFn:
    """Bind peerwire's probe to one torrent for use with resolve_initial_seeder."""

    def probe(peer: PeerEndpoint) -> Bitfield | None:
        return probe_peer(peer, infohash, transport, num_pieces, peer_id)

    return probe
