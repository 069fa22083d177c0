"""Acceptance gate: one checked criterion per test, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL lines.
Budgeted criteria assert their own runtime.
"""

import http.client
import itertools
import json
import math
import pathlib
import random
import threading
import time
from contextlib import contextmanager

import pytest

from torrentguard.analytics import countermeasure_cost, country_ratio_table
from torrentguard.bencode import decode, encode
from torrentguard.detection import Classification, DetectionEngine, render_blacklist
from torrentguard.events import AccountRemoved, SeederResolved, TorrentPublished, event_to_json
from torrentguard.metainfo import InfoHash, parse_torrent
from torrentguard.peerwire import Bitfield
from torrentguard.seeder import (
    Ambiguous,
    Resolved,
    Unresolved,
    resolve_initial_seeder,
)
from torrentguard.service import make_server, verdict_to_json
from torrentguard.sim import LegitSpec, SimConfig, StrategySpec, evaluate_policies, run_simulation
from torrentguard.store import replay
from torrentguard.tracker import AnnounceResponse, PeerEndpoint, encode_compact_peers, parse_compact_peers

from generators import random_bvalue, random_event_log, random_peer_list
from oracle import naive_outcomes
from seeding import ALPINE_HEX, seeded_engine
from test_sim import birth_recount

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
EXPECTED = json.loads((FIXTURES / "expected.json").read_text())


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"FAIL [acceptance] {name}")
        raise
    print(f"PASS [acceptance] {name}")


def test_bencode_round_trips():
    with criterion("bencode round trips, 10k generated values, fixtures byte-identical, <10s"):
        started = time.perf_counter()
        rng = random.Random(0xACCE97)
        for _ in range(10_000):
            value = random_bvalue(rng)
            blob = encode(value)
            decoded, consumed = decode(blob)
            assert decoded == value
            assert consumed == len(blob)
        for name in EXPECTED:
            raw = (FIXTURES / name).read_bytes()
            decoded, consumed = decode(raw)
            assert consumed == len(raw)
            assert encode(decoded) == raw
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


def test_infohash_oracle():
    with criterion("infohash oracle: 5 fixtures match pre-computed SHA-1 exactly"):
        assert len(EXPECTED) >= 5
        for name, expect in EXPECTED.items():
            meta = parse_torrent((FIXTURES / name).read_bytes())
            assert meta.infohash.hex == expect["infohash"], name


def test_compact_peer_codec():
    with criterion("compact peer codec: 1k round trips plus the worked example"):
        rng = random.Random(0xC0DEC)
        for _ in range(1_000):
            peers = random_peer_list(rng)
            assert parse_compact_peers(encode_compact_peers(peers)) == peers
        worked = bytes([0xC0, 0xA8, 0x00, 0x01, 0x1A, 0xE1])
        assert parse_compact_peers(worked) == [PeerEndpoint("192.168.0.1", 6881)]


def _seeder_oracle(seeders, peers, outcomes, cap):
    if seeders >= 2:
        return ("ambiguous", seeders)
    if seeders == 0 or not peers:
        return ("unresolved", "empty_swarm")
    if len(peers) == 1:
        return ("resolved", peers[0])
    if len(peers) > cap:
        return ("unresolved", "probe_failed")
    full = [p for p, o in zip(peers, outcomes) if o == "full"]
    if len(full) == 1:
        return ("resolved", full[0])
    if not full:
        return ("unresolved", "no_full_peer")
    return ("ambiguous", len(full))


def _shape(resolution):
    if isinstance(resolution, Resolved):
        return ("resolved", resolution.endpoint)
    if isinstance(resolution, Ambiguous):
        return ("ambiguous", resolution.seeder_count)
    assert isinstance(resolution, Unresolved)
    return ("unresolved", resolution.reason)


def test_seeder_resolution_exhaustive():
    with criterion("seeder resolution: exhaustive oracle agreement over <=4 peers"):
        checked = 0
        for n_peers in range(5):
            peers = [PeerEndpoint(f"192.0.2.{i + 1}", 6881 + i) for i in range(n_peers)]
            for seeders in range(4):
                for outcomes in itertools.product(
                    ("full", "partial", "error", "silent"), repeat=n_peers
                ):
                    by_peer = dict(zip(peers, outcomes))

                    def probe(peer):
                        outcome = by_peer[peer]
                        if outcome == "full":
                            return Bitfield(bits=b"\xff", num_pieces=8)
                        if outcome == "partial":
                            return Bitfield(bits=b"\xfe", num_pieces=8)
                        if outcome == "error":
                            raise OSError("probe refused")
                        return None

                    announce = AnnounceResponse(
                        interval_s=1800, seeders=seeders, leechers=n_peers, peers=peers
                    )
                    got = _shape(resolve_initial_seeder(announce, probe, probe_cap=3))
                    want = _seeder_oracle(seeders, peers, outcomes, cap=3)
                    assert got == want, (seeders, outcomes)
                    checked += 1
        assert checked == sum(4 * 4 ** n for n in range(5))


def test_detection_threshold_exactness():
    with criterion("threshold: IP turns fake on exactly the K-th distinct removal; birth flags at zero delay"):
        for k in (1, 2, 3, 5):
            engine = DetectionEngine(k=k)
            seq = 0
            ip = "203.0.113.7"

            def feed(cls, **kw):
                nonlocal seq
                seq += 1
                return engine.ingest_event(cls(seq=seq, at=float(seq), **kw))

            for i in range(k):
                assert engine.export_blacklists()[1] == [], f"k={k}: fake before {i} removals"
                ih = InfoHash.from_hex(f"{0xa0 + i:02x}" * 20)
                feed(TorrentPublished, infohash=ih, title="t", username=f"user{i}")
                feed(SeederResolved, infohash=ih, endpoint=PeerEndpoint(ip, 6881))
                # a duplicate removal of an already-counted name must not advance
                if i > 0:
                    feed(AccountRemoved, username="user0")
                    assert engine.export_blacklists()[1] == []
                feed(AccountRemoved, username=f"user{i}")
                fake_now = engine.export_blacklists()[1] == [ip]
                assert fake_now == (i + 1 == k), f"k={k}, removal {i + 1}"

            birth = InfoHash.from_hex("cc" * 20)
            seq += 1
            publish_at = float(seq)
            engine.ingest_event(TorrentPublished(
                seq=seq, at=publish_at, infohash=birth, title="t", username="fresh"))
            seq += 1
            engine.ingest_event(SeederResolved(
                seq=seq, at=publish_at, infohash=birth, endpoint=PeerEndpoint(ip, 6881)))
            record = engine.torrent_record(birth)
            assert record.classification is Classification.FAKE_AT_BIRTH
            assert record.flagged_at == publish_at, "birth flag must carry zero event-time delay"


def test_replay_determinism_1000_logs(tmp_path):
    with criterion("replay determinism: 1000 random logs, engine == oracle == store replay, <60s"):
        started = time.perf_counter()
        rng = random.Random(0x1099)
        path = tmp_path / "log.jsonl"
        for round_no in range(1_000):
            events = random_event_log(rng)
            k = rng.choice((1, 2, 3, 5))

            engine = DetectionEngine(k=k)
            for event in events:
                engine.ingest_event(event)
            incremental = engine.export_blacklists()

            assert incremental == naive_outcomes(events, k)["blacklists"], round_no

            with open(path, "w") as f:
                for event in events:
                    f.write(event_to_json(event) + "\n")
            replayed = replay(str(path), k=k).export_blacklists()
            assert replayed == incremental, round_no
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def _ratio_config():
    return SimConfig(
        rng_seed=414,
        duration_s=14 * 86400.0,
        burst=StrategySpec(count=40, torrents_per_account=1,
                           downloaders_per_torrent_mean=0.0),
        conservative=StrategySpec(count=340, torrents_per_account=1,
                                  accounts_per_day=6.0 / 14.0,
                                  removal_delay_mean_s=15180.0,
                                  downloaders_per_torrent_mean=0.0,
                                  publish_spacing_s=3600.0),
        legit=LegitSpec(count=0),
    )


def test_sim_lifetime_ratio():
    with criterion("simulator: burst/conservative lifetime ratio within 5% of 2.75 over >=1000 accounts each"):
        report = run_simulation(_ratio_config())
        burst_accounts = {t.username for t in report.torrents if t.strategy == "burst"}
        cons_accounts = {t.username for t in report.torrents if t.strategy == "conservative"}
        assert len(burst_accounts) >= 1000 and len(cons_accounts) >= 1000
        ratio = report.lifetime_means["conservative"] / report.lifetime_means["burst"]
        assert abs(ratio - 2.75) / 2.75 < 0.05, f"ratio {ratio:.3f}"


def test_sim_birth_calibration():
    with criterion("simulator: flagged-at-birth rate within binomial 99% bounds of the analytic recount"):
        config = SimConfig(
            rng_seed=99,
            duration_s=7 * 86400.0,
            burst=StrategySpec(count=8, torrents_per_account=3,
                               downloaders_per_torrent_mean=0.0),
            conservative=StrategySpec(count=0),
            legit=LegitSpec(count=0),
        )
        report = run_simulation(config)
        fake_since = birth_recount(report.events, k=config.k)
        eligible = [
            t for t in report.torrents
            if t.is_fake
            and t.publisher_ip in fake_since
            and fake_since[t.publisher_ip] < t.publish_at + 1.0
        ]
        observed = sum(1 for t in report.torrents if t.classification == "fake_at_birth")
        p = config.seeder_resolution_probability
        expected = p * len(eligible)
        bound = 2.576 * math.sqrt(len(eligible) * p * (1 - p))
        assert len(eligible) >= 100, "steady-state fake-IP population required"
        assert abs(observed - expected) <= bound + 1, (observed, expected, bound)


def test_sim_no_false_positives():
    with criterion("simulator: legit-only runs show zero false positives across 20 seeds"):
        for seed in range(20):
            config = SimConfig(
                rng_seed=seed,
                duration_s=3 * 86400.0,
                burst=StrategySpec(count=0),
                conservative=StrategySpec(count=0),
                legit=LegitSpec(count=4, torrents_per_day=3.0),
            )
            report = run_simulation(config)
            assert report.false_positives == 0, f"seed {seed}"
            assert report.blacklists == {"infohashes": [], "ips": []}


def test_policy_decomposition():
    with criterion("policy decomposition: conservation and brute-force component recount on every seed"):
        for seed in (0, 1, 2, 3, 4):
            config = SimConfig(
                rng_seed=seed,
                duration_s=3 * 86400.0,
                burst=StrategySpec(count=3, torrents_per_account=4,
                                   downloaders_per_torrent_mean=7.0),
                conservative=StrategySpec(count=2, torrents_per_account=(1, 2),
                                          accounts_per_day=6.0 / 14.0,
                                          removal_delay_mean_s=15180.0,
                                          downloaders_per_torrent_mean=5.0,
                                          publish_spacing_s=3600.0),
                legit=LegitSpec(count=2, torrents_per_day=1.0),
            )
            report = run_simulation(config)
            policy = evaluate_policies(report)
            before = after = 0
            rows = {row[0]: row for row in policy.per_torrent}
            for outcome in report.torrents:
                if not outcome.is_fake:
                    assert outcome.infohash not in rows
                    continue
                expect_before = expect_after = 0
                for at, _ in outcome.downloads:
                    if outcome.flagged_at is None or at <= outcome.flagged_at:
                        continue
                    if (outcome.portal_removed_at is not None
                            and at > outcome.portal_removed_at):
                        expect_after += 1
                    else:
                        expect_before += 1
                row = rows[outcome.infohash]
                assert (row[1], row[2]) == (expect_before, expect_after), outcome.infohash
                assert row[1] + row[2] + row[3] == row[4] == len(outcome.downloads)
                before += expect_before
                after += expect_after
            assert policy.avoided_before_portal == before
            assert policy.avoided_after_portal == after
            assert policy.avoided_total == before + after


def test_analytics_country_ratios():
    with criterion("analytics: US 12.40/10.42 -> 1.19 and Spain 2.79/5.95 -> 0.47, +/-0.005"):
        rows = country_ratio_table(
            {"US": 12.40, "Spain": 2.79},
            {"US": 10.42, "Spain": 5.95},
        )
        by_country = {row.country: row for row in rows}
        assert abs(by_country["US"].ratio - 1.19) <= 0.005
        assert abs(by_country["Spain"].ratio - 0.47) <= 0.005


def test_countermeasure_cost():
    with criterion("countermeasure cost: (4 accounts/day, K=3) -> 4/3 IPs/day exactly, monotone in K"):
        assert countermeasure_cost(4.0, 3).ips_per_day == 4.0 / 3.0
        assert countermeasure_cost(4.0, 3).ips_per_month == 30.0 * (4.0 / 3.0)
        costs = [countermeasure_cost(4.0, k).ips_per_day for k in range(1, 11)]
        assert all(a > b for a, b in zip(costs, costs[1:]))


def test_service_conformance():
    with criterion("service conformance: HTTP verdicts equal core queries, blacklists byte-identical"):
        engine = seeded_engine()
        server = make_server(engine, port=0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            port = server.server_address[1]

            def fetch(method, path, body=None):
                conn = http.client.HTTPConnection("127.0.0.1", port, timeout=5)
                try:
                    conn.request(method, path, body=body)
                    response = conn.getresponse()
                    return response.status, response.read()
                finally:
                    conn.close()

            probes = [ALPINE_HEX, "0" * 40, "b0" * 20, "ff" * 20]
            for hex_ in probes:
                status, body = fetch("GET", f"/v1/verdict/{hex_}")
                assert status == 200
                direct = verdict_to_json(engine.query_verdict(InfoHash.from_hex(hex_)))
                assert json.loads(body) == direct, hex_

            torrent = (FIXTURES / "alpine-release.torrent").read_bytes()
            status, body = fetch("POST", "/v1/check", body=torrent)
            assert status == 200
            assert json.loads(body) == verdict_to_json(
                engine.query_verdict(InfoHash.from_hex(ALPINE_HEX))
            )

            infohashes, ips = engine.export_blacklists()
            assert fetch("GET", "/v1/blacklist/infohashes")[1] == render_blacklist(infohashes).encode()
            assert fetch("GET", "/v1/blacklist/ips")[1] == render_blacklist(ips).encode()
        finally:
            server.shutdown()
            server.server_close()
