"""Deterministic discrete-event simulation of a torrent ecosystem.

Publishers create accounts on a portal, publish torrents, attract
downloaders, and (when fake) eventually lose their accounts. The run
produces an ordered detection-event log, folds it through a real
DetectionEngine, and reports per-torrent outcomes plus aggregate policy
numbers. Everything is driven by one seeded RNG in a fixed draw order, so
identical configs produce byte-identical reports.

Distribution choices are declared, not inferred: account removal delays are
exponential around the configured means, per-torrent download counts are
Poisson, and download arrival times are uniform over a window that
deliberately extends past typical removal.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import statistics
from dataclasses import dataclass, field

from .detection import DetectionEngine
from .events import (
    AccountRemoved,
    DetectionEvent,
    SeederResolved,
    SwarmSample,
    TorrentPublished,
    event_to_json,
)
from .metainfo import InfoHash
from .seeder import PROBE_FAILED
from .tracker import PeerEndpoint

DAY = 86400.0


class InvalidConfig(ValueError):
    pass


@dataclass
class StrategySpec:
    count: int = 0
    torrents_per_account: int | tuple[int, int] = 10
    accounts_per_day: float = 4.0
    removal_delay_mean_s: float = 5520.0
    downloaders_per_torrent_mean: float = 84.0
    publish_spacing_s: float = 300.0


def burst_default() -> StrategySpec:
    return StrategySpec(count=2)


def conservative_default() -> StrategySpec:
    # slower cadence, longer-lived accounts, one or two listings each
    return StrategySpec(
        count=3,
        torrents_per_account=(1, 2),
        accounts_per_day=6.0 / 14.0,
        removal_delay_mean_s=15180.0,
        downloaders_per_torrent_mean=47.0,
        publish_spacing_s=3600.0,
    )


@dataclass
class LegitSpec:
    count: int = 5
    torrents_per_day: float = 2.0


@dataclass
class SimConfig:
    rng_seed: int = 0
    duration_s: float = 14 * DAY
    burst: StrategySpec = field(default_factory=burst_default)
    conservative: StrategySpec = field(default_factory=conservative_default)
    legit: LegitSpec = field(default_factory=LegitSpec)
    seeder_resolution_probability: float = 0.5
    k: int = 3
    download_window_s: float = DAY
    downloader_pool: int = 5000
    fresh_ip_every_n_accounts: int = 0  # 0 means one static IP per publisher

    def validate(self):
        if self.duration_s <= 0:
            raise InvalidConfig("duration_s must be positive")
        if not 0.0 <= self.seeder_resolution_probability <= 1.0:
            raise InvalidConfig("seeder_resolution_probability must be in [0, 1]")
        if self.k < 1:
            raise InvalidConfig("k must be at least 1")
        if self.download_window_s <= 0:
            raise InvalidConfig("download_window_s must be positive")
        if self.downloader_pool < 1:
            raise InvalidConfig("downloader_pool must be at least 1")
        if self.fresh_ip_every_n_accounts < 0:
            raise InvalidConfig("fresh_ip_every_n_accounts cannot be negative")
        if self.legit.count < 0 or self.legit.torrents_per_day < 0:
            raise InvalidConfig("legit spec fields cannot be negative")
        for name in ("burst", "conservative"):
            spec = getattr(self, name)
            if spec.count < 0:
                raise InvalidConfig(f"{name}.count cannot be negative")
            if spec.accounts_per_day <= 0:
                raise InvalidConfig(f"{name}.accounts_per_day must be positive")
            if spec.removal_delay_mean_s <= 0:
                raise InvalidConfig(f"{name}.removal_delay_mean_s must be positive")
            if spec.downloaders_per_torrent_mean < 0:
                raise InvalidConfig(f"{name}.downloaders_per_torrent_mean cannot be negative")
            if spec.publish_spacing_s < 0:
                raise InvalidConfig(f"{name}.publish_spacing_s cannot be negative")
            per_account = spec.torrents_per_account
            if isinstance(per_account, tuple):
                lo, hi = per_account
                if lo < 0 or hi < lo:
                    raise InvalidConfig(f"{name}.torrents_per_account range is invalid")
            elif per_account < 0:
                raise InvalidConfig(f"{name}.torrents_per_account cannot be negative")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        config = cls()
        known = {
            "rng_seed", "duration_s", "burst", "conservative", "legit",
            "seeder_resolution_probability", "k", "download_window_s",
            "downloader_pool", "fresh_ip_every_n_accounts",
        }
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        for name in ("burst", "conservative"):
            if name in raw:
                base = getattr(config, name)
                for key, value in raw[name].items():
                    if not hasattr(base, key):
                        raise InvalidConfig(f"unknown {name} key {key!r}")
                    if key == "torrents_per_account" and isinstance(value, list):
                        value = tuple(value)
                    setattr(base, key, value)
        if "legit" in raw:
            for key, value in raw["legit"].items():
                if not hasattr(config.legit, key):
                    raise InvalidConfig(f"unknown legit key {key!r}")
                setattr(config.legit, key, value)
        for key in known - {"burst", "conservative", "legit"}:
            if key in raw:
                setattr(config, key, raw[key])
        config.validate()
        return config

    def to_dict(self) -> dict:
        def spec_dict(spec: StrategySpec) -> dict:
            per_account = spec.torrents_per_account
            if isinstance(per_account, tuple):
                per_account = list(per_account)
            return {
                "count": spec.count,
                "torrents_per_account": per_account,
                "accounts_per_day": spec.accounts_per_day,
                "removal_delay_mean_s": spec.removal_delay_mean_s,
                "downloaders_per_torrent_mean": spec.downloaders_per_torrent_mean,
                "publish_spacing_s": spec.publish_spacing_s,
            }

        return {
            "rng_seed": self.rng_seed,
            "duration_s": self.duration_s,
            "burst": spec_dict(self.burst),
            "conservative": spec_dict(self.conservative),
            "legit": {"count": self.legit.count, "torrents_per_day": self.legit.torrents_per_day},
            "seeder_resolution_probability": self.seeder_resolution_probability,
            "k": self.k,
            "download_window_s": self.download_window_s,
            "downloader_pool": self.downloader_pool,
            "fresh_ip_every_n_accounts": self.fresh_ip_every_n_accounts,
        }


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig("config root must be an object")
    return SimConfig.from_dict(raw)


@dataclass
class TorrentOutcome:
    infohash: str
    publisher: str
    strategy: str  # burst | conservative | legit
    username: str
    publisher_ip: str
    publish_at: float
    portal_removed_at: float | None
    resolved: bool
    classification: str
    flagged_at: float | None
    downloads: list  # [time, downloader_ip] pairs sorted by time

    @property
    def is_fake(self) -> bool:
        return self.strategy != "legit"


@dataclass
class PolicyComparison:
    avoided_before_portal: int  # flagged earlier than the portal acted
    avoided_after_portal: int  # past portal removal, cross-portal blacklist only
    avoided_total: int
    per_torrent: list  # (infohash, before, after, not_avoided, total)


@dataclass
class SimReport:
    config: dict
    metadata: dict
    torrents: list[TorrentOutcome]
    events: list[dict]
    blacklists: dict
    flagged_at_birth_fraction: float
    detection_time_savings: list[float]
    prevented_downloads_vs_portal: int
    prevented_downloads_total: int
    false_positives: int
    false_negatives: int
    contribution: dict
    lifetime_means: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "metadata": self.metadata,
            "torrents": [
                {
                    "infohash": t.infohash,
                    "publisher": t.publisher,
                    "strategy": t.strategy,
                    "username": t.username,
                    "publisher_ip": t.publisher_ip,
                    "publish_at": t.publish_at,
                    "portal_removed_at": t.portal_removed_at,
                    "resolved": t.resolved,
                    "classification": t.classification,
                    "flagged_at": t.flagged_at,
                    "downloads": t.downloads,
                }
                for t in self.torrents
            ],
            "events": self.events,
            "blacklists": self.blacklists,
            "aggregates": {
                "flagged_at_birth_fraction": self.flagged_at_birth_fraction,
                "detection_time_savings": self.detection_time_savings,
                "prevented_downloads_vs_portal": self.prevented_downloads_vs_portal,
                "prevented_downloads_total": self.prevented_downloads_total,
                "false_positives": self.false_positives,
                "false_negatives": self.false_negatives,
                "contribution": self.contribution,
                "lifetime_means": self.lifetime_means,
            },
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.serialize())

    def save_events(self, path: str):
        """Write the run's event log in the store's JSONL format."""
        with open(path, "w", encoding="utf-8") as f:
            for record in self.events:
                f.write(json.dumps(record, separators=(",", ":")) + "\n")

    def summary(self) -> str:
        fakes = [t for t in self.torrents if t.is_fake]
        lines = [
            "simulation summary",
            f"  torrents published        {len(self.torrents)} "
            f"({len(fakes)} fake, {len(self.torrents) - len(fakes)} legit)",
            f"  flagged at birth          {self.flagged_at_birth_fraction:.3f}",
            f"  false positives           {self.false_positives}",
            f"  false negatives           {self.false_negatives}",
            f"  downloads prevented       {self.prevented_downloads_total} "
            f"({self.prevented_downloads_vs_portal} ahead of the portal)",
        ]
        if self.detection_time_savings:
            median_min = statistics.median(self.detection_time_savings) / 60.0
            lines.append(f"  median detection saving   {median_min:.1f} min")
        for strategy, mean in sorted(self.lifetime_means.items()):
            if mean is not None:
                lines.append(f"  {strategy} account lifetime mean  {mean / 60.0:.1f} min")
        return "\n".join(lines) + "\n"


def _poisson(rng: random.Random, mean: float) -> int:
    if mean <= 0:
        return 0
    if mean > 500:
        return max(0, round(rng.gauss(mean, math.sqrt(mean))))
    threshold = math.exp(-mean)
    count = 0
    product = rng.random()
    while product > threshold:
        count += 1
        product *= rng.random()
    return count


def _synthetic_infohash(username: str, index: int) -> InfoHash:
    return InfoHash(hashlib.sha1(f"sim:{username}:{index}".encode()).digest())


def _fake_ip(publisher_index: int, account_index: int, fresh_every: int) -> str:
    slot = publisher_index * 600
    if fresh_every:
        slot += account_index // fresh_every
    return f"198.18.{slot // 256 % 256}.{slot % 256}"


def _legit_ip(publisher_index: int) -> str:
    return f"100.64.{publisher_index // 256 % 256}.{publisher_index % 256}"


def _downloader_ip(downloader_id: int) -> str:
    return f"10.{200 + downloader_id // 65536}.{downloader_id // 256 % 256}.{downloader_id % 256}"


@dataclass
class _PlannedTorrent:
    infohash: InfoHash
    publisher: str
    strategy: str
    username: str
    publisher_ip: str
    publish_at: float
    portal_removed_at: float | None
    resolved: bool
    downloads: list


def run_simulation(config: SimConfig) -> SimReport:
    config.validate()
    rng = random.Random(config.rng_seed)
    planned: list[_PlannedTorrent] = []
    lifetimes: dict[str, list[float]] = {"burst": [], "conservative": []}

    for strategy in ("burst", "conservative"):
        spec: StrategySpec = getattr(config, strategy)
        for p in range(spec.count):
            publisher = f"{strategy}-{p:04d}"
            phase = (p * 137.0) % (DAY / spec.accounts_per_day)
            account = 0
            while True:
                created_at = phase + account * (DAY / spec.accounts_per_day)
                if created_at >= config.duration_s:
                    break
                username = f"{publisher}-a{account:03d}"
                ip = _fake_ip(p if strategy == "burst" else 100000 + p,
                              account, config.fresh_ip_every_n_accounts)
                delay = rng.expovariate(1.0 / spec.removal_delay_mean_s)
                lifetimes[strategy].append(delay)
                removed_at = created_at + delay
                per_account = spec.torrents_per_account
                if isinstance(per_account, tuple):
                    per_account = rng.randint(per_account[0], per_account[1])
                for i in range(per_account):
                    publish_at = created_at + i * spec.publish_spacing_s
                    if publish_at >= removed_at or publish_at >= config.duration_s:
                        break
                    planned.append(_planned(
                        rng, config, spec, publisher, strategy, username, ip,
                        publish_at, removed_at, i,
                    ))
                account += 1

    for p in range(config.legit.count):
        publisher = f"legit-{p:04d}"
        if config.legit.torrents_per_day <= 0:
            break
        spacing = DAY / config.legit.torrents_per_day
        phase = (p * 311.0) % spacing
        index = 0
        while True:
            publish_at = phase + index * spacing
            if publish_at >= config.duration_s:
                break
            planned.append(_planned(
                rng, config, None, publisher, "legit", publisher,
                _legit_ip(p), publish_at, None, index,
            ))
            index += 1

    events = _assemble_events(planned, config)
    engine = DetectionEngine(k=config.k)
    for event in events:
        engine.ingest_event(event)

    outcomes = []
    for plan in planned:
        record = engine.torrent_record(plan.infohash)
        outcomes.append(TorrentOutcome(
            infohash=plan.infohash.hex,
            publisher=plan.publisher,
            strategy=plan.strategy,
            username=plan.username,
            publisher_ip=plan.publisher_ip,
            publish_at=plan.publish_at,
            portal_removed_at=plan.portal_removed_at,
            resolved=plan.resolved,
            classification=record.classification.value,
            flagged_at=record.flagged_at,
            downloads=plan.downloads,
        ))
    outcomes.sort(key=lambda t: (t.publish_at, t.infohash))

    policy = evaluate_policies_outcomes(outcomes)
    fakes = [t for t in outcomes if t.is_fake]
    birth = sum(1 for t in fakes if t.classification == "fake_at_birth")
    savings = [
        t.portal_removed_at - t.flagged_at
        for t in fakes
        if t.flagged_at is not None
        and t.portal_removed_at is not None
        and t.portal_removed_at <= config.duration_s
    ]
    infohashes, ips = engine.export_blacklists()
    return SimReport(
        config=config.to_dict(),
        metadata={
            "removal_delay_distribution": "exponential",
            "download_count_distribution": "poisson",
            "download_time_distribution": "uniform-over-window",
            "legit_downloads_modeled": False,
        },
        torrents=outcomes,
        events=[json.loads(event_to_json(e)) for e in events],
        blacklists={"infohashes": infohashes, "ips": ips},
        flagged_at_birth_fraction=(birth / len(fakes)) if fakes else 0.0,
        detection_time_savings=sorted(savings),
        prevented_downloads_vs_portal=policy.avoided_before_portal,
        prevented_downloads_total=policy.avoided_total,
        false_positives=sum(
            1 for t in outcomes if not t.is_fake and t.classification != "unknown"
        ),
        false_negatives=sum(1 for t in fakes if t.classification == "unknown"),
        contribution={
            publisher: sum(1 for t in fakes if t.publisher == publisher)
            for publisher in sorted({t.publisher for t in fakes})
        },
        lifetime_means={
            strategy: (statistics.fmean(values) if values else None)
            for strategy, values in lifetimes.items()
        },
    )


def _planned(rng, config, spec, publisher, strategy, username, ip,
             publish_at, removed_at, index) -> _PlannedTorrent:
    resolved = rng.random() < config.seeder_resolution_probability
    mean = spec.downloaders_per_torrent_mean if spec is not None else 0.0
    downloads = []
    for _ in range(_poisson(rng, mean)):
        at = publish_at + rng.random() * config.download_window_s
        if at <= config.duration_s:
            downloads.append([at, _downloader_ip(rng.randrange(config.downloader_pool))])
    downloads.sort()
    return _PlannedTorrent(
        infohash=_synthetic_infohash(username, index),
        publisher=publisher,
        strategy=strategy,
        username=username,
        publisher_ip=ip,
        publish_at=publish_at,
        portal_removed_at=removed_at,
        resolved=resolved,
        downloads=downloads,
    )


def _assemble_events(planned: list[_PlannedTorrent], config: SimConfig) -> list[DetectionEvent]:
    stubs = []  # (at, order, builder)
    order = 0

    def add(at, builder):
        nonlocal order
        stubs.append((at, order, builder))
        order += 1

    removals_emitted = set()
    for plan in planned:
        add(plan.publish_at, lambda seq, at, p=plan: TorrentPublished(
            seq=seq, at=at, infohash=p.infohash, title=p.infohash.hex[:12], username=p.username))
        if plan.resolved:
            add(plan.publish_at + 1.0, lambda seq, at, p=plan: SeederResolved(
                seq=seq, at=at, infohash=p.infohash,
                endpoint=PeerEndpoint(p.publisher_ip, 6881)))
        else:
            add(plan.publish_at + 1.0, lambda seq, at, p=plan: SeederResolved(
                seq=seq, at=at, infohash=p.infohash, failure=PROBE_FAILED))
        if (plan.portal_removed_at is not None
                and plan.portal_removed_at <= config.duration_s
                and plan.username not in removals_emitted):
            removals_emitted.add(plan.username)
            add(plan.portal_removed_at, lambda seq, at, p=plan: AccountRemoved(
                seq=seq, at=at, username=p.username))
        for at, ip in plan.downloads:
            add(at, lambda seq, at_, p=plan, ip_=ip: SwarmSample(
                seq=seq, at=at_, infohash=p.infohash,
                endpoints=(PeerEndpoint(ip_, 6881),)))

    stubs.sort(key=lambda item: (item[0], item[1]))
    return [builder(seq, at) for seq, (at, _, builder) in enumerate(stubs, start=1)]


def evaluate_policies(report: SimReport) -> PolicyComparison:
    return evaluate_policies_outcomes(report.torrents)


def evaluate_policies_outcomes(outcomes: list[TorrentOutcome]) -> PolicyComparison:
    before = after = 0
    rows = []
    for outcome in outcomes:
        if not outcome.is_fake:
            continue
        total = len(outcome.downloads)
        flag = outcome.flagged_at
        removal = outcome.portal_removed_at
        if flag is None:
            rows.append((outcome.infohash, 0, 0, total, total))
            continue
        torrent_before = sum(
            1 for at, _ in outcome.downloads
            if flag < at and (removal is None or at <= removal)
        )
        cutoff = flag if removal is None else max(flag, removal)
        torrent_after = sum(1 for at, _ in outcome.downloads if at > cutoff)
        avoided = torrent_before + torrent_after
        rows.append((outcome.infohash, torrent_before, torrent_after,
                     total - avoided, total))
        before += torrent_before
        after += torrent_after
    return PolicyComparison(
        avoided_before_portal=before,
        avoided_after_portal=after,
        avoided_total=before + after,
        per_torrent=rows,
    )
