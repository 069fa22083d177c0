"""Operator command line.

Subcommands: check (classify one torrent/magnet/infohash against the store),
serve (HTTP verdict API), monitor (portal polling pipeline), simulate
(synthetic ecosystem run), stats (analytics over the store), and
export-blacklist. Configuration comes from a key=value file, TORRENTGUARD_*
environment variables, and flags, in rising precedence.
"""

from __future__ import annotations

import argparse
import os
import string
import sys
import time
from dataclasses import dataclass, fields

from .analytics import EmptyInput, contribution_curve, downloads_per_user_cdf, render_csv
from .bencode import BencodeError
from .detection import DetectionEngine, render_blacklist
from .metainfo import InfoHash, MetainfoError, parse_magnet, parse_torrent
from .portal import FixturePortal, PortalMonitor, SimulatedPortal
from .service import make_server, verdict_to_json
from .sim import InvalidConfig, SimConfig, load_config, run_simulation
from .store import CorruptRecord, EventLog, read_snapshot, replay, write_snapshot

ENV_PREFIX = "TORRENTGUARD_"
_HEX = set(string.hexdigits)


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    data_dir: str = "torrentguard-data"
    k: int = 3
    probe_cap: int = 16
    listen_host: str = "127.0.0.1"
    listen_port: int = 8420
    feed_interval_s: float = 300.0
    account_interval_s: float = 300.0
    portal_adapter: str = "fixture"
    portal_root: str = ""
    static_dir: str = ""
    max_parallel_announces: int = 8

    def validate(self):
        if self.k < 1:
            raise UsageError("k must be at least 1")
        if self.probe_cap < 1:
            raise UsageError("probe_cap must be at least 1")
        if not 1 <= self.listen_port <= 65535:
            raise UsageError("listen_port must be in 1..65535")
        if self.feed_interval_s <= 0 or self.account_interval_s <= 0:
            raise UsageError("poll intervals must be positive")
        if self.portal_adapter not in ("fixture", "simulator"):
            raise UsageError("portal_adapter must be 'fixture' or 'simulator'")
        if self.max_parallel_announces < 1:
            raise UsageError("max_parallel_announces must be at least 1")

    @property
    def events_path(self) -> str:
        return os.path.join(self.data_dir, "events.jsonl")

    @property
    def snapshot_path(self) -> str:
        return os.path.join(self.data_dir, "snapshot.json")


_FIELD_TYPES = {f.name: f.type for f in fields(CliConfig)}


def parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{line_no}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    return values


def load_cli_config(config_path: str | None, env: dict, flag_sets: list) -> CliConfig:
    values: dict = {}
    if config_path:
        values.update(parse_config_file(config_path))
    for name in _FIELD_TYPES:
        candidate = env.get(ENV_PREFIX + name.upper())
        if candidate is not None:
            values[name] = candidate
    for item in flag_sets:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        values[key.strip()] = value.strip()

    config = CliConfig()
    for key, value in values.items():
        if key not in _FIELD_TYPES:
            raise UsageError(f"unknown config key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind in ("int", int):
                setattr(config, key, int(value))
            elif kind in ("float", float):
                setattr(config, key, float(value))
            else:
                setattr(config, key, str(value))
        except ValueError:
            raise UsageError(f"config key {key!r} got bad value {value!r}") from None
    config.validate()
    return config


def _load_engine(config: CliConfig) -> DetectionEngine:
    engine = None
    if os.path.exists(config.snapshot_path):
        engine = read_snapshot(config.snapshot_path)
    return replay(config.events_path, engine=engine, k=config.k)


def _resolve_target(target: str, config: CliConfig) -> InfoHash:
    if len(target) == 40 and set(target) <= _HEX:
        return InfoHash.from_hex(target)
    if target.startswith("magnet:"):
        return parse_magnet(target).infohash
    try:
        with open(target, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {target!r}: {exc}") from None
    return parse_torrent(data).infohash


def cmd_check(config: CliConfig, args, out, err) -> int:
    try:
        infohash = _resolve_target(args.target, config)
    except (MetainfoError, BencodeError) as exc:
        print(f"error: cannot parse {args.target!r}: {exc}", file=err)
        return 1
    verdict = _load_engine(config).query_verdict(infohash)
    rendered = verdict_to_json(verdict)
    print(f"infohash        {rendered['infohash']}", file=out)
    print(f"classification  {rendered['classification']}", file=out)
    print(f"reason          {rendered['reason']}", file=out)
    print(f"flagged at      {rendered['flagged_at'] or '-'}", file=out)
    print(f"publisher       {rendered['publisher_username'] or '-'}", file=out)
    print(f"publisher ip    {rendered['publisher_ip'] or '-'}", file=out)
    return 2 if verdict.classification.is_fake else 0


def cmd_serve(config: CliConfig, args, out, err) -> int:
    engine = _load_engine(config)
    server = make_server(
        engine,
        host=config.listen_host,
        port=config.listen_port,
        static_dir=config.static_dir or None,
    )
    host, port = server.server_address[:2]
    print(f"serving verdicts on http://{host}:{port}/ "
          f"(store: {config.events_path})", file=out)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _demo_portal(base: float, interval: float) -> SimulatedPortal:
    # three accounts on the portal, all gone by the first sweep, then a
    # fourth listing: enough to watch removals flow into classifications
    def magnet(tag: int) -> str:
        return "magnet:?xt=urn:btih:" + f"{tag:02x}" * 20

    listings = [
        (base, "demo release one", "demo-ann", magnet(0xD1)),
        (base, "demo release two", "demo-bob", magnet(0xD2)),
        (base, "demo release three", "demo-cat", magnet(0xD3)),
        (base + interval, "demo release four", "demo-dee", magnet(0xD4)),
    ]
    removals = {"demo-ann": base, "demo-bob": base, "demo-cat": base}
    return SimulatedPortal(listings=listings, removals=removals)


def cmd_monitor(config: CliConfig, args, out, err) -> int:
    os.makedirs(config.data_dir, exist_ok=True)
    if config.portal_adapter == "fixture":
        if not os.path.isdir(config.portal_root):
            raise UsageError(
                "portal_root must point at a fixture directory for the fixture adapter"
            )
        portal = FixturePortal(config.portal_root)
    else:
        portal = _demo_portal(time.time(), config.feed_interval_s)
    engine = _load_engine(config)
    sleep_s = config.feed_interval_s if args.sleep is None else args.sleep
    with EventLog(config.events_path) as log:
        monitor = PortalMonitor(
            portal,
            feed_interval=config.feed_interval_s,
            account_interval=config.account_interval_s,
            start_seq=log.last_seq,
            known_listings=[
                (record.infohash.hex, record.username)
                for record in engine.torrent_records()
            ],
            known_removed=[
                publisher.username
                for publisher in engine.publisher_records()
                if publisher.removed
            ],
        )
        for tick in range(args.ticks):
            now = time.time()
            if isinstance(portal, SimulatedPortal):
                portal.now = now
            events = monitor.tick(now)
            flagged = []
            for event in events:
                log.append(event)
                for change in engine.ingest_event(event):
                    if change.kind in ("torrent_flagged", "ip_fake"):
                        flagged.append(f"  {change.kind}: {change.subject} ({change.detail})")
            print(f"tick {tick + 1}: {len(events)} events", file=out)
            for line in flagged:
                print(line, file=out)
            if tick + 1 < args.ticks:
                time.sleep(sleep_s)
    write_snapshot(config.snapshot_path, engine)
    return 0


def cmd_simulate(config: CliConfig, args, out, err) -> int:
    try:
        sim_config = load_config(args.sim_config) if args.sim_config else SimConfig()
        if args.seed is not None:
            sim_config.rng_seed = args.seed
        report = run_simulation(sim_config)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=err)
        return 1
    report.save(args.out)
    if args.events_out:
        report.save_events(args.events_out)
    print(report.summary(), end="", file=out)
    print(f"report written to {args.out}", file=out)
    return 0


def cmd_stats(config: CliConfig, args, out, err) -> int:
    engine = _load_engine(config)
    records = engine.torrent_records()
    by_class: dict = {}
    for record in records:
        by_class[record.classification.value] = by_class.get(record.classification.value, 0) + 1
    infohashes, ips = engine.export_blacklists()
    print(f"torrents indexed        {len(records)}", file=out)
    for name in sorted(by_class):
        print(f"  {name:22} {by_class[name]}", file=out)
    print(f"blacklisted infohashes  {len(infohashes)}", file=out)
    print(f"blacklisted ips         {len(ips)}", file=out)
    fake_counts: dict = {}
    for record in records:
        if record.classification.is_fake:
            fake_counts[record.username] = fake_counts.get(record.username, 0) + 1
    try:
        curve = contribution_curve(fake_counts)
        print("contribution curve (top fraction, share):", file=out)
        print(render_csv(curve.points), end="", file=out)
    except EmptyInput:
        print("contribution curve: no fake torrents yet", file=out)
    flagged_logs = [
        log for log in engine.swarm.logs()
        if (record := engine.torrent_record(log.infohash)) is not None
        and record.classification.is_fake
    ]
    cdf = downloads_per_user_cdf(flagged_logs)
    if cdf.points:
        print("fake downloads per user (count, cdf):", file=out)
        print(render_csv(cdf.points), end="", file=out)
    return 0


def cmd_export(config: CliConfig, args, out, err) -> int:
    engine = _load_engine(config)
    infohashes, ips = engine.export_blacklists()
    lines = infohashes if args.which == "infohashes" else ips
    out.write(render_blacklist(lines))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="torrentguard", description=__doc__)
    parser.add_argument("--config", dest="cli_config", metavar="FILE",
                        help="key=value configuration file")
    parser.add_argument("--set", dest="flag_sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="classify a .torrent file, magnet URI, or infohash")
    check.add_argument("target")

    sub.add_parser("serve", help="run the verdict HTTP service")

    monitor = sub.add_parser("monitor", help="poll the portal and fold events into the store")
    monitor.add_argument("--ticks", type=int, default=1)
    monitor.add_argument("--sleep", type=float, default=None,
                         help="seconds between ticks (default: feed interval)")

    simulate = sub.add_parser("simulate", help="run the deterministic ecosystem simulation")
    simulate.add_argument("--config", dest="sim_config", metavar="FILE",
                          help="simulation config JSON")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--out", default="sim-report.json")
    simulate.add_argument("--events-out", default=None)

    sub.add_parser("stats", help="print analytics over the store")

    export = sub.add_parser("export-blacklist", help="print a blacklist")
    export.add_argument("which", choices=("infohashes", "ips"))
    return parser


_COMMANDS = {
    "check": cmd_check,
    "serve": cmd_serve,
    "monitor": cmd_monitor,
    "simulate": cmd_simulate,
    "stats": cmd_stats,
    "export-blacklist": cmd_export,
}


def run_cli(argv=None, env=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    env = env if env is not None else dict(os.environ)
    try:
        args = build_parser().parse_args(argv)
        config = load_cli_config(args.cli_config, env, args.flag_sets)
        return _COMMANDS[args.command](config, args, out, err)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return 1
    except CorruptRecord as exc:
        print(f"error: event store is damaged: {exc}", file=err)
        return 1


def main():
    try:
        sys.exit(run_cli())
    except BrokenPipeError:
        # stdout went away (e.g. piped into head); drain quietly instead of
        # tracebacking when the interpreter flushes streams at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        sys.exit(1)
