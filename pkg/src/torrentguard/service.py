"""HTTP API for verdict queries and blacklist exports.

Endpoints:
  GET  /v1/verdict/{40-hex}      verdict JSON for one infohash
  POST /v1/check                 .torrent bytes or a magnet URI in the body,
                                 distinguished by leading byte: 'd' means
                                 bencoded metainfo, otherwise magnet text
  GET  /v1/blacklist/infohashes  text/plain, one lowercase hex per line
  GET  /v1/blacklist/ips         text/plain, one address per line

Verdict JSON always carries all six keys (infohash, classification, reason,
flagged_at, publisher_username, publisher_ip), null where absent; flagged_at
is ISO-8601 UTC. Errors are {"error": ..., "detail": ...}. Every handler only
reads detection state, so requests can run fully in parallel. When a static
directory is configured, anything outside /v1/ is served from it.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import string
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .bencode import BencodeError
from .detection import DetectionEngine, Verdict
from .metainfo import InfoHash, MetainfoError, parse_magnet, parse_torrent

logger = logging.getLogger(__name__)

MAX_BODY = 8 * 1024 * 1024

_HEX = set(string.hexdigits)


def verdict_to_json(verdict: Verdict) -> dict:
    flagged_at = None
    if verdict.flagged_at is not None:
        stamp = datetime.fromtimestamp(verdict.flagged_at, timezone.utc)
        flagged_at = stamp.isoformat().replace("+00:00", "Z")
    return {
        "infohash": verdict.infohash.hex,
        "classification": verdict.classification.value,
        "reason": verdict.reason,
        "flagged_at": flagged_at,
        "publisher_username": verdict.username,
        "publisher_ip": verdict.ip,
    }


class VerdictServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, engine: DetectionEngine, static_dir: str | None = None,
                 max_body: int = MAX_BODY):
        self.engine = engine
        self.static_dir = static_dir
        self.max_body = max_body
        super().__init__(address, _Handler)


def make_server(engine: DetectionEngine, host: str = "127.0.0.1", port: int = 8420,
                static_dir: str | None = None, max_body: int = MAX_BODY) -> VerdictServer:
    return VerdictServer((host, port), engine, static_dir=static_dir, max_body=max_body)


class _Handler(BaseHTTPRequestHandler):
    server_version = "torrentguard/0.1"
    protocol_version = "HTTP/1.1"

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path.startswith("/v1/verdict/"):
            self._verdict_by_hex(path[len("/v1/verdict/"):])
        elif path == "/v1/blacklist/infohashes":
            self._blacklist(0)
        elif path == "/v1/blacklist/ips":
            self._blacklist(1)
        elif path.startswith("/v1/"):
            self._send_json(404, {"error": "not_found", "detail": path})
        elif self.server.static_dir is not None:
            self._static(path)
        else:
            self._send_json(404, {"error": "not_found", "detail": path})

    def do_POST(self):
        if self.path.split("?", 1)[0] != "/v1/check":
            self._send_json(404, {"error": "not_found", "detail": self.path})
            return
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            self._send_json(400, {"error": "unparseable", "detail": "missing content length"})
            return
        if length > self.server.max_body:
            self._send_json(413, {"error": "too_large",
                                  "detail": f"body exceeds {self.server.max_body} bytes"})
            return
        body = self.rfile.read(length)
        try:
            infohash = _infohash_from_body(body)
        except (BencodeError, MetainfoError, ValueError) as exc:
            self._send_json(400, {"error": "unparseable", "detail": str(exc)})
            return
        self._send_json(200, verdict_to_json(self.server.engine.query_verdict(infohash)))

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _verdict_by_hex(self, segment: str):
        if len(segment) != 40 or not set(segment) <= _HEX:
            self._send_json(400, {"error": "bad_infohash",
                                  "detail": "expected 40 hex characters"})
            return
        verdict = self.server.engine.query_verdict(InfoHash.from_hex(segment))
        self._send_json(200, verdict_to_json(verdict))

    def _blacklist(self, which: int):
        from .detection import render_blacklist

        exports = self.server.engine.export_blacklists()
        self._send_bytes(200, render_blacklist(exports[which]).encode("ascii"),
                         "text/plain; charset=utf-8")

    def _static(self, path: str):
        root = os.path.realpath(self.server.static_dir)
        rel = path.lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(root, rel))
        if full != root and not full.startswith(root + os.sep):
            self._send_json(404, {"error": "not_found", "detail": path})
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._send_json(404, {"error": "not_found", "detail": path})
            return
        content_type = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as f:
            self._send_bytes(200, f.read(), content_type)

    def _send_json(self, status: int, payload: dict):
        self._send_bytes(status, json.dumps(payload).encode("utf-8"),
                         "application/json; charset=utf-8")

    def _send_bytes(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def log_message(self, fmt, *args):
        logger.debug("%s " + fmt, self.address_string(), *args)


def _infohash_from_body(body: bytes) -> InfoHash:
    if body[:1] == b"d":
        return parse_torrent(body).infohash
    try:
        text = body.decode("utf-8").strip()
    except UnicodeDecodeError:
        raise ValueError("body is neither bencoded metainfo nor text") from None
    if text.startswith("magnet:"):
        return parse_magnet(text).infohash
    raise ValueError("body is neither a .torrent file nor a magnet URI")
