"""HTTP service conformance against direct engine queries."""

import hashlib
import http.client
import json
import pathlib
import threading

import pytest

from torrentguard.detection import DetectionEngine, render_blacklist
from torrentguard.metainfo import InfoHash
from torrentguard.service import make_server, verdict_to_json

from seeding import ALPINE_HEX, EMPTY_HEX, FAKE_IP, seeded_engine

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
ZEROS = "0" * 40


class Client:
    def __init__(self, port):
        self.port = port

    def request(self, method, path, body=None, headers=None):
        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=5)
        try:
            conn.request(method, path, body=body, headers=headers or {})
            response = conn.getresponse()
            return response.status, dict(response.getheaders()), response.read()
        finally:
            conn.close()

    def get_json(self, path):
        status, _, body = self.request("GET", path)
        return status, json.loads(body)

    def post_json(self, path, body):
        status, _, raw = self.request("POST", path, body=body)
        return status, json.loads(raw)


@pytest.fixture(scope="module")
def engine():
    return seeded_engine()


@pytest.fixture(scope="module")
def server(engine):
    srv = make_server(engine, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


@pytest.fixture(scope="module")
def client(server):
    return Client(server.server_address[1])


def state_digest(engine):
    blob = json.dumps(engine.state_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class TestVerdictGet:
    def test_unknown_has_all_keys_with_nulls(self, client):
        status, payload = client.get_json(f"/v1/verdict/{ZEROS}")
        assert status == 200
        assert payload == {
            "infohash": ZEROS,
            "classification": "unknown",
            "reason": "not indexed",
            "flagged_at": None,
            "publisher_username": None,
            "publisher_ip": None,
        }

    def test_flagged_fixture_is_fake_at_birth(self, client):
        status, payload = client.get_json(f"/v1/verdict/{ALPINE_HEX}")
        assert status == 200
        assert payload["classification"] == "fake_at_birth"
        assert payload["publisher_ip"] == FAKE_IP
        assert payload["publisher_username"] == "freshface"
        assert payload["flagged_at"].endswith("Z")

    def test_agrees_with_direct_query(self, client, engine):
        for hex_ in (ZEROS, ALPINE_HEX, EMPTY_HEX, "00" * 19 + "01"):
            _, payload = client.get_json(f"/v1/verdict/{hex_}")
            direct = verdict_to_json(engine.query_verdict(InfoHash.from_hex(hex_)))
            assert payload == direct

    @pytest.mark.parametrize("segment", ["abc", "g" * 40, ZEROS + "0", ZEROS[:-1]])
    def test_bad_infohash_is_400(self, client, segment):
        status, payload = client.get_json(f"/v1/verdict/{segment}")
        assert status == 400
        assert payload["error"] == "bad_infohash"
        assert "detail" in payload

    def test_unknown_api_path_is_404_json(self, client):
        status, payload = client.get_json("/v1/nothing")
        assert status == 404
        assert payload["error"] == "not_found"


class TestCheckPost:
    def test_torrent_body_matches_get(self, client):
        body = (FIXTURES / "alpine-release.torrent").read_bytes()
        status, posted = client.post_json("/v1/check", body)
        assert status == 200
        assert posted == client.get_json(f"/v1/verdict/{ALPINE_HEX}")[1]

    def test_magnet_body_matches_get(self, client):
        status, posted = client.post_json(
            "/v1/check", b"magnet:?xt=urn:btih:" + EMPTY_HEX.encode()
        )
        assert status == 200
        assert posted == client.get_json(f"/v1/verdict/{EMPTY_HEX}")[1]

    def test_garbage_body_is_400(self, client):
        status, payload = client.post_json("/v1/check", b"hello")
        assert status == 400
        assert payload["error"] == "unparseable"

    def test_truncated_torrent_is_400(self, client):
        body = (FIXTURES / "alpine-release.torrent").read_bytes()[:-5]
        status, payload = client.post_json("/v1/check", body)
        assert status == 400
        assert payload["error"] == "unparseable"

    def test_oversized_body_is_413(self, engine):
        srv = make_server(engine, port=0, max_body=64)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        try:
            status, payload = Client(srv.server_address[1]).post_json(
                "/v1/check", b"x" * 65
            )
            assert status == 413
            assert payload["error"] == "too_large"
        finally:
            srv.shutdown()
            srv.server_close()


class TestBlacklists:
    def test_infohashes_byte_identical_to_core(self, client, engine):
        status, headers, body = client.request("GET", "/v1/blacklist/infohashes")
        assert status == 200
        assert headers["Content-Type"].startswith("text/plain")
        assert body == render_blacklist(engine.export_blacklists()[0]).encode()
        assert ALPINE_HEX.encode() in body

    def test_ips_byte_identical_to_core(self, client, engine):
        _, _, body = client.request("GET", "/v1/blacklist/ips")
        assert body == render_blacklist(engine.export_blacklists()[1]).encode()
        assert body == FAKE_IP.encode() + b"\n"

    def test_empty_state_is_empty_200(self):
        srv = make_server(DetectionEngine(), port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        try:
            status, _, body = Client(srv.server_address[1]).request(
                "GET", "/v1/blacklist/infohashes"
            )
            assert (status, body) == (200, b"")
        finally:
            srv.shutdown()
            srv.server_close()


class TestReadOnlyAndCors:
    def test_reads_do_not_mutate_state(self, client, engine):
        before = state_digest(engine)
        client.get_json(f"/v1/verdict/{ALPINE_HEX}")
        client.get_json(f"/v1/verdict/{ZEROS}")
        client.request("GET", "/v1/blacklist/infohashes")
        client.request("GET", "/v1/blacklist/ips")
        client.post_json("/v1/check", b"magnet:?xt=urn:btih:" + ALPINE_HEX.encode())
        assert state_digest(engine) == before

    def test_cors_on_get_and_options(self, client):
        _, headers, _ = client.request("GET", f"/v1/verdict/{ZEROS}")
        assert headers["Access-Control-Allow-Origin"] == "*"
        status, headers, _ = client.request("OPTIONS", "/v1/check")
        assert status == 204
        assert "POST" in headers["Access-Control-Allow-Methods"]

    def test_parallel_queries_agree(self, client):
        results = []
        lock = threading.Lock()

        def worker():
            for _ in range(10):
                got = client.get_json(f"/v1/verdict/{ALPINE_HEX}")
                with lock:
                    results.append(got)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(results) == 80
        assert all(r == results[0] for r in results)


class TestStaticFiles:
    @pytest.fixture()
    def static_server(self, engine, tmp_path):
        (tmp_path / "index.html").write_text("<html>verdict page</html>")
        (tmp_path / "app.js").write_text("console.log('hi')")
        srv = make_server(engine, port=0, static_dir=str(tmp_path))
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        yield Client(srv.server_address[1])
        srv.shutdown()
        srv.server_close()

    def test_root_serves_index(self, static_server):
        status, headers, body = static_server.request("GET", "/")
        assert status == 200
        assert b"verdict page" in body
        assert headers["Content-Type"].startswith("text/html")

    def test_asset_content_type(self, static_server):
        status, headers, _ = static_server.request("GET", "/app.js")
        assert status == 200
        assert "javascript" in headers["Content-Type"]

    def test_api_still_wins_over_static(self, static_server):
        status, _, body = static_server.request("GET", f"/v1/verdict/{ZEROS}")
        assert status == 200
        assert json.loads(body)["classification"] == "unknown"

    def test_traversal_is_rejected(self, static_server):
        status, _, _ = static_server.request("GET", "/../pyproject.toml")
        assert status == 404

    def test_missing_file_is_404(self, static_server):
        status, _, _ = static_server.request("GET", "/nope.css")
        assert status == 404
