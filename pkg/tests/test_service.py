import json
import threading
from http.client import HTTPConnection

import pytest

from parallel_lives.service import make_server, minimal_valid_lives


@pytest.fixture(scope="module")
def server():
    srv = make_server("127.0.0.1", 0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()
    thread.join(timeout=5)


@pytest.fixture()
def client(server):
    conn = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
    yield conn
    conn.close()


def call(conn, method, path, body=None):
    payload = None if body is None else json.dumps(body)
    headers = {"Content-Type": "application/json"} if payload else {}
    conn.request(method, path, body=payload, headers=headers)
    resp = conn.getresponse()
    raw = resp.read()
    doc = json.loads(raw) if raw else None
    return resp.status, doc


def make_session(conn, lives=8, seed=0):
    status, doc = call(conn, "POST", "/sessions",
                       {"lives_per_system": lives, "seed": seed})
    assert status == 201
    return doc


class TestSessions:
    def test_create_default(self, client):
        doc = make_session(client)
        assert doc["schema"] == "pl-exercise/1"
        assert doc["lives_per_system"] == 8
        assert doc["initial_split"] == {"s1": 4, "s2": 4}
        status, got = call(client, "GET", f"/sessions/{doc['id']}")
        assert status == 200 and got["id"] == doc["id"]

    @pytest.mark.parametrize("n", [6, 7, 12])
    def test_unrepresentable_population(self, client, n):
        status, doc = call(client, "POST", "/sessions", {"lives_per_system": n})
        assert status == 422
        assert doc["code"] == "not_representable"
        assert doc["details"]["minimal_valid"] == 8
        assert "8" in doc["message"]

    def test_minimal_valid_is_eight(self):
        assert minimal_valid_lives() == 8

    def test_multiples_of_eight_accepted(self, client):
        doc = make_session(client, lives=16)
        assert doc["initial_split"] == {"s1": 8, "s2": 8}

    def test_unknown_session_404(self, client):
        status, doc = call(client, "GET", "/sessions/zzz")
        assert status == 404 and doc["code"] == "unknown_session"

    def test_delete(self, client):
        doc = make_session(client)
        status, _ = call(client, "DELETE", f"/sessions/{doc['id']}")
        assert status == 204
        status, _ = call(client, "GET", f"/sessions/{doc['id']}")
        assert status == 404

    def test_bad_body(self, client):
        status, doc = call(client, "POST", "/sessions", {"lives_per_system": "x"})
        assert status == 400


class TestRounds:
    def test_same_setting_round_anticorrelated(self, client):
        sid = make_session(client)["id"]
        status, round1 = call(client, "POST", f"/sessions/{sid}/rounds",
                              {"setting_a": 1, "setting_b": 1})
        assert status == 201
        assert round1["setting_relation"] == "same"
        assert len(round1["pairs"]) == 8
        assert round1["counts"] == {"same": 0, "different": 8}
        assert all(not p["same"] for p in round1["pairs"])

    def test_different_setting_round_six_of_eight(self, client):
        sid = make_session(client)["id"]
        status, result = call(client, "POST", f"/sessions/{sid}/rounds",
                              {"setting_a": 1, "setting_b": 2})
        assert status == 201
        assert result["counts"]["same"] == 6
        counts = sorted(c["count"] for c in result["class_counts"])
        assert counts == [1, 1, 3, 3]

    def test_pairing_is_perfect_matching(self, client):
        sid = make_session(client)["id"]
        _, result = call(client, "POST", f"/sessions/{sid}/rounds",
                         {"setting_a": 2, "setting_b": 3})
        alice = sorted(p["alice"] for p in result["pairs"])
        bob = sorted(p["bob"] for p in result["pairs"])
        assert alice == list(range(8)) and bob == list(range(8))
        # student records agree with pair outcomes
        by_index = {s["index"]: s for s in result["students"]["alice"]}
        for p in result["pairs"]:
            assert by_index[p["alice"]]["outcome"] == p["outcome_a"]

    def test_invalid_setting_400(self, client):
        sid = make_session(client)["id"]
        status, doc = call(client, "POST", f"/sessions/{sid}/rounds",
                           {"setting_a": 0, "setting_b": 2})
        assert status == 400 and doc["code"] == "bad_setting"

    def test_missing_settings_400(self, client):
        sid = make_session(client)["id"]
        status, doc = call(client, "POST", f"/sessions/{sid}/rounds", {})
        assert status == 400

    def test_round_replay_fetch(self, client):
        sid = make_session(client)["id"]
        _, played = call(client, "POST", f"/sessions/{sid}/rounds",
                         {"setting_a": 3, "setting_b": 1})
        status, fetched = call(client, "GET", f"/sessions/{sid}/rounds/0")
        assert status == 200
        assert fetched == played
        status, _ = call(client, "GET", f"/sessions/{sid}/rounds/5")
        assert status == 404

    def test_same_seed_same_rounds(self, client):
        a = make_session(client, seed=42)["id"]
        b = make_session(client, seed=42)["id"]
        _, ra = call(client, "POST", f"/sessions/{a}/rounds",
                     {"setting_a": 1, "setting_b": 3})
        _, rb = call(client, "POST", f"/sessions/{b}/rounds",
                     {"setting_a": 1, "setting_b": 3})
        assert ra == rb

    def test_different_seeds_differ_in_assignment(self, client):
        a = make_session(client, seed=1)["id"]
        b = make_session(client, seed=2)["id"]
        _, ra = call(client, "POST", f"/sessions/{a}/rounds",
                     {"setting_a": 1, "setting_b": 2})
        _, rb = call(client, "POST", f"/sessions/{b}/rounds",
                     {"setting_a": 1, "setting_b": 2})
        assert ra["counts"] == rb["counts"]  # physics identical
        assert ra["pairs"] != rb["pairs"]    # student shuffle differs


class TestSummary:
    def test_insufficient_data(self, client):
        sid = make_session(client)["id"]
        status, doc = call(client, "GET", f"/sessions/{sid}/summary")
        assert status == 200
        assert doc["verdict"] == "insufficient data"
        assert doc["p_same_given_different"] is None
        assert doc["lhv_bound"] == pytest.approx(2 / 3)
        assert doc["quantum_prediction"] == 0.75

    def test_conditional_is_exactly_three_quarters(self, client):
        sid = make_session(client)["id"]
        for sa, sb in ((1, 2), (2, 3), (3, 1), (1, 1)):
            call(client, "POST", f"/sessions/{sid}/rounds",
                 {"setting_a": sa, "setting_b": sb})
        _, doc = call(client, "GET", f"/sessions/{sid}/summary")
        assert doc["p_same_given_different"] == pytest.approx(0.75)
        assert doc["p_opposite_given_same"] == pytest.approx(1.0)

    def test_verdict_becomes_violation(self, client):
        sid = make_session(client)["id"]
        for k in range(16):
            call(client, "POST", f"/sessions/{sid}/rounds",
                 {"setting_a": 1 + k % 3, "setting_b": 1 + (k + 1) % 3})
        _, doc = call(client, "GET", f"/sessions/{sid}/summary")
        assert doc["verdict"] == "violation"
        assert doc["confidence"]["low95"] > doc["lhv_bound"]

    def test_tallies_match_recomputation(self, server, client):
        sid = make_session(client)["id"]
        for sa, sb in ((1, 2), (1, 2), (2, 2)):
            call(client, "POST", f"/sessions/{sid}/rounds",
                 {"setting_a": sa, "setting_b": sb})
        _, doc = call(client, "GET", f"/sessions/{sid}/summary")
        session = server.service._sessions[sid]
        assert doc["tallies"] == session.recompute_tallies()
        assert doc["tallies"]["1,2"]["same_outcome_pairs"] == 12
        assert doc["tallies"]["1,2"]["total_pairs"] == 16


class TestConcurrency:
    def test_parallel_rounds_serialize_per_session(self, server):
        import concurrent.futures

        conn = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
        sid = make_session(conn, seed=5)["id"]
        conn.close()

        def play(k):
            c = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
            try:
                return call(c, "POST", f"/sessions/{sid}/rounds",
                            {"setting_a": 1 + k % 3, "setting_b": 1 + (k // 3) % 3})
            finally:
                c.close()

        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(play, range(24)))
        assert all(status == 201 for status, _ in results)
        indices = sorted(doc["round"] for _, doc in results)
        assert indices == list(range(24))
        c = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
        _, summary = call(c, "GET", f"/sessions/{sid}/summary")
        _, info = call(c, "GET", f"/sessions/{sid}")
        c.close()
        assert info["rounds_played"] == 24
        total = sum(t["total_pairs"] for t in summary["tallies"].values())
        assert total == 24 * 8

    def test_sessions_are_isolated(self, client):
        a = make_session(client, seed=100)["id"]
        b = make_session(client, seed=100)["id"]
        call(client, "POST", f"/sessions/{a}/rounds",
             {"setting_a": 1, "setting_b": 1})
        _, summary_b = call(client, "GET", f"/sessions/{b}/summary")
        assert summary_b["tallies"] == {}


class TestHttpPlumbing:
    def test_root_info(self, client):
        status, doc = call(client, "GET", "/")
        assert status == 200 and doc["schema"] == "pl-exercise/1"

    def test_cors_headers(self, server):
        conn = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
        conn.request("OPTIONS", "/sessions")
        resp = conn.getresponse()
        resp.read()
        assert resp.getheader("Access-Control-Allow-Origin") == "*"
        conn.close()

    def test_unknown_route_404(self, client):
        status, doc = call(client, "GET", "/nope")
        assert status == 404

    def test_malformed_json_400(self, server):
        conn = HTTPConnection("127.0.0.1", server.server_address[1], timeout=10)
        conn.request("POST", "/sessions", body="{not json",
                     headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        doc = json.loads(resp.read())
        assert resp.status == 400 and doc["code"] == "bad_json"
        conn.close()
