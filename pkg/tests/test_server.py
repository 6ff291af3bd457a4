import json
import urllib.error
import urllib.request

import pytest

from opencoding.evaluation import open_store
from opencoding.fixtures import load_fixtures
from opencoding.server import make_server, start_background


class Client:
    def __init__(self, base):
        self.base = base

    def request(self, method, path, body=None, token=None):
        data = json.dumps(body).encode() if body is not None else None
        request = urllib.request.Request(self.base + path, data=data, method=method)
        if body is not None:
            request.add_header("Content-Type", "application/json")
        if token:
            request.add_header("X-Rater-Token", token)
        try:
            with urllib.request.urlopen(request) as resp:
                return resp.status, json.loads(resp.read().decode())
        except urllib.error.HTTPError as err:
            payload = err.read().decode()
            return err.code, json.loads(payload) if payload else {}

    def get(self, path):
        return self.request("GET", path)

    def put(self, path, body, token=None):
        return self.request("PUT", path, body, token)

    def post(self, path, body=None, token=None):
        return self.request("POST", path, body if body is not None else {}, token)


@pytest.fixture()
def finalized_client(tmp_path):
    load_fixtures(tmp_path / "store")
    codebooks, store = open_store(tmp_path / "store")
    server = make_server(codebooks, store, port=0)
    start_background(server)
    yield Client(f"http://127.0.0.1:{server.server_address[1]}")
    server.shutdown()


@pytest.fixture()
def pending_client(tmp_path):
    load_fixtures(tmp_path / "store", pending=True)
    codebooks, store = open_store(tmp_path / "store")
    server = make_server(codebooks, store, port=0)
    start_background(server)
    client = Client(f"http://127.0.0.1:{server.server_address[1]}")
    yield client, store
    server.shutdown()


def test_codebooks_counts(finalized_client):
    status, body = finalized_client.get("/codebooks")
    assert status == 200
    assert [entry["approach"] for entry in body] == ["topic", "chunk", "item", "verb"]
    counts = {entry["approach"]: entry["codes"] for entry in body}
    assert counts == {"topic": 23, "chunk": 48, "item": 240, "verb": 271}
    # the human reference column stays reachable directly
    status, human = finalized_client.get("/codebooks/human")
    assert status == 200
    assert len(human["codes"]) == 13


def test_codebook_detail_and_examples(finalized_client):
    status, body = finalized_client.get("/codebooks/topic")
    assert status == 200
    assert len(body["codes"]) == 23
    status, body = finalized_client.get("/codes/chunk/role%20identification/examples")
    assert status == 200
    assert body["examples"][0]["id"] == "2-3"
    assert body["examples"][0]["content"].startswith("I'll upload one now")


def test_unknown_routes_and_codes_404(finalized_client):
    assert finalized_client.get("/nope")[0] == 404
    assert finalized_client.get("/codebooks/imaginary")[0] == 404
    assert finalized_client.get("/codes/topic/never%20happened/examples")[0] == 404


def test_report_rows(finalized_client):
    status, body = finalized_client.get("/report")
    assert status == 200
    assert not body["draft"]
    rows = body["approaches"]
    assert rows["topic"]["codes"] == 23
    assert rows["topic"]["groundedness_issues"] == 2
    assert rows["topic"]["overly_broad"] == 2
    assert rows["verb"]["overly_broad_pct"] == "2.58%"


def test_concept_groups_endpoint(finalized_client):
    status, body = finalized_client.get("/concept-groups?keyword=feedback")
    assert status == 200
    sizes = {source: len(labels) for source, labels in body["members"].items()}
    assert sizes == {"topic": 2, "chunk": 5, "item": 6, "verb": 10, "human": 13}


def test_reconcile_agreement_conflicts(finalized_client):
    # both raters agreed on this code, so reconciliation is a 409
    status, body = finalized_client.post(
        "/reconciliations",
        {"approach": "topic", "label": "feature prioritization", "final_flags": []},
    )
    assert status == 409
    assert body["error"] == "conflict"
    assert "no disagreement" in body["message"]


def test_annotation_requires_token(pending_client):
    client, _ = pending_client
    status, _ = client.put(
        "/annotations/alex",
        {"approach": "topic", "label": "emoji communication", "flags": []},
    )
    assert status == 403


def test_full_review_flow_over_http(pending_client):
    client, _ = pending_client
    tokens = {}
    for rater in ("alex", "blake"):
        status, body = client.post("/raters", {"name": rater})
        assert status == 200
        tokens[rater] = body["token"]

    # annotate one code each way, then complete both raters for topic
    status, body = client.put(
        "/annotations/alex",
        {"approach": "topic", "label": "pc version inquiries", "flags": ["overly_broad"]},
        token=tokens["alex"],
    )
    assert status == 200
    status, _ = client.put(
        "/annotations/blake",
        {"approach": "topic", "label": "pc version inquiries", "flags": []},
        token=tokens["blake"],
    )
    assert status == 200

    # disagreements endpoint needs completion first
    assert client.get("/disagreements/topic")[0] == 409

    for rater in ("alex", "blake"):
        status, _ = client.post(
            "/annotations/%s/complete" % rater, {"approach": "topic"}, token=tokens[rater]
        )
        assert status == 200

    # read-your-writes: the new annotation shows up on GET
    status, body = client.get("/annotations/alex?approach=topic")
    assert status == 200
    flagged = [a for a in body["annotations"] if a["label"] == "pc version inquiries"]
    assert flagged and flagged[0]["flags"] == ["overly_broad"]

    status, body = client.get("/disagreements/topic")
    assert status == 200
    labels = [d["label"] for d in body["disagreements"]]
    # fixture seeds three disagreements; the session above added one more
    assert len(labels) == 4
    assert "pc version inquiries" in labels

    # annotating after completion is a conflict
    status, body = client.put(
        "/annotations/alex",
        {"approach": "topic", "label": "emoji communication", "flags": []},
        token=tokens["alex"],
    )
    assert status == 409

    # resolve every disagreement; second resolution of the same item is a 409
    status, body = client.get("/disagreements/topic")
    for d in body["disagreements"]:
        final = d["rater_flags"]["alex"]
        status, _ = client.post(
            "/reconciliations",
            {"approach": "topic", "label": d["label"], "final_flags": final, "note": "t"},
        )
        assert status == 200
    status, _ = client.post(
        "/reconciliations",
        {"approach": "topic", "label": labels[0], "final_flags": [], "note": "again"},
    )
    assert status == 409

    status, body = client.get("/report")
    assert status == 200
    assert body["approaches"]["topic"]["finalized"]


def test_static_hosting(tmp_path):
    load_fixtures(tmp_path / "store")
    codebooks, store = open_store(tmp_path / "store")
    static = tmp_path / "dist"
    static.mkdir()
    (static / "index.html").write_text("<html><body>review ui</body></html>")
    (static / "app.js").write_text("console.log('hi')")
    server = make_server(codebooks, store, port=0, static_dir=static)
    start_background(server)
    client = Client(f"http://127.0.0.1:{server.server_address[1]}")
    try:
        request = urllib.request.Request(client.base + "/")
        with urllib.request.urlopen(request) as resp:
            assert resp.status == 200
            assert b"review ui" in resp.read()
        request = urllib.request.Request(client.base + "/app.js")
        with urllib.request.urlopen(request) as resp:
            assert "javascript" in resp.headers["Content-Type"]
        # path traversal is refused
        status, _ = client.get("/../secret")
        assert status == 404
    finally:
        server.shutdown()
