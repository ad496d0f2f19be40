"""HTTP service: sessions, apply/preview/commit, uploads, provenance feed."""

from __future__ import annotations

import io
import json

import pytest
from fastapi.testclient import TestClient

from tabletide.service import create_app

CSV = "state,pop\nCA,39\nWY,1\n"
REFUGEES = "state,arrivals\nCA,5\n"


@pytest.fixture
def client():
    return TestClient(create_app())


def _session(client) -> str:
    return client.post("/session").json()["session"]


def _upload(client, sid, name, text, handle=None):
    params = {"handle": handle} if handle else {}
    response = client.post(
        f"/session/{sid}/upload",
        files={"file": (name, io.BytesIO(text.encode()), "text/csv")},
        params=params,
    )
    assert response.status_code == 200, response.text
    return response.json()


class TestSessions:
    def test_health(self, client):
        assert client.get("/health").json()["status"] == "ok"

    def test_create_returns_distinct_ids(self, client):
        a, b = _session(client), _session(client)
        assert a != b

    def test_fresh_session_empty(self, client):
        sid = _session(client)
        assert client.get(f"/session/{sid}/tables").json() == {"tables": []}

    def test_isolation(self, client):
        a, b = _session(client), _session(client)
        _upload(client, a, "states.csv", CSV)
        assert client.get(f"/session/{b}/tables").json()["tables"] == []
        assert len(client.get(f"/session/{a}/tables").json()["tables"]) == 1

    def test_unknown_session_404(self, client):
        assert client.get("/session/nope/tables").status_code == 404


class TestUploadAndPaging:
    def test_upload_names_handle_from_filename(self, client):
        sid = _session(client)
        summary = _upload(client, sid, "states.csv", CSV)
        assert summary["handle"] == "states"
        assert summary["rows"] == 2

    def test_upload_collision_409(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/upload",
            files={"file": ("states.csv", io.BytesIO(CSV.encode()), "text/csv")},
        )
        assert response.status_code == 409

    def test_pagination_concatenation_oracle(self, client):
        sid = _session(client)
        body = "n\n" + "\n".join(str(i) for i in range(25)) + "\n"
        _upload(client, sid, "nums.csv", body)
        pages = []
        offset = 0
        while True:
            page = client.get(
                f"/session/{sid}/table/nums", params={"offset": offset, "limit": 7}
            ).json()
            pages.extend(page["rows"])
            offset += 7
            if offset >= page["total"]:
                break
        assert [r[0] for r in pages] == list(range(25))

    def test_offset_beyond_end(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        page = client.get(
            f"/session/{sid}/table/states", params={"offset": 99, "limit": 5}
        ).json()
        assert page["rows"] == []
        assert page["total"] == 2

    def test_unknown_handle_404(self, client):
        sid = _session(client)
        assert client.get(f"/session/{sid}/table/ghost").status_code == 404


class TestApply:
    def test_subset_binds_two_handles(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/op",
            json={
                "op": "subset",
                "params": {"table": "states", "predicate": "pop > 10"},
                "outputs": ["big", "small"],
            },
        )
        assert response.status_code == 200, response.text
        handles = {t["handle"] for t in client.get(f"/session/{sid}/tables").json()["tables"]}
        assert {"big", "small"} <= handles

    def test_lossy_join_diagnostic_in_response(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        _upload(client, sid, "refugees.csv", REFUGEES)
        response = client.post(
            f"/session/{sid}/op",
            json={
                "op": "match",
                "params": {"left": "states", "right": "refugees", "key": "state"},
                "outputs": ["joined"],
            },
        )
        body = response.json()
        assert body["diagnostics"][0]["kind"] == "LossyJoin"
        assert body["diagnostics"][0]["payload"]["dropped_keys"] == ["WY"]

    def test_invalid_op_name_422(self, client):
        sid = _session(client)
        response = client.post(
            f"/session/{sid}/op", json={"op": "frobnicate", "params": {}, "outputs": []}
        )
        assert response.status_code == 422

    def test_output_collision_409(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/op",
            json={
                "op": "filter",
                "params": {"table": "states", "predicate": "pop > 10"},
                "outputs": ["states"],
            },
        )
        assert response.status_code == 409

    def test_bad_params_422(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/op",
            json={"op": "subset", "params": {"table": "states"}, "outputs": ["a", "b"]},
        )
        assert response.status_code == 422


class TestPreview:
    def test_preview_leaves_state_unchanged(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        before = client.get(f"/session/{sid}/tables").json()
        provenance_before = client.get(f"/session/{sid}/provenance").json()
        response = client.post(
            f"/session/{sid}/preview",
            json={
                "op": "filter",
                "params": {"table": "states", "predicate": "pop > 10"},
                "outputs": ["kept"],
                "limit": 5,
            },
        )
        assert response.status_code == 200
        assert response.json()["outputs"][0]["preview_rows"] == [["CA", 39]]
        assert client.get(f"/session/{sid}/tables").json() == before
        assert client.get(f"/session/{sid}/provenance").json() == provenance_before

    def test_preview_diagnostics_match_apply(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        _upload(client, sid, "refugees.csv", REFUGEES)
        request = {
            "op": "match",
            "params": {"left": "states", "right": "refugees", "key": "state"},
            "outputs": ["joined"],
        }
        preview = client.post(f"/session/{sid}/preview", json={**request, "limit": 3})
        applied = client.post(f"/session/{sid}/op", json=request)
        strip = lambda ds: [(d["kind"], d["payload"]) for d in ds]
        assert strip(preview.json()["diagnostics"]) == strip(applied.json()["diagnostics"])

    def test_limit_zero_schemas_only(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/preview",
            json={
                "op": "filter",
                "params": {"table": "states", "predicate": "pop > 10"},
                "outputs": ["kept"],
                "limit": 0,
            },
        )
        out = response.json()["outputs"][0]
        assert out["preview_rows"] == []
        assert out["schema"]


class TestProvenanceEndpoint:
    def test_fresh_session_empty_graph(self, client):
        sid = _session(client)
        doc = client.get(f"/session/{sid}/provenance").json()
        assert doc["nodes"] == [] and doc["edges"] == []

    def test_edges_accumulate(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        for i in range(3):
            client.post(
                f"/session/{sid}/op",
                json={
                    "op": "filter",
                    "params": {"table": "states", "predicate": f"pop > {i}"},
                    "outputs": [f"f{i}"],
                },
            )
        doc = client.get(f"/session/{sid}/provenance").json()
        assert len(doc["edges"]) >= 3

    def test_document_round_trips_through_loader(self, client):
        from tabletide.provenance import ProvenanceGraph

        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        doc = client.get(f"/session/{sid}/provenance").json()
        graph = ProvenanceGraph.from_json(json.dumps(doc))
        assert json.loads(graph.export_json()) == doc


class TestPipelineEndpoint:
    def test_matches_cli_semantics(self, client, tmp_path):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        response = client.post(
            f"/session/{sid}/pipeline",
            json={"source": "big = filter states where pop > 10"},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["ok"]
        page = client.get(f"/session/{sid}/table/big").json()
        assert page["rows"] == [["CA", 39]]

    def test_bad_script_422_with_position(self, client):
        sid = _session(client)
        response = client.post(
            f"/session/{sid}/pipeline", json={"source": "x = subset t wear a == 1"}
        )
        assert response.status_code == 422
        assert response.json()["detail"]["line"] == 1

    def test_partial_failure_reports_statement_index(self, client):
        sid = _session(client)
        _upload(client, sid, "states.csv", CSV)
        source = "a = filter states where pop > 0\nb = delete_column a ghost\n"
        response = client.post(f"/session/{sid}/pipeline", json={"source": source})
        body = response.json()
        assert not body["ok"]
        assert body["failed_statement"] == 1
        handles = {t["handle"] for t in client.get(f"/session/{sid}/tables").json()["tables"]}
        assert "a" in handles and "b" not in handles
