"""Service guardrails and CLI/service execution equivalence."""

from __future__ import annotations

import io
import socket

from fastapi.testclient import TestClient

from tabletide import cli, io as tio
from tabletide.model import row_multiset_equal
from tabletide.service import create_app

CSV = "s,v\na,1\nb,2\na,3\n"


def _upload(client, sid, name, text):
    return client.post(
        f"/session/{sid}/upload",
        files={"file": (name, io.BytesIO(text.encode()), "text/csv")},
    )


class TestGuardrails:
    def test_upload_size_cap(self):
        client = TestClient(create_app(upload_limit=16))
        sid = client.post("/session").json()["session"]
        response = _upload(client, sid, "big.csv", CSV * 10)
        assert response.status_code == 422
        assert "bytes" in response.json()["detail"]

    def test_table_cap(self):
        client = TestClient(create_app(table_cap=1))
        sid = client.post("/session").json()["session"]
        assert _upload(client, sid, "one.csv", CSV).status_code == 200
        assert _upload(client, sid, "two.csv", CSV).status_code == 422

    def test_session_expiry(self):
        app = create_app(idle_timeout=0.0)
        client = TestClient(app)
        sid = client.post("/session").json()["session"]
        import time

        time.sleep(0.01)
        assert client.get(f"/session/{sid}/tables").status_code == 404


class TestServePort:
    def test_occupied_port_exits_3(self, monkeypatch, capsys):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        # The default port comes from the environment override.
        monkeypatch.setenv("TABLETIDE_PORT", str(port))
        try:
            assert cli.main(["serve"]) == 3
        finally:
            blocker.close()
        assert "cannot serve" in capsys.readouterr().err


class TestCliServiceEquivalence:
    def test_same_pipeline_same_exports(self, tmp_path, monkeypatch):
        (tmp_path / "a.csv").write_text(CSV)
        source = (
            'load "a.csv" as t\n'
            "g = group_aggregate t by s agg sum(v) as total\n"
            'export g to "out.csv"\n'
        )
        pipeline_path = tmp_path / "p.wr"
        pipeline_path.write_text(source)

        cli_dir = tmp_path / "cli"
        cli_dir.mkdir()
        (cli_dir / "a.csv").write_text(CSV)
        (cli_dir / "p.wr").write_text(source)
        assert cli.main(["run", str(cli_dir / "p.wr")]) == 0
        cli_table = tio.load_csv(cli_dir / "out.csv")

        service_dir = tmp_path / "svc"
        service_dir.mkdir()
        (service_dir / "a.csv").write_text(CSV)
        monkeypatch.chdir(service_dir)
        client = TestClient(create_app())
        sid = client.post("/session").json()["session"]
        response = client.post(f"/session/{sid}/pipeline", json={"source": source})
        assert response.status_code == 200 and response.json()["ok"]
        service_table = tio.load_csv(service_dir / "out.csv")

        assert row_multiset_equal(cli_table, service_table)
        assert (cli_dir / "out.csv").read_bytes() == (service_dir / "out.csv").read_bytes()
