import json
import threading
import urllib.error
import urllib.request

import pytest

from oshisim.api import ApiServer
from oshisim.measure import chain_doc
from oshisim.topo import deploy


class Client:
    def __init__(self, port: int) -> None:
        self.base = f"http://127.0.0.1:{port}"

    def request(self, method: str, path: str, body=None):
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(self.base + path, data=data,
                                     method=method,
                                     headers={"Content-Type":
                                              "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=30) as resp:
                return resp.status, json.loads(resp.read().decode())
        except urllib.error.HTTPError as exc:
            return exc.code, json.loads(exc.read().decode())


@pytest.fixture(scope="module")
def client():
    server = ApiServer(deploy(chain_doc("pe", "none"), seed=2), port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield Client(server.port)
    server.shutdown()


class TestTopologyEndpoints:
    def test_get_topology_lists_nodes_and_links(self, client):
        status, doc = client.request("GET", "/topology")
        assert status == 200
        assert {n["id"] for n in doc["nodes"]} == {"ce1", "ce2", "n1", "n2"}
        assert all(l["up"] for l in doc["links"])
        assert doc["discovered"]["switches"] == ["n1", "n2"]

    def test_post_topology_redeploys(self, client):
        new_doc = chain_doc("pe", "none").to_dict()
        status, result = client.request("POST", "/topology", new_doc)
        assert status == 200
        assert result["deployed"] and result["reachability"] == 1.0

    def test_post_invalid_topology_returns_violations(self, client):
        bad = chain_doc("pe", "none").to_dict()
        bad["links"][0]["a"]["node"] = "ghost"
        status, result = client.request("POST", "/topology", bad)
        assert status == 400
        assert result["error"] == "SchemaError"
        assert "ghost" in result["message"]


class TestRouteAndVll:
    def test_route_query(self, client):
        status, doc = client.request("GET", "/route?src=n1&dst=n2")
        assert status == 200 and doc["path"] == ["n1", "n2"]

    def test_route_missing_endpoint_404(self, client):
        status, doc = client.request("GET", "/route?src=n1&dst=ghost")
        assert status == 404 and doc["error"] == "NoPath"

    def test_vll_lifecycle_over_http(self, client):
        body = {"end_a": {"node": "n1", "port": 9},
                "end_b": {"node": "n2", "port": 9}}
        _, route = client.request("GET", "/route?src=n1&dst=n2")
        status, vll = client.request("POST", "/vll", body)
        assert status == 200 and vll["state"] == "Active"
        # the installed path is exactly what /route answered
        assert vll["path"] == route["path"]
        status, listing = client.request("GET", "/vll")
        assert [v["id"] for v in listing["vlls"]] == [vll["id"]]
        status, conflict = client.request("POST", "/vll", body)
        assert status == 409 and conflict["error"] == "EndpointConflict"
        status, released = client.request("DELETE", f"/vll/{vll['id']}")
        assert status == 200 and released["id"] == vll["id"]
        status, listing = client.request("GET", "/vll")
        assert listing["vlls"] == []

    def test_delete_unknown_vll_404(self, client):
        status, doc = client.request("DELETE", "/vll/ghost")
        assert status == 404


class TestFlowStatsLink:
    def test_flow_push_and_dump(self, client):
        status, top = client.request("GET", "/topology")
        (dpid,) = [n["dpid"] for n in top["nodes"] if n["id"] == "n1"]
        entry = {"table": 2, "priority": 3, "match": {"ethertype": 0x9998},
                 "actions": [{"type": "drop"}], "cookie": 42}
        status, result = client.request("POST", "/flow",
                                        {"dpid": dpid, "entry": entry})
        assert status == 200 and result["handle"] > 0
        status, flows = client.request("GET", "/flows?node=n1")
        assert status == 200
        assert any(f["cookie"] == 42 for f in flows["flows"])

    def test_stats_exposes_counters_per_node(self, client):
        status, doc = client.request("GET", "/stats")
        assert status == 200
        assert set(doc["nodes"]) == {"ce1", "ce2", "n1", "n2"}
        assert "units_total" in doc["nodes"]["n1"]
        assert "frames_in" in doc["nodes"]["n1"]["counters"]

    def test_link_toggle_updates_topology_and_vll_state(self, client):
        body = {"end_a": {"node": "n1", "port": 8},
                "end_b": {"node": "n2", "port": 8}}
        status, vll = client.request("POST", "/vll", body)
        assert status == 200
        status, result = client.request("POST", "/link",
                                        {"id": "lk-core", "up": False})
        assert status == 200 and result["reachability"] == 0.0
        status, listing = client.request("GET", "/vll")
        assert listing["vlls"][0]["state"] == "Failed"
        status, top = client.request("GET", "/topology")
        (core,) = [l for l in top["links"] if l["id"] == "lk-core"]
        assert core["up"] is False
        client.request("POST", "/link", {"id": "lk-core", "up": True})
        client.request("DELETE", f"/vll/{vll['id']}")

    def test_unknown_paths_404(self, client):
        status, _ = client.request("GET", "/nope")
        assert status == 404

    def test_rib_dump(self, client):
        status, doc = client.request("GET", "/rib?node=n1")
        assert status == 200
        assert any(e["prefix"].endswith("/32") for e in doc["rib"])
