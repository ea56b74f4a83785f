"""HTTP+JSON front-end for the controller plus static UI hosting.

Requests may arrive concurrently but every one of them funnels through a
single lock before touching the simulation, so mutations are serialized
and reads see a consistent snapshot.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .controller import ControllerError, VllEndpoint
from .topo import Deployment, SchemaError, deploy, parse_topology

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".map": "application/json",
}

_PLACEHOLDER_PAGE = b"""<!doctype html>
<html><head><title>oshisim</title></head>
<body><h1>oshisim API</h1>
<p>No UI bundle found. Build the frontend and pass --ui-dir, or use the
JSON API directly: /topology /route /vll /flow /stats.</p></body></html>
"""


class ApiState:
    """Shared server state; the lock is the serialized command queue."""

    def __init__(self, deployment: Deployment | None = None,
                 ui_dir: str | None = None, seed: int = 0) -> None:
        self.deployment = deployment
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.seed = seed
        self.lock = threading.RLock()


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code


def _require(state: ApiState) -> Deployment:
    if state.deployment is None:
        raise ApiError(409, "NoDeployment", "no topology deployed yet")
    return state.deployment


def _topology_json(dep: Deployment) -> dict:
    nodes = []
    for decl in sorted(dep.doc.nodes, key=lambda n: n.node_id):
        node = dep.nodes[decl.node_id]
        nodes.append({
            "id": decl.node_id,
            "role": decl.role,
            "loopback": str(dep.plan.loopbacks[decl.node_id]),
            "dpid": node.scs.datapath_id if node.is_sdn else None,
        })
    links = []
    for link_id in sorted(dep.links):
        link = dep.links[link_id]
        links.append({
            "id": link_id,
            "a": {"node": link.spec.a[0], "port": link.spec.a[1]},
            "b": {"node": link.spec.b[0], "port": link.spec.b[1]},
            "cost": link.spec.cost,
            "overlay": link.spec.overlay,
            "up": link.up,
        })
    doc: dict = {"nodes": nodes, "links": links}
    if dep.controller is not None:
        doc["discovered"] = dep.controller.view.to_json()
    return doc


def handle_request(state: ApiState, method: str, path: str, query: dict,
                   body: dict | None) -> tuple[int, dict]:
    """Route one API call; returns (status, json body)."""
    if method == "GET" and path == "/topology":
        return 200, _topology_json(_require(state))

    if method == "POST" and path == "/topology":
        if body is None:
            raise ApiError(400, "BadRequest", "missing topology document")
        try:
            doc = parse_topology(body)
        except SchemaError as exc:
            raise ApiError(400, "SchemaError",
                           "; ".join(f"{p}: {m}" for p, m in exc.violations))
        state.deployment = deploy(doc, seed=state.seed)
        dep = state.deployment
        return 200, {
            "deployed": True,
            "nodes": len(dep.nodes),
            "links": len(dep.links),
            "converged_at": dep.converged_at,
            "reachability": dep.reachability(),
            "vlls": [v.to_json() for _, v in
                     sorted(dep.controller.vlls.items())]
                    if dep.controller else [],
        }

    if method == "GET" and path == "/route":
        dep = _require(state)
        if dep.controller is None:
            raise ApiError(409, "NoController", "deployment has no controller")
        src = query.get("src", [""])[0]
        dst = query.get("dst", [""])[0]
        if not src or not dst:
            raise ApiError(400, "BadRequest", "need src and dst")
        try:
            path_nodes = dep.controller.get_route(src, dst)
        except ControllerError as exc:
            raise ApiError(404, exc.code, str(exc))
        return 200, {"src": src, "dst": dst, "path": path_nodes}

    if method == "GET" and path == "/vll":
        dep = _require(state)
        vlls = ([v.to_json() for _, v in sorted(dep.controller.vlls.items())]
                if dep.controller else [])
        return 200, {"vlls": vlls}

    if method == "POST" and path == "/vll":
        dep = _require(state)
        if dep.controller is None:
            raise ApiError(409, "NoController", "deployment has no controller")
        if body is None or "end_a" not in body or "end_b" not in body:
            raise ApiError(400, "BadRequest", "need end_a and end_b")
        try:
            vll = dep.provision_vll(VllEndpoint.from_json(body["end_a"]),
                                    VllEndpoint.from_json(body["end_b"]))
        except ControllerError as exc:
            status = 404 if exc.code == "NoPath" else 409
            raise ApiError(status, exc.code, str(exc))
        if vll.state != "Active":
            return 409, {"error": "ProvisionFailed", "message": vll.error,
                         "vll": vll.to_json()}
        return 200, vll.to_json()

    if method == "DELETE" and path.startswith("/vll/"):
        dep = _require(state)
        vll_id = path[len("/vll/"):]
        try:
            released = dep.delete_vll(vll_id)
        except ControllerError as exc:
            raise ApiError(404, exc.code, str(exc))
        return 200, released

    if method == "POST" and path == "/flow":
        dep = _require(state)
        if body is None or "dpid" not in body or "entry" not in body:
            raise ApiError(400, "BadRequest", "need dpid and entry")
        try:
            handle = dep.flow_push(int(body["dpid"]), body["entry"])
        except ControllerError as exc:
            raise ApiError(409, exc.code, str(exc))
        return 200, {"handle": handle}

    if method == "GET" and path == "/stats":
        dep = _require(state)
        nodes = {}
        for nid in sorted(dep.nodes):
            nodes[nid] = {
                "units_total": dep.ledger.total(nid),
                "counters": dep.nodes[nid].counter_dump(),
            }
        return 200, {"t": dep.sim.now, "nodes": nodes}

    if method == "POST" and path == "/link":
        dep = _require(state)
        if body is None or "id" not in body or "up" not in body:
            raise ApiError(400, "BadRequest", "need id and up")
        try:
            dep.set_link_state(str(body["id"]), bool(body["up"]))
        except KeyError as exc:
            raise ApiError(404, "UnknownLink", str(exc))
        return 200, {"id": body["id"], "up": bool(body["up"]),
                     "reachability": dep.reachability()}

    if method == "GET" and path == "/flows":
        dep = _require(state)
        node = query.get("node", [""])[0]
        if node not in dep.nodes:
            raise ApiError(404, "UnknownNode", f"unknown node {node!r}")
        return 200, {"node": node, "flows": dep.nodes[node].dump_flows()}

    if method == "GET" and path == "/rib":
        dep = _require(state)
        node = query.get("node", [""])[0]
        if node not in dep.nodes:
            raise ApiError(404, "UnknownNode", f"unknown node {node!r}")
        return 200, {"node": node, "rib": dep.nodes[node].dump_rib()}

    if method == "GET" and path == "/health":
        return 200, {"ok": True, "deployed": state.deployment is not None}

    raise ApiError(404, "NotFound", f"no handler for {method} {path}")


def make_handler(state: ApiState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args) -> None:
            pass  # quiet; the simulation log is the interesting one

        def _send_json(self, status: int, doc: dict) -> None:
            data = json.dumps(doc, sort_keys=True).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _read_body(self) -> dict | None:
            length = int(self.headers.get("Content-Length") or 0)
            if not length:
                return None
            raw = self.rfile.read(length)
            try:
                return json.loads(raw.decode())
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise ApiError(400, "BadRequest", "body is not valid JSON")

        def _api(self, method: str) -> None:
            parsed = urlparse(self.path)
            try:
                body = self._read_body()
                with state.lock:
                    status, doc = handle_request(
                        state, method, parsed.path, parse_qs(parsed.query),
                        body)
            except ApiError as exc:
                status, doc = exc.status, {"error": exc.code,
                                           "message": str(exc)}
            except Exception as exc:  # surfaced, not swallowed
                status, doc = 500, {"error": "Internal", "message": str(exc)}
            self._send_json(status, doc)

        def do_GET(self) -> None:
            parsed = urlparse(self.path)
            api_paths = ("/topology", "/route", "/vll", "/stats", "/flows",
                         "/rib", "/health")
            if parsed.path in api_paths or parsed.path.startswith("/vll/"):
                self._api("GET")
            else:
                self._static(parsed.path)

        def do_POST(self) -> None:
            self._api("POST")

        def do_DELETE(self) -> None:
            self._api("DELETE")

        def _static(self, path: str) -> None:
            rel = path.lstrip("/") or "index.html"
            if state.ui_dir is not None:
                target = (state.ui_dir / rel).resolve()
                if (target.is_file()
                        and str(target).startswith(str(state.ui_dir.resolve()))):
                    data = target.read_bytes()
                    ctype = _CONTENT_TYPES.get(target.suffix,
                                               "application/octet-stream")
                    self.send_response(200)
                    self.send_header("Content-Type", ctype)
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                    return
            if rel == "index.html":
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(_PLACEHOLDER_PAGE)))
                self.end_headers()
                self.wfile.write(_PLACEHOLDER_PAGE)
                return
            self._send_json(404, {"error": "NotFound", "message": rel})

    return Handler


class ApiServer:
    """Threaded HTTP server wrapper around one deployment."""

    def __init__(self, deployment: Deployment | None = None,
                 host: str = "127.0.0.1", port: int = 8080,
                 ui_dir: str | None = None, seed: int = 0) -> None:
        self.state = ApiState(deployment, ui_dir, seed)
        self.httpd = ThreadingHTTPServer((host, port),
                                         make_handler(self.state))

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
