"""Command-line entry point: generation, deployment, services, experiments.

Commands that need a live network (`vll`, `dump-flows`, `dump-rib`) talk
to a running `serve` instance over its HTTP API; `deploy`, `traffic` and
`measure` build their own simulation and exit.  Everything is scriptable:
no prompts, JSON out, exit 1 with a one-line diagnostic on bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import urllib.error
import urllib.request

from .api import ApiServer
from .controller import ControllerError, VllEndpoint
from .measure import (
    DEFAULT_RUNS,
    TrafficSpec,
    chain_doc,
    run_experiment,
    run_udp_experiment,
)
from .topo import DeployError, SchemaError, deploy, generate_topology, parse_topology

DEFAULT_SERVER = "http://127.0.0.1:8080"


class CliError(Exception):
    pass


def _seed(args) -> int:
    env = os.environ.get("OSHI_SIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"OSHI_SIM_SEED is not an integer: {env!r}")
    return args.seed


def _write_out(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as f:
            f.write(text)


def _request(server: str, method: str, path: str, body: dict | None = None):
    url = server.rstrip("/") + path
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=60) as resp:
            return json.loads(resp.read().decode())
    except urllib.error.HTTPError as exc:
        try:
            doc = json.loads(exc.read().decode())
            raise CliError(f"{doc.get('error')}: {doc.get('message')}")
        except (ValueError, KeyError):
            raise CliError(f"server returned {exc.code}")
    except urllib.error.URLError as exc:
        raise CliError(f"cannot reach server {server}: {exc.reason}")


def _parse_endpoint(text: str) -> VllEndpoint:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise CliError(f"endpoint must be NODE:PORT[:VID], got {text!r}")
    try:
        port = int(parts[1])
        vid = int(parts[2]) if len(parts) == 3 else None
    except ValueError:
        raise CliError(f"bad endpoint numbers in {text!r}")
    return VllEndpoint(parts[0], port, vid)


def _load_doc(path: str):
    try:
        with open(path) as f:
            return parse_topology(f.read())
    except FileNotFoundError:
        raise CliError(f"no such file: {path}")
    except SchemaError as exc:
        first = exc.violations[0]
        raise CliError(f"invalid topology ({len(exc.violations)} problems; "
                       f"first: {first[0]}: {first[1]})")


def cmd_gen(args) -> int:
    doc = generate_topology(args.model, args.nodes, _seed(args),
                            pe_fraction=args.pe_fraction, p=args.p, m=args.m,
                            alpha=args.alpha, beta=args.beta)
    _write_out(doc.to_json(), args.output)
    return 0


def cmd_deploy(args) -> int:
    doc = _load_doc(args.topo)
    deployment = deploy(doc, seed=_seed(args))
    summary = {
        "nodes": len(deployment.nodes),
        "links": len(deployment.links),
        "converged_at": deployment.converged_at,
        "reachability": deployment.reachability(),
        "vlls": [v.to_json() for _, v in
                 sorted(deployment.controller.vlls.items())]
                if deployment.controller else [],
    }
    _write_out(json.dumps(summary, indent=2, sort_keys=True) + "\n",
               args.output)
    return 0


def cmd_vll(args) -> int:
    if args.action == "add":
        end_a = _parse_endpoint(args.from_)
        end_b = _parse_endpoint(args.to)
        doc = _request(args.server, "POST", "/vll",
                       {"end_a": end_a.to_json(), "end_b": end_b.to_json()})
    elif args.action == "del":
        if not args.id:
            raise CliError("vll del needs --id")
        doc = _request(args.server, "DELETE", f"/vll/{args.id}")
    else:
        doc = _request(args.server, "GET", "/vll")
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_traffic(args) -> int:
    seed = _seed(args)
    if args.topo:
        doc = _load_doc(args.topo)
    else:
        doc = chain_doc("pe", {"plain": "none"}.get(args.profile, args.profile))
    deployment = deploy(doc, seed=seed)
    for node in (args.src, args.dst):
        if node not in deployment.nodes:
            raise CliError(f"unknown node {node!r}")
    spec = TrafficSpec(args.src, args.dst, "udp-flow", args.rate, args.size,
                       args.duration)
    stats = run_udp_experiment(deployment, spec, runs=args.runs, seed=seed)
    from .measure import stats_json
    _write_out(stats_json(stats), args.output)
    return 0


def cmd_measure(args) -> int:
    result = run_experiment(args.experiment, seed=_seed(args),
                            rates=args.rates, runs=args.runs)
    _write_out(json.dumps(result, indent=2, sort_keys=True) + "\n",
               args.output)
    return 0


def cmd_dump_flows(args) -> int:
    doc = _request(args.server, "GET", f"/flows?node={args.node}")
    for entry in doc["flows"]:
        sys.stdout.write(json.dumps(entry, sort_keys=True) + "\n")
    return 0


def cmd_dump_rib(args) -> int:
    doc = _request(args.server, "GET", f"/rib?node={args.node}")
    for entry in doc["rib"]:
        nh = entry["next_hop"] or "direct"
        sys.stdout.write(f"{entry['prefix']} via {nh} port {entry['port']} "
                         f"cost {entry['cost']}\n")
    return 0


def cmd_serve(args) -> int:
    deployment = None
    if args.topo:
        deployment = deploy(_load_doc(args.topo), seed=_seed(args))
    ui_dir = args.ui_dir
    if ui_dir is None:
        for candidate in ("frontend/dist", "../frontend/dist"):
            if os.path.isdir(candidate):
                ui_dir = candidate
                break
    server = ApiServer(deployment, host=args.host, port=args.port,
                       ui_dir=ui_dir, seed=_seed(args))
    sys.stderr.write(f"serving on http://{args.host}:{server.port} "
                     f"(ui: {ui_dir or 'placeholder'})\n")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oshisim",
        description="hybrid IP/SDN network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic topology")
    p.add_argument("--model", required=True,
                   choices=["er", "erdos-renyi", "ba", "barabasi-albert",
                            "waxman"])
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pe-fraction", type=float, default=0.4)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--beta", type=float, default=0.6)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("deploy", help="deploy a topology and report")
    p.add_argument("--topo", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_deploy)

    p = sub.add_parser("vll", help="manage services on a running server")
    p.add_argument("action", choices=["add", "del", "list"])
    p.add_argument("--from", dest="from_", help="NODE:PORT[:VID]")
    p.add_argument("--to", help="NODE:PORT[:VID]")
    p.add_argument("--id")
    p.add_argument("--server", default=os.environ.get("OSHI_SIM_URL",
                                                      DEFAULT_SERVER))
    p.set_defaults(fn=cmd_vll)

    p = sub.add_parser("traffic", help="run one udp load measurement")
    p.add_argument("--src", default="ce1")
    p.add_argument("--dst", default="ce2")
    p.add_argument("--rate", type=float, default=2000)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--duration", type=float, default=60)
    p.add_argument("--profile", choices=["plain", "vxlan", "vpn"],
                   default="plain")
    p.add_argument("--topo", help="measure on this topology instead")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_traffic)

    p = sub.add_parser("measure", help="run an experiment suite")
    p.add_argument("--experiment", required=True, choices=list("abcd"))
    p.add_argument("--rates", type=int, nargs="*")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("dump-flows", help="print a node's flow table")
    p.add_argument("--node", required=True)
    p.add_argument("--server", default=os.environ.get("OSHI_SIM_URL",
                                                      DEFAULT_SERVER))
    p.set_defaults(fn=cmd_dump_flows)

    p = sub.add_parser("dump-rib", help="print a node's routing table")
    p.add_argument("--node", required=True)
    p.add_argument("--server", default=os.environ.get("OSHI_SIM_URL",
                                                      DEFAULT_SERVER))
    p.set_defaults(fn=cmd_dump_rib)

    p = sub.add_parser("serve", help="serve the controller API and the UI")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--topo")
    p.add_argument("--ui-dir")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, SchemaError, DeployError, ControllerError,
            ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
