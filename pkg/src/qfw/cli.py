"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 server or protocol error,
3 task failed.  Client subcommands honor the QFW_ADDR environment variable
(``host:port``) for the server address.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading

from . import bench
from .client import ServerError, ServiceClient
from .qasm import ParseError, parse
from .service import DEFAULT_PORT, ServerConfig, serve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SERVER = 2
EXIT_TASK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qfw", description="Quantum task orchestration over a modeled node pool")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    serve_cmd = commands.add_parser("serve", help="run a server")
    serve_cmd.add_argument("--host", default="127.0.0.1")
    serve_cmd.add_argument("--port", type=int, default=DEFAULT_PORT)
    serve_cmd.add_argument("--nodes", type=int, default=2)
    serve_cmd.add_argument("--slots-per-node", type=int, default=8)
    serve_cmd.add_argument("--mode", choices=["many-job", "per-job"], default="many-job")
    serve_cmd.add_argument("--partition", type=float, default=0.5,
                           help="pool fraction per session in per-job mode")
    serve_cmd.add_argument("--backend", action="append", dest="backends", metavar="SPEC",
                           help="backend spec, e.g. statevector, mock or mock:0.2; repeatable")
    serve_cmd.add_argument("--grace", type=float, default=30.0,
                           help="shutdown drain period in seconds")

    submit = commands.add_parser("submit", help="submit a QASM file")
    submit.add_argument("file", metavar="FILE.qasm")
    submit.add_argument("--shots", type=int, default=1024)
    submit.add_argument("--backend")
    submit.add_argument("--seed", type=int)
    submit.add_argument("--async", dest="run_async", action="store_true",
                        help="return the cid immediately instead of waiting")

    status = commands.add_parser("status", help="show a task's state")
    status.add_argument("cid")

    commands.add_parser("backends", help="list registered backends")
    commands.add_parser("util", help="show pool utilization")

    bench_cmd = commands.add_parser("bench", help="run a benchmark campaign")
    bench_sub = bench_cmd.add_subparsers(dest="workload", required=True, parser_class=_Parser)
    ghz_cmd = bench_sub.add_parser("ghz", help="GHZ time-to-solution campaign")
    ghz_cmd.add_argument("--qubits", type=int, required=True)
    ghz_cmd.add_argument("--count", type=int, required=True)
    ghz_cmd.add_argument("--concurrent", action="store_true")
    ghz_cmd.add_argument("--shots", type=int, default=1)
    ghz_cmd.add_argument("--backend")
    ghz_cmd.add_argument("--seed", type=int)
    ghz_cmd.add_argument("--json", dest="json_path", metavar="FILE",
                         help="also write the report as JSON ('-' for stdout)")
    return parser


def _cmd_serve(args) -> int:
    config = ServerConfig(
        host=args.host,
        port=args.port,
        nodes=args.nodes,
        slots_per_node=args.slots_per_node,
        mode=args.mode,
        per_job_partition=args.partition,
        backends=args.backends,
        grace_seconds=args.grace,
    )
    try:
        server = serve(config)
    except (OSError, ValueError) as exc:
        print(f"error: cannot start server: {exc}", file=sys.stderr)
        return EXIT_SERVER
    host, port = server.address
    print(f"qfw serve: listening on {host}:{port}", flush=True)
    stop = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_: stop.set())
    stop.wait()
    print("qfw serve: shutting down", flush=True)
    server.close()
    return EXIT_OK


def _cmd_submit(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as handle:
            source = handle.read()
    except OSError as exc:
        print(f"error: cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        circuit = parse(source)
    except ParseError as exc:
        print(f"error: {args.file}: {exc}", file=sys.stderr)
        return EXIT_TASK_FAILED
    info = {"qasm": source, "num_qubits": circuit.num_qubits,
            "num_shots": args.shots, "compiler": ""}
    if args.backend:
        info["backend"] = args.backend
    if args.seed is not None:
        info["seed"] = args.seed
    with ServiceClient() as client:
        cid = client.create_circuit(info)
        if args.run_async:
            client.async_run(cid)
            print(cid)
            return EXIT_OK
        rc, result, stats = client.sync_run(cid)
        if rc != 0:
            print(f"task {cid} failed (rc={rc})", file=sys.stderr)
            return EXIT_TASK_FAILED
        print(json.dumps({"cid": cid, "counts": result["counts"], "stats": stats}, indent=2))
    return EXIT_OK


def _cmd_status(args) -> int:
    with ServiceClient() as client:
        snapshot = client.get_result(args.cid)
    print(json.dumps(snapshot, indent=2))
    return EXIT_TASK_FAILED if snapshot["state"] == "failed" else EXIT_OK


def _cmd_backends(args) -> int:
    with ServiceClient() as client:
        descriptors = client.list_backends()
    for desc in descriptors:
        marker = "*" if desc["default"] else " "
        print(f"{marker} {desc['name']:<16} kind={desc['kind']:<12} max_qubits={desc['max_qubits']}")
    return EXIT_OK


def _cmd_util(args) -> int:
    with ServiceClient() as client:
        snapshot = client.utilization()
    for node in snapshot["nodes"]:
        print(f"{node['node_id']:<10} {node['allocated']}/{node['capacity']} slots")
    print(f"queued     {snapshot['queue_length']}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.count < 1:
        print("error: --count must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.qubits < 1:
        print("error: --qubits must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    circuit = bench.ghz(args.qubits)
    with ServiceClient() as client:
        try:
            report = bench.run_campaign(
                client, circuit, args.count, concurrent=args.concurrent,
                backend=args.backend, shots=args.shots, seed=args.seed,
            )
        except bench.CampaignError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TASK_FAILED
    print(report.to_table())
    if args.json_path:
        if args.json_path == "-":
            print(report.to_json())
        else:
            with open(args.json_path, "w", encoding="utf-8") as handle:
                handle.write(report.to_json() + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    try:
        if args.command == "submit":
            return _cmd_submit(args)
        if args.command == "status":
            return _cmd_status(args)
        if args.command == "backends":
            return _cmd_backends(args)
        if args.command == "util":
            return _cmd_util(args)
        if args.command == "bench":
            return _cmd_bench(args)
    except ServerError as exc:
        if exc.code in (1, 5):
            print(f"error: {exc.message}", file=sys.stderr)
            return EXIT_TASK_FAILED
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_SERVER
    except (ConnectionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVER
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
