"""Start a server in-process and drive it over the wire protocol.

Run with:  python demos/03_serve_and_submit.py
"""

import time

from qfw import ServerConfig, ServiceClient, emit, ghz, serve

server = serve(ServerConfig(port=0, nodes=2, slots_per_node=8,
                            backends=["statevector", "mock:0.1"]))
host, port = server.address
print(f"server listening on {host}:{port}")

with ServiceClient((host, port)) as client:
    print("\nregistered backends:")
    for backend in client.list_backends():
        marker = "*" if backend["default"] else " "
        print(f" {marker} {backend['name']} (kind={backend['kind']}, "
              f"max_qubits={backend['max_qubits']})")

    # The task API: create a circuit, run it synchronously, read the counts.
    info = {
        "qasm": emit(ghz(5)),
        "num_qubits": 5,
        "num_shots": 2048,
        "compiler": "staq",
        "seed": 42,
    }
    cid = client.create_circuit(info)
    rc, result, stats = client.sync_run(cid)
    print(f"\nsync_run({cid}): rc={rc}")
    print("counts:", result["counts"])
    print("placement:", stats["placement"], "workers:", stats["workers"])

    # The asynchronous path: submit, poll, fetch.
    cid = client.create_circuit(dict(info, backend="mock"))
    client.async_run(cid)
    snapshot = client.get_result(cid)
    while snapshot["state"] not in ("done", "failed"):
        print("  polling:", snapshot["state"])
        time.sleep(0.03)
        snapshot = client.get_result(cid)
    print(f"async task finished: state={snapshot['state']}")

    # Ensemble processing merges count histograms across repetitions.
    members = [client.create_circuit(dict(info, seed=s)) for s in (1, 2)]
    merged = client.run_ensemble(members, repetitions=2)
    print(f"\nensemble of 2 circuits x 2 repetitions: {merged['shots']} shots")
    print("merged counts:", merged["counts"])

    print("\npool state:", client.utilization())
    print("server stats:", client.server_stats())

server.close(grace=5.0)
print("server closed")
