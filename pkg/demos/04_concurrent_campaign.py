"""Time-to-solution: sequential versus concurrent submission of one workload.

Eight GHZ-20 tasks each need two simulator processes, so all sixteen required
slots fit on the 2x8 pool at once; submitting them concurrently should finish
in roughly one task latency instead of eight.

Run with:  python demos/04_concurrent_campaign.py
"""

from qfw import ServerConfig, ServiceClient, ghz, run_campaign, serve

server = serve(ServerConfig(port=0, nodes=2, slots_per_node=8,
                            backends=["statevector", "mock:0.2"]))

with ServiceClient(server.address) as client:
    workload = ghz(20)

    sequential = run_campaign(client, workload, count=8, backend="mock", shots=1)
    print(sequential.to_table())
    print()

    concurrent = run_campaign(client, workload, count=8, concurrent=True,
                              backend="mock", shots=1)
    print(concurrent.to_table())

    speedup = sequential.wall_time_seconds / concurrent.wall_time_seconds
    print(f"\nspeedup from concurrent submission: {speedup:.1f}x")
    print("\nreport as JSON:")
    print(concurrent.to_json())

server.close(grace=5.0)
