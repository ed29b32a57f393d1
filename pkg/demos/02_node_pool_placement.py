"""Walk the modeled node pool through the two-node placement scenario.

Run with:  python demos/02_node_pool_placement.py
"""

from qfw import NodeSpec, ResourcePool

# Two nodes, eight process slots each (one slot = one bound simulator process).
pool = ResourcePool([NodeSpec("node1", 8), NodeSpec("node2", 8)])


def show(label):
    snapshot = pool.utilization()
    usage = "  ".join(f"{n.node_id}={n.allocated}/{n.capacity}" for n in snapshot.nodes)
    print(f"{label:<34} {usage}  queued={snapshot.queue_length}")


show("empty pool")

# Three instances fit at once: 4 procs, then 8 spanning both nodes, then 4.
first = pool.request(4)
print("request(4)  ->", first.assignment)
second = pool.request(8)
print("request(8)  ->", second.assignment)
third = pool.request(4)
print("request(4)  ->", third.assignment)
show("after the 4/8/4 trio")

# The pool is full, so a fourth request waits in FIFO order.
fourth = pool.request(4)
print("request(4)  -> queued at position", fourth.position)
show("fourth request queued")

# Releasing the spanning instance frees 4 slots on each node; the queue head
# is granted immediately (and never overtaken by later arrivals).
freed = pool.release(second.instance_id)
print("release(8-proc instance) freed", freed)
print("queued request granted ->", fourth.wait(timeout=1.0).assignment)
show("after release and grant")

for placement in (first, third, fourth.placement):
    pool.release(placement.instance_id)
show("drained")
