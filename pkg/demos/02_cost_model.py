#!/usr/bin/env python3
"""Walk through the cost model: distance oracles, the three cost terms, and
what a replica schedule buys you.

Run:  python3 demos/02_cost_model.py
"""

from satcdn import (CostParams, GroundNode, Network, ReplicaSchedule,
                    build_distance_oracle, starlink_phase1, total_cost)
from satcdn.demand import US_BBOX, synth_grid_demand, random_ground_sites

T = 12
shell = starlink_phase1(orbit_count=24, sats_per_orbit=12, name="leo")
users, catalog, demand = synth_grid_demand(2, 3, US_BBOX, 5.0, T)
gateways = random_ground_sites(4, US_BBOX, seed=11)
origin = [GroundNode("origin/east", "origin", 39.0, -77.0)]

net = Network([shell], gateways + origin + users, slot_seconds=300.0, seed=3)
oracle = build_distance_oracle(net.snapshots(T), "hop")
params = CostParams.from_oracle(oracle, alpha=50.0, beta=1.0, gamma=10.0)
print(f"network: {oracle.n_nodes} nodes, c_qmin = {params.c_qmin}")

origin_only = ReplicaSchedule.origin_only(demand.contents, T, oracle.origins_idx)
base = total_cost(origin_only, demand, catalog, oracle, params)
print(f"\norigin-only:  query={base.query:8.1f}  replication={base.replication:7.1f}  "
      f"storage={base.storage:6.1f}  total={base.total:8.1f}")

# Hand-build a schedule: park the content on one gateway for the whole horizon.
gw_idx = int(oracle.index[gateways[0].node_id])
sets = [tuple(sorted([gw_idx] + [int(i) for i in oracle.origins_idx]))] * T
parked = ReplicaSchedule(demand.contents, T, {demand.contents[0]: sets})
br = total_cost(parked, demand, catalog, oracle, params)
print(f"one gateway:  query={br.query:8.1f}  replication={br.replication:7.1f}  "
      f"storage={br.storage:6.1f}  total={br.total:8.1f}")

print("\nThe gateway replica pays one alpha-scaled transfer at slot 1, a small")
print("per-slot holding cost (beta * c_qmin), and cuts every user's path by")
print("the hops it saves. Satellites would charge gamma =", params.gamma_for(0),
      "instead - ten times the gateway rate.")

# The replication term reacts to motion: move the replica between two
# satellites every slot and watch the transfer costs accumulate.
sats = oracle.candidates_idx[:2]
bouncing = ReplicaSchedule(demand.contents, T, {demand.contents[0]: [
    tuple(sorted([int(sats[t % 2])] + [int(i) for i in oracle.origins_idx]))
    for t in range(T)]})
br2 = total_cost(bouncing, demand, catalog, oracle, params)
print(f"\nbouncing sat: query={br2.query:8.1f}  replication={br2.replication:7.1f}  "
      f"storage={br2.storage:6.1f}  total={br2.total:8.1f}")
print("Churning replicas is how a schedule loses: alpha =", params.alpha,
      "multiplies every hand-off distance.")
