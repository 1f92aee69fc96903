#!/usr/bin/env python3
"""Run every placement algorithm on one synthetic scenario and compare the
cost breakdowns, replica counts, and runtimes.

Run:  python3 demos/03_placement_showdown.py
"""

import time

import numpy as np

from satcdn import CostParams, GroundNode, Network, build_distance_oracle, total_cost
from satcdn.constellation import starlink_phase1
from satcdn.demand import US_BBOX, DemandMatrix, random_ground_sites, synth_grid_demand
from satcdn.placement import SOLVERS, OptimizerConfig

T = 24
shell = starlink_phase1(orbit_count=24, sats_per_orbit=12, name="leo")
users, catalog, base = synth_grid_demand(3, 5, US_BBOX, 1.0, T)
gateways = random_ground_sites(8, US_BBOX, seed=4)
origin = [GroundNode("origin/east", "origin", 39.0, -77.0)]
net = Network([shell], gateways + origin + users, slot_seconds=300.0, seed=2)
oracle = build_distance_oracle(net.snapshots(T), "hop")
params = CostParams.from_oracle(oracle, alpha=50.0, beta=1.0, gamma=10.0)

rng = np.random.default_rng(1)
vols = rng.uniform(3.0, 15.0, size=len(users))
demand = DemandMatrix([u.node_id for u in users], ["content/0"],
                      np.tile(vols[:, None, None], (1, 1, T)))

print(f"{'algorithm':>13s} {'query':>9s} {'replication':>12s} {'storage':>8s} "
      f"{'total':>9s} {'replicas':>8s} {'time':>7s}")
for name, solver in SOLVERS.items():
    t0 = time.perf_counter()
    res = solver(demand, oracle, params, OptimizerConfig(), catalog=catalog)
    elapsed = time.perf_counter() - t0
    br = total_cost(res.schedule, demand, catalog, oracle, params)
    print(f"{name:>13s} {br.query:9.0f} {br.replication:12.0f} {br.storage:8.0f} "
          f"{br.total:9.0f} {res.schedule.mean_replica_count(oracle):8.2f} "
          f"{elapsed:6.2f}s")

print("""
Reading the table: the per-slot heuristics (greedy, 1.61x-style greedy, local
search) keep replication and storage low but leave query cost on the table;
periodic cache handoff replicates aggressively every period; the threshold
strategy over-provisions persistent replicas. The multi-time DP searches
balance all three terms across the whole horizon, and the orbit-based variant
gets within a few percent of the full search at a fraction of the time.""")
