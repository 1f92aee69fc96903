"""Request routing against a replica schedule, chunk download-time modeling,
and per-slot quality aggregation for video scenarios.

Download time = propagation (path latency) + transmission (chunk size over the
bottleneck link throughput). Routing policies: closest, round robin over the n
closest, and deterministic weighted round robin (default 4/7, 2/7, 1/7).
Per-(user, content) routing state persists across slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import SAT
from .costmodel import DistanceOracle, ReplicaSchedule

POLICIES = ("closest", "round_robin", "weighted_round_robin")


@dataclass
class RoutingPolicy:
    kind: str = "closest"
    fanout: int = 3
    weights: tuple[float, ...] = (4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0)

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"kind must be one of {POLICIES}")
        if self.fanout < 1:
            raise ValueError("fanout must be >= 1")
        if len(self.weights) != self.fanout:
            raise ValueError("one weight per fanout slot required")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if any(self.weights[i] < self.weights[i + 1] for i in range(len(self.weights) - 1)):
            raise ValueError("weights must be non-increasing with replica distance")


@dataclass
class LinkModel:
    terrestrial_gbps: float = 20.0
    satellite_gbps: float = 10.0
    server_capacity_mbps: float | None = None

    def __post_init__(self):
        if self.terrestrial_gbps <= 0 or self.satellite_gbps <= 0:
            raise ValueError("throughputs must be positive")


@dataclass
class QoEModel:
    """Declared quality model: full score while the download fits the playout
    budget, linear decay to zero at twice the budget."""

    budget_s: float = 4.0
    max_score: float = 10.0

    def score(self, download_s: float) -> float:
        if not math.isfinite(download_s):
            return 0.0
        overrun = max(0.0, download_s - self.budget_s) / self.budget_s
        return max(0.0, self.max_score * (1.0 - overrun))


class Router:
    """Stateful request router; counters persist per (user, content)."""

    def __init__(self, schedule: ReplicaSchedule, oracle: DistanceOracle, policy: RoutingPolicy):
        self.schedule = schedule
        self.oracle = oracle
        self.policy = policy
        self._rr: dict[tuple[int, str], int] = {}
        self._wrr: dict[tuple[int, str], np.ndarray] = {}

    def _ranked(self, user_idx: int, content: str, slot: int) -> list[int]:
        replicas = np.asarray(self.schedule.nodes(content, slot), dtype=np.int64)
        d = np.asarray([self.oracle.d(slot, user_idx, int(r)) for r in replicas])
        finite = np.isfinite(d)
        if not finite.any():
            return []
        replicas, d = replicas[finite], d[finite]
        order = np.lexsort((replicas, d))
        return [int(r) for r in replicas[order[:self.policy.fanout]]]

    def route(self, user, content: str, slot: int):
        """Pick the serving replica; falls back to the lowest-id origin with an
        unreachable flag when nothing is reachable."""
        user_idx = self.oracle.index[user] if isinstance(user, str) else int(user)
        ranked = self._ranked(user_idx, content, slot)
        if not ranked:
            return int(np.min(self.oracle.origins_idx)), False
        if self.policy.kind == "closest" or len(ranked) == 1:
            return ranked[0], True
        key = (user_idx, content)
        if self.policy.kind == "round_robin":
            c = self._rr.get(key, 0)
            self._rr[key] = c + 1
            return ranked[c % len(ranked)], True
        # Smooth weighted round robin over proximity ranks.
        w = np.asarray(self.policy.weights[:len(ranked)])
        cur = self._wrr.get(key)
        if cur is None or cur.size != len(ranked):
            cur = np.zeros(len(ranked))
        cur = cur + w
        pick = int(np.argmax(cur))
        cur[pick] -= w.sum()
        self._wrr[key] = cur
        return ranked[pick], True


def route(user, content: str, slot: int, schedule: ReplicaSchedule,
          policy: RoutingPolicy, oracle: DistanceOracle):
    """One-shot routing decision (fresh round-robin state)."""
    replica, _reachable = Router(schedule, oracle, policy).route(user, content, slot)
    return replica


def path_links(oracle: DistanceOracle, slot: int, src: int, dst: int) -> list[tuple[int, int]]:
    """Edge list of the shortest path from src to dst at a slot (needs an
    oracle built with path predecessors)."""
    if src == dst:
        return []
    pred = oracle.predecessors(slot)
    links = []
    node = dst
    while node != src:
        p = int(pred[src, node])
        if p < 0:
            return []  # unreachable
        links.append((p, node))
        node = p
    return links[::-1]


def _bottleneck_gbps(oracle: DistanceOracle, links, model: LinkModel) -> float:
    if not links:
        return model.terrestrial_gbps  # local serve
    best = math.inf
    for a, b in links:
        sat_link = oracle.kind[a] == SAT or oracle.kind[b] == SAT
        best = min(best, model.satellite_gbps if sat_link else model.terrestrial_gbps)
    return best


def chunk_download_time(user, replica, chunk_size_mb: float, slot: int,
                        links: LinkModel, oracle: DistanceOracle) -> float:
    """Propagation plus transmission seconds for one chunk; +inf if unreachable."""
    if chunk_size_mb <= 0:
        raise ValueError("chunk_size_mb must be positive")
    if oracle.metric == "hop":
        raise ValueError("download times need a latency-metric oracle (ideal or sampled)")
    user_idx = oracle.index[user] if isinstance(user, str) else int(user)
    rep_idx = oracle.index[replica] if isinstance(replica, str) else int(replica)
    prop_ms = oracle.d(slot, user_idx, rep_idx)
    if not math.isfinite(prop_ms):
        return math.inf
    edges = path_links(oracle, slot, user_idx, rep_idx)
    gbps = _bottleneck_gbps(oracle, edges, links)
    transmit_s = (chunk_size_mb * 8.0e6) / (gbps * 1.0e9)
    return prop_ms / 1000.0 + transmit_s


@dataclass
class DeliveryReport:
    policy: str
    slot_count: int
    mean_qoe: list[float]
    traffic_gb: float
    per_replica: dict[str, dict[str, float]] = field(default_factory=dict)
    unreachable_requests: int = 0

    @property
    def overall_mean_qoe(self) -> float:
        served = [q for q in self.mean_qoe if not math.isnan(q)]
        return float(np.mean(served)) if served else float("nan")

    def rows(self):
        for t, q in enumerate(self.mean_qoe, start=1):
            yield t, self.policy, q

    def replica_rows(self):
        for nid in sorted(self.per_replica):
            rec = self.per_replica[nid]
            yield self.policy, nid, int(rec["requests"]), rec["gb"]


def simulate_delivery(schedule: ReplicaSchedule, demand, policy: RoutingPolicy,
                      links: LinkModel, qoe: QoEModel, oracle: DistanceOracle,
                      catalog=None) -> DeliveryReport:
    """Route every request, accumulate per-link traffic (a chunk crossing k
    links counts k times), score download times, and average QoE per slot.

    Demand weights are rounded to whole requests. With a server capacity cap,
    requests queue FIFO per (replica, slot).
    """
    router = Router(schedule, oracle, policy)
    T = min(demand.slot_count, schedule.slot_count)
    qoe_sum = np.zeros(T)
    qoe_n = np.zeros(T, dtype=np.int64)
    traffic_gb = 0.0
    per_replica: dict[str, dict[str, float]] = {}
    unreachable = 0
    backlog: dict[tuple[int, int], float] = {}

    user_idx = np.array([oracle.index[u] for u in demand.users], dtype=np.int64)

    for t in range(1, T + 1):
        for ci, content in enumerate(demand.contents):
            size_mb = catalog.size_of(content) if catalog is not None else 1.0
            size_gb = size_mb / 1000.0
            for uj, u in enumerate(user_idx):
                n_req = int(round(demand.values[uj, ci, t - 1]))
                for _ in range(n_req):
                    rep, reachable = router.route(int(u), content, t)
                    rec = per_replica.setdefault(oracle.ids[rep], {"requests": 0.0, "gb": 0.0})
                    rec["requests"] += 1
                    if not reachable:
                        unreachable += 1
                        qoe_n[t - 1] += 1
                        continue
                    edges = path_links(oracle, t, int(u), rep)
                    gbps = _bottleneck_gbps(oracle, edges, links)
                    if links.server_capacity_mbps is not None:
                        gbps = min(gbps, links.server_capacity_mbps / 1000.0)
                    transmit_s = (size_mb * 8.0e6) / (gbps * 1.0e9)
                    wait_s = 0.0
                    if links.server_capacity_mbps is not None:
                        key = (rep, t)
                        wait_s = backlog.get(key, 0.0)
                        backlog[key] = wait_s + transmit_s
                    dt = oracle.d(t, int(u), rep) / 1000.0 + wait_s + transmit_s
                    qoe_sum[t - 1] += qoe.score(dt)
                    qoe_n[t - 1] += 1
                    traffic_gb += size_gb * len(edges)
                    rec["gb"] += size_gb

    mean_qoe = [float(qoe_sum[i] / qoe_n[i]) if qoe_n[i] else float("nan") for i in range(T)]
    return DeliveryReport(policy=policy.kind, slot_count=T, mean_qoe=mean_qoe,
                          traffic_gb=traffic_gb, per_replica=per_replica,
                          unreachable_requests=unreachable)
