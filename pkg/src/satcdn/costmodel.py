"""Per-slot shortest-path distances and the query / replication / storage costs.

The distance oracle precomputes, for every slot, shortest-path distances over
the snapshot graph under one metric (hop count, ideal latency, or sampled
latency). Disconnected pairs are +inf. Cost evaluations are pure functions of
(schedule, demand, oracle, params) and can run concurrently per content.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .constellation import GATEWAY, ORIGIN, SAT, USER

METRICS = ("hop", "ideal", "sampled")


class DistanceOracle:
    """All-pairs shortest-path distances per slot, plus node role metadata.

    ``matrix(t)`` returns the (n, n) distance array for 1-based slot ``t``.
    The node ordering follows the snapshot's node table: satellites, gateways,
    origins, users — so candidate and user blocks are contiguous slices.
    """

    def __init__(self, matrices: Sequence[np.ndarray], ids: Sequence[str], kind: np.ndarray,
                 *, shell: np.ndarray | None = None, orbit: np.ndarray | None = None,
                 in_orbit: np.ndarray | None = None, orbit_key: np.ndarray | None = None,
                 metric: str = "custom", slot_seconds: float = 300.0,
                 predecessors: Sequence[np.ndarray] | None = None,
                 candidates: np.ndarray | None = None):
        self._matrices = list(matrices)
        self.ids = list(ids)
        self.kind = np.asarray(kind, dtype=np.int8)
        n = len(self.ids)
        if self.kind.size != n or any(m.shape != (n, n) for m in self._matrices):
            raise ValueError("matrix/id/kind shapes disagree")
        fill = np.full(n, -1, dtype=np.int32)
        self.shell = np.asarray(shell, dtype=np.int32) if shell is not None else fill.copy()
        self.orbit = np.asarray(orbit, dtype=np.int32) if orbit is not None else fill.copy()
        self.in_orbit = np.asarray(in_orbit, dtype=np.int32) if in_orbit is not None else fill.copy()
        self.orbit_key = np.asarray(orbit_key, dtype=np.int32) if orbit_key is not None else fill.copy()
        self.metric = metric
        self.slot_seconds = float(slot_seconds)
        self._pred = list(predecessors) if predecessors is not None else None
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        if candidates is not None:
            self._candidates = np.asarray(candidates, dtype=np.int64)
        else:
            self._candidates = np.flatnonzero((self.kind == SAT) | (self.kind == GATEWAY))

    @property
    def slot_count(self) -> int:
        return len(self._matrices)

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def users_idx(self) -> np.ndarray:
        return np.flatnonzero(self.kind == USER)

    @property
    def origins_idx(self) -> np.ndarray:
        return np.flatnonzero(self.kind == ORIGIN)

    @property
    def candidates_idx(self) -> np.ndarray:
        return self._candidates

    def matrix(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.slot_count:
            raise IndexError(f"slot {t} outside 1..{self.slot_count}")
        return self._matrices[t - 1]

    def d(self, t: int, u, v) -> float:
        ui = self.index[u] if isinstance(u, str) else int(u)
        vi = self.index[v] if isinstance(v, str) else int(v)
        return float(self.matrix(t)[ui, vi])

    def predecessors(self, t: int) -> np.ndarray:
        if self._pred is None:
            raise ValueError("oracle was built without path predecessors")
        return self._pred[t - 1]

    def with_candidates(self, candidates: np.ndarray) -> "DistanceOracle":
        """Shallow view sharing matrices but with a restricted candidate set."""
        out = DistanceOracle.__new__(DistanceOracle)
        out.__dict__.update(self.__dict__)
        out._candidates = np.asarray(candidates, dtype=np.int64)
        return out

    def restrict_kinds(self, kinds: Sequence[int]) -> "DistanceOracle":
        mask = np.isin(self.kind[self._candidates], np.asarray(kinds, dtype=np.int8))
        return self.with_candidates(self._candidates[mask])

    @classmethod
    def from_matrices(cls, matrices, ids, kind, **kw) -> "DistanceOracle":
        """Construct directly from per-slot distance matrices (for tests/toys)."""
        return cls([np.asarray(m, dtype=float) for m in matrices], ids, kind, **kw)


def build_distance_oracle(snapshots, metric: str, *, need_paths: bool = False,
                          dtype=None) -> DistanceOracle:
    """Run per-slot shortest paths over snapshot graphs.

    Hop metric uses unweighted (BFS-style) distances. Large networks default to
    float32 storage; small ones keep float64.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if not snapshots:
        raise ValueError("at least one snapshot required")
    nt = snapshots[0].nodes
    n = nt.n_nodes
    if dtype is None:
        dtype = np.float64 if n <= 768 else np.float32

    matrices, preds = [], []
    for snap in snapshots:
        csr = snap.to_csr(metric)
        res = dijkstra(csr, directed=False, unweighted=(metric == "hop"),
                       return_predecessors=need_paths)
        if need_paths:
            dist, pred = res
            preds.append(pred.astype(np.int32))
        else:
            dist = res
        matrices.append(np.ascontiguousarray(dist, dtype=dtype))

    return DistanceOracle(matrices, nt.ids, nt.kind, shell=nt.shell, orbit=nt.orbit,
                          in_orbit=nt.in_orbit, orbit_key=nt.orbit_key, metric=metric,
                          slot_seconds=_infer_slot_seconds(snapshots),
                          predecessors=preds if need_paths else None)


def _infer_slot_seconds(snapshots) -> float:
    if len(snapshots) >= 2:
        dt = float(snapshots[1].time_s - snapshots[0].time_s)
        if dt > 0:
            return dt
    return 300.0


def compute_c_qmin(oracle: DistanceOracle) -> float:
    """Smallest positive user-to-candidate distance over all slots.

    Falls back to 1.0 on instances with no finite positive pair (e.g. empty
    demand universes).
    """
    users = oracle.users_idx
    targets = np.concatenate([oracle.candidates_idx, oracle.origins_idx])
    best = np.inf
    if users.size and targets.size:
        for t in range(1, oracle.slot_count + 1):
            block = oracle.matrix(t)[np.ix_(users, targets)]
            pos = block[(block > 0) & np.isfinite(block)]
            if pos.size:
                best = min(best, float(pos.min()))
    return best if np.isfinite(best) else 1.0


@dataclass
class CostParams:
    """Cost-model knobs: metric, replication ratio alpha, storage ratios beta
    (ground) and gamma (satellite, optionally per shell), and c_qmin."""

    metric: str
    alpha: float
    beta: float
    gamma: float | Mapping[int, float]
    c_qmin: float

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        for g in self._gammas():
            if g < self.beta:
                raise ValueError("gamma must be >= beta for every shell")
        if self.c_qmin <= 0.0:
            raise ValueError("c_qmin must be positive")

    def _gammas(self):
        if isinstance(self.gamma, Mapping):
            return list(self.gamma.values())
        return [self.gamma]

    def gamma_for(self, shell: int) -> float:
        if isinstance(self.gamma, Mapping):
            return float(self.gamma[shell])
        return float(self.gamma)

    @classmethod
    def from_oracle(cls, oracle: DistanceOracle, *, alpha: float = 50.0, beta: float = 1.0,
                    gamma: float | Mapping[int, float] = 10.0) -> "CostParams":
        return cls(metric=oracle.metric, alpha=alpha, beta=beta, gamma=gamma,
                   c_qmin=compute_c_qmin(oracle))

    def storage_rate(self, oracle: DistanceOracle) -> np.ndarray:
        """Per-node holding cost for one unit of content for one slot.

        Origins are exempt: they always hold every content, so charging them
        would shift all schedules by the same constant.
        """
        cached = getattr(self, "_rate_cache", None)
        if cached is not None and cached[0] is oracle:
            return cached[1]
        rate = np.full(oracle.n_nodes, self.beta * self.c_qmin)
        sat = oracle.kind == SAT
        if sat.any():
            gam = np.zeros(oracle.n_nodes)
            for s in np.unique(oracle.shell[sat]):
                gam[oracle.shell == s] = self.gamma_for(int(s))
            rate[sat] = gam[sat] * self.c_qmin
        rate[oracle.kind == ORIGIN] = 0.0
        object.__setattr__(self, "_rate_cache", (oracle, rate))
        return rate


@dataclass
class ReplicaSchedule:
    """Chosen replica node sets S_{c,t}; origins are members of every set."""

    contents: list[str]
    slot_count: int
    sets: dict[str, list[tuple[int, ...]]]

    @classmethod
    def origin_only(cls, contents: Sequence[str], slot_count: int,
                    origins: Sequence[int]) -> "ReplicaSchedule":
        base = tuple(sorted(int(o) for o in origins))
        return cls(list(contents), slot_count,
                   {c: [base] * slot_count for c in contents})

    def nodes(self, content: str, t: int) -> tuple[int, ...]:
        return self.sets[content][t - 1]

    def validate(self, oracle: DistanceOracle) -> None:
        origins = set(int(i) for i in oracle.origins_idx)
        allowed = origins | set(int(i) for i in oracle.candidates_idx)
        for c in self.contents:
            slots = self.sets[c]
            if len(slots) != self.slot_count:
                raise ValueError(f"content {c!r}: wrong number of slots")
            for t, st in enumerate(slots, start=1):
                members = set(st)
                if not origins <= members:
                    raise ValueError(f"content {c!r} slot {t}: origins missing from replica set")
                if not members <= allowed:
                    raise ValueError(f"content {c!r} slot {t}: non-candidate members present")

    def mean_replica_count(self, oracle: DistanceOracle) -> float:
        """Average number of non-origin replicas per (content, slot)."""
        origins = set(int(i) for i in oracle.origins_idx)
        total = sum(len(set(st) - origins) for c in self.contents for st in self.sets[c])
        cells = max(len(self.contents) * self.slot_count, 1)
        return total / cells

    def to_rows(self, ids: Sequence[str]):
        for c in sorted(self.contents):
            for t, st in enumerate(self.sets[c], start=1):
                for node in sorted(st):
                    yield c, t, ids[node]


@dataclass
class CostBreakdown:
    query: float
    replication: float
    storage: float

    @property
    def total(self) -> float:
        return self.query + self.replication + self.storage

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(self.query + other.query,
                             self.replication + other.replication,
                             self.storage + other.storage)


def _weighted_min(dem: np.ndarray, dists: np.ndarray) -> float:
    """Sum of demand * nearest-distance, treating zero-demand users as free."""
    nn = dists.min(axis=1) if dists.ndim == 2 else dists
    with np.errstate(invalid="ignore"):
        terms = np.where(dem > 0, dem * nn, 0.0)
    return float(terms.sum())


def query_cost(schedule: ReplicaSchedule, demand, oracle: DistanceOracle) -> float:
    """Demand-weighted distance from each user to its closest replica, summed
    over contents and slots. +inf when a demanding user is fully disconnected."""
    users = np.array([oracle.index[u] for u in demand.users], dtype=np.int64)
    total = 0.0
    for ci, c in enumerate(demand.contents):
        for t in range(1, min(demand.slot_count, schedule.slot_count) + 1):
            dem = demand.values[:, ci, t - 1]
            if not dem.any():
                continue
            block = oracle.matrix(t)[np.ix_(users, np.asarray(schedule.nodes(c, t)))]
            total += _weighted_min(dem, np.asarray(block, dtype=float))
    return total


def replication_cost(schedule: ReplicaSchedule, oracle: DistanceOracle, alpha: float) -> float:
    """alpha-weighted distance from each slot-t replica to its nearest slot-(t-1)
    replica; the slot-0 replica set is the origin set."""
    origins = tuple(int(i) for i in oracle.origins_idx)
    total = 0.0
    for c in schedule.contents:
        prev = origins
        for t in range(1, schedule.slot_count + 1):
            cur = schedule.nodes(c, t)
            block = np.asarray(oracle.matrix(t)[np.ix_(cur, prev)], dtype=float)
            total += alpha * float(block.min(axis=1).sum())
            prev = cur
    return total


def storage_cost(schedule: ReplicaSchedule, catalog, params: CostParams,
                 oracle: DistanceOracle) -> float:
    """Content-size-weighted holding cost per slot: beta*c_qmin at ground nodes,
    gamma*c_qmin at satellites, zero at origins."""
    rate = params.storage_rate(oracle)
    total = 0.0
    for c in schedule.contents:
        size = catalog.size_of(c) if catalog is not None else 1.0
        for t in range(1, schedule.slot_count + 1):
            total += size * float(rate[np.asarray(schedule.nodes(c, t))].sum())
    return total


def total_cost(schedule: ReplicaSchedule, demand, catalog, oracle: DistanceOracle,
               params: CostParams) -> CostBreakdown:
    return CostBreakdown(
        query=query_cost(schedule, demand, oracle),
        replication=replication_cost(schedule, oracle, params.alpha),
        storage=storage_cost(schedule, catalog, params, oracle),
    )


def disconnected_users(schedule: ReplicaSchedule, demand, oracle: DistanceOracle):
    """(content, slot, user_id) triples where positive demand cannot reach any
    replica, origin included. These drive the +inf query-cost flagging."""
    users = np.array([oracle.index[u] for u in demand.users], dtype=np.int64)
    out = []
    for ci, c in enumerate(demand.contents):
        for t in range(1, min(demand.slot_count, schedule.slot_count) + 1):
            dem = demand.values[:, ci, t - 1]
            if not dem.any():
                continue
            block = oracle.matrix(t)[np.ix_(users, np.asarray(schedule.nodes(c, t)))]
            nn = np.asarray(block, dtype=float).min(axis=1)
            for ui in np.flatnonzero((dem > 0) & ~np.isfinite(nn)):
                out.append((c, t, demand.users[int(ui)]))
    return out
