"""Detector-count ingestion, route-flow reconstruction, spawn scheduling.

The counts file is plain structured text. Two-token lines are directives,
three-token lines are records:

    binwidth_s 30
    horizon_s 3600
    <edge_id> <bin_index> <count>

Missing (edge, bin) entries are zero. Edges without any record carry no
detector and are left unconstrained by the flow reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .netmodel import Route, RoadNetwork, SchemaError, ValidationError


@dataclass
class DetectorSeries:
    bin_s: float
    horizon_s: float
    counts: dict[str, np.ndarray]  # edge id -> per-bin vehicle counts

    @property
    def n_bins(self) -> int:
        return int(round(self.horizon_s / self.bin_s))

    def total(self, edge_id: str) -> int:
        series = self.counts.get(edge_id)
        return 0 if series is None else int(series.sum())


@dataclass
class FlowAssignment:
    """Per-route, per-bin flows (vehicles per bin).

    A route carries one flow value per bin, identical on every edge of the
    route within that bin (no mid-route sinks), so conservation along the
    route holds by construction.
    """

    bin_s: float
    horizon_s: float
    routes: dict[str, Route]
    route_flows: dict[str, np.ndarray]

    def edge_flow(self, edge_id: str, bin_idx: int) -> float:
        return sum(flows[bin_idx]
                   for rid, flows in self.route_flows.items()
                   if edge_id in self.routes[rid].edges)


class SpawnEvent(NamedTuple):
    time_s: float
    route_id: str
    vehicle_id: int


@dataclass
class SpawnSchedule:
    horizon_s: float
    events: list[SpawnEvent]  # sorted by (time_s, route_id)


def ingest_counts(path, net: RoadNetwork, bin_s: float = 30.0) -> DetectorSeries:
    """Parse and validate a counts file against the network."""
    records: list[tuple[str, int, int]] = []
    horizon_s = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) == 2:
                key, value = parts
                if key == "binwidth_s":
                    bin_s = float(value)
                elif key == "horizon_s":
                    horizon_s = float(value)
                else:
                    raise SchemaError(f"{path}:{lineno}: unknown directive "
                                      f"{key!r}")
            elif len(parts) == 3:
                edge_id, bin_txt, count_txt = parts
                if edge_id not in net.edges:
                    raise ValidationError(
                        f"{path}:{lineno}: unknown edge id {edge_id!r}")
                try:
                    bin_idx, count = int(bin_txt), int(count_txt)
                except ValueError as exc:
                    raise SchemaError(f"{path}:{lineno}: {exc}") from exc
                if count < 0:
                    raise SchemaError(
                        f"{path}:{lineno}: negative count {count} on edge "
                        f"{edge_id!r}")
                if bin_idx < 0:
                    raise SchemaError(f"{path}:{lineno}: negative bin index")
                records.append((edge_id, bin_idx, count))
            else:
                raise SchemaError(f"{path}:{lineno}: expected "
                                  f"'edge bin count' record")
    max_bin = max((b for _, b, _ in records), default=-1)
    if horizon_s is None:
        horizon_s = (max_bin + 1) * bin_s
    n_bins = int(round(horizon_s / bin_s))
    if max_bin >= n_bins:
        raise ValidationError(f"{path}: bin index {max_bin} outside horizon "
                              f"({n_bins} bins of {bin_s}s)")
    counts: dict[str, np.ndarray] = {}
    for edge_id, bin_idx, count in records:
        series = counts.setdefault(edge_id, np.zeros(n_bins, dtype=np.int64))
        series[bin_idx] += count
    return DetectorSeries(bin_s=bin_s, horizon_s=horizon_s, counts=counts)


def reconstruct_flows(net: RoadNetwork, counts: DetectorSeries,
                      candidate_routes: list[Route],
                      ) -> tuple[FlowAssignment, dict[str, float]]:
    """Greedy path-flow decomposition of detector counts onto routes.

    Per bin, independently: pick the candidate route whose smallest
    residual edge count is largest, assign that bottleneck as its flow,
    subtract it from the route's edges, and repeat until no route has a
    positive bottleneck. Edges without detectors are unconstrained.

    Returns the assignment and the per-edge absolute count error summed
    over bins (the all-zero assignment's residual is never exceeded:
    assigned flows only ever subtract what a bin's counts can support).
    """
    for r in candidate_routes:
        net.validate_route(r)
    routes = {r.id: r for r in candidate_routes}
    if len(routes) != len(candidate_routes):
        raise ValidationError("duplicate route ids in candidate set")
    n_bins = counts.n_bins
    flows = {r.id: np.zeros(n_bins) for r in candidate_routes}
    residual_by_edge = {e: 0.0 for e in counts.counts}

    for b in range(n_bins):
        residual = {e: float(series[b]) for e, series in counts.counts.items()}
        while True:
            best = None
            best_bottleneck = 0.0
            for r in candidate_routes:
                metered = [residual[e] for e in r.edges if e in residual]
                if not metered:
                    continue
                bottleneck = min(metered)
                if bottleneck > best_bottleneck:
                    best, best_bottleneck = r, bottleneck
            if best is None:
                break
            flows[best.id][b] += best_bottleneck
            for e in best.edges:
                if e in residual:
                    residual[e] -= best_bottleneck
        for e, left in residual.items():
            residual_by_edge[e] += abs(left)

    assignment = FlowAssignment(bin_s=counts.bin_s, horizon_s=counts.horizon_s,
                                routes=routes, route_flows=flows)
    return assignment, residual_by_edge


def spawn_schedule(flows: FlowAssignment, seed: int) -> SpawnSchedule:
    """Sample a Poisson spawn schedule from per-bin route flows.

    Per route and bin the insertion count is Poisson with the bin flow as
    mean and times uniform within the bin. Fully deterministic for a given
    (flows, seed); vehicle ids are assigned in time order so the id
    sequence is stable across scenarios sharing the same demand.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    raw: list[tuple[float, str]] = []
    for rid in sorted(flows.route_flows):
        series = flows.route_flows[rid]
        for b, mean in enumerate(series):
            if mean < 0:
                raise ValidationError(f"route {rid!r}: negative flow in "
                                      f"bin {b}")
            n = int(rng.poisson(mean))
            if n == 0:
                continue
            start = b * flows.bin_s
            times = start + flows.bin_s * rng.random(n)
            raw.extend((float(t), rid) for t in times)
    raw.sort()
    events = [SpawnEvent(t, rid, vid) for vid, (t, rid) in enumerate(raw)]
    return SpawnSchedule(horizon_s=flows.horizon_s, events=events)


def write_schedule(path, schedule: SpawnSchedule) -> None:
    """Export (time_s, route_id, vehicle_id) rows for replay and audit."""
    with open(path, "w") as fh:
        fh.write("# time_s\troute_id\tvehicle_id\n")
        for ev in schedule.events:
            fh.write(f"{ev.time_s!r}\t{ev.route_id}\t{ev.vehicle_id}\n")
