"""Lane-resolved highway network: loading, merge-point detection, distances.

The network file is plain structured text, one record per line:

    node <id>
    edge <id> <tail> <head> <length_m> <lanes> <speed_limit_mps>

Blank lines and ``#`` comments are ignored. All nodes referenced by edges
must be declared. Lane index 0 is the rightmost lane of an edge.

A merge point is any junction whose incoming lanes outnumber its outgoing
lanes (pure sinks excluded: traffic exiting the network is not a merge).
At each merge the rightmost surplus incoming lanes are designated as the
yielding/merging lanes; incoming edges are ordered rightmost-first by
(lane_count, id), so the narrowest approach (the ramp) joins from the
right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


UNREACHABLE = math.inf


class SchemaError(ValueError):
    """Malformed record in a network/counts/config file."""


class ValidationError(ValueError):
    """Structurally parseable input that violates a model invariant."""


class IntegrityError(RuntimeError):
    """Simulation state inconsistent with the network it runs on."""


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    length_m: float
    lanes: int
    speed_limit_mps: float


@dataclass(frozen=True)
class Route:
    """Ordered, head-to-tail connected list of edge ids."""

    id: str
    edges: tuple[str, ...]


@dataclass(frozen=True)
class MergePoint:
    """A junction where at least one incoming lane must yield.

    ``merging_lanes`` lists the designated (edge_id, lane) pairs, rightmost
    first. ``targets`` maps each designated lane to the adjacent lane on its
    left (the lane merged into), which may sit on a different incoming edge
    for ramp merges. ``position`` anchors the physical merge location at the
    end of the first designated lane's approach edge.
    """

    id: str
    node: str
    in_lanes: int
    out_lanes: int
    merging_lanes: tuple[tuple[str, int], ...]
    targets: dict[tuple[str, int], tuple[str, int]] = field(hash=False)
    position: tuple[str, float] = ("", 0.0)


class RoadNetwork:
    """Immutable after construction; safe for concurrent reads."""

    def __init__(self, nodes: set[str], edges: list[Edge]):
        self.nodes = frozenset(nodes)
        self.edges: dict[str, Edge] = {}
        self.in_edges: dict[str, list[str]] = {n: [] for n in nodes}
        self.out_edges: dict[str, list[str]] = {n: [] for n in nodes}
        for e in edges:
            if e.id in self.edges:
                raise ValidationError(f"duplicate edge id {e.id!r}")
            for n in (e.tail, e.head):
                if n not in self.nodes:
                    raise ValidationError(
                        f"edge {e.id!r} references undefined node {n!r}")
            if e.lanes < 1:
                raise ValidationError(f"edge {e.id!r}: lanes must be >= 1")
            if e.length_m <= 0:
                raise ValidationError(f"edge {e.id!r}: length must be > 0")
            if e.speed_limit_mps <= 0:
                raise ValidationError(f"edge {e.id!r}: speed limit must be > 0")
            self.edges[e.id] = e
            self.out_edges[e.tail].append(e.id)
            self.in_edges[e.head].append(e.id)
        for n in nodes:
            self.in_edges[n].sort()
            self.out_edges[n].sort()
        self._merge_points: list[MergePoint] | None = None
        # (edge, lane) -> rank among the node's continuing lanes, counted
        # from the right; drives the lane mapping across junctions.
        self._continuation_rank: dict[tuple[str, int], int] = {}
        self._designated: dict[tuple[str, int], str] = {}
        self._index_junctions()

    def incoming_lane_order(self, node: str) -> list[tuple[str, int]]:
        """All incoming lanes at ``node``, rightmost first."""
        order = []
        for eid in sorted(self.in_edges[node],
                          key=lambda i: (self.edges[i].lanes, i)):
            order.extend((eid, lane) for lane in range(self.edges[eid].lanes))
        return order

    def _index_junctions(self) -> None:
        for node in sorted(self.nodes):
            if not self.out_edges[node]:
                continue
            order = self.incoming_lane_order(node)
            out_total = sum(self.edges[i].lanes for i in self.out_edges[node])
            surplus = max(0, len(order) - out_total)
            for q, key in enumerate(order):
                if q < surplus:
                    self._designated[key] = node
                else:
                    self._continuation_rank[key] = q - surplus

    def continuation_lane(self, edge_id: str, lane: int, next_edge_id: str) -> int:
        """Lane taken on ``next_edge_id`` when crossing the junction."""
        rank = self._continuation_rank.get((edge_id, lane), lane)
        return min(rank, self.edges[next_edge_id].lanes - 1)

    def is_designated(self, edge_id: str, lane: int) -> bool:
        return (edge_id, lane) in self._designated

    def validate_route(self, route: Route) -> None:
        if not route.edges:
            raise ValidationError(f"route {route.id!r} is empty")
        for eid in route.edges:
            if eid not in self.edges:
                raise ValidationError(
                    f"route {route.id!r} references unknown edge {eid!r}")
        for prev, nxt in zip(route.edges, route.edges[1:]):
            if self.edges[prev].head != self.edges[nxt].tail:
                raise ValidationError(
                    f"route {route.id!r}: edges {prev!r} and {nxt!r} "
                    f"are not connected")

    def merge_points(self) -> list[MergePoint]:
        if self._merge_points is None:
            self._merge_points = detect_merge_points(self)
        return self._merge_points


def load_network(path) -> RoadNetwork:
    """Parse and validate a network file."""
    nodes: set[str] = set()
    edges: list[Edge] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0]
            if kind == "node":
                if len(parts) != 2:
                    raise SchemaError(f"{path}:{lineno}: node record needs "
                                      f"exactly one id")
                nodes.add(parts[1])
            elif kind == "edge":
                if len(parts) != 7:
                    raise SchemaError(
                        f"{path}:{lineno}: edge record needs 6 fields "
                        f"(id tail head length_m lanes speed_limit_mps)")
                try:
                    edges.append(Edge(parts[1], parts[2], parts[3],
                                      float(parts[4]), int(parts[5]),
                                      float(parts[6])))
                except ValueError as exc:
                    raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            else:
                raise SchemaError(
                    f"{path}:{lineno}: unknown record type {kind!r}")
    return RoadNetwork(nodes, edges)


def detect_merge_points(net: RoadNetwork) -> list[MergePoint]:
    """All junctions where incoming lanes outnumber outgoing lanes.

    Emitted in node-id order. Each designated lane's merge target is its
    immediate left neighbour in the rightmost-first lane order (surplus
    lanes cascade leftward; the leftmost surplus lane targets the first
    continuing lane).
    """
    points = []
    for node in sorted(net.nodes):
        out_ids = net.out_edges[node]
        if not out_ids:
            continue
        order = net.incoming_lane_order(node)
        in_total = len(order)
        out_total = sum(net.edges[i].lanes for i in out_ids)
        if in_total <= out_total:
            continue
        surplus = in_total - out_total
        merging = tuple(order[:surplus])
        targets = {order[q]: order[q + 1] for q in range(surplus)}
        anchor_edge = merging[0][0]
        points.append(MergePoint(
            id=f"m_{node}",
            node=node,
            in_lanes=in_total,
            out_lanes=out_total,
            merging_lanes=merging,
            targets=targets,
            position=(anchor_edge, net.edges[anchor_edge].length_m),
        ))
    return points


def distance_to_merge(state, m: MergePoint, net: RoadNetwork) -> float:
    """Along-route metres from the vehicle's front bumper to the merge.

    ``state`` needs ``route`` (edge-id sequence), ``route_idx`` and ``pos``.
    Returns ``UNREACHABLE`` (math.inf) when the remaining route never
    arrives at the merge node, including vehicles already past it.
    """
    edge_id = state.route[state.route_idx]
    edge = net.edges.get(edge_id)
    if edge is None:
        raise IntegrityError(f"vehicle {getattr(state, 'id', '?')} on "
                             f"unknown edge {edge_id!r}")
    d = edge.length_m - state.pos
    if edge.head == m.node:
        return d
    for eid in state.route[state.route_idx + 1:]:
        nxt = net.edges[eid]
        d += nxt.length_m
        if nxt.head == m.node:
            return d
    return UNREACHABLE
