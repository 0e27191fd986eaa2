"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately avoid the package's own code paths: direct
factorial summation instead of the recurrence, exhaustive integer splits
instead of the greedy solver, fine-grained forward simulation instead of
the closed-form reach test, and an event-driven Monte-Carlo loss system.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from mergesim.netmodel import Edge, RoadNetwork, Route
from mergesim.simcore import CONNECTED_KINDS, AV_KINDS


# ------------------------------------------------------------- networks

def ramp_network() -> RoadNetwork:
    """Two-lane mainline with a one-lane on-ramp joining at node B."""
    return RoadNetwork(
        {"A", "B", "C", "RA"},
        [Edge("M1", "A", "B", 1000.0, 2, 30.0),
         Edge("M2", "B", "C", 1000.0, 2, 30.0),
         Edge("R1", "RA", "B", 500.0, 1, 25.0)])


RAMP_ROUTES = {"main": Route("main", ("M1", "M2")),
               "ramp": Route("ramp", ("R1", "M2"))}


def ramp_network_text() -> str:
    return (
        "# two-lane mainline, one-lane on-ramp at B\n"
        "node A\nnode B\nnode C\nnode RA\n"
        "edge M1 A B 1000 2 30\n"
        "edge M2 B C 1000 2 30\n"
        "edge R1 RA B 500 1 25\n")


def corridor_network() -> RoadNetwork:
    """10-junction corridor: three on-ramps plus one lane drop."""
    nodes = {f"N{i}" for i in range(7)} | {"B0", "C0", "D0"}
    edges = [
        Edge("H0", "N0", "N1", 1200.0, 2, 30.0),
        Edge("H1", "N1", "N2", 1200.0, 2, 30.0),
        Edge("H2", "N2", "N3", 1200.0, 2, 30.0),
        Edge("H3", "N3", "N4", 1200.0, 2, 30.0),
        Edge("H4", "N4", "N5", 1200.0, 2, 30.0),
        Edge("H5", "N5", "N6", 1200.0, 1, 30.0),
        Edge("RB1", "B0", "N1", 400.0, 1, 25.0),
        Edge("RC1", "C0", "N2", 400.0, 1, 25.0),
        Edge("RD1", "D0", "N3", 400.0, 1, 25.0),
    ]
    return RoadNetwork(nodes, edges)


CORRIDOR_ROUTES = {
    "main": Route("main", ("H0", "H1", "H2", "H3", "H4", "H5")),
    "rampB": Route("rampB", ("RB1", "H1", "H2", "H3", "H4", "H5")),
    "rampC": Route("rampC", ("RC1", "H2", "H3", "H4", "H5")),
    "rampD": Route("rampD", ("RD1", "H3", "H4", "H5")),
}


def congested_network_text() -> str:
    """Three on-ramps into a two-lane mainline, no lane drop (keeps the
    corridor flowing so congestion stays local to the merges)."""
    lines = ["node N0", "node N1", "node N2", "node N3", "node N4",
             "node B0", "node C0", "node D0",
             "edge H0 N0 N1 1200 2 30",
             "edge H1 N1 N2 1200 2 30",
             "edge H2 N2 N3 1200 2 30",
             "edge H3 N3 N4 1200 2 30",
             "edge RB1 B0 N1 400 1 25",
             "edge RC1 C0 N2 400 1 25",
             "edge RD1 D0 N3 400 1 25"]
    return "\n".join(lines) + "\n"


def write_congested_scenario(dirpath, horizon_s: int, kind: str, p: float,
                             seed: int, main_per_h: float = 1000.0,
                             ramp_per_h: float = 250.0):
    net_path = dirpath / "congested.net"
    counts_path = dirpath / "congested.counts"
    yaml_path = dirpath / f"congested_{kind}_{int(p * 100)}.yaml"
    if not net_path.exists():
        net_path.write_text(congested_network_text())
    if not counts_path.exists():
        n_bins = int(horizon_s // 30)
        main = bresenham_counts(main_per_h, n_bins, 30.0)
        ramps = {r: bresenham_counts(ramp_per_h, n_bins, 30.0)
                 for r in ("RB1", "RC1", "RD1")}
        per_edge = {"H0": main, **ramps}
        h1 = [a + b for a, b in zip(main, ramps["RB1"])]
        h2 = [a + b for a, b in zip(h1, ramps["RC1"])]
        h3 = [a + b for a, b in zip(h2, ramps["RD1"])]
        per_edge.update({"H1": h1, "H2": h2, "H3": h3})
        write_counts_file(counts_path, per_edge, 30.0, horizon_s)
    yaml_path.write_text(
        "schema: 1\n"
        "network: congested.net\n"
        "counts: congested.counts\n"
        "routes:\n"
        "  main: [H0, H1, H2, H3]\n"
        "  rampB: [RB1, H1, H2, H3]\n"
        "  rampC: [RC1, H2, H3]\n"
        "  rampD: [RD1, H3]\n"
        f"av_kind: {kind}\n"
        f"penetration: {p}\n"
        f"horizon_s: {horizon_s}\n"
        f"seed: {seed}\n")
    return yaml_path


def corridor_network_text() -> str:
    lines = ["node N0", "node N1", "node N2", "node N3", "node N4",
             "node N5", "node N6", "node B0", "node C0", "node D0",
             "edge H0 N0 N1 1200 2 30",
             "edge H1 N1 N2 1200 2 30",
             "edge H2 N2 N3 1200 2 30",
             "edge H3 N3 N4 1200 2 30",
             "edge H4 N4 N5 1200 2 30",
             "edge H5 N5 N6 1200 1 30",
             "edge RB1 B0 N1 400 1 25",
             "edge RC1 C0 N2 400 1 25",
             "edge RD1 D0 N3 400 1 25"]
    return "\n".join(lines) + "\n"


def brute_force_merge_nodes(net: RoadNetwork) -> list[str]:
    """Independent per-node lane recount of the merge definition."""
    nodes = []
    for node in sorted(net.nodes):
        in_lanes = sum(e.lanes for e in net.edges.values() if e.head == node)
        out_lanes = sum(e.lanes for e in net.edges.values() if e.tail == node)
        if out_lanes > 0 and in_lanes > out_lanes:
            nodes.append(node)
    return nodes


# ------------------------------------------------------- demand fixtures

def bresenham_counts(rate_per_h: float, n_bins: int, bin_s: float) -> list[int]:
    """Integer per-bin counts whose cumulative sum tracks the target rate."""
    out, prev = [], 0
    per_bin = rate_per_h * bin_s / 3600.0
    for b in range(1, n_bins + 1):
        cum = math.floor(per_bin * b)
        out.append(cum - prev)
        prev = cum
    return out


DIURNAL = {0: 0.3, 1: 0.3, 2: 0.3, 3: 0.3, 4: 0.3, 5: 0.3, 6: 0.8,
           7: 1.8, 8: 1.8, 9: 1.0, 10: 1.0, 11: 1.0, 12: 1.0, 13: 1.0,
           14: 1.0, 15: 1.0, 16: 1.9, 17: 1.9, 18: 1.2, 19: 0.6,
           20: 0.6, 21: 0.6, 22: 0.6, 23: 0.6}


def diurnal_counts(base_per_h: float, horizon_s: int,
                   bin_s: float = 30.0) -> list[int]:
    """Day-shaped integer counts (flat profile when horizon < 24 h)."""
    n_bins = int(horizon_s // bin_s)
    bins_per_h = int(3600 // bin_s)
    out = []
    for b in range(n_bins):
        hour = (b // bins_per_h) % 24
        mult = DIURNAL[hour] if horizon_s >= 86400 else 1.0
        out.append((base_per_h * mult, b))
    # integerize hour by hour so peaks stay sharp
    counts = []
    prev, cum = 0, 0.0
    for rate, _ in out:
        cum += rate * bin_s / 3600.0
        c = math.floor(cum)
        counts.append(c - prev)
        prev = c
    return counts


def write_counts_file(path, per_edge: dict[str, list[int]], bin_s: float,
                      horizon_s: int) -> None:
    with open(path, "w") as fh:
        fh.write(f"binwidth_s {bin_s:g}\n")
        fh.write(f"horizon_s {horizon_s}\n")
        for edge_id, series in per_edge.items():
            for b, c in enumerate(series):
                if c:
                    fh.write(f"{edge_id} {b} {c}\n")


def write_ramp_scenario(dirpath, horizon_s: int, kind: str, p: float,
                        seed: int, main_per_h: float = 170.0,
                        ramp_per_h: float = 65.0, name: str = "scenario"):
    """Write network + counts + scenario YAML; returns the YAML path."""
    net_path = dirpath / "ramp.net"
    counts_path = dirpath / f"{name}.counts"
    yaml_path = dirpath / f"{name}.yaml"
    if not net_path.exists():
        net_path.write_text(ramp_network_text())
    if not counts_path.exists():
        main = diurnal_counts(main_per_h, horizon_s)
        ramp = diurnal_counts(ramp_per_h, horizon_s)
        merged = [a + b for a, b in zip(main, ramp)]
        write_counts_file(counts_path, {"M1": main, "R1": ramp, "M2": merged},
                          30.0, horizon_s)
    yaml_path.write_text(
        "schema: 1\n"
        f"network: ramp.net\n"
        f"counts: {counts_path.name}\n"
        "routes:\n"
        "  main: [M1, M2]\n"
        "  ramp: [R1, M2]\n"
        f"av_kind: {kind}\n"
        f"penetration: {p}\n"
        f"horizon_s: {horizon_s}\n"
        f"seed: {seed}\n")
    return yaml_path


def write_corridor_scenario(dirpath, horizon_s: int, kind: str, p: float,
                            seed: int, main_per_h: float = 1000.0,
                            ramp_per_h: float = 250.0,
                            name: str = "corridor"):
    net_path = dirpath / "corridor.net"
    counts_path = dirpath / f"{name}.counts"
    yaml_path = dirpath / f"{name}_{kind}_{int(p * 100)}.yaml"
    if not net_path.exists():
        net_path.write_text(corridor_network_text())
    if not counts_path.exists():
        n_bins = int(horizon_s // 30)
        main = bresenham_counts(main_per_h, n_bins, 30.0)
        ramps = {r: bresenham_counts(ramp_per_h, n_bins, 30.0)
                 for r in ("RB1", "RC1", "RD1")}
        per_edge = {"H0": main, **ramps}
        h1 = [a + b for a, b in zip(main, ramps["RB1"])]
        h2 = [a + b for a, b in zip(h1, ramps["RC1"])]
        h3 = [a + b for a, b in zip(h2, ramps["RD1"])]
        per_edge.update({"H1": h1, "H2": h2, "H3": h3, "H4": h3, "H5": h3})
        write_counts_file(counts_path, per_edge, 30.0, horizon_s)
    yaml_path.write_text(
        "schema: 1\n"
        "network: corridor.net\n"
        f"counts: {counts_path.name}\n"
        "routes:\n"
        "  main: [H0, H1, H2, H3, H4, H5]\n"
        "  rampB: [RB1, H1, H2, H3, H4, H5]\n"
        "  rampC: [RC1, H2, H3, H4, H5]\n"
        "  rampD: [RD1, H3, H4, H5]\n"
        f"av_kind: {kind}\n"
        f"penetration: {p}\n"
        f"horizon_s: {horizon_s}\n"
        f"seed: {seed}\n")
    return yaml_path


# --------------------------------------------------------------- oracles

def erlang_direct(a: float, k: int) -> float:
    """Blocking probability by direct summation of (a^i / i!) terms."""
    terms = [1.0]
    for i in range(1, k + 1):
        terms.append(terms[-1] * a / i)
    return terms[k] / math.fsum(terms)


def min_servers_scan(a: float, epsilon: float, kmax: int = 10000) -> int:
    for k in range(kmax):
        if erlang_direct(a, k) < epsilon:
            return k
    raise AssertionError("scan exhausted")


def min_residual_by_enumeration(edge_counts: dict[str, int],
                                routes: list[Route],
                                max_units: int) -> int:
    """Exhaustive integer route-flow search for one bin's minimum residual."""
    best = sum(edge_counts.values())
    for combo in itertools.product(range(max_units + 1), repeat=len(routes)):
        residual = 0
        for edge, count in edge_counts.items():
            assigned = sum(f for f, r in zip(combo, routes)
                           if edge in r.edges)
            residual += abs(count - assigned)
        best = min(best, residual)
    return best


def forward_covers(speed: float, a_max: float, h: float, dist: float,
                   dt: float = 0.01) -> bool:
    """Max-acceleration forward simulation: does the vehicle cross ``dist``
    within the horizon?"""
    t = 0.0
    while t <= h + 1e-9:
        if speed * t + 0.5 * a_max * t * t >= dist:
            return True
        t += dt
    return False


def oracle_conflicts(state, net, merges, rp) -> set:
    """Forward-simulation re-derivation of the per-snapshot conflict set."""
    t = int(round(state.clock))
    by_lane: dict[tuple[str, int], list] = {}
    for v in state.vehicles.values():
        by_lane.setdefault((v.edge, v.lane), []).append(v)
    out = set()
    for m in merges:
        for key in m.merging_lanes:
            edge_len = net.edges[key[0]].length_m
            tedge, tlane = m.targets[key]
            tlen = net.edges[tedge].length_m
            for v in by_lane.get(key, []):
                if v.kind not in AV_KINDS:
                    continue
                d_j = edge_len - v.pos
                if d_j > rp.merge_zone_m:
                    continue
                if not forward_covers(v.speed, v.params.a_max, rp.h, d_j):
                    continue
                ids = []
                for w in by_lane.get((tedge, tlane), []):
                    if w.pos >= tlen:
                        continue
                    d_i = tlen - w.pos
                    if w.kind in CONNECTED_KINDS:
                        reached = w.length >= d_i
                    else:
                        reached = forward_covers(w.speed, w.params.a_max,
                                                 rp.h, d_i)
                    if reached:
                        ids.append(w.id)
                if ids:
                    out.add((t, v.id, m.id, tuple(sorted(ids))))
    return out


def mc_blocking(lam: float, mu_s: float, k: int, n_arrivals: int,
                seed: int, n_batches: int = 50) -> tuple[float, float]:
    """Monte-Carlo M/M/k loss system; returns (blocking fraction, batch-means
    standard error)."""
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n_arrivals))
    services = rng.exponential(mu_s, n_arrivals)
    busy: list[float] = []
    blocked = np.zeros(n_arrivals, dtype=bool)
    for i in range(n_arrivals):
        t = arrivals[i]
        while busy and busy[0] <= t:
            heapq.heappop(busy)
        if len(busy) < k:
            heapq.heappush(busy, t + services[i])
        else:
            blocked[i] = True
    est = blocked.mean()
    batches = np.array_split(blocked, n_batches)
    means = np.array([b.mean() for b in batches])
    se = means.std(ddof=1) / math.sqrt(n_batches)
    return float(est), float(se)
