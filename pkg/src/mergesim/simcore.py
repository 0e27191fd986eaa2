"""Discrete-time traffic engine: IDM car following, ramp merging, CCAV shifts.

One second of simulated time per step by default. Within a step: lane
changes are decided first (cooperative shifts, then merge attempts, both
from the committed state so later deciders see earlier moves), then
accelerations, then the ballistic update, junction crossings, the
collision guard, and finally spawn insertion. Every phase iterates in an
explicit deterministic order, so identical inputs give bit-identical runs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .netmodel import IntegrityError, MergePoint, RoadNetwork, Route

HV = "HV"
UCAV = "UCAV"
NCAV = "NCAV"
CCAV = "CCAV"
AV_KINDS = frozenset({UCAV, NCAV, CCAV})
CONNECTED_KINDS = frozenset({NCAV, CCAV})

# Hard deceleration floor; doubles as the collision-guard signal returned
# for a non-positive gap.
EMERGENCY_DECEL = -9.0


@dataclass
class DriverParams:
    """IDM parameters. v0=None tracks the current edge's speed limit."""

    v0: float | None = None
    T_h: float = 1.5
    a_max: float = 1.4
    b: float = 2.0
    s0: float = 2.0
    delta: float = 4.0


@dataclass
class SimConfig:
    dt: float = 1.0
    penetration: float = 0.0
    av_kind: str = UCAV
    hv_params: DriverParams = field(default_factory=DriverParams)
    av_params: DriverParams = field(default_factory=DriverParams)
    merge_zone_m: float = 150.0
    coop_zone_m: float = 250.0
    vehicle_length_m: float = 5.0
    guard_gap_m: float = 0.1


class VehicleState:
    __slots__ = ("id", "kind", "route", "route_idx", "lane", "pos", "speed",
                 "length", "params", "spawn_t")

    def __init__(self, vid: int, kind: str, route: tuple[str, ...], lane: int,
                 pos: float, speed: float, length: float,
                 params: DriverParams, spawn_t: float):
        self.id = vid
        self.kind = kind
        self.route = route
        self.route_idx = 0
        self.lane = lane
        self.pos = pos
        self.speed = speed
        self.length = length
        self.params = params
        self.spawn_t = spawn_t

    @property
    def edge(self) -> str:
        return self.route[self.route_idx]


class SimState:
    """Mutable world state advanced by step()."""

    def __init__(self, routes: dict[str, Route], kinds: dict[int, str],
                 pending, dt: float = 1.0):
        self.dt = dt
        self.step_count = 0
        self.vehicles: dict[int, VehicleState] = {}
        self.routes = routes
        self.kinds = kinds
        self.pending = deque(pending)  # due-ordered SpawnEvents not yet queued
        self.entry_queues: dict[str, deque] = {}
        self.exit_log: list[tuple[int, str, float, float]] = []
        self.guard_events = 0
        self.inserted = 0
        self.exited = 0

    @property
    def clock(self) -> float:
        return self.step_count * self.dt

    def pending_count(self) -> int:
        return len(self.pending) + sum(len(q) for q in self.entry_queues.values())


def idm_accel(gap: float, speed: float, lead_speed: float,
              params: DriverParams, v0: float | None = None) -> float:
    """IDM acceleration; pass gap=inf for the free-flow case.

    A non-positive gap with a leader returns the emergency floor (the
    collision guard in step() resolves the overlap itself).
    """
    if v0 is None:
        v0 = params.v0
        if v0 is None:
            raise ValueError("no desired speed: params.v0 is None and no "
                             "v0 override given")
    if gap <= 0:
        return EMERGENCY_DECEL
    free = 1.0 - (speed / v0) ** params.delta
    if math.isinf(gap):
        a = params.a_max * free
    else:
        s_star = (params.s0 + speed * params.T_h
                  + speed * (speed - lead_speed)
                  / (2.0 * math.sqrt(params.a_max * params.b)))
        a = params.a_max * (free - (s_star / gap) ** 2)
    return max(a, EMERGENCY_DECEL)


def assign_kind(vehicle_seed: int, p: float, scenario_kind: str) -> str:
    """Deterministic Bernoulli(p) type draw for one vehicle.

    The underlying uniform depends only on the seed, so scenarios that
    differ in AV kind (or penetration) share the same draw sequence: the
    same vehicles are AVs, only their behavior label changes.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"penetration {p} outside [0, 1]")
    u = np.random.default_rng(np.random.SeedSequence(vehicle_seed)).random()
    return scenario_kind if u < p else HV


def vehicle_type_seed(type_seed: int, vehicle_id: int) -> int:
    """Stable per-vehicle seed for assign_kind."""
    ss = np.random.SeedSequence((type_seed, vehicle_id))
    return int(ss.generate_state(1)[0])


def lane_occupancy(state: SimState) -> dict[tuple[str, int], list[VehicleState]]:
    occ: dict[tuple[str, int], list[VehicleState]] = {}
    for v in state.vehicles.values():
        occ.setdefault((v.edge, v.lane), []).append(v)
    for vehicles in occ.values():
        vehicles.sort(key=lambda v: (v.pos, v.id))
    return occ


def _move_lane(occ, v: VehicleState, new_edge: str, new_lane: int,
               new_pos: float) -> None:
    occ[(v.edge, v.lane)].remove(v)
    if new_edge != v.edge:
        v.route = v.route[:v.route_idx] + (new_edge,) + v.route[v.route_idx + 1:]
    v.lane = new_lane
    v.pos = new_pos
    dest = occ.setdefault((new_edge, new_lane), [])
    dest.append(v)
    dest.sort(key=lambda w: (w.pos, w.id))


def _node_coord(v: VehicleState, net: RoadNetwork) -> float:
    """Position relative to the current edge's head node (<= 0 upstream)."""
    return v.pos - net.edges[v.edge].length_m


def _target_neighbors(occ, net: RoadNetwork, m: MergePoint, tedge: str,
                      tlane: int, u_me: float, exclude: int,
                      lookahead_m: float = 100.0):
    """Nearest leader/lag on the target lane, in merge-node coordinates.

    The leader search extends past the junction onto the target lane's
    continuation so a vehicle just downstream of the node still blocks.
    """
    lead = lead_u = None
    lag = lag_u = None
    for w in occ.get((tedge, tlane), []):
        if w.id == exclude:
            continue
        u = w.pos - net.edges[tedge].length_m
        if u >= u_me:
            if lead_u is None or u < lead_u:
                lead, lead_u = w, u
        elif lag_u is None or u > lag_u:
            lag, lag_u = w, u
    for out_id in net.out_edges[m.node]:
        ol = net.continuation_lane(tedge, tlane, out_id)
        for w in occ.get((out_id, ol), []):
            if w.pos > lookahead_m:
                break
            if lead_u is None or w.pos < lead_u:
                lead, lead_u = w, w.pos
    return lead, lead_u, lag, lag_u


def _gaps_acceptable(v: VehicleState, lead, lead_u, lag, lag_u,
                     u_me: float) -> bool:
    p = v.params
    if lead is not None:
        lead_gap = (lead_u - lead.length) - u_me
        if lead_gap < p.s0 + 0.5 * v.speed * p.T_h:
            return False
    if lag is not None:
        lag_gap = (u_me - v.length) - lag_u
        if lag_gap < p.s0 + 0.5 * lag.speed * p.T_h:
            return False
    return True


def attempt_merge(vehicle: VehicleState, m: MergePoint, state: SimState,
                  net: RoadNetwork, cfg: SimConfig, occ=None) -> bool:
    """Try to move a designated-lane vehicle onto its merge target lane.

    Returns True when merged; False leaves the vehicle yielding (its
    acceleration phase steers it to a stop at the merge-zone end).
    """
    if occ is None:
        occ = lane_occupancy(state)
    tedge, tlane = m.targets[(vehicle.edge, vehicle.lane)]
    u_me = _node_coord(vehicle, net)
    new_pos = net.edges[tedge].length_m + u_me
    if new_pos < 0.0:
        return False
    lead, lead_u, lag, lag_u = _target_neighbors(
        occ, net, m, tedge, tlane, u_me, vehicle.id)
    if not _gaps_acceptable(vehicle, lead, lead_u, lag, lag_u, u_me):
        return False
    _move_lane(occ, vehicle, tedge, tlane, new_pos)
    return True


def cooperative_shift(ccav: VehicleState, merging: VehicleState,
                      state: SimState, net: RoadNetwork, cfg: SimConfig,
                      m: MergePoint | None = None, occ=None) -> bool:
    """Shift a CCAV one lane away from the merge lane if gaps allow.

    Returns True when shifted, False when held (no adjacent lane, or the
    adjacent lane's lead/lag gaps fail the same acceptance thresholds
    merging uses).
    """
    if ccav.kind != CCAV:
        return False
    if occ is None:
        occ = lane_occupancy(state)
    edge = net.edges[ccav.edge]
    away = ccav.lane + 1
    if away >= edge.lanes:
        return False
    lead = lead_u = lag = lag_u = None
    u_me = ccav.pos
    for w in occ.get((ccav.edge, away), []):
        if w.pos >= u_me:
            if lead_u is None or w.pos < lead_u:
                lead, lead_u = w, w.pos
        elif lag_u is None or w.pos > lag_u:
            lag, lag_u = w, w.pos
    if not _gaps_acceptable(ccav, lead, lead_u, lag, lag_u, u_me):
        return False
    _move_lane(occ, ccav, ccav.edge, away, ccav.pos)
    return True


def _merge_tables(net: RoadNetwork) -> dict[tuple[str, int], MergePoint]:
    return {key: m for m in net.merge_points() for key in m.merging_lanes}


def _effective_v0(v: VehicleState, net: RoadNetwork) -> float:
    if v.params.v0 is not None:
        return v.params.v0
    return net.edges[v.edge].speed_limit_mps


def step(state: SimState, net: RoadNetwork, cfg: SimConfig) -> SimState:
    """Advance the world by one time step (in place; returns state)."""
    dt = state.dt
    occ = lane_occupancy(state)
    merge_by_lane = _merge_tables(net)

    # Cooperative lane-freeing: CCAVs on a merge target lane give way when
    # an AV is merging within the trigger zone.
    for m in net.merge_points():
        approaching = None
        for key in m.merging_lanes:
            for v in occ.get(key, []):
                if v.kind in AV_KINDS and -_node_coord(v, net) <= cfg.coop_zone_m:
                    approaching = v
                    break
            if approaching:
                break
        if approaching is None:
            continue
        for key in m.merging_lanes:
            tedge, tlane = m.targets[key]
            candidates = [v for v in occ.get((tedge, tlane), [])
                          if v.kind == CCAV
                          and -_node_coord(v, net) <= cfg.coop_zone_m]
            candidates.sort(key=lambda v: (-v.pos, v.id))
            for v in candidates:
                cooperative_shift(v, approaching, state, net, cfg, m, occ)

    # Merge attempts, nearest to the node first.
    for m in net.merge_points():
        for key in m.merging_lanes:
            candidates = [v for v in occ.get(key, [])
                          if -_node_coord(v, net) <= cfg.merge_zone_m]
            candidates.sort(key=lambda v: (-v.pos, v.id))
            for v in candidates:
                attempt_merge(v, m, state, net, cfg, occ)

    # Accelerations from the post-lane-change arrangement.
    accels: dict[int, float] = {}
    for vid in state.vehicles:
        v = state.vehicles[vid]
        v0 = _effective_v0(v, net)
        lane_vehicles = occ[(v.edge, v.lane)]
        i = lane_vehicles.index(v)
        edge_len = net.edges[v.edge].length_m
        designated = (v.edge, v.lane) in merge_by_lane
        if i + 1 < len(lane_vehicles):
            lead = lane_vehicles[i + 1]
            gap = lead.pos - lead.length - v.pos
            a = idm_accel(gap, v.speed, lead.speed, v.params, v0)
        elif not designated and v.route_idx + 1 < len(v.route):
            nxt = v.route[v.route_idx + 1]
            nl = net.continuation_lane(v.edge, v.lane, nxt)
            ahead = occ.get((nxt, nl))
            if ahead:
                w = ahead[0]
                gap = (edge_len - v.pos) + w.pos - w.length
                a = idm_accel(gap, v.speed, w.speed, v.params, v0)
            else:
                a = idm_accel(math.inf, v.speed, 0.0, v.params, v0)
        else:
            a = idm_accel(math.inf, v.speed, 0.0, v.params, v0)
        if designated and edge_len - v.pos <= cfg.merge_zone_m:
            # Unmerged vehicles in the zone treat its end as a standing
            # wall: no forced merge, no crossing the node on a lane that
            # ends. Upstream of the zone they hold speed (acceleration-lane
            # behavior).
            a_stop = idm_accel(edge_len - v.pos, v.speed, 0.0, v.params, v0)
            a = min(a, a_stop)
        accels[vid] = a

    # Ballistic update (speed first, then position with the new speed).
    for vid, a in accels.items():
        v = state.vehicles[vid]
        v.speed = max(0.0, v.speed + a * dt)
        v.pos += v.speed * dt

    # Junction crossings and exits.
    exited: list[int] = []
    t_next = (state.step_count + 1) * dt
    for vid in list(state.vehicles):
        v = state.vehicles[vid]
        while v.pos > net.edges[v.edge].length_m:
            edge_len = net.edges[v.edge].length_m
            if (v.edge, v.lane) in merge_by_lane:
                v.pos = edge_len
                v.speed = 0.0
                break
            if v.route_idx + 1 >= len(v.route):
                exited.append(vid)
                break
            nxt = v.route[v.route_idx + 1]
            v.lane = net.continuation_lane(v.edge, v.lane, nxt)
            v.pos -= edge_len
            v.route_idx += 1
    for vid in exited:
        v = state.vehicles.pop(vid)
        state.exit_log.append((vid, v.kind, v.spawn_t, t_next))
        state.exited += 1

    # Collision guard: clamp followers to keep a positive inter-vehicle
    # buffer; count every intervention.
    for key, lane_vehicles in sorted(lane_occupancy(state).items()):
        for i in range(len(lane_vehicles) - 2, -1, -1):
            leader = lane_vehicles[i + 1]
            follower = lane_vehicles[i]
            limit = leader.pos - leader.length - cfg.guard_gap_m
            if follower.pos > limit:
                follower.pos = max(0.0, limit)
                follower.speed = min(follower.speed, leader.speed)
                state.guard_events += 1
        for v in lane_vehicles:
            if v.speed < 0 or v.pos < 0 or v.pos > net.edges[v.edge].length_m:
                raise IntegrityError(
                    f"vehicle {v.id} out of bounds after step "
                    f"{state.step_count}: edge={v.edge} pos={v.pos} "
                    f"speed={v.speed}")

    _insert_spawns(state, net, cfg, t_next)
    state.step_count += 1
    return state


def _insert_spawns(state: SimState, net: RoadNetwork, cfg: SimConfig,
                   t_next: float) -> None:
    while state.pending and state.pending[0].time_s < t_next:
        ev = state.pending.popleft()
        entry = state.routes[ev.route_id].edges[0]
        state.entry_queues.setdefault(entry, deque()).append(ev)
    occ = lane_occupancy(state)
    for entry in sorted(state.entry_queues):
        queue = state.entry_queues[entry]
        while queue:
            ev = queue[0]
            v = _try_insert(state, net, cfg, occ, ev, entry, t_next)
            if v is None:
                break  # strict FIFO per entry edge
            queue.popleft()
            state.vehicles[ev.vehicle_id] = v
            occ.setdefault((entry, v.lane), []).append(v)
            occ[(entry, v.lane)].sort(key=lambda w: (w.pos, w.id))
            state.inserted += 1


def _try_insert(state: SimState, net: RoadNetwork, cfg: SimConfig, occ,
                ev, entry: str, t_next: float) -> VehicleState | None:
    kind = state.kinds[ev.vehicle_id]
    params = cfg.av_params if kind in AV_KINDS else cfg.hv_params
    v0 = params.v0 if params.v0 is not None else net.edges[entry].speed_limit_mps
    pos0 = cfg.vehicle_length_m
    best = None
    for lane in range(net.edges[entry].lanes):
        lane_vehicles = occ.get((entry, lane), [])
        if lane_vehicles:
            leader = lane_vehicles[0]
            clear = leader.pos - leader.length - pos0
            v_ins = v0 if clear >= params.s0 + v0 * params.T_h \
                else min(v0, leader.speed)
            if clear < params.s0 + v_ins * params.T_h:
                continue
        else:
            clear, v_ins = math.inf, v0
        if best is None or clear > best[0]:
            best = (clear, lane, v_ins)
    if best is None:
        return None
    _, lane, v_ins = best
    route = state.routes[ev.route_id]
    return VehicleState(ev.vehicle_id, kind, route.edges, lane, pos0, v_ins,
                        cfg.vehicle_length_m, params, t_next)


def equilibrium_gap(speed: float, params: DriverParams, v0: float) -> float:
    """Steady-state IDM bumper gap at a common speed (infinite when
    speed >= v0)."""
    free = 1.0 - (speed / v0) ** params.delta
    if free <= 0:
        return math.inf
    return (params.s0 + speed * params.T_h) / math.sqrt(free)
