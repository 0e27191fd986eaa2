"""Reachability-based merge conflicts, supervision events, load series.

A conflict registers for a merging AV when the merge point lies within its
kinematic reach AND at least one vehicle on the lane it is merging into
(upstream of the merge position, on the approach edge) can also reach the
merge within the same horizon. Connected AVs (NCAV/CCAV) acting as the
on-highway vehicle have their reach truncated to their body length; the
merging AV's own reach is never truncated (it must still physically get
to the merge point for a conflict to exist).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .netmodel import MergePoint, RoadNetwork, ValidationError
from .simcore import AV_KINDS, CONNECTED_KINDS, SimState, lane_occupancy


@dataclass(frozen=True)
class ReachParams:
    """Reachability horizon plus the merging-zone scope of detection.

    Reach mode per kind: kinematic for HV/UCAV targets, truncated (body
    length) for the kinds in ``truncated_kinds``.
    """

    h: float = 5.0
    merge_zone_m: float = 150.0
    truncated_kinds: frozenset = field(default=CONNECTED_KINDS)


class ConflictSample(NamedTuple):
    t: int
    av_id: int
    merge_id: str
    vehicle_ids: tuple[int, ...]  # contributing on-highway vehicles


class ReachSample(NamedTuple):
    """A merging AV whose merge is within reach, traffic or not
    (baseline-1: supervise every AV merge)."""

    t: int
    av_id: int
    merge_id: str


class SupervisionEvent(NamedTuple):
    av_id: int
    merge_id: str
    t_start: int
    t_end: int


@dataclass
class LoadSeries:
    """Per-second supervision loads over [0, T)."""

    s: np.ndarray
    baseline1: np.ndarray
    baseline2: np.ndarray
    T: int


def kinematic_reach(speed: float, a_max: float, h: float) -> float:
    """Distance coverable in h seconds under constant maximum
    acceleration."""
    return speed * h + 0.5 * a_max * h * h


def reach_distance(speed: float, params, rp: ReachParams, kind: str,
                   length: float = 5.0) -> float:
    """Reachable distance of an on-highway vehicle of the given kind.

    Connected kinds communicate their near-term trajectory, which collapses
    the uncertainty zone others must assume for them down to the vehicle's
    own length.
    """
    if kind in rp.truncated_kinds:
        return length
    return kinematic_reach(speed, params.a_max, rp.h)


def merge_scan(state: SimState, net: RoadNetwork, merges: list[MergePoint],
               rp: ReachParams) -> tuple[list[ConflictSample], list[ReachSample]]:
    """One snapshot's conflict samples and baseline-1 reach samples.

    Scans every merging AV (an AV on a designated merging lane, within the
    merge zone, not yet merged). Emits a ReachSample when its own reach
    covers the remaining distance, and additionally a ConflictSample when
    at least one target-lane vehicle strictly upstream of the merge can
    reach it too.
    """
    t = int(round(state.clock))
    occ = lane_occupancy(state)
    conflicts: list[ConflictSample] = []
    reach_samples: list[ReachSample] = []
    for m in merges:
        for key in m.merging_lanes:
            edge_len = net.edges[key[0]].length_m
            tedge, tlane = m.targets[key]
            tlen = net.edges[tedge].length_m
            for v in occ.get(key, []):
                if v.kind not in AV_KINDS:
                    continue
                d_j = edge_len - v.pos
                if d_j > rp.merge_zone_m:
                    continue
                if kinematic_reach(v.speed, v.params.a_max, rp.h) < d_j:
                    continue
                reach_samples.append(ReachSample(t, v.id, m.id))
                contributing = []
                for w in occ.get((tedge, tlane), []):
                    if w.pos >= tlen:
                        continue  # past the merge position: no longer counts
                    d_i = tlen - w.pos
                    if reach_distance(w.speed, w.params, rp, w.kind,
                                      w.length) >= d_i:
                        contributing.append(w.id)
                if contributing:
                    conflicts.append(ConflictSample(
                        t, v.id, m.id, tuple(sorted(contributing))))
    return conflicts, reach_samples


def detect_conflicts(state: SimState, net: RoadNetwork,
                     merges: list[MergePoint],
                     rp: ReachParams) -> list[ConflictSample]:
    return merge_scan(state, net, merges, rp)[0]


def extract_events(samples) -> list[SupervisionEvent]:
    """Deduplicate samples into one conservative span per (AV, merge).

    The span runs from the first to the last sample of the pair; interior
    on-and-off gaps are absorbed (a supervisor stays engaged for the whole
    stretch), with no maximum-gap cutoff.
    """
    spans: dict[tuple[int, str], list[int]] = {}
    for s in samples:
        span = spans.get((s.av_id, s.merge_id))
        if span is None:
            spans[(s.av_id, s.merge_id)] = [s.t, s.t]
        else:
            span[0] = min(span[0], s.t)
            span[1] = max(span[1], s.t)
    events = [SupervisionEvent(av, mid, lo, hi)
              for (av, mid), (lo, hi) in spans.items()]
    events.sort(key=lambda e: (e.t_start, e.av_id, e.merge_id))
    return events


def _stab_counts(events, T: int) -> np.ndarray:
    delta = np.zeros(T + 1, dtype=np.int64)
    for ev in events:
        if not 0 <= ev.t_start <= ev.t_end < T:
            raise ValidationError(f"event {ev} outside horizon [0, {T})")
        delta[ev.t_start] += 1
        delta[ev.t_end + 1] -= 1
    return np.cumsum(delta[:T])


def load_series(events: list[SupervisionEvent],
                baseline1_events: list[SupervisionEvent],
                av_present: np.ndarray, T: int) -> LoadSeries:
    """Assemble the per-second load series over [0, T).

    s_t counts supervision-event spans covering t. Baseline-1 counts
    all-merges spans (same conservative dedup, reach condition only) and is
    a pointwise upper bound on s_t because every conflict sample is also a
    reach sample. Baseline-2 is the number of AVs in the system.
    """
    if len(av_present) != T:
        raise ValidationError(f"baseline-2 series has {len(av_present)} "
                              f"entries, horizon is {T}")
    return LoadSeries(
        s=_stab_counts(events, T),
        baseline1=_stab_counts(baseline1_events, T),
        baseline2=np.asarray(av_present, dtype=np.int64).copy(),
        T=T,
    )


def khat(series: LoadSeries) -> tuple[int, float]:
    """Peak and time-average simultaneous supervision load."""
    if series.T < 1:
        raise ValidationError("empty load series")
    return int(series.s.max()), float(series.s.mean())


class SupervisionMonitor:
    """Per-second stream observer feeding the safety analytics.

    Call observe() once per simulated second (before advancing the state),
    then finalize() after the run.
    """

    def __init__(self, net: RoadNetwork, merges: list[MergePoint],
                 rp: ReachParams, T: int):
        self.net = net
        self.merges = merges
        self.rp = rp
        self.T = T
        self.samples: list[ConflictSample] = []
        self.reach_samples: list[ReachSample] = []
        self.av_present = np.zeros(T, dtype=np.int64)

    def observe(self, t: int, state: SimState) -> None:
        conflicts, reach = merge_scan(state, self.net, self.merges, self.rp)
        self.samples.extend(conflicts)
        self.reach_samples.extend(reach)
        self.av_present[t] = sum(1 for v in state.vehicles.values()
                                 if v.kind in AV_KINDS)

    def finalize(self) -> tuple[list[SupervisionEvent],
                                list[SupervisionEvent], LoadSeries]:
        events = extract_events(self.samples)
        b1_events = extract_events(self.reach_samples)
        series = load_series(events, b1_events, self.av_present, self.T)
        return events, b1_events, series
