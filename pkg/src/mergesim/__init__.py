"""Microscopic highway-merge simulation with supervision-team sizing."""

from .netmodel import (Edge, IntegrityError, MergePoint, RoadNetwork, Route,
                       SchemaError, ValidationError, UNREACHABLE,
                       detect_merge_points, distance_to_merge, load_network)
from .demand import (DetectorSeries, FlowAssignment, SpawnSchedule,
                     ingest_counts, reconstruct_flows, spawn_schedule)
from .simcore import (AV_KINDS, CCAV, HV, NCAV, UCAV, DriverParams,
                      SimConfig, SimState, VehicleState, assign_kind,
                      attempt_merge, cooperative_shift, idm_accel, step)
from .safety import (ConflictSample, LoadSeries, ReachParams,
                     SupervisionEvent, SupervisionMonitor, detect_conflicts,
                     extract_events, khat, load_series, reach_distance)
from .queueing import (HourlyRates, achieved_reliability, erlang_loss,
                       hourly_rates, min_servers, nines, pooled_vs_summed)
from .scenario import (RunReport, ScenarioConfig, fifteen_minute_series,
                       load_scenario, run_grid, run_scenario)

__version__ = "0.1.0"
