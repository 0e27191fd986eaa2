"""Scenario orchestration: demand -> simulation -> safety -> queueing.

A scenario file is YAML with explicit keys and a schema version:

    schema: 1
    network: ramp.net
    counts: ramp.counts          # or schedule: replay.txt
    routes:
      main: [M1, M2]
      ramp: [R1, M2]
    av_kind: UCAV
    penetration: 0.25
    horizon_s: 86400
    seed: 7

Relative paths resolve against the scenario file's directory. Every export
is deterministic for a given config and seed; wall-clock runtime goes to a
separate run_meta.txt so the report file itself is byte-reproducible.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import demand, queueing, safety, simcore
from .netmodel import RoadNetwork, Route, ValidationError, load_network

SCHEMA_VERSION = 1
OUT_ENV_VAR = "MERGESIM_OUT"
DEFAULT_EPSILONS = (1e-2, 1e-4, 1e-6)


def _fmt(x) -> str:
    return repr(float(x))


@dataclass
class ScenarioConfig:
    network: Path
    routes: list[Route]
    av_kind: str
    penetration: float
    horizon_s: int
    seed: int
    counts: Path | None = None
    schedule: Path | None = None
    h_s: float = 5.0
    dt_s: float = 1.0
    bin_s: float = 30.0
    merge_zone_m: float = 150.0
    coop_zone_m: float = 250.0
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    out_dir: Path | None = None
    trajectories: bool = False

    def validate(self) -> None:
        if self.av_kind not in simcore.AV_KINDS:
            raise ValidationError(f"unknown AV kind {self.av_kind!r}")
        if not 0.0 <= self.penetration <= 1.0:
            raise ValidationError(f"penetration {self.penetration} "
                                  f"outside [0, 1]")
        if self.horizon_s % 3600:
            raise ValidationError("horizon_s must be a multiple of 3600 "
                                  "for hourly analytics")
        if self.counts is None and self.schedule is None:
            raise ValidationError("scenario needs counts or schedule")
        for p in (self.network, self.counts, self.schedule):
            if p is not None and not Path(p).exists():
                raise ValidationError(f"referenced file missing: {p}")


def _routes_from_mapping(mapping) -> list[Route]:
    return [Route(rid, tuple(edges)) for rid, edges in mapping.items()]


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: scenario must be a mapping")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"{path}: schema {raw.get('schema')!r} "
                              f"unsupported (want {SCHEMA_VERSION})")
    base = path.parent

    def resolve(key):
        return (base / raw[key]).resolve() if raw.get(key) else None

    cfg = ScenarioConfig(
        network=resolve("network"),
        counts=resolve("counts"),
        schedule=resolve("schedule"),
        routes=_routes_from_mapping(raw["routes"]),
        av_kind=raw["av_kind"],
        penetration=float(raw["penetration"]),
        horizon_s=int(raw["horizon_s"]),
        seed=int(raw["seed"]),
        h_s=float(raw.get("h_s", 5.0)),
        dt_s=float(raw.get("dt_s", 1.0)),
        bin_s=float(raw.get("bin_s", 30.0)),
        merge_zone_m=float(raw.get("merge_zone_m", 150.0)),
        coop_zone_m=float(raw.get("coop_zone_m", 250.0)),
        epsilons=tuple(float(e) for e in raw.get("epsilons",
                                                 DEFAULT_EPSILONS)),
        out_dir=resolve("out_dir"),
    )
    cfg.validate()
    return cfg


def derive_seeds(master_seed: int) -> tuple[int, int]:
    """Split the master seed into (spawn-schedule, type-assignment) seeds.

    Separate streams keep the demand realization identical when only the
    AV kind or penetration changes.
    """
    children = np.random.SeedSequence(master_seed).spawn(2)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV_VAR, "out"))


@dataclass
class RunReport:
    av_kind: str
    penetration: float
    seed: int
    horizon_s: int
    mean_speed: float
    std_speed: float
    khat_max: int
    khat_mean: float
    baseline1_max: int
    baseline1_mean: float
    baseline2_max: int
    baseline2_mean: float
    n_events: int
    n_samples: int
    vehicles_scheduled: int
    vehicles_inserted: int
    vehicles_exited: int
    vehicles_present_at_end: int
    collision_guard_events: int
    flow_residual_total: float
    rates: list[queueing.HourlyRates] = field(default_factory=list)
    runtime_s: float = 0.0
    out_dir: Path | None = None


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunReport:
    """Execute one scenario end to end and write all exports."""
    t0 = time.perf_counter()
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else \
        (cfg.out_dir or default_out_root())
    out.mkdir(parents=True, exist_ok=True)

    net = load_network(cfg.network)
    for r in cfg.routes:
        net.validate_route(r)
    merges = net.merge_points()
    spawn_seed, type_seed = derive_seeds(cfg.seed)

    residual_total = 0.0
    if cfg.counts is not None:
        counts = demand.ingest_counts(cfg.counts, net, bin_s=cfg.bin_s)
        if counts.horizon_s != cfg.horizon_s:
            raise ValidationError(
                f"counts horizon {counts.horizon_s}s != scenario horizon "
                f"{cfg.horizon_s}s")
        flows, residual_by_edge = demand.reconstruct_flows(
            net, counts, cfg.routes)
        residual_total = float(sum(residual_by_edge.values()))
        schedule = demand.spawn_schedule(flows, spawn_seed)
    else:
        schedule = read_schedule(cfg.schedule)
    demand.write_schedule(out / "schedule.txt", schedule)

    kinds = {ev.vehicle_id: simcore.assign_kind(
        simcore.vehicle_type_seed(type_seed, ev.vehicle_id),
        cfg.penetration, cfg.av_kind) for ev in schedule.events}

    sim_cfg = simcore.SimConfig(
        dt=cfg.dt_s, penetration=cfg.penetration, av_kind=cfg.av_kind,
        merge_zone_m=cfg.merge_zone_m, coop_zone_m=cfg.coop_zone_m)
    routes_by_id = {r.id: r for r in cfg.routes}
    state = simcore.SimState(routes_by_id, kinds, schedule.events,
                             dt=cfg.dt_s)
    rp = safety.ReachParams(h=cfg.h_s, merge_zone_m=cfg.merge_zone_m)
    T = cfg.horizon_s
    monitor = safety.SupervisionMonitor(net, merges, rp, T)

    steps_per_s = int(round(1.0 / cfg.dt_s))
    if abs(steps_per_s * cfg.dt_s - 1.0) > 1e-9:
        raise ValidationError(f"dt_s {cfg.dt_s} must divide one second")

    n_t = np.zeros(T, dtype=np.int64)
    sum_t = np.zeros(T)
    sumsq_t = np.zeros(T)
    traj = open(out / "trajectories.txt", "w") if cfg.trajectories else None
    if traj:
        traj.write("# t\tvehicle_id\tkind\tedge\tlane\tpos_m\tspeed_mps\n")
    try:
        for t in range(T):
            monitor.observe(t, state)
            for v in state.vehicles.values():
                n_t[t] += 1
                sum_t[t] += v.speed
                sumsq_t[t] += v.speed * v.speed
                if traj:
                    traj.write(f"{t}\t{v.id}\t{v.kind}\t{v.edge}\t{v.lane}"
                               f"\t{v.pos:.3f}\t{v.speed:.3f}\n")
            for _ in range(steps_per_s):
                simcore.step(state, net, sim_cfg)
    finally:
        if traj:
            traj.close()

    events, b1_events, series = monitor.finalize()
    k_max, k_mean = safety.khat(series)
    rates = queueing.hourly_rates_table(events, monitor.samples, T)

    total_n = int(n_t.sum())
    mean_speed = float(sum_t.sum() / total_n) if total_n else 0.0
    var = float(sumsq_t.sum() / total_n - mean_speed ** 2) if total_n else 0.0
    std_speed = math.sqrt(max(var, 0.0))

    report = RunReport(
        av_kind=cfg.av_kind, penetration=cfg.penetration, seed=cfg.seed,
        horizon_s=T, mean_speed=mean_speed, std_speed=std_speed,
        khat_max=k_max, khat_mean=k_mean,
        baseline1_max=int(series.baseline1.max()),
        baseline1_mean=float(series.baseline1.mean()),
        baseline2_max=int(series.baseline2.max()),
        baseline2_mean=float(series.baseline2.mean()),
        n_events=len(events), n_samples=len(monitor.samples),
        vehicles_scheduled=len(schedule.events),
        vehicles_inserted=state.inserted, vehicles_exited=state.exited,
        vehicles_present_at_end=len(state.vehicles),
        collision_guard_events=state.guard_events,
        flow_residual_total=residual_total,
        rates=rates, out_dir=out)

    if state.inserted != state.exited + len(state.vehicles):
        raise ValidationError(
            f"vehicle conservation broken: inserted {state.inserted} != "
            f"exited {state.exited} + present {len(state.vehicles)}")

    write_events(out / "events.txt", events)
    write_samples(out / "samples.txt", monitor.samples)
    write_load_series(out / "load_series.txt", series)
    write_rates(out / "rates.txt", rates)
    write_sizing(out / "sizing.txt", rates, cfg.epsilons)
    if T >= 900:
        write_fifteen_minute(out / "fifteen_min.txt",
                             fifteen_minute_series(series))
    write_speed_series(out / "speed_series.txt", n_t, sum_t, sumsq_t)
    write_report(out / "report.txt", report)

    report.runtime_s = time.perf_counter() - t0
    with open(out / "run_meta.txt", "w") as fh:
        fh.write(f"runtime_s\t{report.runtime_s:.3f}\n")
    return report


def fifteen_minute_series(series: safety.LoadSeries,
                          bin_s: int = 900) -> np.ndarray:
    """Per-interval maxima of the supervision load (trailing partial
    interval included)."""
    if series.T < bin_s:
        raise ValidationError(f"series of {series.T}s shorter than one "
                              f"{bin_s}s interval")
    n_bins = (series.T + bin_s - 1) // bin_s
    return np.array([int(series.s[i * bin_s:(i + 1) * bin_s].max())
                     for i in range(n_bins)], dtype=np.int64)


# ---------------------------------------------------------------- exports

def write_events(path, events) -> None:
    with open(path, "w") as fh:
        fh.write("# av_id\tmerge_id\tt_start\tt_end\n")
        for ev in events:
            fh.write(f"{ev.av_id}\t{ev.merge_id}\t{ev.t_start}\t{ev.t_end}\n")


def read_events(path) -> list[safety.SupervisionEvent]:
    events = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            av, mid, lo, hi = line.split("\t")
            events.append(safety.SupervisionEvent(int(av), mid, int(lo),
                                                  int(hi)))
    return events


def write_samples(path, samples) -> None:
    with open(path, "w") as fh:
        fh.write("# t\tav_id\tmerge_id\tcontributing\n")
        for s in samples:
            ids = ",".join(str(i) for i in s.vehicle_ids)
            fh.write(f"{s.t}\t{s.av_id}\t{s.merge_id}\t{ids}\n")


def read_samples(path) -> list[safety.ConflictSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            t, av, mid, ids = line.rstrip("\n").split("\t")
            vids = tuple(int(i) for i in ids.split(",")) if ids else ()
            samples.append(safety.ConflictSample(int(t), int(av), mid, vids))
    return samples


def write_load_series(path, series: safety.LoadSeries) -> None:
    with open(path, "w") as fh:
        fh.write("# t\ts\tbaseline1\tbaseline2\n")
        for t in range(series.T):
            fh.write(f"{t}\t{series.s[t]}\t{series.baseline1[t]}"
                     f"\t{series.baseline2[t]}\n")


def read_load_series(path) -> safety.LoadSeries:
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    return safety.LoadSeries(s=rows[:, 1], baseline1=rows[:, 2],
                             baseline2=rows[:, 3], T=len(rows))


def write_rates(path, rates) -> None:
    with open(path, "w") as fh:
        fh.write("# hour\tq\tb\tlambda\tmu\toffered_load\n")
        for r in rates:
            fh.write(f"{r.hour}\t{r.q}\t{r.b}\t{_fmt(r.lam)}\t{_fmt(r.mu_s)}"
                     f"\t{_fmt(r.offered_load)}\n")


def read_rates(path) -> list[queueing.HourlyRates]:
    rates = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            hour, q, b, lam, mu, _offered = line.split("\t")
            rates.append(queueing.HourlyRates(int(hour), int(q), int(b),
                                              float(lam), float(mu)))
    return rates


def write_sizing(path, rates, epsilons) -> None:
    with open(path, "w") as fh:
        fh.write("# hour\tepsilon\tk_star\tp_k\tnines\n")
        for eps in epsilons:
            for r in rates:
                k = queueing.min_servers(r.offered_load, eps)
                p, n9 = queueing.achieved_reliability(r.offered_load, k)
                fh.write(f"{r.hour}\t{_fmt(eps)}\t{k}\t{_fmt(p)}"
                         f"\t{_fmt(n9)}\n")


def write_fifteen_minute(path, maxima) -> None:
    with open(path, "w") as fh:
        fh.write("# bin\tt_start\tmax_s\n")
        for i, m in enumerate(maxima):
            fh.write(f"{i}\t{i * 900}\t{int(m)}\n")


def write_speed_series(path, n_t, sum_t, sumsq_t) -> None:
    with open(path, "w") as fh:
        fh.write("# t\tn\tsum_v\tsum_vv\n")
        for t in range(len(n_t)):
            fh.write(f"{t}\t{n_t[t]}\t{_fmt(sum_t[t])}\t{_fmt(sumsq_t[t])}\n")


_REPORT_INT_KEYS = {
    "horizon_s", "seed", "khat_max", "baseline1_max", "baseline2_max",
    "events", "samples", "vehicles_scheduled", "vehicles_inserted",
    "vehicles_exited", "vehicles_present_at_end", "collision_guard_events",
    "schema",
}


def write_report(path, rep: RunReport) -> None:
    rows = [
        ("schema", SCHEMA_VERSION),
        ("av_kind", rep.av_kind),
        ("penetration", _fmt(rep.penetration)),
        ("seed", rep.seed),
        ("horizon_s", rep.horizon_s),
        ("mean_speed_mps", _fmt(rep.mean_speed)),
        ("std_speed_mps", _fmt(rep.std_speed)),
        ("khat_max", rep.khat_max),
        ("khat_mean", _fmt(rep.khat_mean)),
        ("baseline1_max", rep.baseline1_max),
        ("baseline1_mean", _fmt(rep.baseline1_mean)),
        ("baseline2_max", rep.baseline2_max),
        ("baseline2_mean", _fmt(rep.baseline2_mean)),
        ("events", rep.n_events),
        ("samples", rep.n_samples),
        ("vehicles_scheduled", rep.vehicles_scheduled),
        ("vehicles_inserted", rep.vehicles_inserted),
        ("vehicles_exited", rep.vehicles_exited),
        ("vehicles_present_at_end", rep.vehicles_present_at_end),
        ("collision_guard_events", rep.collision_guard_events),
        ("flow_residual_total", _fmt(rep.flow_residual_total)),
    ]
    with open(path, "w") as fh:
        for key, value in rows:
            fh.write(f"{key}\t{value}\n")


def read_report(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            key, value = line.rstrip("\n").split("\t")
            if key in _REPORT_INT_KEYS:
                out[key] = int(value)
            elif key == "av_kind":
                out[key] = value
            else:
                out[key] = float(value)
    return out


def read_schedule(path) -> demand.SpawnSchedule:
    events = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            t, rid, vid = line.split("\t")
            events.append(demand.SpawnEvent(float(t), rid, int(vid)))
    horizon = math.ceil(max((e.time_s for e in events), default=0.0))
    return demand.SpawnSchedule(horizon_s=float(horizon), events=events)


# ------------------------------------------------------------------- grid

@dataclass
class GridResult:
    reports: dict[tuple[str, float], RunReport]
    penetrations: list[float]
    kinds: list[str]
    baseline_avg: dict[float, tuple[float, float, float, float]]
    gains: list[tuple[str, float, float]]  # (name, penetration, value)


def load_grid(path) -> list[ScenarioConfig]:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"{path}: unsupported grid schema")
    kinds = list(raw.pop("kinds"))
    penetrations = [float(p) for p in raw.pop("penetrations")]
    cfgs = []
    for kind in kinds:
        for p in penetrations:
            fields = dict(raw)
            fields["av_kind"] = kind
            fields["penetration"] = p
            cfgs.append(_scenario_from_mapping(fields, path.parent))
    return cfgs


def _scenario_from_mapping(raw: dict, base: Path) -> ScenarioConfig:
    def resolve(key):
        return (base / raw[key]).resolve() if raw.get(key) else None

    cfg = ScenarioConfig(
        network=resolve("network"), counts=resolve("counts"),
        schedule=resolve("schedule"),
        routes=_routes_from_mapping(raw["routes"]),
        av_kind=raw["av_kind"], penetration=float(raw["penetration"]),
        horizon_s=int(raw["horizon_s"]), seed=int(raw["seed"]),
        h_s=float(raw.get("h_s", 5.0)), dt_s=float(raw.get("dt_s", 1.0)),
        bin_s=float(raw.get("bin_s", 30.0)),
        merge_zone_m=float(raw.get("merge_zone_m", 150.0)),
        coop_zone_m=float(raw.get("coop_zone_m", 250.0)),
        epsilons=tuple(float(e) for e in raw.get("epsilons",
                                                 DEFAULT_EPSILONS)))
    cfg.validate()
    return cfg


def _peak_offered_load(rates) -> float:
    """Offered load of the busiest hour (greatest arrival rate; earliest
    hour on ties)."""
    best = max(rates, key=lambda r: (r.lam, -r.hour), default=None)
    return best.offered_load if best is not None else 0.0


def run_grid(cfgs: list[ScenarioConfig], out_root=None) -> GridResult:
    """Run a (kind x penetration) grid sharing network/demand/seed."""
    if not cfgs:
        raise ValidationError("empty grid")
    ref = cfgs[0]
    for cfg in cfgs[1:]:
        if (cfg.network, cfg.counts, cfg.schedule, cfg.horizon_s, cfg.seed) \
                != (ref.network, ref.counts, ref.schedule, ref.horizon_s,
                    ref.seed):
            raise ValidationError("grid scenarios must share network, "
                                  "demand, horizon and seed")
    out_root = Path(out_root) if out_root is not None else default_out_root()
    reports: dict[tuple[str, float], RunReport] = {}
    kinds, penetrations = [], []
    for cfg in cfgs:
        if cfg.av_kind not in kinds:
            kinds.append(cfg.av_kind)
        if cfg.penetration not in penetrations:
            penetrations.append(cfg.penetration)
        sub = out_root / f"{cfg.av_kind}_p{int(round(cfg.penetration * 100)):02d}"
        reports[(cfg.av_kind, cfg.penetration)] = run_scenario(cfg, sub)

    baseline_avg = {}
    for p in penetrations:
        rows = [reports[(k, p)] for k in kinds]
        baseline_avg[p] = (
            float(np.mean([r.baseline1_max for r in rows])),
            float(np.mean([r.baseline1_mean for r in rows])),
            float(np.mean([r.baseline2_max for r in rows])),
            float(np.mean([r.baseline2_mean for r in rows])),
        )

    gains: list[tuple[str, float, float]] = []
    have = lambda k, p: (k, p) in reports
    for p in penetrations:
        if have(simcore.CCAV, p) and have(simcore.UCAV, p):
            cc, uc = reports[(simcore.CCAV, p)], reports[(simcore.UCAV, p)]
            gains.append(("ccav_vs_ucav_speed_pct", p,
                          100.0 * (cc.mean_speed - uc.mean_speed)
                          / uc.mean_speed if uc.mean_speed else math.nan))
            gains.append(("ccav_vs_ucav_khat_pct", p,
                          100.0 * (uc.khat_max - cc.khat_max) / uc.khat_max
                          if uc.khat_max else math.nan))
            a_u = _peak_offered_load(uc.rates)
            a_c = _peak_offered_load(cc.rates)
            _, nines_u = queueing.achieved_reliability(a_u, cc.khat_max)
            _, nines_c = queueing.achieved_reliability(a_c, cc.khat_max)
            gains.append(("ccav_vs_ucav_nines", p, nines_c - nines_u))
        if have(simcore.CCAV, p):
            cc = reports[(simcore.CCAV, p)]
            b1_max, _, b2_max, _ = baseline_avg[p]
            gains.append(("ccav_vs_baseline1_pct", p,
                          100.0 * (b1_max - cc.khat_max) / b1_max
                          if b1_max else math.nan))
            gains.append(("ccav_vs_baseline2_pct", p,
                          100.0 * (b2_max - cc.khat_max) / b2_max
                          if b2_max else math.nan))

    result = GridResult(reports=reports, penetrations=penetrations,
                        kinds=kinds, baseline_avg=baseline_avg, gains=gains)
    write_grid(out_root / "grid.txt", result)
    return result


def write_grid(path, grid: GridResult) -> None:
    with open(path, "w") as fh:
        fh.write("# row\tkind\tp\tmean_speed\tstd_speed\tkhat_max\tkhat_mean"
                 "\tb1_max\tb1_mean\tb2_max\tb2_mean\n")
        for kind in grid.kinds:
            for p in grid.penetrations:
                r = grid.reports[(kind, p)]
                fh.write("row\t" + "\t".join([
                    kind, _fmt(p), _fmt(r.mean_speed), _fmt(r.std_speed),
                    str(r.khat_max), _fmt(r.khat_mean),
                    str(r.baseline1_max), _fmt(r.baseline1_mean),
                    str(r.baseline2_max), _fmt(r.baseline2_mean)]) + "\n")
        for p in grid.penetrations:
            b1x, b1m, b2x, b2m = grid.baseline_avg[p]
            fh.write(f"baseline_avg\t{_fmt(p)}\t{_fmt(b1x)}\t{_fmt(b1m)}"
                     f"\t{_fmt(b2x)}\t{_fmt(b2m)}\n")
        for name, p, value in grid.gains:
            fh.write(f"gain\t{name}\t{_fmt(p)}\t{_fmt(value)}\n")


# ------------------------------------------------------------------- pool

def pool_regions(region_rates: list[list[queueing.HourlyRates]],
                 epsilons) -> list[tuple[float, int, int, int]]:
    """(epsilon, hour, summed k*, pooled k*) rows across regions."""
    rows = []
    for eps in epsilons:
        for hour_idx, (summed, pooled) in enumerate(
                queueing.pooled_vs_summed(region_rates, eps)):
            hour = region_rates[0][hour_idx].hour
            rows.append((eps, hour, summed, pooled))
    return rows


def write_pooling(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("# epsilon\thour\tsummed_k\tpooled_k\n")
        totals: dict[float, tuple[int, int]] = {}
        for eps, hour, summed, pooled in rows:
            fh.write(f"{_fmt(eps)}\t{hour}\t{summed}\t{pooled}\n")
            s, p = totals.get(eps, (0, 0))
            totals[eps] = (s + summed, p + pooled)
        for eps, (s, p) in totals.items():
            fh.write(f"total\t{_fmt(eps)}\t{s}\t{p}\n")


def write_pool_sizing(path, region_names: list[str],
                      region_rates: list[list[queueing.HourlyRates]],
                      epsilons) -> None:
    """Per-region sizing rows plus matching rows for the pooled stream."""
    pooled = [queueing.HourlyRates(
        hour=rows[0].hour, q=sum(r.q for r in rows), b=sum(r.b for r in rows),
        lam=sum(r.lam for r in rows),
        mu_s=(sum(r.offered_load for r in rows) / sum(r.lam for r in rows)
              if sum(r.lam for r in rows) > 0 else math.nan))
        for rows in zip(*region_rates)]
    with open(path, "w") as fh:
        fh.write("# region\thour\tepsilon\tk_star\tp_k\tnines\n")
        for name, rates in zip(region_names + ["pooled"],
                               region_rates + [pooled]):
            for eps in epsilons:
                for r in rates:
                    k = queueing.min_servers(r.offered_load, eps)
                    p, n9 = queueing.achieved_reliability(r.offered_load, k)
                    fh.write(f"{name}\t{r.hour}\t{_fmt(eps)}\t{k}\t{_fmt(p)}"
                             f"\t{_fmt(n9)}\n")


def rates_from_files(events_path, samples_path=None
                     ) -> list[queueing.HourlyRates]:
    """Rebuild the hourly rate table from exports.

    Without a samples file the per-second conflict indicators are
    approximated by the full event spans (a conservative overestimate of
    service time, since spans absorb interior gaps).
    """
    events = read_events(events_path)
    if samples_path is not None:
        samples = read_samples(samples_path)
    else:
        samples = [safety.ConflictSample(t, ev.av_id, ev.merge_id, ())
                   for ev in events
                   for t in range(ev.t_start, ev.t_end + 1)]
    end = max((ev.t_end for ev in events), default=0)
    T = max(3600, ((end // 3600) + 1) * 3600)
    return queueing.hourly_rates_table(events, samples, T)
