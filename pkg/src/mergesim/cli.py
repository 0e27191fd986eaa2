"""Command line entry points: run, grid, pool, rates."""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import scenario


def _add_common(p, config_required=True):
    if config_required:
        p.add_argument("--config", required=True, help="scenario YAML file")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${scenario.OUT_ENV_VAR} "
                        f"or ./out)")
    p.add_argument("--epsilon", action="append", type=float, default=None,
                   help="reliability target, repeatable for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mergesim",
        description="Highway merge simulation and supervision-team sizing")
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    _add_common(run_p)
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's master seed")
    run_p.add_argument("--trajectories", action="store_true",
                       help="also export per-second vehicle trajectories")

    grid_p = sub.add_parser("grid", help="run a kind x penetration grid")
    _add_common(grid_p)
    grid_p.add_argument("--seed", type=int, default=None)

    pool_p = sub.add_parser("pool", help="multi-region pooled vs summed sizing")
    pool_p.add_argument("rates", nargs="+", help="per-region rates exports")
    _add_common(pool_p, config_required=False)

    rates_p = sub.add_parser("rates",
                             help="hourly rates from an event export")
    rates_p.add_argument("events", help="events export file")
    rates_p.add_argument("--samples", default=None,
                         help="samples export for exact service times")
    rates_p.add_argument("--out", default=None)
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else scenario.default_out_root()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = scenario.load_scenario(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epsilon:
        cfg.epsilons = tuple(args.epsilon)
    cfg.trajectories = args.trajectories
    report = scenario.run_scenario(cfg, _out_dir(args))
    print(f"{cfg.av_kind} p={cfg.penetration}: "
          f"k_hat={report.khat_max} [{report.khat_mean:.2f}], "
          f"speed={report.mean_speed:.2f} ({report.std_speed:.2f}) m/s, "
          f"{report.vehicles_inserted} vehicles, "
          f"{report.collision_guard_events} guard events, "
          f"{report.runtime_s:.1f}s -> {report.out_dir}")
    return 0


def cmd_grid(args) -> int:
    cfgs = scenario.load_grid(args.config)
    for cfg in cfgs:
        if args.seed is not None:
            cfg.seed = args.seed
        if args.epsilon:
            cfg.epsilons = tuple(args.epsilon)
    out = _out_dir(args)
    grid = scenario.run_grid(cfgs, out)
    for (kind, p), r in grid.reports.items():
        print(f"{kind} p={p}: k_hat={r.khat_max} [{r.khat_mean:.2f}] "
              f"speed={r.mean_speed:.2f}")
    print(f"grid table -> {out / 'grid.txt'}")
    return 0


def cmd_pool(args) -> int:
    epsilons = args.epsilon or list(scenario.DEFAULT_EPSILONS)
    regions = [scenario.read_rates(path) for path in args.rates]
    rows = scenario.pool_regions(regions, epsilons)
    out = _out_dir(args)
    scenario.write_pooling(out / "pooling.txt", rows)
    names = [Path(p).stem for p in args.rates]
    if len(set(names)) != len(names):  # stems collide: fall back to paths
        names = [str(p) for p in args.rates]
    scenario.write_pool_sizing(out / "pool_sizing.txt", names, regions,
                               epsilons)
    for eps in epsilons:
        summed = sum(s for e, _, s, _ in rows if e == eps)
        pooled = sum(p for e, _, _, p in rows if e == eps)
        print(f"epsilon={eps}: summed={summed} pooled={pooled} "
              f"saved={summed - pooled}")
    print(f"pooling table -> {out / 'pooling.txt'}")
    return 0


def cmd_rates(args) -> int:
    rates = scenario.rates_from_files(args.events, args.samples)
    out = _out_dir(args)
    scenario.write_rates(out / "rates.txt", rates)
    busy = max(rates, key=lambda r: r.lam)
    print(f"{len(rates)} hours; busiest hour {busy.hour}: q={busy.q}, "
          f"lambda={busy.lam:.4f}/s -> {out / 'rates.txt'}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "grid": cmd_grid, "pool": cmd_pool,
                "rates": cmd_rates}
    try:
        return handlers[args.verb](args)
    except Exception as exc:
        diag = Path("mergesim_diagnostic.txt")
        if getattr(args, "out", None):
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            diag = out / "diagnostic.txt"
        with open(diag, "w") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n\n")
            fh.write(traceback.format_exc())
        print(f"error: {exc} (diagnostic: {diag})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
