"""robustmix command line.

Every command reads one YAML run configuration (``--config`` or the
ROBUSTMIX_CONFIG environment variable) and writes plain CSV plus a JSON
mirror into the output directory.  Exit codes: 0 success, 1 validation
failure, 2 infeasibility, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from robustmix import __version__
from robustmix.analytics import (
    SWEEP_AXES,
    AnalyticsError,
    ols_regression,
    scenario_coincidence_factor,
    sweep,
    technology_utilization,
    total_utilization_factor,
)
from robustmix.config import ENV_VAR, ConfigError, RunConfig, validate
from robustmix.dispatch import curtailment_summary
from robustmix.optimizer import InfeasibleError, PortfolioSolution, optimize_many, write_solutions
from robustmix.timeseries import ProfileError, season_slices, write_profiles
from robustmix.worstcase import DatasetError, capacity_factors

logger = logging.getLogger("robustmix")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    """CSV plus a same-named JSON list of records."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([_fmt(v) for v in row] for row in rows)
    _write_json(path.with_suffix(".json"), [dict(zip(header, row)) for row in rows])


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else v


def _load(args) -> RunConfig:
    path = args.config or os.environ.get(ENV_VAR)
    if not path:
        raise ConfigError(f"no configuration: pass --config or set {ENV_VAR}")
    cfg = RunConfig.from_file(path)
    if args.output:
        cfg.output_dir = Path(args.output)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def _optimize_kw(cfg: RunConfig) -> dict:
    return {"grid_for": cfg.grid_for, **cfg.optimizer_options}


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = validate(cfg)
    for name, ok, msg in report:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    return EXIT_OK if all(ok for _, ok, _ in report) else EXIT_INVALID


def cmd_build_worst_case(args) -> int:
    cfg = _load(args)
    out = cfg.out_dir
    d, recipe = cfg.dataset, cfg.recipe
    s = cfg.scenario("worst")
    write_profiles(out / "worst_case_hourly.csv", {**{t: p.values for t, p in s.generation.items()}, "demand": s.demand.values})
    _write_json(out / "worst_case_recipe.json", {
        "generation": dict(recipe.generation),
        "demand_seasons": dict(recipe.demand_seasons),
        "hydro_dispatch_share": s.hydro_dispatch_share,
    })
    rows = []
    for tech, year in recipe.generation.items():
        cf = capacity_factors(d, tech)[year]
        rows.append([tech, str(year), cf, s.annual_energy(tech) / 1000.0])
    ev = cfg.ev_profile.annual_energy if cfg.ev_profile is not None else 0.0
    demand = s.annual_demand
    for sl in season_slices():
        rows.append([f"demand_{sl.season}", str(recipe.demand_seasons[sl.season]), "", float(s.demand.values[sl.hours].sum()) / 1000.0])
    rows.append(["ev", "", "", ev / 1000.0])
    rows.append(["total_demand", "", "", demand / 1000.0])
    rows.append(["total_production", "", "", s.annual_production / 1000.0])
    rows.append(["gap", "", "", max(0.0, demand - s.annual_production) / 1000.0])
    _write_rows(out / "worst_case_balance.csv", ["item", "reference_year", "capacity_factor_h", "energy_gwh"], rows)
    logger.info("worst case written to %s", out)
    return EXIT_OK


def _solve(cfg: RunConfig, which: str, workers: int) -> list:
    scenarios = cfg.scenarios(which)
    return optimize_many(scenarios, cfg.dispatch_config, None, workers=workers, **_optimize_kw(cfg))


def cmd_optimize(args) -> int:
    cfg = _load(args)
    results = _solve(cfg, args.year, args.workers)
    out = cfg.out_dir
    solved = [r for r in results if isinstance(r, PortfolioSolution)]
    write_solutions(out / "solutions.csv", solved)
    write_solutions(out / "solutions.json", solved)
    for sol in solved:
        sol.dispatch.to_csv(out / f"dispatch_{sol.label}.csv")
    failed = [r for r in results if isinstance(r, InfeasibleError)]
    for exc in failed:
        print(f"INFEASIBLE  {exc} (first unserved hour {exc.hour})", file=sys.stderr)
    for sol in solved:
        r = sol.record()
        print(f"{r['year']}: pv {r['pv_gw']:.1f} GW, storage {r['storage_gwh']:.1f} GWh, lcoe {r['lcoe_eur_mwh']:.2f} EUR/MWh")
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    sweeps = cfg.sweeps
    axes = list(sweeps) if args.axis == "all" else [args.axis]
    out = cfg.out_dir
    scenarios = cfg.scenarios(args.year)
    elasticity_rows = []
    for axis in axes:
        if axis not in sweeps:
            raise ConfigError(f"axis {axis!r} is not declared in the configuration")
        table = sweep(scenarios, axis, sweeps[axis], cfg.dispatch_config, workers=args.workers, **_optimize_kw(cfg))
        table.to_csv(out / f"sweep_{axis}.csv")
        _write_json(out / f"sweep_{axis}.json", table.records())
        try:
            rep = table.elasticity()
        except AnalyticsError as exc:
            logger.warning("no elasticity for %s: %s", axis, exc)
            continue
        elasticity_rows.append([axis, rep.elasticity, rep.range])
    _write_rows(out / "elasticity.csv", ["parameter", "elasticity", "range"], elasticity_rows)
    return EXIT_OK


def cmd_report(args) -> int:
    """Per-year metrics, regressions and scatter files for the CF/UF figures."""
    cfg = _load(args)
    out = cfg.out_dir
    scenarios = {str(s.label): s for s in cfg.scenarios(args.year)}
    results = _solve(cfg, args.year, args.workers)
    metric_rows, series = [], {}
    techs = [t for t in args.technologies.split(",") if t]
    for res in results:
        if isinstance(res, InfeasibleError):
            logger.warning("skipping infeasible scenario: %s", res)
            continue
        s = scenarios[str(res.label)]
        powers = {t: s.plan_powers[t] for t in s.generation if t in s.plan_powers}
        uf = technology_utilization(res.dispatch, powers)
        cf = {t: scenario_coincidence_factor(s, t) for t in techs if t in s.generation}
        curt = curtailment_summary(res.dispatch)
        row = {
            "year": str(res.label),
            "lcoe_eur_mwh": res.lcoe,
            "total_uf_h": total_utilization_factor(res.dispatch, powers),
            "curtailed_twh": curt.energy_twh,
            "curtailed_pct_demand": curt.percent_of_demand,
        }
        for t in techs:
            if t in cf:
                row[f"cf_{t}"] = cf[t]
            if t in uf:
                row[f"uf_{t}_h"] = uf[t]
        metric_rows.append(row)
        for k, v in row.items():
            if k != "year":
                series.setdefault(k, []).append(v)
    if not metric_rows:
        return EXIT_INFEASIBLE
    header = list(metric_rows[0])
    _write_rows(out / "metrics.csv", header, [[r.get(h, "") for h in header] for r in metric_rows])
    regressions = {}
    y = series["lcoe_eur_mwh"]
    for name in header[2:]:
        if name.startswith("curtailed"):
            continue
        x = series[name]
        if len(x) != len(y):
            continue
        try:
            fit = ols_regression(x, y)
        except AnalyticsError as exc:
            logger.warning("no regression for %s: %s", name, exc)
            continue
        regressions[name] = {
            "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
            "p_value": fit.p_value, "n": fit.n,
        }
        rows = [[r["year"], r[name], r["lcoe_eur_mwh"], float(fit.predict(r[name]))] for r in metric_rows]
        _write_rows(out / f"scatter_{name}.csv", ["year", name, "lcoe_eur_mwh", "fit"], rows)
    _write_json(out / "regressions.json", regressions)
    return EXIT_OK


def cmd_make_desk_data(args) -> int:
    from robustmix.desk import write_desk_decade

    path = write_desk_decade(args.directory, seed=args.seed)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustmix", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help=f"run configuration YAML (default: ${ENV_VAR})")
    p.add_argument("--output", help="output directory (overrides the configuration)")
    p.add_argument("--workers", type=int, default=1, help="parallel scenario workers")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="load all inputs and check invariants").set_defaults(fn=cmd_validate)
    sub.add_parser("build-worst-case", help="write the worst-case year and its recipe").set_defaults(fn=cmd_build_worst_case)

    o = sub.add_parser("optimize", help="least-cost PV and storage per scenario")
    o.add_argument("--year", default="all", help="a year, 'worst', a comma list, 'years' or 'all'")
    o.set_defaults(fn=cmd_optimize)

    s = sub.add_parser("sweep", help="re-optimize across one sensitivity axis")
    s.add_argument("--axis", default="all", choices=[*SWEEP_AXES, "all"])
    s.add_argument("--year", default="all")
    s.set_defaults(fn=cmd_sweep)

    r = sub.add_parser("report", help="CF/UF metrics, regressions and scatter data")
    r.add_argument("--year", default="years")
    r.add_argument("--technologies", default="wind,hydro")
    r.set_defaults(fn=cmd_report)

    m = sub.add_parser("make-desk-data", help="write the synthetic ten-year dataset")
    m.add_argument("directory")
    m.add_argument("--seed", type=int, default=2021)
    m.set_defaults(fn=cmd_make_desk_data)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.fn(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc} (first unserved hour {exc.hour})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ProfileError, DatasetError, AnalyticsError, KeyError, TypeError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
