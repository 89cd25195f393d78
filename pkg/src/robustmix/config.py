"""Run configuration: one YAML document drives data loading and every command.

Relative paths resolve against the configuration file's directory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping

import yaml

from robustmix.analytics import SWEEP_AXES
from robustmix.dispatch import DispatchConfig
from robustmix.optimizer import SearchGrid, default_grid
from robustmix.portfolio import CostBook, cost_book_from_mapping, load_cost_book
from robustmix.timeseries import HourlyProfile, load_profile, load_profiles, mean_profile, per_mw
from robustmix.worstcase import (
    DecadeDataset,
    ScenarioYear,
    WorstCaseRecipe,
    assemble_regular_year,
    assemble_worst_year,
    build_recipe,
    ev_demand_profile,
    flat_shape,
    substitute_profiles,
)

logger = logging.getLogger(__name__)

ENV_VAR = "ROBUSTMIX_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    root: Path
    doc: Mapping[str, Any]
    output_dir: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        doc = yaml.safe_load(path.read_text()) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls(path.parent.resolve(), doc)

    def path(self, rel: str | Path) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    @property
    def out_dir(self) -> Path:
        if self.output_dir is not None:
            return Path(self.output_dir)
        return self.path(self.doc.get("output_dir", "out"))

    # --- sections -------------------------------------------------------

    @property
    def technologies(self) -> dict[str, str]:
        """Technology tag -> CSV column."""
        return {str(k): str(v) for k, v in self.doc["data"]["columns"].items()}

    @property
    def files(self) -> dict[int, Path]:
        return {int(y): self.path(p) for y, p in self.doc["data"]["files"].items()}

    @property
    def hydro_share(self) -> float:
        return float(self.doc.get("hydro_dispatch_share", 0.4))

    @property
    def hydro_tech(self) -> str:
        return str(self.doc.get("hydro_technology", "hydro"))

    @property
    def dispatch_config(self) -> DispatchConfig:
        d = self.doc.get("dispatch") or {}
        return DispatchConfig(
            hydro_dispatch_share=None,
            round_trip_efficiency=float(d.get("round_trip_efficiency", 1.0)),
            initial_soc=float(d.get("initial_soc", 0.0)),
            # Placeholder so the initial SoC validates; the optimizer sets the real capacity.
            battery_capacity=float(d.get("initial_soc", 0.0)),
            deficit_policy=str(d.get("deficit_policy", "battery_first")),
        )

    @property
    def optimizer_options(self) -> dict:
        o = self.doc.get("optimizer") or {}
        return {"mode": o.get("mode", "binary"), "stopping": o.get("stopping", "bound")}

    def grid_for(self, s: ScenarioYear) -> SearchGrid:
        g = self.doc.get("grid") or {}
        return default_grid(
            s,
            pv_step=float(g.get("pv_step", 100.0)),
            storage_step=float(g.get("storage_step", 500.0)),
            pv_max=_opt_float(g.get("pv_max")),
            storage_max=_opt_float(g.get("storage_max")),
        )

    @property
    def sweeps(self) -> dict[str, list[float]]:
        return {k: [float(v) for v in vals] for k, vals in (self.doc.get("sweeps") or {}).items()}

    @cached_property
    def cost_book(self) -> CostBook:
        spec = self.doc.get("cost_book")
        if spec is None:
            return load_cost_book(None)
        if isinstance(spec, str):
            return load_cost_book(self.path(spec))
        return cost_book_from_mapping(spec)

    # --- data -----------------------------------------------------------

    @cached_property
    def raw_profiles(self) -> dict[int, dict[str, HourlyProfile]]:
        cols = self.technologies
        demand_col = str(self.doc["data"].get("demand_column", "demand"))
        out = {}
        for year, path in sorted(self.files.items()):
            profs = load_profiles(path, [*cols.values(), demand_col], year_label=year)
            out[year] = {tag: profs[col] for tag, col in cols.items()}
            out[year]["__demand__"] = profs[demand_col]
        return out

    @cached_property
    def dataset(self) -> DecadeDataset:
        raw = self.raw_profiles
        techs = list(self.technologies)
        installed = {t: {int(y): float(p) for y, p in self.doc["installed_power"][t].items()} for t in techs}
        profiles = {t: {y: raw[y][t] for y in raw} for t in techs}
        recorded = {t: {y: p.annual_energy for y, p in profiles[t].items()} for t in techs}
        sub = self.doc.get("pv_substitution")
        if sub:
            tech = sub["technology"]
            profiles[tech], _ = substitute_profiles(profiles[tech], installed[tech], [int(y) for y in sub["measured_years"]])
            profiles[tech] = {y: profiles[tech][y] for y in raw}
        flags = frozenset((str(t), int(y)) for t, y in self.doc.get("flags") or [])
        return DecadeDataset(
            profiles=profiles,
            demand={y: raw[y]["__demand__"] for y in raw},
            installed_power=installed,
            plan_powers={str(k): float(v) for k, v in (self.doc.get("plan_powers") or {}).items()},
            flags=flags,
            recorded_energy=recorded,
        )

    def _load_shape(self, spec) -> HourlyProfile:
        if spec in (None, "flat"):
            return flat_shape()
        return load_profile(self.path(spec["path"]), spec["column"])

    @cached_property
    def ev_profile(self) -> HourlyProfile | None:
        ev = self.doc.get("ev")
        if not ev:
            return None
        return ev_demand_profile(float(ev.get("annual_energy_twh", 0.0)), self._load_shape(ev.get("shape")))

    @cached_property
    def pv_shape(self) -> HourlyProfile:
        spec = self.doc.get("additional_pv_shape") or {"mean_of": "pv"}
        if "mean_of" in spec:
            tech = spec["mean_of"]
            d = self.dataset
            years = spec.get("years") or (self.doc.get("pv_substitution") or {}).get("measured_years") or d.years
            shapes = [per_mw(self.raw_profiles[int(y)][tech], d.installed_power[tech][int(y)]) for y in years]
            return mean_profile(shapes, technology_tag="additional_pv")
        return load_profile(self.path(spec["path"]), spec["column"], technology_tag="additional_pv")

    @cached_property
    def recipe(self) -> WorstCaseRecipe:
        override = (self.doc.get("worst_case") or {}).get("recipe")
        if override:
            return WorstCaseRecipe(
                generation={str(k): int(v) for k, v in override["generation"].items()},
                demand_seasons={str(k): int(v) for k, v in override["demand_seasons"].items()},
            )
        return build_recipe(self.dataset)

    def _scenario_kw(self) -> dict:
        return {
            "hydro_dispatch_share": self.hydro_share,
            "hydro_tech": self.hydro_tech,
            "pv_shape": self.pv_shape,
            "cost_book": self.cost_book,
        }

    def scenario(self, which: int | str) -> ScenarioYear:
        if str(which) == "worst":
            return assemble_worst_year(self.dataset, self.recipe, self.ev_profile, **self._scenario_kw())
        return assemble_regular_year(self.dataset, int(which), self.ev_profile, **self._scenario_kw())

    def scenarios(self, which: str = "all") -> list[ScenarioYear]:
        if which == "all":
            return [self.scenario(y) for y in self.dataset.years] + [self.scenario("worst")]
        if which == "years":
            return [self.scenario(y) for y in self.dataset.years]
        return [self.scenario(w) for w in str(which).split(",")]


def _opt_float(v):
    return None if v is None else float(v)


def validate(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """Load every input and check every invariant; one entry per item."""
    report: list[tuple[str, bool, str]] = []

    def check(name, fn):
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - every failure is reported, none is fatal
            report.append((name, False, f"{type(exc).__name__}: {exc}"))
        else:
            report.append((name, True, "ok"))

    for key in ("data", "installed_power"):
        if key not in cfg.doc:
            report.append((f"config:{key}", False, "missing section"))
    if any(not ok for _, ok, _ in report):
        return report
    demand_col = str(cfg.doc["data"].get("demand_column", "demand"))
    cols = [*cfg.technologies.values(), demand_col]
    for year, path in sorted(cfg.files.items()):
        check(f"file:{path.name}", lambda p=path, y=year: load_profiles(p, cols, year_label=y))
    if any(not ok for _, ok, _ in report):
        return report
    check("cost_book", lambda: cfg.cost_book)
    check("dataset", lambda: cfg.dataset)
    check("ev", lambda: cfg.ev_profile)
    check("additional_pv_shape", lambda: cfg.pv_shape)
    check("dispatch", lambda: cfg.dispatch_config)
    check("worst_case_recipe", lambda: cfg.recipe)
    if all(ok for _, ok, _ in report):
        for y in cfg.dataset.years:
            check(f"scenario:{y}", lambda y=y: cfg.grid_for(cfg.scenario(y)))
        check("scenario:worst", lambda: cfg.grid_for(cfg.scenario("worst")))
    for axis in cfg.sweeps:
        report.append((f"sweep:{axis}", axis in SWEEP_AXES, "ok" if axis in SWEEP_AXES else "unknown axis"))
    return report
