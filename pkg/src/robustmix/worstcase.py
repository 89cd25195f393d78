"""Study-year assembly: regular NECP-scaled years and the synthetic worst case.

The worst-case year takes, per technology, the decade's lowest-capacity-factor
profile and, per season, the decade's highest demand, then adds EV demand.
Years are plain ints; ties always resolve to the earliest year.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from robustmix.portfolio import CostBook
from robustmix.timeseries import (
    HOURS_PER_YEAR,
    HourlyProfile,
    ProfileError,
    capacity_factor,
    mean_profile,
    per_mw,
    season_slices,
    scale_profile,
)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioYear:
    """A fully assembled study year ready for dispatch and optimization.

    ``generation`` holds the plan-scaled non-dispatchable profiles (hydro is
    included in full and split into residual + budget at dispatch time).
    ``pv_shape`` is the per-MW profile of the additional PV.
    """

    label: int | str
    generation: Mapping[str, HourlyProfile]
    demand: HourlyProfile
    hydro_dispatch_share: float = 0.4
    hydro_tech: str = "hydro"
    pv_shape: HourlyProfile | None = None
    cost_book: CostBook | None = None
    plan_powers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.hydro_dispatch_share <= 1.0:
            raise DatasetError(f"hydro_dispatch_share must lie in [0, 1], got {self.hydro_dispatch_share}")
        n = len(self.demand)
        for name, p in self.generation.items():
            if len(p) != n:
                raise DatasetError(f"{self.label}: {name} has {len(p)} hours, demand has {n}")
        if self.pv_shape is not None and len(self.pv_shape) != n:
            raise DatasetError(f"{self.label}: PV shape has {len(self.pv_shape)} hours, demand has {n}")
        object.__setattr__(self, "generation", dict(self.generation))
        object.__setattr__(self, "plan_powers", dict(self.plan_powers))

    @property
    def hours(self) -> int:
        return len(self.demand)

    @property
    def annual_demand(self) -> float:
        return self.demand.annual_energy

    @property
    def annual_production(self) -> float:
        return float(sum(p.annual_energy for p in self.generation.values()))

    def annual_energy(self, tech: str) -> float:
        return self.generation[tech].annual_energy

    def with_share(self, share: float) -> ScenarioYear:
        return replace(self, hydro_dispatch_share=share)

    def with_cost_book(self, book: CostBook) -> ScenarioYear:
        return replace(self, cost_book=book)


@dataclass(frozen=True)
class WorstCaseRecipe:
    generation: Mapping[str, int]
    demand_seasons: Mapping[str, int]

    def __post_init__(self) -> None:
        missing = {s.season for s in season_slices()} - set(self.demand_seasons)
        if missing:
            raise DatasetError(f"recipe lacks demand year for seasons {sorted(missing)}")


@dataclass(frozen=True)
class DecadeDataset:
    """Per-technology yearly profiles with the powers they were recorded at.

    ``recorded_energy`` (MWh) feeds capacity factors when the profile used
    for scaling is a substitute (e.g. an averaged PV shape); it defaults to
    the profile sums.  ``plan_powers`` omits technologies that keep their
    recorded output.
    """

    profiles: Mapping[str, Mapping[int, HourlyProfile]]
    demand: Mapping[int, HourlyProfile]
    installed_power: Mapping[str, Mapping[int, float]]
    plan_powers: Mapping[str, float]
    flags: frozenset = frozenset()
    recorded_energy: Mapping[str, Mapping[int, float]] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "flags", frozenset((str(t), int(y)) for t, y in self.flags))
        for tech, by_year in self.profiles.items():
            for year in by_year:
                if year not in self.demand:
                    raise DatasetError(f"{tech} {year}: no demand profile for that year")
                if year not in self.installed_power.get(tech, {}):
                    raise DatasetError(f"{tech} {year}: no installed power")
        for tech, p in self.plan_powers.items():
            if p < 0:
                raise DatasetError(f"negative plan power for {tech}")

    @property
    def technologies(self) -> list[str]:
        return list(self.profiles)

    @property
    def years(self) -> list[int]:
        return sorted(self.demand)

    def annual_energy(self, tech: str, year: int) -> float:
        """Recorded annual energy (MWh) of ``tech`` in ``year``."""
        if self.recorded_energy is not None and year in self.recorded_energy.get(tech, {}):
            return float(self.recorded_energy[tech][year])
        return self.profiles[tech][year].annual_energy

    def scaled(self, tech: str, year: int) -> HourlyProfile:
        try:
            prof = self.profiles[tech][year]
        except KeyError:
            raise DatasetError(f"missing {tech} profile for {year}") from None
        if tech not in self.plan_powers:
            return prof
        return scale_profile(prof, self.installed_power[tech][year], self.plan_powers[tech])


def capacity_factors(d: DecadeDataset, tech: str) -> dict[int, float]:
    """Capacity factor (h) of ``tech`` for each year it has a profile."""
    return {
        y: capacity_factor(d.annual_energy(tech, y) / 1000.0, d.installed_power[tech][y])
        for y in sorted(d.profiles[tech])
    }


def select_worst_generation_year(d: DecadeDataset, tech: str) -> int:
    """Unflagged year with the lowest capacity factor for ``tech``."""
    if tech not in d.profiles:
        raise DatasetError(f"unknown technology {tech!r}")
    cfs = {y: cf for y, cf in capacity_factors(d, tech).items() if (tech, y) not in d.flags}
    if not cfs:
        raise DatasetError(f"every year is flagged for {tech}")
    return min(sorted(cfs), key=lambda y: cfs[y])


def seasonal_demand(d: DecadeDataset) -> dict[int, dict[str, float]]:
    slices = season_slices()
    out = {}
    for y in d.years:
        prof = d.demand[y]
        if not prof.is_full_year:
            raise DatasetError(f"demand {y} is not a full year")
        out[y] = {s.season: float(prof.values[s.hours].sum()) for s in slices}
    return out


def select_worst_demand_seasons(d: DecadeDataset) -> dict[str, int]:
    """For each season, the year with the highest demand over that season."""
    sums = seasonal_demand(d)
    best = {}
    for s in season_slices():
        best[s.season] = max(sorted(sums), key=lambda y: (sums[y][s.season], -y))
    return best


def build_recipe(d: DecadeDataset, techs: Iterable[str] | None = None) -> WorstCaseRecipe:
    techs = d.technologies if techs is None else list(techs)
    return WorstCaseRecipe(
        generation={t: select_worst_generation_year(d, t) for t in techs},
        demand_seasons=select_worst_demand_seasons(d),
    )


def ev_demand_profile(annual_ev_energy_twh: float, shape: HourlyProfile) -> HourlyProfile:
    """Rescale ``shape`` so it sums to the given annual EV energy."""
    total = shape.annual_energy
    if total <= 0:
        raise ProfileError("EV shape must have a positive sum")
    if annual_ev_energy_twh < 0:
        raise ProfileError("EV energy must be non-negative")
    return HourlyProfile(shape.values * (annual_ev_energy_twh * 1e6 / total), shape.year_label, "ev")


def flat_shape(hours: int = HOURS_PER_YEAR) -> HourlyProfile:
    return HourlyProfile(np.ones(hours), None, "flat")


def _with_ev(demand: np.ndarray, ev: HourlyProfile | None, label) -> HourlyProfile:
    if ev is not None:
        if len(ev) != demand.size:
            raise DatasetError(f"EV profile has {len(ev)} hours, demand has {demand.size}")
        demand = demand + ev.values
    return HourlyProfile(demand, label, "demand")


def assemble_worst_year(
    d: DecadeDataset,
    r: WorstCaseRecipe,
    ev: HourlyProfile | None,
    *,
    hydro_dispatch_share: float = 0.4,
    label: str = "worst",
    **scenario_kw,
) -> ScenarioYear:
    """Splice the worst-case study year described by ``r``."""
    generation = {tech: d.scaled(tech, year) for tech, year in r.generation.items()}
    demand = np.empty(HOURS_PER_YEAR)
    for s in season_slices():
        year = r.demand_seasons[s.season]
        if year not in d.demand:
            raise DatasetError(f"no demand profile for {year}")
        prof = d.demand[year]
        if not prof.is_full_year:
            raise DatasetError(f"demand {year} is not a full year")
        demand[s.hours] = prof.values[s.hours]
    return ScenarioYear(
        label=label,
        generation=generation,
        demand=_with_ev(demand, ev, label),
        hydro_dispatch_share=hydro_dispatch_share,
        plan_powers={t: d.plan_powers[t] for t in generation if t in d.plan_powers},
        **scenario_kw,
    )


def assemble_regular_year(
    d: DecadeDataset,
    year: int,
    ev: HourlyProfile | None,
    *,
    hydro_dispatch_share: float = 0.4,
    **scenario_kw,
) -> ScenarioYear:
    """Recorded year with every technology scaled to its plan power."""
    if year not in d.demand:
        raise DatasetError(f"year {year} not in dataset")
    generation = {t: d.scaled(t, year) for t in d.technologies if year in d.profiles[t]}
    missing = set(d.technologies) - set(generation)
    if missing:
        raise DatasetError(f"year {year} lacks profiles for {sorted(missing)}")
    return ScenarioYear(
        label=year,
        generation=generation,
        demand=_with_ev(d.demand[year].values, ev, year),
        hydro_dispatch_share=hydro_dispatch_share,
        plan_powers={t: d.plan_powers[t] for t in generation if t in d.plan_powers},
        **scenario_kw,
    )


def annual_gap(s: ScenarioYear) -> float:
    """Demand not covered by plan assets over the year (MWh), floored at 0."""
    return max(0.0, s.annual_demand - s.annual_production)


def substitute_profiles(
    profiles: Mapping[int, HourlyProfile],
    installed_power: Mapping[int, float],
    measured_years: Iterable[int],
) -> tuple[dict[int, HourlyProfile], HourlyProfile]:
    """Replace unmeasured years by the mean per-MW shape of measured years.

    Returns the new year map and the per-MW mean shape.  Each substitute is
    the mean shape times that year's installed power, so capacity scaling
    downstream treats it like a recorded profile.
    """
    measured = sorted(set(measured_years))
    if not measured:
        raise DatasetError("no measured years to average")
    for y in measured:
        if y not in profiles:
            raise DatasetError(f"measured year {y} has no profile")
    shape = mean_profile([per_mw(profiles[y], installed_power[y]) for y in measured], technology_tag="mean_per_mw")
    out = {}
    for y in sorted(set(profiles) | set(installed_power)):
        if y in measured:
            out[y] = profiles[y]
        else:
            out[y] = HourlyProfile(shape.values * installed_power[y], y, shape.technology_tag)
    return out, shape
