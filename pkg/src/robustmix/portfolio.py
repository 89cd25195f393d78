"""Technology cost book and system LCOE.

LCOE = (sum of straight-line annualized CAPEX + energy-priced usage cost) / D.
Powers are MW, investments EUR/kW (EUR/kWh for the battery), prices
EUR/MWh, energies MWh.  No discounting and no O&M, by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

ADDITIONAL_PV = "additional_pv"
BILLING_MODES = ("used", "produced")


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class TechnologySpec:
    """One generation technology, priced either by CAPEX or per MWh used."""

    name: str
    installed_power: float = 0.0
    investment: float | None = None
    depreciation: float | None = None
    energy_price: float | None = None

    def __post_init__(self) -> None:
        capex = self.investment is not None or self.depreciation is not None
        if capex == (self.energy_price is not None):
            raise CostError(f"{self.name}: give either investment+depreciation or energy_price")
        if capex:
            if self.investment is None or self.depreciation is None:
                raise CostError(f"{self.name}: investment and depreciation go together")
            if self.investment < 0:
                raise CostError(f"{self.name}: negative investment")
            if self.depreciation <= 0:
                raise CostError(f"{self.name}: depreciation must be positive")
        elif self.energy_price < 0:
            raise CostError(f"{self.name}: negative energy price")
        if self.installed_power < 0:
            raise CostError(f"{self.name}: negative installed power")

    @property
    def is_capex_priced(self) -> bool:
        return self.energy_price is None


@dataclass(frozen=True)
class CostBook:
    """Portfolio cost data plus the battery, whose size is carried in MWh.

    ``energy_billing`` selects how energy-priced technologies are charged:
    on energy actually used (production net of attributed curtailment) or on
    all energy produced.
    """

    technologies: tuple[TechnologySpec, ...] = ()
    battery_capacity: float = 0.0
    battery_unit_cost: float = 100.0
    battery_depreciation: float = 13.7
    energy_billing: str = "used"

    def __post_init__(self) -> None:
        object.__setattr__(self, "technologies", tuple(self.technologies))
        names = [t.name for t in self.technologies]
        if len(set(names)) != len(names):
            raise CostError("duplicate technology names in cost book")
        if self.battery_depreciation <= 0:
            raise CostError("battery depreciation must be positive")
        if self.battery_unit_cost < 0:
            raise CostError("battery unit cost must be non-negative")
        if self.battery_capacity < 0:
            raise CostError("battery capacity must be non-negative")
        if self.energy_billing not in BILLING_MODES:
            raise CostError(f"energy_billing must be one of {BILLING_MODES}")

    def __getitem__(self, name: str) -> TechnologySpec:
        for t in self.technologies:
            if t.name == name:
                return t
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return any(t.name == name for t in self.technologies)

    @property
    def energy_priced(self) -> tuple[TechnologySpec, ...]:
        return tuple(t for t in self.technologies if not t.is_capex_priced)

    def with_tech(self, tech: TechnologySpec) -> CostBook:
        techs = [tech if t.name == tech.name else t for t in self.technologies]
        if tech.name not in self:
            techs.append(tech)
        return replace(self, technologies=tuple(techs))

    def with_additions(self, pv_power: float, battery_capacity: float) -> CostBook:
        """Book for a candidate portfolio: additional PV power and battery size."""
        pv = self[ADDITIONAL_PV]
        return replace(self.with_tech(replace(pv, installed_power=pv_power)), battery_capacity=battery_capacity)

    def with_pv_unit_cost(self, cost: float) -> CostBook:
        return self.with_tech(replace(self[ADDITIONAL_PV], investment=cost))

    def with_battery_unit_cost(self, cost: float) -> CostBook:
        return replace(self, battery_unit_cost=cost)

    def scaled(self, k: float) -> CostBook:
        """Every investment and energy price multiplied by ``k``."""
        techs = []
        for t in self.technologies:
            if t.is_capex_priced:
                techs.append(replace(t, investment=t.investment * k))
            else:
                techs.append(replace(t, energy_price=t.energy_price * k))
        return replace(self, technologies=tuple(techs), battery_unit_cost=self.battery_unit_cost * k)

    def subset(self, names) -> CostBook:
        names = set(names)
        return replace(self, technologies=tuple(t for t in self.technologies if t.name in names))


def annualized_capex(t: TechnologySpec) -> float:
    """P * I / R in EUR/year (power in MW is converted to kW)."""
    if not t.is_capex_priced:
        raise CostError(f"{t.name} is energy-priced, it has no CAPEX")
    return t.installed_power * 1000.0 * t.investment / t.depreciation


def battery_annualized_capex(book: CostBook) -> float:
    return book.battery_capacity * 1000.0 * book.battery_unit_cost / book.battery_depreciation


def annual_cost(book: CostBook, energy_priced_usage: Mapping[str, float]) -> float:
    total = 0.0
    for t in book.technologies:
        if t.is_capex_priced:
            total += annualized_capex(t)
    total += battery_annualized_capex(book)
    for t in book.technologies:
        if not t.is_capex_priced:
            if t.name not in energy_priced_usage:
                raise CostError(f"missing usage for energy-priced technology {t.name!r}")
            total += energy_priced_usage[t.name] * t.energy_price
    return total


def lcoe(book: CostBook, annual_demand: float, energy_priced_usage: Mapping[str, float] | None = None) -> float:
    """System LCOE in EUR/MWh for annual demand ``annual_demand`` (MWh)."""
    if annual_demand <= 0:
        raise CostError(f"annual demand must be positive, got {annual_demand}")
    return annual_cost(book, energy_priced_usage or {}) / annual_demand


def _tech_from_mapping(row: Mapping) -> TechnologySpec:
    return TechnologySpec(
        name=str(row["technology"]),
        installed_power=float(row.get("installed_power_mw", 0.0) or 0.0),
        investment=_opt(row.get("investment_eur_per_kw")),
        depreciation=_opt(row.get("depreciation_period_years")),
        energy_price=_opt(row.get("energy_price_eur_per_mwh")),
    )


def _opt(v):
    return None if v is None else float(v)


def cost_book_from_mapping(doc: Mapping) -> CostBook:
    techs = tuple(_tech_from_mapping(r) for r in doc.get("technologies", []))
    battery = doc.get("battery", {})
    book = CostBook(
        technologies=techs,
        battery_capacity=float(battery.get("capacity_mwh", 0.0)),
        battery_unit_cost=float(battery.get("investment_eur_per_kwh", 100.0)),
        battery_depreciation=float(battery.get("depreciation_period_years", 13.7)),
        energy_billing=str(doc.get("energy_billing", "used")),
    )
    if ADDITIONAL_PV not in book:
        raise CostError(f"cost book needs an {ADDITIONAL_PV!r} entry")
    return book


def load_cost_book(path: str | Path | None = None) -> CostBook:
    """Read a cost book document; ``None`` gives the shipped default."""
    if path is None:
        text = resources.files("robustmix.data").joinpath("cost_book.yaml").read_text()
    else:
        text = Path(path).read_text()
    return cost_book_from_mapping(yaml.safe_load(text))


def default_cost_book() -> CostBook:
    return load_cost_book(None)
