"""Hour-by-hour balance of one study year with a battery and a hydro budget.

Surplus hours charge the battery up to its capacity and curtail the rest.
Deficit hours draw on the battery and the dispatchable hydro budget in the
configured merit order; whatever remains is unserved.  The default drains
the battery first: the battery refills from later surplus while the hydro
budget never does, so holding hydro back can only help feasibility.  The battery has no
power limit and hydro has no MW cap, only the annual budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numba
import numpy as np
from numpy.typing import NDArray

from robustmix.portfolio import ADDITIONAL_PV
from robustmix.timeseries import HourlyProfile, write_profiles
from robustmix.worstcase import ScenarioYear

POLICIES = ("hydro_first", "battery_first")
# Residual deficits below this fraction of peak demand count as served.
FEASIBILITY_RTOL = 1e-9


class DispatchError(ValueError):
    pass


@dataclass(frozen=True)
class DispatchConfig:
    hydro_dispatch_share: float | None = None
    battery_capacity: float = 0.0
    round_trip_efficiency: float = 1.0
    initial_soc: float = 0.0
    deficit_policy: str = "battery_first"

    def __post_init__(self) -> None:
        share = self.hydro_dispatch_share
        if share is not None and not 0.0 <= share <= 1.0:
            raise DispatchError(f"hydro_dispatch_share must lie in [0, 1], got {share}")
        if self.battery_capacity < 0:
            raise DispatchError("battery capacity must be non-negative")
        if not 0.0 < self.round_trip_efficiency <= 1.0:
            raise DispatchError("round_trip_efficiency must lie in (0, 1]")
        if not 0.0 <= self.initial_soc <= self.battery_capacity:
            raise DispatchError(
                f"initial_soc {self.initial_soc} outside [0, {self.battery_capacity}]"
            )
        if self.deficit_policy not in POLICIES:
            raise DispatchError(f"deficit_policy must be one of {POLICIES}")

    def with_capacity(self, capacity: float) -> DispatchConfig:
        return replace(self, battery_capacity=capacity)


@dataclass(frozen=True)
class DispatchResult:
    """Hourly dispatch trace plus annual aggregates (all MWh)."""

    label: int | str
    additional_pv_power: float
    battery_capacity: float
    soc: NDArray[np.float64]
    battery_delta: NDArray[np.float64]
    charge: NDArray[np.float64]
    discharge: NDArray[np.float64]
    hydro_dispatched: NDArray[np.float64]
    curtailed: NDArray[np.float64]
    unserved: NDArray[np.float64]
    demand: NDArray[np.float64]
    nondispatchable: NDArray[np.float64]
    hydro_budget: float
    initial_soc: float
    used_energy: Mapping[str, float] = field(default_factory=dict)
    produced_energy: Mapping[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not bool(np.any(self.unserved > 0.0))

    @property
    def total_curtailed(self) -> float:
        return float(self.curtailed.sum())

    @property
    def total_unserved(self) -> float:
        return float(self.unserved.sum())

    @property
    def annual_demand(self) -> float:
        return float(self.demand.sum())

    @property
    def first_unserved_hour(self) -> int | None:
        idx = np.flatnonzero(self.unserved > 0.0)
        return int(idx[0]) if idx.size else None

    def to_csv(self, path: str | Path) -> None:
        """One row per hour in the profile CSV schema, so the loader reads it back."""
        year = self.label if isinstance(self.label, int) else None
        write_profiles(path, {
            "soc": self.soc,
            "charge": self.charge,
            "discharge": self.discharge,
            "hydro": self.hydro_dispatched,
            "curtailed": self.curtailed,
            "unserved": self.unserved,
        }, year)


@numba.njit(cache=True, nogil=True)
def _first_failure(base, shape, pv_power, capacity, budget, eta, soc0, battery_first, tol):
    """Index of the first hour with unserved energy, or -1 if feasible."""
    soc = soc0
    b = budget
    for t in range(base.size):
        net = base[t] + pv_power * shape[t]
        if net >= 0.0:
            absorb = min(net, (capacity - soc) / eta)
            soc += absorb * eta
            if soc > capacity:
                soc = capacity
        else:
            d = -net
            if battery_first:
                dis = min(d, soc)
                soc -= dis
                d -= dis
                h = min(d, b)
                b -= h
                d -= h
            else:
                h = min(d, b)
                b -= h
                d -= h
                dis = min(d, soc)
                soc -= dis
                d -= dis
            if d > tol:
                return t
    return -1


@numba.njit(cache=True, nogil=True)
def _run(base, shape, pv_power, capacity, budget, eta, soc0, battery_first, tol,
         soc_out, charge_out, discharge_out, hydro_out, curtail_out, unserved_out):
    soc = soc0
    b = budget
    for t in range(base.size):
        net = base[t] + pv_power * shape[t]
        charge = 0.0
        dis = 0.0
        h = 0.0
        curt = 0.0
        uns = 0.0
        if net >= 0.0:
            charge = min(net, (capacity - soc) / eta)
            soc += charge * eta
            if soc > capacity:
                soc = capacity
            curt = net - charge
        else:
            d = -net
            if battery_first:
                dis = min(d, soc)
                soc -= dis
                d -= dis
                h = min(d, b)
                b -= h
                d -= h
            else:
                h = min(d, b)
                b -= h
                d -= h
                dis = min(d, soc)
                soc -= dis
                d -= dis
            if d > tol:
                uns = d
        soc_out[t] = soc
        charge_out[t] = charge
        discharge_out[t] = dis
        hydro_out[t] = h
        curtail_out[t] = curt
        unserved_out[t] = uns


def split_hydro(hydro: HourlyProfile, share: float) -> tuple[HourlyProfile, float]:
    """Residual non-dispatchable hydro profile and the annual dispatchable budget."""
    if not 0.0 <= share <= 1.0:
        raise DispatchError(f"dispatchability share must lie in [0, 1], got {share}")
    residual = hydro.with_values(hydro.values * (1.0 - share))
    return residual, share * hydro.annual_energy


@dataclass(frozen=True)
class PreparedYear:
    """Scenario arrays precomputed once for repeated simulations."""

    label: int | str
    components: Mapping[str, NDArray[np.float64]]
    demand: NDArray[np.float64]
    base: NDArray[np.float64]
    pv_shape: NDArray[np.float64]
    budget: float
    hydro_tech: str | None
    tol: float

    @property
    def hours(self) -> int:
        return self.demand.size

    def first_failure(self, pv_power: float, cfg: DispatchConfig) -> int:
        return int(_first_failure(
            self.base, self.pv_shape, float(pv_power), float(cfg.battery_capacity), self.budget,
            float(cfg.round_trip_efficiency), float(cfg.initial_soc),
            cfg.deficit_policy == "battery_first", self.tol,
        ))

    def feasible(self, pv_power: float, cfg: DispatchConfig) -> bool:
        return self.first_failure(pv_power, cfg) < 0

    def run(self, pv_power: float, cfg: DispatchConfig) -> DispatchResult:
        n = self.hours
        soc, charge, dis, hyd, curt, uns = (np.empty(n) for _ in range(6))
        _run(
            self.base, self.pv_shape, float(pv_power), float(cfg.battery_capacity), self.budget,
            float(cfg.round_trip_efficiency), float(cfg.initial_soc),
            cfg.deficit_policy == "battery_first", self.tol,
            soc, charge, dis, hyd, curt, uns,
        )
        prev = np.concatenate(([cfg.initial_soc], soc[:-1]))
        pv = pv_power * self.pv_shape
        nondisp = pv + sum(self.components.values()) if self.components else pv.copy()
        used, produced = _attribute(self.components, pv, nondisp, curt, hyd, self.hydro_tech)
        return DispatchResult(
            label=self.label,
            additional_pv_power=float(pv_power),
            battery_capacity=float(cfg.battery_capacity),
            soc=soc,
            battery_delta=soc - prev,
            charge=charge,
            discharge=dis,
            hydro_dispatched=hyd,
            curtailed=curt,
            unserved=uns,
            demand=self.demand,
            nondispatchable=nondisp,
            hydro_budget=self.budget,
            initial_soc=float(cfg.initial_soc),
            used_energy=used,
            produced_energy=produced,
        )


def _attribute(components, pv, nondisp, curtailed, hydro_dispatched, hydro_tech):
    """Per-technology used energy with curtailment shared pro rata by output."""
    with np.errstate(divide="ignore", invalid="ignore"):
        kept = np.where(nondisp > 0.0, 1.0 - curtailed / nondisp, 1.0)
    used, produced = {}, {}
    for name, arr in components.items():
        used[name] = float(arr @ kept)
        produced[name] = float(arr.sum())
    used[ADDITIONAL_PV] = float(pv @ kept)
    produced[ADDITIONAL_PV] = float(pv.sum())
    disp = float(hydro_dispatched.sum())
    if hydro_tech is not None:
        used[hydro_tech] = used.get(hydro_tech, 0.0) + disp
        produced[hydro_tech] = produced.get(hydro_tech, 0.0) + disp
    return used, produced


def prepare(s: ScenarioYear, pv_shape: HourlyProfile | None = None, share: float | None = None) -> PreparedYear:
    """Split hydro, sum non-dispatchable output and fix the PV shape."""
    share = s.hydro_dispatch_share if share is None else share
    shape = pv_shape if pv_shape is not None else s.pv_shape
    n = s.hours
    if shape is None:
        shape_arr = np.zeros(n)
    else:
        if len(shape) != n:
            raise DispatchError(f"PV shape has {len(shape)} hours, scenario has {n}")
        shape_arr = np.ascontiguousarray(shape.values, dtype=np.float64)
    components = {}
    budget = 0.0
    hydro_tech = None
    for name, prof in s.generation.items():
        if len(prof) != n:
            raise DispatchError(f"{name} has {len(prof)} hours, demand has {n}")
        if name == s.hydro_tech:
            residual, budget = split_hydro(prof, share)
            components[name] = residual.values
            hydro_tech = name
        else:
            components[name] = prof.values
    demand = s.demand.values
    total = np.zeros(n)
    for arr in components.values():
        total = total + arr
    base = np.ascontiguousarray(total - demand)
    tol = FEASIBILITY_RTOL * max(1.0, float(demand.max()))
    return PreparedYear(s.label, components, demand, base, shape_arr, float(budget), hydro_tech, tol)


def simulate_year(
    s: ScenarioYear,
    additional_pv_power: float = 0.0,
    pv_shape: HourlyProfile | None = None,
    cfg: DispatchConfig | None = None,
) -> DispatchResult:
    """Dispatch one year with ``additional_pv_power`` MW of extra PV."""
    cfg = cfg or DispatchConfig()
    if additional_pv_power < 0:
        raise DispatchError("additional PV power must be non-negative")
    if additional_pv_power > 0 and pv_shape is None and s.pv_shape is None:
        raise DispatchError("additional PV needs a per-MW shape")
    prepared = prepare(s, pv_shape, cfg.hydro_dispatch_share)
    return prepared.run(additional_pv_power, cfg)


@dataclass(frozen=True)
class CurtailmentSummary:
    energy_twh: float
    percent_of_demand: float
    percent_of_demand_plus_curtailed: float


def curtailment_summary(r: DispatchResult, gross_demand: float | None = None) -> CurtailmentSummary:
    """Annual curtailment (TWh) and its share of gross demand under two conventions."""
    if not r.feasible:
        raise DispatchError("curtailment summary needs a feasible dispatch")
    demand = r.annual_demand if gross_demand is None else gross_demand
    if demand <= 0:
        raise DispatchError("gross demand must be positive")
    c = r.total_curtailed
    return CurtailmentSummary(c / 1e6, 100.0 * c / demand, 100.0 * c / (demand + c))
