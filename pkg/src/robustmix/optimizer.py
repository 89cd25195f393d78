"""Least-cost additional PV and storage by exhaustive hourly simulation.

The sweep starts at the PV power that closes the annual energy balance,
finds the smallest feasible storage for each PV level on the grid, and
keeps the cheapest point.  Feasibility is monotone in both PV power and
storage capacity, so each storage search may start from the previous
level and use bisection.  ``brute_force_reference`` evaluates every grid
point and is the oracle the sweep is tested against.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from robustmix.dispatch import DispatchConfig, DispatchResult, PreparedYear, prepare
from robustmix.portfolio import ADDITIONAL_PV, CostBook, lcoe
from robustmix.timeseries import HourlyProfile
from robustmix.worstcase import ScenarioYear, annual_gap

logger = logging.getLogger(__name__)

# Guards index arithmetic against float noise such as 3.0000000000004 steps.
_GRID_EPS = 1e-9


class InfeasibleError(RuntimeError):
    """No grid point satisfies the hourly balance.

    ``hour`` is the first hour left unserved at the largest grid point.
    """

    def __init__(self, message: str, hour: int | None = None):
        super().__init__(message)
        self.hour = hour


@dataclass(frozen=True)
class SearchGrid:
    pv_step: float = 100.0
    storage_step: float = 500.0
    pv_max: float = 1.0e5
    storage_max: float = 1.0e6

    def __post_init__(self) -> None:
        if self.pv_step <= 0 or self.storage_step <= 0:
            raise ValueError("grid steps must be positive")
        if self.pv_max <= 0 or self.storage_max <= 0:
            raise ValueError("grid maxima must be positive")

    @property
    def n_pv(self) -> int:
        """Index of the last PV grid point."""
        return int(math.floor(self.pv_max / self.pv_step + _GRID_EPS))

    @property
    def n_storage(self) -> int:
        return int(math.floor(self.storage_max / self.storage_step + _GRID_EPS))

    def pv(self, i: int) -> float:
        return i * self.pv_step

    def storage(self, j: int) -> float:
        return j * self.storage_step

    @property
    def size(self) -> int:
        return (self.n_pv + 1) * (self.n_storage + 1)


@dataclass(frozen=True)
class PortfolioSolution:
    additional_pv_power: float
    storage_capacity: float
    lcoe: float
    dispatch: DispatchResult
    label: int | str
    evaluations: int = 0

    def record(self) -> dict:
        """Result row in GW, GWh and EUR/MWh."""
        return {
            "year": str(self.label),
            "pv_gw": round(self.additional_pv_power / 1000.0, 6),
            "storage_gwh": round(self.storage_capacity / 1000.0, 6),
            "lcoe_eur_mwh": round(self.lcoe, 6),
        }


def min_pv_energy(s: ScenarioYear) -> float:
    """Annual energy the additional PV must supply with unlimited storage (MWh)."""
    return annual_gap(s)


def min_pv_power(s: ScenarioYear, pv_shape: HourlyProfile | None = None, pv_step: float | None = None) -> float:
    """PV power whose annual yield closes the gap; rounded up to ``pv_step`` if given."""
    shape = pv_shape if pv_shape is not None else s.pv_shape
    gap = min_pv_energy(s)
    if gap == 0.0:
        return 0.0
    if shape is None or shape.annual_energy <= 0:
        raise ValueError("PV shape has zero annual yield")
    power = gap / shape.annual_energy
    if pv_step:
        power = math.ceil(power / pv_step - _GRID_EPS) * pv_step
    return power


def default_grid(
    s: ScenarioYear,
    pv_step: float = 100.0,
    storage_step: float = 500.0,
    pv_max: float | None = None,
    storage_max: float | None = None,
) -> SearchGrid:
    """Grid with storage_max = 2x annual gap and a generous PV ceiling.

    The PV ceiling is the larger of 4x the minimum PV power and the power
    whose annual yield equals the whole annual demand.
    """
    gap = min_pv_energy(s)
    if storage_max is None:
        storage_max = max(math.ceil(2.0 * gap / storage_step - _GRID_EPS), 1) * storage_step
    if pv_max is None:
        lo = min_pv_power(s, pv_step=pv_step) if gap > 0 else 0.0
        yield_per_mw = s.pv_shape.annual_energy if s.pv_shape is not None else 0.0
        full = s.annual_demand / yield_per_mw if gap > 0 and yield_per_mw > 0 else 0.0
        pv_max = max(math.ceil(max(4.0 * lo, full) / pv_step - _GRID_EPS), 10) * pv_step
    return SearchGrid(pv_step, storage_step, pv_max, storage_max)


class _Evaluator:
    """Shared feasibility and cost evaluation for the sweep and the oracle."""

    def __init__(self, s: ScenarioYear, cfg: DispatchConfig, book: CostBook):
        if book is None:
            book = s.cost_book
        if book is None:
            raise ValueError(f"scenario {s.label} has no cost book")
        if ADDITIONAL_PV not in book:
            raise ValueError(f"cost book lacks {ADDITIONAL_PV!r}")
        if s.pv_shape is None:
            raise ValueError(f"scenario {s.label} has no additional PV shape")
        self.scenario = s
        self.cfg = cfg
        self.book = book
        self.prepared: PreparedYear = prepare(s, None, cfg.hydro_dispatch_share)
        self.demand = s.annual_demand
        self.count = 0

    def config(self, capacity: float) -> DispatchConfig | None:
        if capacity < self.cfg.initial_soc:
            return None
        return self.cfg.with_capacity(capacity)

    def feasible(self, pv: float, capacity: float) -> bool:
        cfg = self.config(capacity)
        if cfg is None:
            return False
        self.count += 1
        return self.prepared.feasible(pv, cfg)

    def first_failure(self, pv: float, capacity: float) -> int:
        cfg = self.config(capacity)
        return self.prepared.first_failure(pv, cfg) if cfg is not None else 0

    def usage(self, result: DispatchResult) -> dict[str, float]:
        source = result.used_energy if self.book.energy_billing == "used" else result.produced_energy
        out = {}
        for t in self.book.energy_priced:
            if t.name not in source:
                raise ValueError(f"energy-priced technology {t.name!r} is not in scenario {self.scenario.label}")
            out[t.name] = source[t.name]
        return out

    def evaluate(self, pv: float, capacity: float) -> tuple[float, DispatchResult]:
        result = self.prepared.run(pv, self.config(capacity))
        self.count += 1
        return lcoe(self.book.with_additions(pv, capacity), self.demand, self.usage(result)), result

    def lower_bound(self, pv: float) -> float:
        """LCOE floor for any point with PV power >= ``pv``."""
        zero = {t.name: 0.0 for t in self.book.energy_priced}
        if self.book.energy_billing == "produced":
            zero = {t.name: self.scenario.generation[t.name].annual_energy for t in self.book.energy_priced}
        return lcoe(self.book.with_additions(pv, 0.0), self.demand, zero)


def _min_storage_index(ev: _Evaluator, grid: SearchGrid, pv: float, hi: int, mode: str) -> int | None:
    """Smallest storage index <= ``hi`` that is feasible at ``pv``, else None."""
    if not ev.feasible(pv, grid.storage(hi)):
        return None
    if mode == "linear":
        j = hi
        while j > 0 and ev.feasible(pv, grid.storage(j - 1)):
            j -= 1
        return j
    # Gallop down from hi, then bisect: cheap when storage barely moves.
    good, step = hi, 1
    bad = -1
    while True:
        probe = good - step
        if probe <= bad:
            break
        if probe < 0:
            probe = 0
            if probe <= bad:
                break
        if ev.feasible(pv, grid.storage(probe)):
            good = probe
            if probe == 0:
                return 0
            step *= 2
        else:
            bad = probe
            break
    while good - bad > 1:
        mid = (good + bad) // 2
        if ev.feasible(pv, grid.storage(mid)):
            good = mid
        else:
            bad = mid
    return good


def min_storage_for_pv(
    s: ScenarioYear,
    pv_power: float,
    grid: SearchGrid,
    cfg: DispatchConfig | None = None,
    *,
    mode: str = "binary",
) -> float:
    """Smallest grid storage capacity (MWh) that keeps every hour served."""
    cfg = cfg or DispatchConfig()
    ev = _Evaluator(s, cfg, s.cost_book or _null_book())
    j = _min_storage_index(ev, grid, pv_power, grid.n_storage, mode)
    if j is None:
        raise InfeasibleError(
            f"{s.label}: infeasible at {pv_power} MW PV even with {grid.storage(grid.n_storage)} MWh",
            ev.first_failure(pv_power, grid.storage(grid.n_storage)),
        )
    return grid.storage(j)


def _null_book() -> CostBook:
    from robustmix.portfolio import TechnologySpec

    return CostBook((TechnologySpec(ADDITIONAL_PV, 0.0, 0.0, 1.0),))


def _better(lcoe_value: float, best: PortfolioSolution | None) -> bool:
    return best is None or lcoe_value < best.lcoe


def optimize(
    s: ScenarioYear,
    grid: SearchGrid | None = None,
    cfg: DispatchConfig | None = None,
    book: CostBook | None = None,
    *,
    mode: str = "binary",
    stopping: str = "bound",
    patience: int = 2,
) -> PortfolioSolution:
    """Minimum-LCOE (PV power, storage) on the grid.

    ``stopping="bound"`` ends the sweep once no larger PV power can beat
    the incumbent even with zero storage, which makes the result equal to
    the exhaustive search.  ``stopping="plateau"`` ends it after storage
    fails to shrink for ``patience`` consecutive PV steps.
    """
    if stopping not in ("bound", "plateau"):
        raise ValueError("stopping must be 'bound' or 'plateau'")
    cfg = cfg or DispatchConfig()
    grid = grid or default_grid(s)
    ev = _Evaluator(s, cfg, book)
    # Below the annual-balance power nothing is feasible; start one step early.
    yield_per_mw = s.pv_shape.annual_energy
    gap = max(0.0, min_pv_energy(s) - cfg.initial_soc)
    lo = gap / yield_per_mw if yield_per_mw > 0 else 0.0
    start = max(0, math.ceil(lo / grid.pv_step - _GRID_EPS) - 1)
    cap = grid.n_storage
    best: PortfolioSolution | None = None
    stalled = 0
    for i in range(start, grid.n_pv + 1):
        pv = grid.pv(i)
        if best is not None and stopping == "bound" and ev.lower_bound(pv) >= best.lcoe:
            break
        j = _min_storage_index(ev, grid, pv, cap, mode)
        if j is None:
            continue
        stalled = stalled + 1 if j >= cap and best is not None else 0
        cap = j
        value, result = ev.evaluate(pv, grid.storage(j))
        if _better(value, best):
            best = PortfolioSolution(pv, grid.storage(j), value, result, s.label)
        if stopping == "plateau" and (j == 0 or stalled >= patience):
            break
    if best is None:
        raise InfeasibleError(
            f"{s.label}: no feasible point up to {grid.pv_max} MW PV and {grid.storage_max} MWh storage",
            ev.first_failure(grid.pv(grid.n_pv), grid.storage(grid.n_storage)),
        )
    if best.additional_pv_power >= grid.pv_max - _GRID_EPS * grid.pv_step:
        logger.warning("%s: optimum sits on the PV grid ceiling %.0f MW; widen pv_max", s.label, grid.pv_max)
    if best.storage_capacity >= grid.storage_max - _GRID_EPS * grid.storage_step:
        logger.warning("%s: optimum sits on the storage grid ceiling %.0f MWh", s.label, grid.storage_max)
    return replace(best, evaluations=ev.count)


def brute_force_reference(
    s: ScenarioYear,
    grid: SearchGrid,
    cfg: DispatchConfig | None = None,
    book: CostBook | None = None,
) -> PortfolioSolution:
    """Evaluate every grid point; ties go to smaller PV, then smaller storage."""
    cfg = cfg or DispatchConfig()
    ev = _Evaluator(s, cfg, book)
    best = None
    for i in range(grid.n_pv + 1):
        pv = grid.pv(i)
        for j in range(grid.n_storage + 1):
            c = grid.storage(j)
            if not ev.feasible(pv, c):
                continue
            value, result = ev.evaluate(pv, c)
            key = (value, i, j)
            if best is None or key < best[0]:
                best = (key, PortfolioSolution(pv, c, value, result, s.label))
    if best is None:
        raise InfeasibleError(
            f"{s.label}: no feasible grid point",
            ev.first_failure(grid.pv(grid.n_pv), grid.storage(grid.n_storage)),
        )
    return replace(best[1], evaluations=ev.count)


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; the dispatch kernel releases the GIL."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def optimize_many(
    scenarios: Iterable[ScenarioYear],
    cfg: DispatchConfig | None = None,
    book: CostBook | None = None,
    *,
    grid_for: Callable[[ScenarioYear], SearchGrid] = default_grid,
    workers: int = 1,
    **kw,
) -> list[PortfolioSolution | InfeasibleError]:
    """Optimize each scenario; infeasible ones yield their error in place."""

    def one(s):
        try:
            return optimize(s, grid_for(s), cfg, book, **kw)
        except InfeasibleError as exc:
            return exc

    return parallel_map(one, list(scenarios), workers)


def write_solutions(path: str | Path, solutions: Iterable[PortfolioSolution]) -> None:
    """Solution records as CSV (``.csv``) or JSON (anything else)."""
    rows = [sol.record() for sol in solutions]
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w") as fh:
            fh.write("year,pv_gw,storage_gwh,lcoe_eur_mwh\n")
            for r in rows:
                fh.write(f"{r['year']},{r['pv_gw']:.6f},{r['storage_gwh']:.6f},{r['lcoe_eur_mwh']:.6f}\n")
    else:
        path.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
