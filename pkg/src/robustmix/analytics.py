"""Coincidence and utilization factors, sensitivity sweeps, elasticities, OLS."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from robustmix.dispatch import DispatchConfig, DispatchResult
from robustmix.optimizer import (
    InfeasibleError,
    PortfolioSolution,
    SearchGrid,
    default_grid,
    optimize,
    parallel_map,
)
from robustmix.portfolio import ADDITIONAL_PV, CostBook
from robustmix.timeseries import HourlyProfile
from robustmix.worstcase import ScenarioYear

SWEEP_AXES = ("dispatchability", "pv_unit_cost", "battery_unit_cost")


class AnalyticsError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    p_value: float
    n: int
    stderr: float = 0.0

    def predict(self, x: ArrayLike) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def point_elasticity(self, x_mean: float, y_mean: float) -> float:
        return self.slope * x_mean / y_mean


@dataclass(frozen=True)
class ElasticityReport:
    parameter: str
    elasticity: float
    range: float
    per_year: Mapping[str, float] = field(default_factory=dict)


def _nondispatchable(s: ScenarioYear) -> dict[str, np.ndarray]:
    out = {}
    for name, p in s.generation.items():
        v = p.values
        if name == s.hydro_tech:
            v = v * (1.0 - s.hydro_dispatch_share)
        out[name] = v
    return out


def residual_demand(s: ScenarioYear, excluded_tech: str) -> HourlyProfile:
    """Hourly demand left after every other non-dispatchable source, clamped at 0."""
    gen = _nondispatchable(s)
    if excluded_tech not in gen:
        raise AnalyticsError(f"unknown technology {excluded_tech!r}")
    others = np.zeros(s.hours)
    for name, v in gen.items():
        if name != excluded_tech:
            others = others + v
    return HourlyProfile(np.maximum(0.0, s.demand.values - others), s.label, f"residual_{excluded_tech}")


def coincidence_factor(production: HourlyProfile | ArrayLike, residual: HourlyProfile | ArrayLike) -> float:
    """Cosine similarity between production and the residual demand it faces."""
    e = np.asarray(getattr(production, "values", production), dtype=float)
    d = np.asarray(getattr(residual, "values", residual), dtype=float)
    if e.shape != d.shape:
        raise AnalyticsError("vectors differ in length")
    ne, nd = np.linalg.norm(e), np.linalg.norm(d)
    if ne == 0 or nd == 0:
        raise AnalyticsError("zero-norm vector")
    return float(np.clip(e @ d / (ne * nd), -1.0, 1.0))


def scenario_coincidence_factor(s: ScenarioYear, tech: str) -> float:
    return coincidence_factor(_nondispatchable(s)[tech], residual_demand(s, tech))


def utilization_factor(used_energy: float, installed_power: float) -> float:
    """Used energy (MWh) per installed MW, in equivalent hours."""
    if installed_power <= 0:
        raise AnalyticsError(f"installed power must be positive, got {installed_power}")
    return used_energy / installed_power


def technology_utilization(r: DispatchResult, powers: Mapping[str, float]) -> dict[str, float]:
    """UF per technology; ``powers`` maps technology name to MW."""
    return {name: utilization_factor(r.used_energy[name], p) for name, p in powers.items() if p > 0}


def total_utilization_factor(r: DispatchResult, powers: Mapping[str, float]) -> float:
    """UF of all generation against total installed power incl. additional PV."""
    total_power = sum(powers.values()) + r.additional_pv_power
    used = sum(r.used_energy[n] for n in powers) + r.used_energy.get(ADDITIONAL_PV, 0.0)
    return utilization_factor(used, total_power)


def arc_elasticity(x_low: float, x_high: float, y_low: float, y_high: float) -> float:
    """Relative change in y over relative change in x, both against the low end."""
    if x_low == 0 or y_low == 0:
        raise AnalyticsError("arc elasticity needs non-zero x_low and y_low")
    if x_high == x_low:
        raise AnalyticsError("arc elasticity needs x_high != x_low")
    return ((y_high - y_low) / y_low) / ((x_high - x_low) / x_low)


def relative_range(x_low: float, x_high: float) -> float:
    if x_low == 0:
        raise AnalyticsError("range needs non-zero x_low")
    return abs(x_high - x_low) / abs(x_low)


def elasticity_report(
    parameter: str, x_low: float, x_high: float, y_by_year: Mapping[str, tuple[float, float]]
) -> ElasticityReport:
    """Per-year arc elasticities over the full range and their mean."""
    if not y_by_year:
        raise AnalyticsError("no years to average")
    per_year = {str(k): arc_elasticity(x_low, x_high, lo, hi) for k, (lo, hi) in y_by_year.items()}
    mean = float(np.mean(list(per_year.values())))
    return ElasticityReport(parameter, mean, relative_range(x_low, x_high), per_year)


def student_t_sf2(t: float, dof: int) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def ols_regression(x: ArrayLike, y: ArrayLike) -> RegressionResult:
    """Simple least-squares line with a two-sided t-test on the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n != y.size:
        raise AnalyticsError("x and y differ in length")
    if n < 3:
        raise AnalyticsError("regression needs at least 3 points")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise AnalyticsError("x is constant")
    dy = y - y.mean()
    slope = float(dx @ dy) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sse = float(resid @ resid)
    syy = float(dy @ dy)
    r2 = 1.0 if syy == 0 else max(0.0, min(1.0, 1.0 - sse / syy))
    dof = n - 2
    se = math.sqrt(sse / dof / sxx)
    if se == 0:
        p = 0.0 if slope != 0 else 1.0
    else:
        p = student_t_sf2(slope / se, dof)
    return RegressionResult(slope, intercept, r2, min(1.0, max(0.0, p)), n, se)


@dataclass(frozen=True)
class SweepCell:
    label: str
    value: float
    solution: PortfolioSolution | None
    error: str | None = None


@dataclass(frozen=True)
class SweepTable:
    axis: str
    values: tuple[float, ...]
    cells: tuple[SweepCell, ...]

    def labels(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.label not in seen:
                seen.append(c.label)
        return seen

    def cell(self, label, value) -> SweepCell:
        for c in self.cells:
            if c.label == str(label) and c.value == value:
                return c
        raise KeyError((label, value))

    def lcoe_row(self, label) -> list[float | None]:
        return [c.solution.lcoe if c.solution else None for c in (self.cell(label, v) for v in self.values)]

    def elasticity(self, parameter: str | None = None) -> ElasticityReport:
        lo, hi = self.values[0], self.values[-1]
        ys = {}
        for label in self.labels():
            a, b = self.cell(label, lo).solution, self.cell(label, hi).solution
            if a is not None and b is not None:
                ys[label] = (a.lcoe, b.lcoe)
        return elasticity_report(parameter or self.axis, lo, hi, ys)

    def to_csv(self, path: str | Path) -> None:
        """One row per scenario; PV, storage, LCOE and status for each swept value."""
        header = ["year"]
        for v in self.values:
            tag = f"{self.axis}={v:g}"
            header += [f"{tag}:pv_gw", f"{tag}:storage_gwh", f"{tag}:lcoe_eur_mwh", f"{tag}:status"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for label in self.labels():
                row = [label]
                for v in self.values:
                    c = self.cell(label, v)
                    if c.solution is None:
                        row += ["", "", "", c.error or "infeasible"]
                    else:
                        rec = c.solution.record()
                        row += [f"{rec['pv_gw']:.6f}", f"{rec['storage_gwh']:.6f}", f"{rec['lcoe_eur_mwh']:.6f}", "ok"]
                w.writerow(row)

    def records(self) -> list[dict]:
        out = []
        for c in self.cells:
            rec = {"year": c.label, "axis": self.axis, "value": c.value}
            if c.solution is None:
                rec.update(status="infeasible", error=c.error)
            else:
                rec.update(c.solution.record(), status="ok")
            out.append(rec)
        return out


def _variant(s: ScenarioYear, book: CostBook, axis: str, value: float) -> tuple[ScenarioYear, CostBook]:
    if axis == "dispatchability":
        return s.with_share(value), book
    if axis == "pv_unit_cost":
        return s, book.with_pv_unit_cost(value)
    if axis == "battery_unit_cost":
        return s, book.with_battery_unit_cost(value)
    raise AnalyticsError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep(
    base: Sequence[ScenarioYear],
    axis: str,
    values: Sequence[float],
    cfg: DispatchConfig | None = None,
    book: CostBook | None = None,
    *,
    grid_for: Callable[[ScenarioYear], SearchGrid] = default_grid,
    workers: int = 1,
    **optimize_kw,
) -> SweepTable:
    """Re-optimize every scenario at every value of one parameter."""
    values = tuple(float(v) for v in values)
    if not values:
        raise AnalyticsError("sweep needs at least one value")
    diffs = np.diff(values)
    if values and len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise AnalyticsError("sweep values must be strictly monotone")
    if axis not in SWEEP_AXES:
        raise AnalyticsError(f"unknown sweep axis {axis!r}")
    labels = [str(s.label) for s in base]
    if len(set(labels)) != len(labels):
        raise AnalyticsError(f"duplicate scenario labels in sweep: {labels}")
    cfg = cfg or DispatchConfig()
    if axis == "dispatchability" and cfg.hydro_dispatch_share is not None:
        cfg = replace(cfg, hydro_dispatch_share=None)
    jobs = []
    for s in base:
        b = book if book is not None else s.cost_book
        grid = grid_for(s)
        for v in values:
            jobs.append((s, b, grid, v))

    def one(job):
        s, b, grid, v = job
        sv, bv = _variant(s, b, axis, v)
        try:
            return SweepCell(str(s.label), v, optimize(sv, grid, cfg, bv, **optimize_kw))
        except InfeasibleError as exc:
            return SweepCell(str(s.label), v, None, str(exc))

    return SweepTable(axis, values, tuple(parallel_map(one, jobs, workers)))
