"""Synthetic ten-year hourly dataset for running the pipeline without REE data.

Profiles are built from smooth seasonal/diurnal templates plus seeded
noise, then rescaled so each (technology, year) hits a chosen capacity
factor.  Installed and plan powers follow the Spanish 2010-2019 mix.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml
from scipy import signal

from robustmix.timeseries import HOURS_PER_YEAR, write_profiles

YEARS = tuple(range(2010, 2020))
TECHS = ("wind", "hydro", "pv", "thermal_solar", "cogen_bundle")

INSTALLED_MW = {
    "wind": (20057, 21091, 22573, 22854, 22845, 22864, 22900, 22922, 23091, 25257),
    "hydro": (19139, 19156, 19379, 19437, 19443, 20359, 20359, 20359, 20376, 20412),
    "pv": (3458, 4047, 4298, 4422, 4428, 4420, 4430, 4439, 4466, 8594),
    "thermal_solar": (682, 1049, 2000, 2300, 2300, 2300, 2299, 2304, 2304, 2306),
    "cogen_bundle": (8042, 8140, 8193, 8064, 8087, 8103, 8020, 7252, 7164, 7310),
}
PLAN_MW = {"wind": 50333, "hydro": 24133, "pv": 39181, "thermal_solar": 7303}

# Equivalent full-load hours per year; spread mimics a real decade.
TARGET_CF = {
    "wind": (2133, 1976, 2131, 2390, 2241, 2100, 2065, 2057, 2119, 2074),
    "hydro": (2055, 1535, 956, 1783, 1871, 1277, 1665, 846, 1602, 1144),
    "pv": (1776, 1750, 1815, 1790, 1760, 1774, 1636, 1760, 1697, 1720),
    "thermal_solar": (2050, 2010, 1990, 1931, 2156, 2211, 2200, 2292, 1927, 2255),
    "cogen_bundle": (4230, 4402, 4693, 4595, 3756, 3897, 4043, 4807, 4959, 4929),
}
DEMAND_TWH = (260.9, 254.8, 251.3, 247.1, 243.8, 249.0, 249.1, 252.6, 254.5, 249.8)
# Hot summers lift Jul-Sep demand before the annual total is fixed.
SUMMER_BOOST = {2017: 1.06}


def _calendar(hours: int = HOURS_PER_YEAR):
    t = np.arange(hours)
    return t % 24, t // 24, (t // 24) % 7


def _smooth_noise(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    return signal.lfilter([1.0], [1.0, -rho], rng.normal(0.0, sigma, n))


def _solar(rng, hour, doy, spread: float = 6.0, shift: float = 0.0) -> np.ndarray:
    season = 0.78 + 0.22 * np.cos(2 * np.pi * (doy - 172) / 365)
    half_day = spread + 1.0 * np.cos(2 * np.pi * (doy - 172) / 365)
    x = (hour + 0.5 - 13.0 - shift) / half_day
    bell = np.clip(np.cos(np.pi * x / 2), 0.0, None) * (np.abs(x) < 1)
    clouds = np.repeat(np.clip(rng.beta(5, 1.6, doy.max() + 1), 0.05, 1.0), 24)[: hour.size]
    return season * bell * clouds


def _profiles(rng: np.random.Generator):
    hour, doy, dow = _calendar()
    n = hour.size
    out = {}
    wind = 0.35 + 0.13 * np.cos(2 * np.pi * (doy - 20) / 365) + _smooth_noise(rng, n, 0.96, 0.035)
    wind += 0.03 * np.cos(2 * np.pi * (hour - 16) / 24)
    out["wind"] = np.clip(wind, 0.02, None)
    hydro = 0.25 + 0.15 * np.cos(2 * np.pi * (doy - 90) / 365) + _smooth_noise(rng, n, 0.995, 0.004)
    hydro *= 1.0 + 0.25 * np.cos(2 * np.pi * (hour - 20) / 24)
    out["hydro"] = np.clip(hydro, 0.01, None)
    out["pv"] = _solar(rng, hour, doy)
    out["thermal_solar"] = _solar(rng, hour, doy, spread=8.0, shift=2.0)
    cogen = 0.55 + 0.05 * (dow < 5) + 0.02 * np.cos(2 * np.pi * (doy - 15) / 365) + _smooth_noise(rng, n, 0.9, 0.01)
    out["cogen_bundle"] = np.clip(cogen, 0.05, None)
    seasonal = 1.0 + 0.09 * np.cos(2 * np.pi * (doy - 15) / 182.5) + 0.03 * np.cos(2 * np.pi * (doy - 15) / 365)
    diurnal = 0.82 + 0.12 * np.exp(-(((hour - 12) / 3.0) ** 2)) + 0.18 * np.exp(-(((hour - 20.5) / 2.0) ** 2))
    weekly = np.where(dow >= 5, 0.9, 1.0)
    out["demand"] = seasonal * diurnal * weekly * (1.0 + _smooth_noise(rng, n, 0.95, 0.006))
    return out


def ev_shape(hours: int = HOURS_PER_YEAR) -> np.ndarray:
    hour = np.arange(hours) % 24
    return 0.3 + np.exp(-(((hour - 2.0) / 2.5) ** 2)) + 0.4 * np.exp(-(((hour - 19.0) / 2.0) ** 2))


def generate(seed: int = 2021) -> dict[int, dict[str, np.ndarray]]:
    """Year -> column -> hourly MWh, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    data = {}
    for k, year in enumerate(YEARS):
        raw = _profiles(rng)
        cols = {}
        for tech in TECHS:
            target = TARGET_CF[tech][k] * INSTALLED_MW[tech][k]
            cols[tech] = raw[tech] * (target / raw[tech].sum())
        demand = raw["demand"].copy()
        demand[4344:6552] *= SUMMER_BOOST.get(year, 1.0)
        cols["demand"] = demand * (DEMAND_TWH[k] * 1e6 / demand.sum())
        data[year] = cols
    return data


def write_desk_decade(out_dir: str | Path, seed: int = 2021) -> Path:
    """Write yearly CSVs, an EV shape file and a run configuration; returns the config path."""
    out = Path(out_dir)
    (out / "data").mkdir(parents=True, exist_ok=True)
    for year, cols in generate(seed).items():
        write_profiles(out / "data" / f"{year}.csv", cols, year)
    write_profiles(out / "data" / "ev_shape.csv", {"ev": ev_shape()}, 2019)
    config = {
        "data": {
            "files": {year: f"data/{year}.csv" for year in YEARS},
            "columns": {t: t for t in TECHS},
            "demand_column": "demand",
        },
        "installed_power": {t: dict(zip(YEARS, INSTALLED_MW[t])) for t in TECHS},
        "plan_powers": dict(PLAN_MW),
        "flags": [["thermal_solar", 2010], ["thermal_solar", 2011], ["thermal_solar", 2012]],
        "additional_pv_shape": {"mean_of": "pv"},
        "ev": {"annual_energy_twh": 60.775, "shape": {"path": "data/ev_shape.csv", "column": "ev"}},
        "hydro_dispatch_share": 0.4,
        "hydro_technology": "hydro",
        "cost_book": None,
        "grid": {"pv_step": 100.0, "storage_step": 500.0},
        "dispatch": {"round_trip_efficiency": 1.0, "initial_soc": 0.0, "deficit_policy": "battery_first"},
        "sweeps": {
            "dispatchability": [0.40, 0.55, 0.70, 0.85],
            "pv_unit_cost": [500, 667, 833, 1000],
            "battery_unit_cost": [100, 150, 200, 250],
        },
        "output_dir": "out",
    }
    path = out / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False))
    return path
