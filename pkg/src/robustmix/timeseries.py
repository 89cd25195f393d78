"""Hourly profile container, CSV ingestion, scaling and capacity factors.

All series are hourly energies in MWh (equivalently MW averaged over the
hour).  A study year always has 8760 hours; leap-year inputs lose Feb 29.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760
HOURS_PER_LEAP_YEAR = 8784
# Feb 29 occupies hours [1416, 1440) of a leap year.
_FEB29_START = (31 + 28) * 24

SEASONS = ("winter", "spring", "summer", "autumn")
# Calendar quarters of a non-leap year: Jan-Mar, Apr-Jun, Jul-Sep, Oct-Dec.
_SEASON_HOURS = (90 * 24, 91 * 24, 92 * 24, 92 * 24)


class ProfileError(ValueError):
    """Raised when an hourly series violates the profile contract."""


@dataclass(frozen=True)
class HourlyProfile:
    """One year (or a toy horizon) of hourly energies in MWh/h."""

    values: NDArray[np.float64]
    year_label: int | str | None = None
    technology_tag: str = ""

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if arr.size == 0:
            raise ProfileError("empty profile")
        if not np.all(np.isfinite(arr)):
            raise ProfileError("non-finite value in profile")
        neg = np.flatnonzero(arr < 0)
        if neg.size:
            raise ProfileError(f"negative value at row {int(neg[0])}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def annual_energy(self) -> float:
        """Sum of hourly values, MWh."""
        return float(self.values.sum())

    @property
    def is_full_year(self) -> bool:
        return self.values.size == HOURS_PER_YEAR

    def with_values(self, values: ArrayLike) -> HourlyProfile:
        return HourlyProfile(np.asarray(values, dtype=np.float64), self.year_label, self.technology_tag)


@dataclass(frozen=True)
class SeasonSlice:
    season: str
    start: int
    stop: int

    @property
    def hours(self) -> slice:
        return slice(self.start, self.stop)

    def __len__(self) -> int:
        return self.stop - self.start


def season_slices(year_label: int | str | None = None) -> tuple[SeasonSlice, ...]:
    """Partition of the 8760-hour year into four contiguous quarters.

    The partition does not depend on the year because leap days are removed
    before any profile reaches this point.
    """
    out = []
    start = 0
    for name, n in zip(SEASONS, _SEASON_HOURS):
        out.append(SeasonSlice(name, start, start + n))
        start += n
    return tuple(out)


def seasonal_sums(profile: HourlyProfile) -> dict[str, float]:
    if not profile.is_full_year:
        raise ProfileError(f"seasonal sums need {HOURS_PER_YEAR} hours, got {len(profile)}")
    return {s.season: float(profile.values[s.hours].sum()) for s in season_slices()}


def drop_leap_day(values: ArrayLike, timestamps: pd.DatetimeIndex | None = None) -> NDArray[np.float64]:
    """Reduce an 8784-hour series to 8760 hours by removing Feb 29.

    With timestamps the rows dated Feb 29 are removed; without them the
    fixed hour range of a Jan-1-aligned leap year is cut.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != HOURS_PER_LEAP_YEAR:
        raise ProfileError(f"leap normalization expects {HOURS_PER_LEAP_YEAR} rows, got {arr.size}")
    if timestamps is None:
        return np.concatenate([arr[:_FEB29_START], arr[_FEB29_START + 24:]])
    mask = (timestamps.month == 2) & (timestamps.day == 29)
    if int(mask.sum()) != 24:
        raise ProfileError("8784-row file without 24 Feb 29 hours")
    return arr[~np.asarray(mask)]


def _read_table(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    df = pd.read_csv(path)
    if df.columns.size == 0 or df.columns[0] != "timestamp":
        raise ProfileError(f"{path}: first column must be 'timestamp'")
    return df


def _timestamps(df: pd.DataFrame, path: Path) -> pd.DatetimeIndex:
    try:
        return pd.DatetimeIndex(pd.to_datetime(df["timestamp"], format="ISO8601"))
    except (ValueError, TypeError) as exc:
        raise ProfileError(f"{path}: unparseable timestamp column ({exc})") from exc


def _column_values(df: pd.DataFrame, column: str, path: Path) -> NDArray[np.float64]:
    if column not in df.columns:
        raise ProfileError(f"{path}: missing column {column!r}")
    numeric = pd.to_numeric(df[column], errors="coerce")
    bad = np.flatnonzero(numeric.isna().to_numpy())
    if bad.size:
        raise ProfileError(f"{path}: non-numeric value in column {column!r} at row {int(bad[0])}")
    return numeric.to_numpy(dtype=np.float64)


def _normalize(values: NDArray[np.float64], stamps: pd.DatetimeIndex, path: Path, column: str) -> NDArray[np.float64]:
    neg = np.flatnonzero(values < 0)
    if neg.size:
        raise ProfileError(f"{path}: negative value at row {int(neg[0])} in column {column!r}")
    if values.size == HOURS_PER_YEAR:
        return values
    if values.size == HOURS_PER_LEAP_YEAR:
        return drop_leap_day(values, stamps)
    raise ProfileError(
        f"{path}: wrong row count {values.size} (expected {HOURS_PER_YEAR} or {HOURS_PER_LEAP_YEAR})"
    )


def load_profile(path: str | Path, column: str, *, year_label=None, technology_tag: str | None = None) -> HourlyProfile:
    """Read one column of an hourly CSV as a validated 8760-hour profile."""
    path = Path(path)
    df = _read_table(path)
    values = _column_values(df, column, path)
    values = _normalize(values, _timestamps(df, path), path, column)
    return HourlyProfile(values, year_label, technology_tag or column)


def load_profiles(path: str | Path, columns: Iterable[str] | None = None, *, year_label=None) -> dict[str, HourlyProfile]:
    """Read several columns of one CSV file in a single pass."""
    path = Path(path)
    df = _read_table(path)
    stamps = _timestamps(df, path)
    cols = list(columns) if columns is not None else [c for c in df.columns if c != "timestamp"]
    out = {}
    for col in cols:
        values = _normalize(_column_values(df, col, path), stamps, path, col)
        out[col] = HourlyProfile(values, year_label, col)
    return out


def hourly_index(year: int | None, hours: int = HOURS_PER_YEAR) -> pd.DatetimeIndex:
    """Naive hourly timestamps for a non-leap-normalized study year."""
    base = 2001 if year is None else int(year)
    idx = pd.date_range(f"{base}-01-01", periods=HOURS_PER_LEAP_YEAR if _is_leap(base) else HOURS_PER_YEAR, freq="h")
    idx = idx[~((idx.month == 2) & (idx.day == 29))]
    return idx[:hours]


def _is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def write_profiles(path: str | Path, profiles: dict[str, ArrayLike], year: int | None = None, float_format: str = "%.6f") -> None:
    """Write equal-length series as an hourly CSV in the loader's schema."""
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in profiles.items()}
    n = {a.size for a in arrays.values()}
    if len(n) != 1:
        raise ProfileError("series lengths differ")
    stamps = hourly_index(year, n.pop())
    df = pd.DataFrame({"timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"), **arrays})
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def scale_profile(p: HourlyProfile, old_power: float, new_power: float) -> HourlyProfile:
    """Rescale a profile recorded at ``old_power`` MW to ``new_power`` MW."""
    if old_power <= 0:
        raise ProfileError(f"old_power must be positive, got {old_power}")
    if new_power < 0:
        raise ProfileError(f"new_power must be non-negative, got {new_power}")
    return p.with_values(p.values * (new_power / old_power))


def capacity_factor(annual_energy_gwh: float, installed_power_mw: float) -> float:
    """Equivalent full-load hours: annual energy (GWh) per installed MW."""
    if installed_power_mw <= 0:
        raise ProfileError(f"installed power must be positive, got {installed_power_mw}")
    return annual_energy_gwh * 1000.0 / installed_power_mw


def per_mw(p: HourlyProfile, installed_power: float) -> HourlyProfile:
    return scale_profile(p, installed_power, 1.0)


def mean_profile(profiles: Sequence[HourlyProfile], *, technology_tag: str = "", year_label=None) -> HourlyProfile:
    """Element-wise mean of equal-length profiles."""
    if not profiles:
        raise ProfileError("mean of zero profiles")
    lengths = {len(p) for p in profiles}
    if len(lengths) != 1:
        raise ProfileError("profiles differ in length")
    stacked = np.vstack([p.values for p in profiles])
    return HourlyProfile(stacked.mean(axis=0), year_label, technology_tag or profiles[0].technology_tag)
