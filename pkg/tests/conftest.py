from __future__ import annotations

import numpy as np
import pytest

from robustmix.portfolio import ADDITIONAL_PV, CostBook, TechnologySpec
from robustmix.timeseries import HourlyProfile
from robustmix.worstcase import ScenarioYear

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, ok: bool | None, detail: str = "") -> None:
    """Print one pass/fail line; ``ok=None`` marks a criterion skipped for lack of data."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {number:>2} {status}  {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def toy_book(
    pv_cost: float = 500.0,
    battery_cost: float = 100.0,
    cogen_price: float | None = None,
    billing: str = "used",
) -> CostBook:
    techs = [
        TechnologySpec("wind", 1.0, 900.0, 25.0),
        TechnologySpec(ADDITIONAL_PV, 0.0, pv_cost, 25.0),
    ]
    if cogen_price is not None:
        techs.append(TechnologySpec("cogen", 0.0, energy_price=cogen_price))
    return CostBook(tuple(techs), battery_unit_cost=battery_cost, energy_billing=billing)


def toy_scenario(
    demand,
    generation: dict[str, np.ndarray] | None = None,
    pv_shape=None,
    share: float = 0.0,
    book: CostBook | None = None,
    label="toy",
) -> ScenarioYear:
    demand = np.asarray(demand, dtype=float)
    gen = {k: HourlyProfile(np.asarray(v, dtype=float), label, k) for k, v in (generation or {}).items()}
    shape = None if pv_shape is None else HourlyProfile(np.asarray(pv_shape, dtype=float), label, ADDITIONAL_PV)
    return ScenarioYear(
        label=label,
        generation=gen,
        demand=HourlyProfile(demand, label, "demand"),
        hydro_dispatch_share=share,
        pv_shape=shape,
        cost_book=book,
    )


def random_toy(rng: np.random.Generator, hours: int | None = None, with_cogen: bool = True, billing: str = "used"):
    """Small solar-driven day/night scenario with random weather and costs."""
    n = int(hours or rng.integers(24, 169))
    t = np.arange(n)
    sun = np.clip(np.sin(2 * np.pi * ((t % 24) - 6) / 24), 0, None) * rng.uniform(0.3, 1.0, n)
    demand = rng.uniform(0.6, 1.4, n) * (1.0 + 0.3 * np.sin(2 * np.pi * (t % 24) / 24))
    gen = {"wind": rng.uniform(0.0, 0.8, n), "hydro": rng.uniform(0.0, 0.5, n)}
    if with_cogen:
        gen["cogen"] = np.full(n, rng.uniform(0.0, 0.3))
    book = toy_book(
        pv_cost=float(rng.uniform(200, 1500)),
        battery_cost=float(rng.uniform(20, 400)),
        cogen_price=float(rng.uniform(10, 90)) if with_cogen else None,
        billing=billing,
    )
    return toy_scenario(demand, gen, sun, share=float(rng.uniform(0.0, 0.9)), book=book, label=f"toy{n}")


@pytest.fixture(scope="session")
def desk_config(tmp_path_factory):
    """Synthetic ten-year dataset and its run configuration, written once per session."""
    from robustmix.desk import write_desk_decade

    return write_desk_decade(tmp_path_factory.mktemp("desk"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
