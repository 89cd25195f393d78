from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_toy, toy_book, toy_scenario
from robustmix.dispatch import DispatchConfig
from robustmix.optimizer import (
    InfeasibleError,
    SearchGrid,
    brute_force_reference,
    default_grid,
    min_pv_power,
    min_storage_for_pv,
    optimize,
    optimize_many,
    parallel_map,
    write_solutions,
)
from robustmix.timeseries import HOURS_PER_YEAR, HourlyProfile


def _two_hour(book=None):
    # PV only in hour 0; hour 1 must be carried by storage.
    return toy_scenario([1, 1], {"wind": [0.0, 0.0]}, pv_shape=[1.0, 0.0], book=book or toy_book())


def _small_grid(s, n_pv=12, n_storage=12):
    d = float(s.demand.values.max())
    return SearchGrid(pv_step=d / 2, storage_step=d / 4, pv_max=n_pv * d / 2, storage_max=n_storage * d / 4)


def test_min_storage_toy():
    grid = SearchGrid(pv_step=0.5, storage_step=0.5, pv_max=4.0, storage_max=4.0)
    assert min_storage_for_pv(_two_hour(), 2.0, grid) == 1.0
    assert min_storage_for_pv(_two_hour(), 2.0, grid, mode="linear") == 1.0
    with pytest.raises(InfeasibleError):
        min_storage_for_pv(_two_hour(), 1.0, grid)


def test_balanced_year_needs_nothing():
    s = toy_scenario([1, 2, 3], {"wind": [1.0, 2.0, 3.0]}, pv_shape=[1.0, 1.0, 1.0], book=toy_book())
    sol = optimize(s, SearchGrid(1.0, 1.0, 5.0, 5.0))
    assert (sol.additional_pv_power, sol.storage_capacity) == (0.0, 0.0)
    assert min_pv_power(s) == 0.0


def test_zero_generation_and_no_sun_is_infeasible_with_hour():
    s = toy_scenario([1, 1, 1], {"wind": [0.0, 0.0, 0.0]}, pv_shape=[0.0, 1.0, 1.0], book=toy_book())
    with pytest.raises(InfeasibleError) as info:
        optimize(s, SearchGrid(1.0, 1.0, 5.0, 5.0))
    assert info.value.hour == 0
    with pytest.raises(InfeasibleError) as info:
        brute_force_reference(s, SearchGrid(1.0, 1.0, 5.0, 5.0))
    assert info.value.hour == 0


def test_min_pv_power_example():
    # A 93,506 GWh gap over 1,636 full-load hours needs about 57,155 MW.
    gap = 93_506_000.0
    shape = HourlyProfile(np.full(HOURS_PER_YEAR, 1636.0 / HOURS_PER_YEAR))
    demand = np.full(HOURS_PER_YEAR, gap / HOURS_PER_YEAR)
    s = toy_scenario(demand, {}, pv_shape=shape.values)
    assert min_pv_power(s) == pytest.approx(93_506_000 / 1636, rel=1e-12)
    assert min_pv_power(s, pv_step=100.0) == 57_200.0


def test_default_grid_covers_full_demand_pv():
    s = _two_hour()
    g = default_grid(s, pv_step=0.5, storage_step=0.5)
    assert g.storage_max == 4.0  # 2x the 2 MWh gap
    assert g.pv_max >= 2.0 and g.n_pv >= 10


@pytest.mark.parametrize("billing", ["used", "produced"])
def test_parity_on_three_by_three(billing):
    s = _two_hour(toy_book(billing=billing))
    grid = SearchGrid(1.0, 0.5, 3.0, 1.5)
    a, b = optimize(s, grid), brute_force_reference(s, grid)
    assert (a.additional_pv_power, a.storage_capacity) == (b.additional_pv_power, b.storage_capacity) == (2.0, 1.0)
    assert a.lcoe == b.lcoe


@pytest.mark.parametrize("billing", ["used", "produced"])
@pytest.mark.parametrize("policy", ["battery_first", "hydro_first"])
def test_parity_with_brute_force_random(billing, policy):
    rng = np.random.default_rng(7)
    cfg = DispatchConfig(deficit_policy=policy)
    for _ in range(40):
        s = random_toy(rng, billing=billing)
        grid = _small_grid(s, int(rng.integers(3, 20)), int(rng.integers(3, 20)))
        try:
            ref = brute_force_reference(s, grid, cfg)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                optimize(s, grid, cfg)
            continue
        for mode in ("binary", "linear"):
            got = optimize(s, grid, cfg, mode=mode)
            assert (got.additional_pv_power, got.storage_capacity, got.lcoe) == (
                ref.additional_pv_power,
                ref.storage_capacity,
                ref.lcoe,
            )


def test_plateau_stopping_finds_feasible_point_no_cheaper_than_truth(rng):
    for _ in range(20):
        s = random_toy(rng, with_cogen=False)
        grid = _small_grid(s)
        try:
            ref = brute_force_reference(s, grid)
        except InfeasibleError:
            continue
        got = optimize(s, grid, stopping="plateau")
        assert got.dispatch.feasible
        assert got.lcoe >= ref.lcoe - 1e-12


def test_limiting_costs_pick_corners():
    rng = np.random.default_rng(11)
    s = random_toy(rng, hours=72, with_cogen=False)
    grid = _small_grid(s, 30, 30)
    cheap_pv = optimize(s, grid, book=toy_book(pv_cost=1e-6, battery_cost=1e6))
    cheap_bat = optimize(s, grid, book=toy_book(pv_cost=1e6, battery_cost=1e-6))
    # Free PV buys the smallest feasible storage anywhere on the grid, and vice versa.
    smallest = min(
        min_storage_for_pv(s, grid.pv(i), grid)
        for i in range(grid.n_pv + 1)
        if _feasible_somewhere(s, grid, grid.pv(i))
    )
    assert cheap_pv.storage_capacity == smallest
    assert cheap_bat.additional_pv_power <= cheap_pv.additional_pv_power
    lowest_pv = min(grid.pv(i) for i in range(grid.n_pv + 1) if _feasible_somewhere(s, grid, grid.pv(i)))
    assert cheap_bat.additional_pv_power == lowest_pv


def _feasible_somewhere(s, grid, pv):
    try:
        min_storage_for_pv(s, pv, grid)
        return True
    except InfeasibleError:
        return False


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_min_storage_non_increasing_in_pv(seed):
    s = random_toy(np.random.default_rng(seed), with_cogen=False)
    grid = _small_grid(s, 16, 24)
    prev = None
    for i in range(grid.n_pv + 1):
        if not _feasible_somewhere(s, grid, grid.pv(i)):
            assert prev is None
            continue
        c = min_storage_for_pv(s, grid.pv(i), grid)
        assert prev is None or c <= prev
        prev = c


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.floats(0.1, 10))
def test_argmin_invariant_under_joint_cost_scaling(seed, k):
    s = random_toy(np.random.default_rng(seed), with_cogen=False)
    grid = _small_grid(s)
    base = toy_book(pv_cost=600.0, battery_cost=150.0)
    try:
        a = optimize(s, grid, book=base)
    except InfeasibleError:
        return
    b = optimize(s, grid, book=base.scaled(k))
    assert (a.additional_pv_power, a.storage_capacity) == (b.additional_pv_power, b.storage_capacity)
    assert b.lcoe == pytest.approx(k * a.lcoe, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_dearer_pv_never_buys_more_pv(seed):
    s = random_toy(np.random.default_rng(seed), with_cogen=False)
    grid = _small_grid(s)
    try:
        sols = [optimize(s, grid, book=toy_book(pv_cost=c, battery_cost=150.0)) for c in (300.0, 600.0, 1200.0)]
    except InfeasibleError:
        return
    pv = [x.additional_pv_power for x in sols]
    lc = [x.lcoe for x in sols]
    assert pv == sorted(pv, reverse=True)
    assert lc == sorted(lc)


def test_parallel_map_preserves_order():
    assert parallel_map(lambda x: x * x, range(20), workers=4) == [x * x for x in range(20)]
    assert parallel_map(str, [], workers=3) == []


def test_optimize_many_deterministic_and_keeps_errors():
    rng = np.random.default_rng(5)
    toys = [random_toy(rng, hours=48) for _ in range(6)]
    toys.append(toy_scenario([1, 1], {"wind": [0.0, 0.0]}, pv_shape=[0.0, 0.0], book=toy_book(), label="dark"))

    def grid_for(s):
        return _small_grid(s)

    seq = optimize_many(toys, grid_for=grid_for, workers=1)
    par = optimize_many(toys, grid_for=grid_for, workers=4)
    assert isinstance(seq[-1], InfeasibleError) and isinstance(par[-1], InfeasibleError)
    for a, b in zip(seq[:-1], par[:-1]):
        if isinstance(a, InfeasibleError):
            assert isinstance(b, InfeasibleError)
        else:
            assert a.record() == b.record()


def test_write_solutions(tmp_path):
    sol = optimize(_two_hour(), SearchGrid(1.0, 0.5, 3.0, 1.5))
    write_solutions(tmp_path / "s.csv", [sol])
    write_solutions(tmp_path / "s.json", [sol])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "year,pv_gw,storage_gwh,lcoe_eur_mwh"
    assert lines[1].startswith("toy,0.002000,0.001000,")
    assert json.loads((tmp_path / "s.json").read_text())[0]["pv_gw"] == 0.002


def test_grid_validation():
    with pytest.raises(ValueError):
        SearchGrid(pv_step=0.0)
    with pytest.raises(ValueError):
        SearchGrid(storage_max=-1.0)
    with pytest.raises(ValueError):
        optimize(_two_hour(), SearchGrid(1.0, 1.0, 2.0, 2.0), stopping="never")
