from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_toy, toy_scenario
from robustmix.dispatch import (
    DispatchConfig,
    DispatchError,
    curtailment_summary,
    prepare,
    simulate_year,
    split_hydro,
)
from robustmix.portfolio import ADDITIONAL_PV
from robustmix.timeseries import HOURS_PER_YEAR, HourlyProfile, load_profiles

POLICIES = ("hydro_first", "battery_first")


def _toy(gen=(2, 0, 2, 0), demand=(1, 1, 1, 1), **kw):
    return toy_scenario(demand, {"wind": np.asarray(gen, dtype=float)}, **kw)


def test_hand_trace_with_battery():
    r = simulate_year(_toy(), cfg=DispatchConfig(battery_capacity=1.0))
    assert r.feasible
    np.testing.assert_allclose(r.soc, [1, 0, 1, 0])
    np.testing.assert_allclose(r.battery_delta, [1, -1, 1, -1])
    assert r.total_curtailed == 0.0


def test_hand_trace_without_battery():
    r = simulate_year(_toy(), cfg=DispatchConfig(battery_capacity=0.0))
    assert not r.feasible
    assert r.total_unserved == pytest.approx(2.0)
    assert r.total_curtailed == pytest.approx(2.0)
    assert r.first_unserved_hour == 1


def test_exact_balance_is_feasible_with_nothing_moving():
    r = simulate_year(_toy(gen=(1, 2, 3), demand=(1, 2, 3)))
    assert r.feasible
    for arr in (r.soc, r.charge, r.discharge, r.hydro_dispatched, r.curtailed, r.unserved):
        assert not arr.any()


def test_hydro_budget_covers_deficit():
    s = toy_scenario([2, 2], {"hydro": [2.0, 0.0]}, share=0.5)
    # Residual hydro [1, 0], budget 1.
    r = simulate_year(s)
    np.testing.assert_allclose(r.hydro_dispatched, [1.0, 0.0])
    np.testing.assert_allclose(r.unserved, [0.0, 2.0])


def test_policies_differ_in_merit_order():
    # Budget 1 from a share-1 hydro profile; battery holds 1.
    s = toy_scenario([1] * 5, {"wind": [2.0, 0.0, 2.0, 0.0, 0.0], "hydro": [0.0, 0.0, 0.0, 0.0, 1.0]}, share=1.0)
    hf = simulate_year(s, cfg=DispatchConfig(battery_capacity=1.0, deficit_policy="hydro_first"))
    bf = simulate_year(s, cfg=DispatchConfig(battery_capacity=1.0, deficit_policy="battery_first"))
    np.testing.assert_allclose(hf.hydro_dispatched, [0, 1, 0, 0, 0])
    np.testing.assert_allclose(bf.hydro_dispatched, [0, 0, 0, 0, 1])
    # Spending hydro early leaves the battery full when the next surplus arrives.
    assert hf.curtailed[2] == pytest.approx(1.0)
    assert hf.first_unserved_hour == 4
    assert bf.feasible


def test_efficiency_applies_on_charge():
    r = simulate_year(_toy(gen=(2, 0), demand=(1, 0.5)), cfg=DispatchConfig(battery_capacity=1.0, round_trip_efficiency=0.5))
    assert r.soc[0] == pytest.approx(0.5)
    assert r.feasible


def test_initial_soc():
    r = simulate_year(_toy(gen=(0,), demand=(1,)), cfg=DispatchConfig(battery_capacity=2.0, initial_soc=1.0))
    assert r.feasible and r.soc[0] == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"hydro_dispatch_share": 1.2},
        {"battery_capacity": -1.0},
        {"round_trip_efficiency": 0.0},
        {"round_trip_efficiency": 1.5},
        {"battery_capacity": 1.0, "initial_soc": 2.0},
        {"deficit_policy": "random"},
    ],
)
def test_config_invariants(kwargs):
    with pytest.raises(DispatchError):
        DispatchConfig(**kwargs)


def test_split_hydro_examples():
    hydro = HourlyProfile(np.full(HOURS_PER_YEAR, 20_416_000.0 / HOURS_PER_YEAR))
    residual, budget = split_hydro(hydro, 0.4)
    assert budget / 1000 == pytest.approx(8_166.4)
    assert residual.annual_energy / 1000 == pytest.approx(12_249.6)
    residual, budget = split_hydro(hydro, 0.0)
    np.testing.assert_array_equal(residual.values, hydro.values)
    assert budget == 0.0
    residual, budget = split_hydro(hydro, 1.0)
    assert not residual.values.any()
    assert budget == pytest.approx(hydro.annual_energy)
    with pytest.raises(DispatchError):
        split_hydro(hydro, -0.1)


def test_errors():
    with pytest.raises(DispatchError):
        simulate_year(_toy(), additional_pv_power=-1.0)
    with pytest.raises(DispatchError, match="shape"):
        simulate_year(_toy(), additional_pv_power=1.0)
    with pytest.raises(DispatchError):
        prepare(_toy(), pv_shape=HourlyProfile([1.0]))


def test_curtailment_summary_examples():
    r = simulate_year(_toy(gen=(1, 2, 3), demand=(1, 2, 3)))
    c = curtailment_summary(r)
    assert (c.energy_twh, c.percent_of_demand) == (0.0, 0.0)
    s = toy_scenario([10, 10, 10, 10, 10], {"wind": [15, 10, 10, 10, 10]})
    c = curtailment_summary(simulate_year(s), gross_demand=50.0)
    assert c.energy_twh * 1e6 == pytest.approx(5.0)
    assert c.percent_of_demand == pytest.approx(10.0)
    assert c.percent_of_demand_plus_curtailed == pytest.approx(100 * 5 / 55)
    with pytest.raises(DispatchError):
        curtailment_summary(simulate_year(_toy()))


def test_used_energy_attribution_pro_rata():
    s = toy_scenario([1, 1], {"wind": [3.0, 1.0], "cogen": [1.0, 0.0]})
    r = simulate_year(s)
    # Hour 0: 4 produced, 3 curtailed -> 1/4 kept of each source.
    assert r.used_energy["wind"] == pytest.approx(0.75 + 1.0)
    assert r.used_energy["cogen"] == pytest.approx(0.25)
    assert r.produced_energy["wind"] == 4.0


def test_dispatch_csv_round_trips_through_loader(tmp_path):
    rng = np.random.default_rng(3)
    s = toy_scenario(rng.uniform(0.5, 1.5, HOURS_PER_YEAR), {"wind": rng.uniform(0, 2, HOURS_PER_YEAR)}, label=2019)
    r = simulate_year(s, cfg=DispatchConfig(battery_capacity=3.0))
    r.to_csv(tmp_path / "d.csv")
    back = load_profiles(tmp_path / "d.csv")
    np.testing.assert_allclose(back["soc"].values, r.soc, atol=5e-7)
    np.testing.assert_allclose(back["unserved"].values, r.unserved, atol=5e-7)


def test_first_failure_matches_full_run(rng):
    for _ in range(50):
        s = random_toy(rng)
        p = prepare(s)
        for policy in POLICIES:
            cfg = DispatchConfig(battery_capacity=float(rng.uniform(0, 5)), deficit_policy=policy)
            pv = float(rng.uniform(0, 5))
            r = p.run(pv, cfg)
            first = p.first_failure(pv, cfg)
            assert first == (-1 if r.feasible else r.first_unserved_hour)


def _check_invariants(r, budget, tol=1e-9):
    c = r.battery_capacity
    assert np.all(r.soc >= -tol) and np.all(r.soc <= c + tol)
    assert np.all(r.curtailed >= -tol) and np.all(r.unserved >= 0)
    assert not np.any((r.curtailed > tol) & (r.unserved > 0))
    assert r.hydro_dispatched.sum() <= budget + 1e-9
    assert r.battery_delta.sum() == pytest.approx(r.soc[-1] - r.initial_soc, abs=1e-9)
    if r.feasible:
        kept = r.nondispatchable - r.curtailed - r.charge
        np.testing.assert_allclose(np.minimum(kept, r.demand) + r.discharge + r.hydro_dispatched, r.demand, atol=1e-9)
    for name, used in r.used_energy.items():
        assert used <= r.produced_energy[name] + 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), policy=st.sampled_from(POLICIES), cap=st.floats(0, 10), pv=st.floats(0, 10))
def test_dispatch_invariants(seed, policy, cap, pv):
    s = random_toy(np.random.default_rng(seed))
    p = prepare(s)
    r = p.run(pv, DispatchConfig(battery_capacity=cap, deficit_policy=policy))
    _check_invariants(r, p.budget)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), policy=st.sampled_from(POLICIES), pv=st.floats(0, 6))
def test_feasibility_monotone_in_capacity(seed, policy, pv):
    p = prepare(random_toy(np.random.default_rng(seed)))
    caps = np.linspace(0, 10, 21)
    ok = [p.feasible(pv, DispatchConfig(battery_capacity=c, deficit_policy=policy)) for c in caps]
    assert ok == sorted(ok)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), policy=st.sampled_from(POLICIES), cap=st.floats(0, 6))
def test_more_pv_never_increases_unserved(seed, policy, cap):
    p = prepare(random_toy(np.random.default_rng(seed)))
    cfg = DispatchConfig(battery_capacity=cap, deficit_policy=policy)
    unserved = [p.run(pv, cfg).total_unserved for pv in np.linspace(0, 6, 13)]
    assert all(b <= a + 1e-9 for a, b in zip(unserved, unserved[1:]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), cap=st.floats(0, 6), pv=st.floats(0, 6))
def test_feasibility_monotone_in_dispatchability_battery_first(seed, cap, pv):
    s = random_toy(np.random.default_rng(seed))
    cfg = DispatchConfig(battery_capacity=cap, deficit_policy="battery_first")
    ok = [prepare(s, share=sh).feasible(pv, cfg) for sh in np.linspace(0, 1, 11)]
    assert ok == sorted(ok)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), cap=st.floats(0, 6), pv=st.floats(0, 6))
def test_battery_first_dominates_hydro_first(seed, cap, pv):
    p = prepare(random_toy(np.random.default_rng(seed)))
    hf = p.feasible(pv, DispatchConfig(battery_capacity=cap, deficit_policy="hydro_first"))
    bf = p.feasible(pv, DispatchConfig(battery_capacity=cap, deficit_policy="battery_first"))
    assert bf or not hf


def test_additional_pv_is_attributed():
    s = toy_scenario([1, 1], {"wind": [0.0, 0.0]}, pv_shape=[1.0, 0.0])
    r = simulate_year(s, additional_pv_power=3.0, cfg=DispatchConfig(battery_capacity=1.0))
    assert r.feasible
    assert r.curtailed[0] == pytest.approx(1.0)
    assert r.produced_energy[ADDITIONAL_PV] == 3.0
    assert r.used_energy[ADDITIONAL_PV] == pytest.approx(2.0)
