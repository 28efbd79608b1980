import numpy as np
import pytest
from hypothesis import given, strategies as st

from incremental_aoi.errors import EnergyCausalityError
from incremental_aoi.model import (
    ArrivalStream,
    SensorState,
    SystemParams,
    apply_arrival,
    apply_update,
    next_interarrival,
)


@pytest.fixture(scope="module")
def million_gaps():
    return ArrivalStream(seed=12345, rate=1.0).take(1_000_000)


def test_exponential_mean(million_gaps):
    # std of the mean is 1e-3, so +-0.003 is a 3-sigma band
    assert 0.997 <= million_gaps.mean() <= 1.003


def test_exponential_second_moment(million_gaps):
    # E[tau^2] = 2 with sd(tau^2) = sqrt(24 - 4) ~ 4.47; sd of the mean ~ 0.0045
    assert abs((million_gaps**2).mean() - 2.0) <= 0.01


def test_same_seed_reproduces_bitwise():
    a = ArrivalStream(99).take(1000)
    b = ArrivalStream(99).take(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ArrivalStream(100).take(1000))


def test_module_level_next_interarrival_advances_stream():
    s = ArrivalStream(3)
    first = next_interarrival(s)
    assert first == ArrivalStream(3).next_interarrival()
    assert next_interarrival(s) != first


def test_rate_scales_gaps_exactly():
    a = ArrivalStream(5, rate=1.0).take(100)
    b = ArrivalStream(5, rate=2.0).take(100)
    np.testing.assert_allclose(b, a / 2.0, rtol=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [dict(battery_capacity=0), dict(battery_capacity=2, arrival_rate=0.0), dict(battery_capacity=2, horizon=-1.0),
     dict(battery_capacity=2, seed=-1), dict(battery_capacity=1.5)],
)
def test_system_params_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)


def test_apply_update_examples():
    s = apply_update(SensorState(energy=2, now=5.0, last_update_time=3.7))
    assert s == SensorState(1, 5.0, 5.0) and s.age == 0.0
    s = apply_update(SensorState(energy=1, now=9.1, last_update_time=9.1 - 0.72))
    assert s.energy == 0 and s.age == 0.0 and s.last_update_time == 9.1


def test_apply_update_empty_battery_raises():
    with pytest.raises(EnergyCausalityError):
        apply_update(SensorState(0, 4.0, 1.0))


def test_apply_arrival_examples():
    assert apply_arrival(SensorState(1, 2.0, 0.0), 2).energy == 2
    assert apply_arrival(SensorState(2, 2.0, 0.0), 2).energy == 2
    s = apply_arrival(SensorState(0, 0.4, 0.0), 1)
    assert s.energy == 1 and s.age == pytest.approx(0.4)


def test_initial_state_is_empty_and_fresh():
    s = SensorState()
    assert s.energy == 0 and s.age == 0.0


@given(
    cap=st.integers(1, 6),
    events=st.lists(st.tuples(st.booleans(), st.floats(0.0, 3.0)), max_size=60),
)
def test_energy_stays_within_battery(cap, events):
    s = SensorState()
    for is_arrival, dt in events:
        s = SensorState(s.energy, s.now + dt, s.last_update_time)
        if is_arrival:
            s = apply_arrival(s, cap)
        elif s.energy > 0:
            s = apply_update(s)
        assert 0 <= s.energy <= cap
        assert s.age >= 0
