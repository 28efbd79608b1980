"""Sensor state, battery dynamics and the Poisson energy source."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EnergyCausalityError

_MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of one simulation run."""

    battery_capacity: int
    arrival_rate: float = 1.0
    horizon: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if int(self.battery_capacity) != self.battery_capacity or self.battery_capacity < 1:
            raise ValueError(f"battery_capacity must be a positive integer, got {self.battery_capacity!r}")
        if not self.arrival_rate > 0:
            raise ValueError(f"arrival_rate must be positive, got {self.arrival_rate!r}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


class SensorState(NamedTuple):
    """Battery level and update clock of the sensor at time ``now``."""

    energy: int = 0
    now: float = 0.0
    last_update_time: float = 0.0

    @property
    def age(self) -> float:
        return self.now - self.last_update_time


def apply_update(state: SensorState) -> SensorState:
    """Send an update at ``state.now``: spend one unit and reset the age."""
    if state.energy < 1:
        raise EnergyCausalityError(f"update attempted with empty battery at t={state.now!r}")
    return SensorState(state.energy - 1, state.now, state.now)


def apply_arrival(state: SensorState, battery_capacity: int) -> SensorState:
    """Store one harvested unit; a unit arriving at a full battery is lost."""
    energy = state.energy + 1
    if energy > battery_capacity:
        energy = battery_capacity
    return SensorState(energy, state.now, state.last_update_time)


class ArrivalStream:
    """Seeded source of exponential inter-arrival gaps.

    Gaps are drawn by inverse CDF, ``-log(1 - U) / rate``, from a Philox
    counter-based generator keyed by ``seed``, so two streams with the same
    seed and rate yield bit-identical sequences and distinct seeds yield
    independent ones. Uniforms are pulled in fixed-size blocks.
    """

    def __init__(self, seed: int = 0, rate: float = 1.0, block_size: int = 8192):
        if not rate > 0:
            raise ValueError(f"rate must be positive, got {rate!r}")
        if not 0 <= seed <= _MAX_SEED:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self.rate = float(rate)
        self._block_size = int(block_size)
        self._rng = np.random.Generator(np.random.Philox(self.seed))
        self._buf: list[float] = []
        self._pos = 0

    def _refill(self) -> None:
        u = self._rng.random(self._block_size)
        self._buf = (-np.log1p(-u) / self.rate).tolist()
        self._pos = 0

    def next_interarrival(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        gap = self._buf[self._pos]
        self._pos += 1
        return gap

    __next__ = next_interarrival

    def __iter__(self):
        return self

    def take(self, n: int) -> np.ndarray:
        return np.fromiter((self.next_interarrival() for _ in range(n)), dtype=float, count=n)


def next_interarrival(stream: ArrivalStream) -> float:
    return stream.next_interarrival()
