"""Update policies: specs, JSON round-trip, decisions and run-time schedulers.

A policy is queried after every energy arrival and every fired update and
answers with the absolute time of the next update, or ``None`` to wait for
energy. Re-querying on arrivals is what lets a threshold policy pull an
update earlier once the battery fills up.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Any, Union

from .errors import DomainError, IncompatiblePolicyError
from .model import SensorState

ANCHORS = ("slot", "delivery")


@dataclass(frozen=True)
class ThresholdB2:
    """Two-level threshold policy for a two-unit battery.

    With one stored unit the sensor waits until the age reaches ``x1``; with
    a full battery it waits until the age reaches ``lam``.
    """

    lam: float
    x1: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.x1 >= self.lam:
            raise ValueError(f"x1 must be >= lambda, got x1={self.x1!r} < lambda={self.lam!r}")


@dataclass(frozen=True)
class SingleThreshold:
    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold!r}")


@dataclass(frozen=True)
class GeneralThreshold:
    """One age threshold per battery level 1..B (index 0 is level 1)."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not self.thresholds:
            raise ValueError("thresholds must be non-empty")
        if any(not t > 0 for t in self.thresholds):
            raise ValueError("thresholds must be positive")
        if any(b > a for a, b in zip(self.thresholds, self.thresholds[1:])):
            warnings.warn(
                "thresholds increase with battery level; only nonincreasing "
                "thresholds are known to be sensible",
                stacklevel=3,
            )


@dataclass(frozen=True)
class Uniform:
    """Best-effort periodic updates on a fixed grid; empty slots are skipped."""

    period: float = 1.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")


@dataclass(frozen=True)
class EnergyAware:
    """Adaptive-period baseline with ``beta = z * log(B) / B``.

    ``anchor="slot"`` keeps a self-clocked grid: every slot, delivered or
    silent, schedules the next one. ``anchor="delivery"`` holds a missed slot
    open until the next energy arrival, updates then, and restarts the clock
    from that delivery.
    """

    z: int
    battery_capacity: int
    anchor: str = "slot"

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 0:
            raise ValueError(f"z must be a nonnegative integer, got {self.z!r}")
        if int(self.battery_capacity) != self.battery_capacity or self.battery_capacity < 1:
            raise ValueError("battery_capacity must be a positive integer")
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")
        if self.beta >= 1:
            raise DomainError(
                f"beta = z*log(B)/B = {self.beta:.6g} must be < 1 "
                f"(z={self.z}, B={self.battery_capacity})"
            )

    @property
    def beta(self) -> float:
        return energy_aware_beta(self.z, self.battery_capacity)


PolicySpec = Union[ThresholdB2, SingleThreshold, GeneralThreshold, Uniform, EnergyAware]


@dataclass(frozen=True)
class PolicyDecision:
    """Absolute time of the next update; ``None`` means wait for energy."""

    scheduled_update_time: float | None

    @property
    def wait_for_energy(self) -> bool:
        return self.scheduled_update_time is None


WAIT = PolicyDecision(None)


# -- serialization -----------------------------------------------------------

_FIELDS = {
    "threshold_b2": (ThresholdB2, {"lambda": "lam", "x1": "x1"}),
    "single_threshold": (SingleThreshold, {"threshold": "threshold"}),
    "general_threshold": (GeneralThreshold, {"thresholds": "thresholds"}),
    "uniform": (Uniform, {"period": "period"}),
    "energy_aware": (EnergyAware, {"z": "z", "battery_capacity": "battery_capacity", "anchor": "anchor"}),
}
_TYPE_OF = {cls: name for name, (cls, _) in _FIELDS.items()}


def policy_to_dict(spec: PolicySpec) -> dict[str, Any]:
    name = _TYPE_OF[type(spec)]
    out: dict[str, Any] = {"type": name}
    for key, attr in _FIELDS[name][1].items():
        value = getattr(spec, attr)
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def policy_from_dict(data: dict[str, Any], battery_capacity: int | None = None) -> PolicySpec:
    """Build a spec from its JSON form, rejecting unknown fields.

    ``battery_capacity`` fills in the energy-aware capacity when the
    document leaves it out.
    """
    data = dict(data)
    try:
        name = data.pop("type")
    except KeyError:
        raise ValueError("policy JSON needs a 'type' field") from None
    if name not in _FIELDS:
        raise ValueError(f"unknown policy type {name!r}; expected one of {sorted(_FIELDS)}")
    cls, fields = _FIELDS[name]
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(f"unknown field(s) for {name}: {sorted(unknown)}")
    if cls is EnergyAware and "battery_capacity" not in data and battery_capacity is not None:
        data["battery_capacity"] = battery_capacity
    kwargs = {fields[k]: v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad fields for {name}: {exc}") from None


def policy_to_json(spec: PolicySpec) -> str:
    return json.dumps(policy_to_dict(spec))


def policy_from_json(text: str, battery_capacity: int | None = None) -> PolicySpec:
    return policy_from_dict(json.loads(text), battery_capacity)


# -- pure decisions ----------------------------------------------------------

def _after_threshold(state: SensorState, threshold: float) -> PolicyDecision:
    wait = threshold - state.age
    return PolicyDecision(state.now + wait if wait > 0 else state.now)


def decide_threshold_b2(state: SensorState, spec: ThresholdB2, battery_capacity: int = 2) -> PolicyDecision:
    if battery_capacity != 2:
        raise IncompatiblePolicyError(f"threshold_b2 needs battery_capacity 2, got {battery_capacity}")
    if state.energy <= 0:
        return WAIT
    return _after_threshold(state, spec.x1 if state.energy == 1 else spec.lam)


def decide_single_threshold(state: SensorState, threshold: float, battery_capacity: int = 1) -> PolicyDecision:
    if battery_capacity != 1:
        raise IncompatiblePolicyError(f"single_threshold needs battery_capacity 1, got {battery_capacity}")
    if state.energy <= 0:
        return WAIT
    return _after_threshold(state, threshold)


def decide_general_threshold(state: SensorState, thresholds, battery_capacity: int | None = None) -> PolicyDecision:
    if battery_capacity is not None and len(thresholds) != battery_capacity:
        raise IncompatiblePolicyError(
            f"need one threshold per battery level: got {len(thresholds)} for B={battery_capacity}"
        )
    if state.energy <= 0:
        return WAIT
    return _after_threshold(state, thresholds[state.energy - 1])


def energy_aware_beta(z: int, battery_capacity: int) -> float:
    return z * math.log(battery_capacity) / battery_capacity


def energy_aware_period(energy: int, z: int, battery_capacity: int) -> float:
    """Gap to the next slot given the battery level seen at the current slot."""
    beta = energy_aware_beta(z, battery_capacity)
    if beta >= 1:
        raise DomainError(f"beta = {beta:.6g} must be < 1")
    if 2 * energy < battery_capacity:
        return 1.0 / (1.0 - beta)
    if 2 * energy > battery_capacity:
        return 1.0 / (1.0 + beta)
    return 1.0


def decide_energy_aware(state: SensorState, z: int, battery_capacity: int,
                        anchor_time: float | None = None) -> PolicyDecision:
    """Next slot, measured from ``anchor_time`` (default: the last update)."""
    base = state.last_update_time if anchor_time is None else anchor_time
    return PolicyDecision(base + energy_aware_period(state.energy, z, battery_capacity))


# -- run-time schedulers -----------------------------------------------------

class ThresholdScheduler:
    """Age threshold per battery level; stateless between queries."""

    renewal = True
    silent_skips = False

    def __init__(self, thresholds):
        self.thresholds = tuple(thresholds)

    def next_update(self, state: SensorState) -> float | None:
        e = state.energy
        if e <= 0:
            return None
        t = state.last_update_time + self.thresholds[e - 1]
        return t if t > state.now else state.now

    def fired(self, state: SensorState) -> None:
        pass


class SlotScheduler:
    """Clocked schedule whose next gap depends on the level seen at each slot.

    ``state`` passed to :meth:`fired` is the state at the slot instant before
    any energy is spent.
    """

    renewal = False
    silent_skips = True

    def __init__(self, period_of_level, anchor: str = "slot"):
        self._period = period_of_level
        self.anchor = anchor
        self.next_slot = period_of_level(0)
        self._missed = False

    def next_update(self, state: SensorState) -> float | None:
        if self._missed:
            return state.now if state.energy > 0 else None
        return self.next_slot

    def fired(self, state: SensorState) -> None:
        if state.energy <= 0 and self.anchor == "delivery":
            self._missed = True
            return
        self._missed = False
        self.next_slot = state.now + self._period(state.energy)


def make_scheduler(spec: PolicySpec, battery_capacity: int):
    """Validate ``spec`` against the battery and build a fresh scheduler."""
    if isinstance(spec, ThresholdB2):
        if battery_capacity != 2:
            raise IncompatiblePolicyError(f"threshold_b2 needs battery_capacity 2, got {battery_capacity}")
        return ThresholdScheduler((spec.x1, spec.lam))
    if isinstance(spec, SingleThreshold):
        if battery_capacity != 1:
            raise IncompatiblePolicyError(f"single_threshold needs battery_capacity 1, got {battery_capacity}")
        return ThresholdScheduler((spec.threshold,))
    if isinstance(spec, GeneralThreshold):
        if len(spec.thresholds) != battery_capacity:
            raise IncompatiblePolicyError(
                f"need one threshold per battery level: got {len(spec.thresholds)} for B={battery_capacity}"
            )
        return ThresholdScheduler(spec.thresholds)
    if isinstance(spec, Uniform):
        period = spec.period
        return SlotScheduler(lambda energy: period)
    if isinstance(spec, EnergyAware):
        if spec.battery_capacity != battery_capacity:
            raise IncompatiblePolicyError(
                f"energy_aware built for B={spec.battery_capacity}, run has B={battery_capacity}"
            )
        z, cap = spec.z, spec.battery_capacity
        return SlotScheduler(lambda energy: energy_aware_period(energy, z, cap), anchor=spec.anchor)
    raise TypeError(f"not a policy spec: {spec!r}")
