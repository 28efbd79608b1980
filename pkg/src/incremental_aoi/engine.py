"""Event-driven simulation of the sensor and epoch bookkeeping.

Epochs are delimited by visits to the state "just updated, battery empty",
i.e. energy 0 and age 0. Only threshold policies are decomposed this way;
clocked baselines are not renewal policies and report plain time averages.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, NamedTuple, TextIO

import numpy as np
from scipy import stats as sps

from .model import ArrivalStream, SensorState, SystemParams, apply_arrival, apply_update
from .policies import PolicySpec, ThresholdB2, make_scheduler, policy_to_dict

TRUNCATED = "truncated"
EPOCH_CSV_HEADER = ("epoch_index", "length", "area", "update_count", "pattern_index")


class EpochRecord(NamedTuple):
    length: float
    area: float
    update_count: int
    pattern_index: int | str


@dataclass
class SimResult:
    average_age: float
    ci_halfwidth: float
    ci_method: str
    total_updates: int
    total_arrivals: int
    discarded_arrivals: int
    skipped_slots: int
    horizon_used: float
    total_area: float
    residual_area: float
    residual_length: float
    battery_capacity: int
    arrival_rate: float
    seed: int
    policy: dict
    epochs: list[EpochRecord] = field(default_factory=list, repr=False)
    trace: dict[str, np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("epochs", "trace")}
        out["policy"] = dict(self.policy)
        out["n_epochs"] = self.n_epochs
        return out


def simulate(params: SystemParams, policy: PolicySpec, *, stream: ArrivalStream | None = None,
             keep_trace: bool = False, n_batches: int = 100) -> SimResult:
    """Run one trajectory from an empty battery at t=0 up to ``params.horizon``.

    The returned average is r(T)/T where r(T) sums the triangle of every
    inter-update interval plus the open triangle at T. The confidence
    half-width comes from batch means over complete epochs for renewal
    policies and over equal time slices otherwise.

    ``stream`` overrides the arrival source built from the params' seed and
    rate. ``keep_trace`` attaches arrays of update times, the battery level
    left after each update, and arrival times.
    """
    scheduler = make_scheduler(policy, params.battery_capacity)
    if stream is None:
        stream = ArrivalStream(params.seed, params.arrival_rate)
    gap = stream.next_interarrival
    cap = params.battery_capacity
    horizon = float(params.horizon)
    renewal = scheduler.renewal
    silent = scheduler.silent_skips

    state = SensorState(0, 0.0, 0.0)
    next_arrival = gap()
    scheduled = scheduler.next_update(state)

    # Neumaier-compensated running total of r(T)
    total, comp = 0.0, 0.0
    # renewal runs restart the clock at every epoch so that epoch lengths are
    # exact local times; ``origin`` is the absolute time of the local zero
    origin, origin_comp = 0.0, 0.0
    limit = horizon
    arrivals = discarded = skipped = 0
    update_times: list[float] = []
    levels: list[int] = []
    arrival_times: list[float] = []
    epochs: list[EpochRecord] = []
    epoch_area, epoch_updates = 0.0, 0

    while True:
        # ties go to the arrival
        if scheduled is not None and scheduled < next_arrival:
            t = scheduled
            if t > limit:
                break
            at_slot = SensorState(state.energy, t, state.last_update_time)
            scheduler.fired(at_slot)
            if at_slot.energy == 0 and silent:
                skipped += 1
                state = at_slot
            else:
                x = t - at_slot.last_update_time
                tri = 0.5 * x * x
                total, comp = _neumaier(total, comp, tri)
                state = apply_update(at_slot)
                update_times.append(origin + t)
                if keep_trace:
                    levels.append(state.energy)
                epoch_area += tri
                epoch_updates += 1
                if renewal and state.energy == 0:
                    epochs.append(EpochRecord(t, epoch_area, epoch_updates, epoch_updates))
                    epoch_area, epoch_updates = 0.0, 0
                    origin, origin_comp = _neumaier(origin, origin_comp, t)
                    limit = horizon - (origin + origin_comp)
                    next_arrival -= t
                    state = SensorState(0, 0.0, 0.0)
        else:
            t = next_arrival
            if t > limit:
                break
            arrivals += 1
            if keep_trace:
                arrival_times.append(origin + t)
            if state.energy >= cap:
                discarded += 1
            state = apply_arrival(SensorState(state.energy, t, state.last_update_time), cap)
            next_arrival = t + gap()
        scheduled = scheduler.next_update(state)

    tail = limit - state.last_update_time
    terminal = 0.5 * tail * tail
    r_total = (total + comp) + terminal
    times = np.asarray(update_times, dtype=float)
    trace = None
    if keep_trace:
        trace = {"update_times": times, "energy_after_update": np.asarray(levels, dtype=int),
                 "arrival_times": np.asarray(arrival_times, dtype=float)}
    average = r_total / horizon

    if renewal and len(epochs) >= max(30, n_batches):
        from .stats import long_run_estimate

        est = long_run_estimate(epochs, n_batches=n_batches)
        half, method = est.ci_halfwidth, est.method
    else:
        half = time_batch_halfwidth(times, horizon, n_batches)
        method = "batch_means_time"

    return SimResult(
        average_age=average,
        ci_halfwidth=half,
        ci_method=method,
        total_updates=len(update_times),
        total_arrivals=arrivals,
        discarded_arrivals=discarded,
        skipped_slots=skipped,
        horizon_used=horizon,
        total_area=r_total,
        residual_area=epoch_area + terminal,
        residual_length=limit,
        battery_capacity=cap,
        arrival_rate=params.arrival_rate,
        seed=params.seed,
        policy=policy_to_dict(policy),
        epochs=epochs,
        trace=trace,
    )


def _neumaier(total: float, comp: float, term: float) -> tuple[float, float]:
    s = total + term
    if abs(total) >= abs(term):
        comp += (total - s) + term
    else:
        comp += (term - s) + total
    return s, comp


def age_area_until(update_times: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Area under the age curve on [0, u] for each u in ``points``."""
    starts = np.concatenate(([0.0], update_times))
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(starts) ** 2)))
    k = np.searchsorted(starts, points, side="right") - 1
    open_part = points - starts[k]
    return cum[k] + 0.5 * open_part**2


def time_batch_halfwidth(update_times: np.ndarray, horizon: float, n_batches: int = 100,
                         confidence: float = 0.95) -> float:
    edges = np.linspace(0.0, horizon, n_batches + 1)
    batch_means = np.diff(age_area_until(update_times, edges)) / (horizon / n_batches)
    sd = batch_means.std(ddof=1)
    return float(sps.t.ppf(0.5 + confidence / 2, n_batches - 1) * sd / math.sqrt(n_batches))


def accounting_errors(result: SimResult) -> tuple[float, float]:
    """Relative mismatch of (area, time) between epochs + residual and the totals."""
    area = math.fsum([e.area for e in result.epochs] + [result.residual_area])
    length = math.fsum([e.length for e in result.epochs] + [result.residual_length])
    return (
        abs(area - result.total_area) / result.total_area,
        abs(length - result.horizon_used) / result.horizon_used,
    )


def simulate_single_epoch(stream, policy: ThresholdB2, max_updates: int | None = None) -> EpochRecord:
    """Play one epoch from (energy 0, age 0) until the battery is next emptied.

    ``stream`` is an :class:`ArrivalStream` (or anything with a
    ``next_interarrival`` method) or an iterable of gaps. A gap is
    drawn whenever the battery can still take energy, measured from the last
    arrival or update; while the battery is full no arrival is pending, and a
    gap still pending when the epoch closes is dropped. By memorylessness this
    has the same law as a continuous Poisson stream.

    Pattern ``m`` means ``m`` updates: pattern 1 is a single arrival followed
    by an update, pattern ``m >= 2`` fills the battery first and ends with an
    ``x1`` wait that sees no arrival.
    """
    gap = getattr(stream, "next_interarrival", None) or iter(stream).__next__
    lam, x1 = policy.lam, policy.x1
    now = gap()
    energy, last = 1, 0.0
    next_arrival = now + gap()
    area, updates = 0.0, 0
    while True:
        threshold = x1 if energy == 1 else lam
        fire = last + threshold
        if fire < now:
            fire = now
        if next_arrival is not None and next_arrival <= fire:
            now = next_arrival
            energy += 1
            next_arrival = None if energy == 2 else now + gap()
            continue
        x = fire - last
        area += 0.5 * x * x
        updates += 1
        energy -= 1
        now = last = fire
        if energy == 0:
            return EpochRecord(fire, area, updates, updates)
        if max_updates is not None and updates >= max_updates:
            return EpochRecord(fire, area, updates, TRUNCATED)
        if next_arrival is None:
            next_arrival = now + gap()


def sample_epochs(seed: int, policy: ThresholdB2, n: int, rate: float = 1.0) -> np.ndarray:
    """``n`` i.i.d. epochs as an (n, 3) array of length, area, update count."""
    stream = ArrivalStream(seed, rate)
    out = np.empty((n, 3))
    for i in range(n):
        rec = simulate_single_epoch(stream, policy)
        out[i] = rec.length, rec.area, rec.update_count
    return out


def write_epochs_csv(epochs: Iterable[EpochRecord], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EPOCH_CSV_HEADER)
    for i, e in enumerate(epochs):
        writer.writerow((i, format(e.length, ".12g"), format(e.area, ".12g"), e.update_count, e.pattern_index))


def read_epochs_csv(fh: TextIO) -> list[EpochRecord]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != EPOCH_CSV_HEADER:
        raise ValueError(f"unexpected epoch CSV header {reader.fieldnames!r}")
    out = []
    for row in reader:
        p = row["pattern_index"]
        out.append(EpochRecord(float(row["length"]), float(row["area"]), int(row["update_count"]),
                               p if p == TRUNCATED else int(p)))
    return out


def _run(args):
    params, policy = args
    result = simulate(params, policy)
    result.epochs = []
    return result


def replicate(params: SystemParams, policy: PolicySpec, seeds: Iterable[int], workers: int = 1) -> list[SimResult]:
    """Independent runs, one per seed, returned in seed order without epochs."""
    jobs = [(SystemParams(params.battery_capacity, params.arrival_rate, params.horizon, s), policy) for s in seeds]
    if workers <= 1:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run, jobs))
