"""Replication drivers behind the ``compare`` and ``sweep`` commands."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .analytic import expected_epoch, p2_closed, reference_constants, solve_lambda_star, x1_of_lambda
from .engine import replicate
from .model import SystemParams
from .policies import EnergyAware, PolicySpec, SingleThreshold, ThresholdB2, Uniform

COMPARE_COLUMNS = ("policy", "anchor", "z", "n_seeds", "mean_age", "ci_halfwidth", "ci_low", "ci_high", "source")


def optimal_b2(tolerance: float = 1e-10) -> ThresholdB2:
    sol = solve_lambda_star(tolerance)
    return ThresholdB2(sol.lambda_star, sol.x1_star)


def preset(name: str, battery_capacity: int) -> PolicySpec:
    if name == "optimal-b2":
        return optimal_b2()
    if name == "b1-optimal":
        return SingleThreshold(reference_constants()["b1_optimal"])
    if name == "uniform":
        return Uniform(1.0)
    if name.startswith("energy-aware-z"):
        return EnergyAware(int(name.removeprefix("energy-aware-z")), battery_capacity)
    raise KeyError(name)


PRESETS = ("optimal-b2", "b1-optimal", "uniform", "energy-aware-z1", "energy-aware-z2")


@dataclass(frozen=True)
class SeedSummary:
    mean: float
    ci_halfwidth: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.ci_halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.ci_halfwidth


def across_seeds(values, confidence: float = 0.95) -> SeedSummary:
    """Student-t interval of the mean of independent per-seed averages.

    A single seed has no spread estimate, so its half-width is reported as NaN.
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        return SeedSummary(float(x.mean()), math.nan, len(x))
    half = sps.t.ppf(0.5 + confidence / 2, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x))
    return SeedSummary(float(x.mean()), float(half), len(x))


def comparison_policies(battery_capacity: int = 2, include_delivery: bool = True) -> list[tuple[str, PolicySpec]]:
    policies: list[tuple[str, PolicySpec]] = [
        ("optimal-b2", optimal_b2()),
        ("uniform", EnergyAware(0, battery_capacity)),
        ("energy-aware-z1", EnergyAware(1, battery_capacity)),
        ("energy-aware-z2", EnergyAware(2, battery_capacity)),
    ]
    if include_delivery:
        for z, name in ((0, "uniform"), (1, "energy-aware-z1"), (2, "energy-aware-z2")):
            policies.append((name, EnergyAware(z, battery_capacity, anchor="delivery")))
    return policies


def run_comparison(seeds, horizon: float = 1e5, battery_capacity: int = 2, rate: float = 1.0,
                   workers: int = 1, include_delivery: bool = True) -> dict:
    """Run every comparison policy on the same seeds and summarise each.

    Returns ``{"rows": [...], "per_seed": {row_key: [ages]}}``; rows are in
    policy order followed by the quoted reference values.
    """
    seeds = list(seeds)
    params = SystemParams(battery_capacity, rate, horizon, 0)
    rows, per_seed = [], {}
    for name, spec in comparison_policies(battery_capacity, include_delivery):
        ages = [r.average_age for r in replicate(params, spec, seeds, workers)]
        summary = across_seeds(ages)
        anchor = getattr(spec, "anchor", "")
        key = name if anchor in ("", "slot") else f"{name}@{anchor}"
        per_seed[key] = ages
        rows.append({
            "policy": name,
            "anchor": anchor,
            "z": getattr(spec, "z", ""),
            "n_seeds": summary.n,
            "mean_age": summary.mean,
            "ci_halfwidth": summary.ci_halfwidth,
            "ci_low": summary.low,
            "ci_high": summary.high,
            "source": "simulation",
        })
    for name, value in reference_constants().items():
        rows.append({"policy": name, "anchor": "", "z": "", "n_seeds": 0, "mean_age": value,
                     "ci_halfwidth": "", "ci_low": "", "ci_high": "", "source": "reference"})
    return {"rows": rows, "per_seed": per_seed}


def sweep_lambda(lams) -> list[dict]:
    out = []
    for lam in lams:
        x1 = x1_of_lambda(lam)
        e = expected_epoch(lam, x1)
        out.append({"lambda": lam, "x1": x1, "p2": p2_closed(lam), "expected_area": e.expected_area,
                    "expected_length": e.expected_length, "ratio": e.ratio})
    return out


def sweep_pair(delta: float = 0.1, steps: int = 1) -> list[dict]:
    """Analytic ratio on a (2*steps+1)^2 grid centred on the optimum."""
    sol = solve_lambda_star(1e-12)
    out = []
    for i in range(-steps, steps + 1):
        for j in range(-steps, steps + 1):
            lam, x1 = sol.lambda_star + i * delta, sol.x1_star + j * delta
            out.append({"lambda": lam, "x1": x1, "ratio": expected_epoch(lam, x1).ratio,
                        "center": int(i == 0 and j == 0)})
    return out


def sweep_battery(capacities, z: int = 1, horizon: float = 1e5, seed: int = 0, rate: float = 1.0) -> list[dict]:
    out = []
    for cap in capacities:
        for name, spec in (("uniform", Uniform(1.0)), (f"energy-aware-z{z}", EnergyAware(z, cap))):
            r = replicate(SystemParams(cap, rate, horizon, 0), spec, [seed])[0]
            out.append({"battery_capacity": cap, "policy": name, "simulated_age": r.average_age,
                        "ci_halfwidth": r.ci_halfwidth})
    return out


def sweep_z(zs, battery_capacity: int = 2, horizon: float = 1e5, seed: int = 0, rate: float = 1.0) -> list[dict]:
    out = []
    for z in zs:
        spec = EnergyAware(z, battery_capacity)
        r = replicate(SystemParams(battery_capacity, rate, horizon, 0), spec, [seed])[0]
        out.append({"z": z, "beta": spec.beta, "simulated_age": r.average_age, "ci_halfwidth": r.ci_halfwidth})
    return out
