"""Command-line interface: solve, simulate, compare, sweep.

Exit codes: 0 success, 2 usage, 3 domain or bracket failure, 4 policy
incompatible with the battery.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import sys
import time
from datetime import datetime, timezone

import click

from . import SCHEMA_VERSION, __version__
from .analytic import solve_lambda_star
from .engine import simulate, write_epochs_csv
from .errors import BracketError, DomainError, IncompatiblePolicyError
from .experiments import (
    COMPARE_COLUMNS,
    PRESETS,
    preset,
    run_comparison,
    sweep_battery,
    sweep_lambda,
    sweep_pair,
    sweep_z,
)
from .model import SystemParams
from .policies import policy_from_json
from .stats import MIN_EPOCHS_DIAGNOSTICS, renewal_diagnostics

EXIT_USAGE, EXIT_DOMAIN, EXIT_INCOMPATIBLE = 2, 3, 4


def _meta(started: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _dump(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else format(value, ".12g")
    return str(value)


def _write_csv(rows: list[dict], columns, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DomainError, BracketError) as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(EXIT_DOMAIN)
        except IncompatiblePolicyError as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(EXIT_INCOMPATIBLE)
        except ValueError as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(EXIT_USAGE)

    return wrapper


def _positive(ctx, param, value):
    if value is not None and not value > 0:
        raise click.BadParameter("must be positive")
    return value


def _grid(text: str, cast=float) -> list:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    text = (text or "").strip()
    if not text:
        raise click.UsageError("empty grid")
    if ":" in text:
        try:
            start, stop, num = text.split(":")
            num = int(num)
        except ValueError:
            raise click.UsageError(f"bad grid {text!r}; expected start:stop:num") from None
        if num < 1:
            raise click.UsageError("empty grid")
        if num == 1:
            return [cast(start)]
        a, b = float(start), float(stop)
        values = [a + (b - a) * i / (num - 1) for i in range(num)]
        return [cast(round(v)) if cast is int else v for v in values]
    try:
        values = [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"bad grid {text!r}") from None
    if not values:
        raise click.UsageError("empty grid")
    return values


@click.group()
@click.version_option(__version__, message=f"%(prog)s %(version)s (schema {SCHEMA_VERSION})")
def main():
    """Optimal status updating for an energy-harvesting sensor with a finite battery."""


@main.command()
@click.option("--tol", default=1e-10, show_default=True, type=float, callback=_positive,
              help="Bisection bracket width.")
@_exit_codes
def solve(tol):
    """Optimal thresholds for a two-unit battery, as JSON."""
    started = time.perf_counter()
    doc = solve_lambda_star(tol).to_dict()
    doc["meta"] = _meta(started)
    click.echo(_dump(doc))


@main.command("simulate")
@click.option("--battery", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--policy", "policy_text", default="optimal-b2", show_default=True,
              help=f"Preset ({', '.join(PRESETS)}) or policy JSON.")
@click.option("--horizon", default=1e6, show_default=True, type=float, callback=_positive)
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--rate", default=1.0, show_default=True, type=float, callback=_positive)
@click.option("--epochs-csv", type=click.File("w"), help="Write complete epochs to this CSV file.")
@_exit_codes
def simulate_cmd(battery, policy_text, horizon, seed, rate, epochs_csv):
    """Simulate one trajectory and print the long-run average age as JSON."""
    started = time.perf_counter()
    if policy_text.lstrip().startswith("{"):
        spec = policy_from_json(policy_text, battery_capacity=battery)
    else:
        try:
            spec = preset(policy_text, battery)
        except KeyError:
            raise click.UsageError(f"unknown preset {policy_text!r}; choose from {', '.join(PRESETS)}") from None
    result = simulate(SystemParams(battery, rate, horizon, seed), spec)
    doc = result.to_dict()
    if result.n_epochs >= MIN_EPOCHS_DIAGNOSTICS:
        doc["diagnostics"] = vars(renewal_diagnostics(result.epochs))
    if epochs_csv is not None:
        write_epochs_csv(result.epochs, epochs_csv)
    doc["meta"] = _meta(started)
    click.echo(_dump(doc))


@main.command()
@click.option("--battery", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--seeds", "n_seeds", default=50, show_default=True, type=click.IntRange(min=1))
@click.option("--base-seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--horizon", default=1e5, show_default=True, type=float, callback=_positive)
@click.option("--rate", default=1.0, show_default=True, type=float, callback=_positive)
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--delivery/--no-delivery", default=True, show_default=True,
              help="Also run the restart-on-delivery variants of the clocked baselines.")
@click.option("--csv", "csv_out", type=click.File("w"), help="Write the comparison table here.")
@click.option("--json", "json_out", type=click.File("w"), help="Write the JSON report here instead of stdout.")
@_exit_codes
def compare(battery, n_seeds, base_seed, horizon, rate, workers, delivery, csv_out, json_out):
    """Optimal policy against uniform and energy-aware baselines on shared seeds."""
    started = time.perf_counter()
    seeds = list(range(base_seed, base_seed + n_seeds))
    report = run_comparison(seeds, horizon, battery, rate, workers, delivery)
    if csv_out is not None:
        _write_csv(report["rows"], COMPARE_COLUMNS, csv_out)
    doc = {"battery_capacity": battery, "horizon": horizon, "arrival_rate": rate, "seeds": seeds,
           "columns": list(COMPARE_COLUMNS), **report, "meta": _meta(started)}
    text = _dump(doc)
    if json_out is not None:
        json_out.write(text + "\n")
    else:
        click.echo(text)


@main.command()
@click.option("--kind", type=click.Choice(["lambda", "pair", "battery", "z"]), default="lambda", show_default=True)
@click.option("--grid", default=None, help="start:stop:num or comma list; lambda, battery or z values.")
@click.option("--delta", default=0.1, show_default=True, type=float, callback=_positive,
              help="Step of the pair grid around the optimum.")
@click.option("--steps", default=1, show_default=True, type=click.IntRange(min=1), help="Pair grid half-width in steps.")
@click.option("--battery", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--z", default=1, show_default=True, type=click.IntRange(min=0))
@click.option("--horizon", default=1e5, show_default=True, type=float, callback=_positive)
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--out", type=click.File("w"), default="-", help="CSV destination (default stdout).")
@_exit_codes
def sweep(kind, grid, delta, steps, battery, z, horizon, seed, out):
    """Grid evaluation of the analytic ratio or of simulated baselines, as CSV."""
    if kind == "pair":
        rows = sweep_pair(delta, steps)
    elif grid is None:
        raise click.UsageError(f"--grid is required for --kind {kind}")
    elif kind == "lambda":
        rows = sweep_lambda(_grid(grid))
    elif kind == "battery":
        rows = sweep_battery(_grid(grid, int), z, horizon, seed)
    else:
        rows = sweep_z(_grid(grid, int), battery, horizon, seed)
    buf = io.StringIO()
    _write_csv(rows, list(rows[0]), buf)
    out.write(buf.getvalue())


if __name__ == "__main__":
    main()
