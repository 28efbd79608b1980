"""Ratio estimators and renewal diagnostics over epoch records."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

MIN_EPOCHS_ESTIMATE = 30
MIN_EPOCHS_DIAGNOSTICS = 1000


class RatioEstimate(NamedTuple):
    mean_ratio: float
    ci_halfwidth: float
    method: str
    n_epochs: int


@dataclass(frozen=True)
class RenewalDiagnostics:
    lag1_autocorr_length: float
    lag1_autocorr_area: float
    split_half_ks_statistic: float
    split_half_ks_critical_1pct: float
    split_half_ks_pvalue: float
    n_epochs: int

    @property
    def ks_passes(self) -> bool:
        return self.split_half_ks_statistic < self.split_half_ks_critical_1pct


def _columns(epochs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(epochs, np.ndarray):
        return epochs[:, 0].astype(float), epochs[:, 1].astype(float)
    n = len(epochs)
    lengths = np.fromiter((e.length for e in epochs), dtype=float, count=n)
    areas = np.fromiter((e.area for e in epochs), dtype=float, count=n)
    return lengths, areas


def long_run_estimate(epochs: Sequence, n_batches: int = 100, method: str = "batch_means",
                      confidence: float = 0.95) -> RatioEstimate:
    """Renewal-reward estimate sum(area) / sum(length) with a confidence half-width.

    ``method="batch_means"`` splits the epochs into ``n_batches`` contiguous
    batches and uses the Student-t interval of the per-batch ratios.
    ``method="delta"`` uses the linearised variance of A - r L.
    """
    lengths, areas = _columns(epochs)
    n = len(lengths)
    if n < MIN_EPOCHS_ESTIMATE:
        raise ValueError(f"need at least {MIN_EPOCHS_ESTIMATE} epochs, got {n}")
    ratio = math.fsum(areas) / math.fsum(lengths)
    if method == "batch_means":
        k = min(n_batches, n)
        bounds = np.linspace(0, n, k + 1).astype(int)
        batch_ratio = np.add.reduceat(areas, bounds[:-1]) / np.add.reduceat(lengths, bounds[:-1])
        sd = batch_ratio.std(ddof=1)
        half = stats.t.ppf(0.5 + confidence / 2, k - 1) * sd / math.sqrt(k)
    elif method == "delta":
        resid = areas - ratio * lengths
        half = stats.norm.ppf(0.5 + confidence / 2) * resid.std(ddof=1) / (lengths.mean() * math.sqrt(n))
    else:
        raise ValueError(f"unknown method {method!r}")
    if not half > 1e-15 * ratio:
        half = 0.0
    return RatioEstimate(ratio, float(half), method, n)


def lag1_autocorr(x: np.ndarray) -> float:
    a, b = x[:-1], x[1:]
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0:
        return 0.0
    return float(a @ b) / denom


def renewal_diagnostics(epochs: Sequence) -> RenewalDiagnostics:
    """Serial correlation and split-half stationarity checks on complete epochs."""
    lengths, areas = _columns(epochs)
    n = len(lengths)
    if n < MIN_EPOCHS_DIAGNOSTICS:
        raise ValueError(f"need at least {MIN_EPOCHS_DIAGNOSTICS} epochs, got {n}")
    first, second = lengths[: n // 2], lengths[n // 2:]
    ks = stats.ks_2samp(first, second)
    n1, n2 = len(first), len(second)
    critical = special.kolmogi(0.01) * math.sqrt((n1 + n2) / (n1 * n2))
    return RenewalDiagnostics(
        lag1_autocorr_length=lag1_autocorr(lengths),
        lag1_autocorr_area=lag1_autocorr(areas),
        split_half_ks_statistic=float(ks.statistic),
        split_half_ks_critical_1pct=float(critical),
        split_half_ks_pvalue=float(ks.pvalue),
        n_epochs=n,
    )
