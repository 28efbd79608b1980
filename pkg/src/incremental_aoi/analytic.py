"""Closed-form objective, bisection for the optimal thresholds, and epoch expectations.

For the two-unit battery the optimal policy waits for the age to reach
``x1`` with one stored unit and ``lam`` with two, where ``x1`` is a
function of ``lam`` and ``lam`` is the root of a scalar objective ``p2``.
The root is also the optimal long-run average age.

Two independent routes to the epoch moments E[area], E[length] are
provided: :func:`expected_epoch` integrates the renewal formulas by nested
adaptive quadrature, and :func:`pattern_sum_oracle` sums per-pattern
contributions one return path at a time in extended precision.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import mpmath
from scipy import integrate

from .errors import BracketError, DomainError

B1_OPTIMAL = 0.9012
INFINITE_BATTERY = 0.5
TAU_MAX = 40.0
BRACKET = (INFINITE_BATTERY, B1_OPTIMAL - 1e-6)

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class ThresholdSolution:
    lambda_star: float
    x1_star: float
    objective: float
    solver_tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochExpectations:
    expected_area: float
    expected_length: float
    ratio: float
    tail_bound: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _log_argument(lam: float) -> float:
    arg = math.exp(-lam) - 0.5 * lam * lam
    if not arg > 0:
        raise DomainError(f"exp(-lam) - lam^2/2 = {arg:.6g} <= 0 at lam={lam!r}")
    return arg


def x1_of_lambda(lam: float) -> float:
    """Optimal one-unit threshold paired with full-battery threshold ``lam``."""
    return -math.log(_log_argument(lam))


def p2_closed(lam: float) -> float:
    """min E[R] - lam E[L] over all policies, in closed form; decreasing in ``lam``."""
    arg = _log_argument(lam)
    return 0.5 * lam * lam + (lam + 1.0) * math.exp(-lam) + lam - (arg + 1.0) * (-math.log(arg))


def solve_lambda_star(tolerance: float = 1e-10) -> ThresholdSolution:
    """Bisect ``p2_closed`` on [0.5, 0.9012) until the bracket is narrower than ``tolerance``."""
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance!r}")
    lo, hi = BRACKET
    f_lo, f_hi = p2_closed(lo), p2_closed(hi)
    if not (f_lo > 0 > f_hi):
        raise BracketError(f"p2 does not change sign on [{lo}, {hi}]: {f_lo!r}, {f_hi!r}")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = p2_closed(mid)
        if f_mid > 0:
            lo = mid
        elif f_mid < 0:
            hi = mid
        else:
            lo = hi = mid
    lam = 0.5 * (lo + hi)
    return ThresholdSolution(lam, x1_of_lambda(lam), lam, tolerance)


def _check_positive(lam: float, x1: float) -> None:
    if not (lam > 0 and x1 > 0):
        raise ValueError(f"thresholds must be positive, got lam={lam!r}, x1={x1!r}")


def _quad(f, a, b, points=()):
    pts = [p for p in points if a < p < b]
    return integrate.quad(f, a, b, points=pts or None, **_QUAD)[0]


def expected_epoch(lam: float, x1: float) -> EpochExpectations:
    """E[area] and E[length] of an epoch under the (lam, x1) threshold policy.

    Evaluates the renewal expressions with the threshold forms
    ``y1(t) = max(t, x1)``, ``y2(t) = max(t, lam)`` and
    ``ybar2(t1, t2) = y2(t1 + t2)``. The two-arrival term is integrated as a
    genuine double integral with breakpoints on the kinks; infinite ranges
    stop at ``TAU_MAX``.
    """
    _check_positive(lam, x1)
    exp = math.exp

    def y1(t):
        return t if t > x1 else x1

    def y2(t):
        return t if t > lam else lam

    # probability that the second arrival lands after the scheduled update
    late = _quad(lambda t: exp(-y1(t)), 0.0, x1) + _quad(lambda t: exp(-y1(t)), x1, TAU_MAX)
    early = 1.0 - late

    def moments(power):
        one_unit = _quad(lambda t: y2(t) ** power / power * exp(-t), 0.0, x1, (lam,))
        single = (_quad(lambda t: y1(t) ** power / power * exp(-y1(t)), 0.0, x1)
                  + _quad(lambda t: y1(t) ** power / power * exp(-y1(t)), x1, TAU_MAX))

        def inner(t1):
            upper = y1(t1) - t1
            if upper <= 0:
                return 0.0
            return _quad(lambda t2: y2(t1 + t2) ** power / power * exp(-t1 - t2), 0.0, upper, (lam - t1,))

        double = _quad(inner, 0.0, x1, (lam,))
        head = x1**power / power
        return (head + exp(x1) * one_unit) * early + single + double

    area = moments(2)
    length = moments(1)
    return EpochExpectations(area, length, area / length)


def _oracle_pieces(lam, x1, dps):
    """Per-pattern building blocks in extended precision."""
    with mpmath.workdps(dps):
        lam_m, x1_m = mpmath.mpf(lam), mpmath.mpf(x1)
        e = mpmath.e

        def y2(t):
            return mpmath.mpf(lam_m) if t < lam_m else t

        split = sorted({mpmath.mpf(0), min(lam_m, x1_m), x1_m})
        pieces = {}
        for power in (1, 2):
            p = mpmath.mpf(power)
            # single arrival, update at max(t, x1), next gap beyond the update
            first = (x1_m**p / p * e ** (-x1_m) * x1_m
                     + mpmath.quad(lambda t: t**p / p * e ** (-t), [x1_m, mpmath.inf]))
            # battery filled before x1: the sum of two gaps has Gamma(2) density s e^-s
            fill = mpmath.quad(lambda s: s * y2(s) ** p / p * e ** (-s), split)
            # one refill from (1, 0) that arrives before x1
            refill = mpmath.quad(lambda t: y2(t) ** p / p * e ** (-t), split)
            pieces[power] = (first, fill, refill)
        p_first = (1 + x1_m) * e ** (-x1_m)
        p_early = 1 - e ** (-x1_m)
        p_late = e ** (-x1_m)
    return pieces, p_first, p_early, p_late


def pattern_probabilities(lam: float, x1: float, m_max: int) -> list[float]:
    """P(epoch follows pattern m) for m = 1..m_max."""
    _check_positive(lam, x1)
    _, p_first, p_early, p_late = _oracle_pieces(lam, x1, 30)
    q = 1 - p_first
    return [float(p_first)] + [float(q * p_early ** (m - 2) * p_late) for m in range(2, m_max + 1)]


def pattern_sum_oracle(lam: float, x1: float, m_max: int = 60, dps: int = 30) -> EpochExpectations:
    """Epoch moments as a truncated sum over return patterns 1..m_max.

    Pattern ``m >= 2`` contributes the battery-filling update, ``m - 2``
    refill updates each preceded by an arrival within ``x1``, and a final
    ``x1`` update with no arrival. ``tail_bound`` is the exact mass of the
    dropped patterns, the larger of the area and length tails.
    """
    if int(m_max) != m_max or m_max < 2:
        raise ValueError(f"m_max must be an integer >= 2, got {m_max!r}")
    _check_positive(lam, x1)
    pieces, p_first, p_early, p_late = _oracle_pieces(lam, x1, dps)
    with mpmath.workdps(dps):
        q = 1 - p_first
        totals, tails = {}, {}
        for power in (1, 2):
            first, fill, refill = pieces[power]
            head = mpmath.mpf(x1) ** power / power
            total = first
            for m in range(2, m_max + 1):
                total += (fill + head * q) * p_early ** (m - 2) * p_late
                if m > 2:
                    total += (m - 2) * q * refill * p_early ** (m - 3) * p_late
            # sum over m > m_max in closed form; d/dp of p^k / (1 - p)
            k = m_max - 1
            dgeo = (k * p_early ** (k - 1) * (1 - p_early) + p_early**k) / (1 - p_early) ** 2
            tails[power] = (fill + head * q) * p_early ** (m_max - 1) + q * refill * p_late * dgeo
            totals[power] = total
        area, length = totals[2], totals[1]
        return EpochExpectations(float(area), float(length), float(area / length),
                                 float(max(tails[1], tails[2])))


def reference_constants() -> dict[str, float]:
    """Published comparison values; the full-recharge ones are quoted, not computed."""
    return {
        "b1_optimal": B1_OPTIMAL,
        "infinite_battery": INFINITE_BATTERY,
        "full_recharge_rate1": 0.59,
        "full_recharge_rate_half": 1.18,
    }
