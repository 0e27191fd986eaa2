"""Empirical hourly supervision rates and Erlang-loss team sizing.

Offered load is arrival rate times mean service time (dimensionless
Erlangs): the hourly task count divided by 3600 gives the arrival rate,
and cumulative in-hour supervision seconds divided by the task count gives
the mean service time. Blocking is computed with the stable Erlang-B
recurrence rather than factorial summation, which overflows near k = 170.

No steady-state restriction is imposed on the offered load: the loss
formula is valid for any finite load in a blocked-calls-lost system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .netmodel import ValidationError


@dataclass(frozen=True)
class HourlyRates:
    """Empirical rates for one hour of one region.

    mu_s is the mean supervision seconds per task, NaN when the hour had
    no tasks (lambda and the offered load are then zero).
    """

    hour: int
    q: int
    b: int
    lam: float
    mu_s: float

    @property
    def offered_load(self) -> float:
        return self.lam * self.mu_s if self.q > 0 else 0.0


def hourly_rates(events, samples, hour: int) -> HourlyRates:
    """Rates for one hour: tasks attributed by event start time.

    q counts (AV, merge) events whose first conflict second falls in the
    hour; b sums those events' conflict seconds within the hour (each
    counted event contributes at least its starting second, so b >= q).
    """
    lo, hi = hour * 3600, (hour + 1) * 3600
    pairs = {(ev.av_id, ev.merge_id) for ev in events
             if lo <= ev.t_start < hi}
    q = len(pairs)
    b = sum(1 for s in samples
            if lo <= s.t < hi and (s.av_id, s.merge_id) in pairs)
    lam = q / 3600.0
    mu_s = b / q if q > 0 else math.nan
    return HourlyRates(hour=hour, q=q, b=b, lam=lam, mu_s=mu_s)


def hourly_rates_table(events, samples, T: int) -> list[HourlyRates]:
    if T % 3600:
        raise ValidationError(f"horizon {T}s is not a whole number of hours")
    return [hourly_rates(events, samples, l) for l in range(T // 3600)]


def erlang_loss(a: float, k: int) -> float:
    """Blocking probability of an M/M/k loss system at offered load a.

    Uses B(0) = 1, B(j) = a B(j-1) / (j + a B(j-1)), which is exactly the
    normalized (a^k / k!) ratio without ever forming a factorial.
    """
    if a < 0:
        raise ValidationError(f"offered load {a} is negative")
    if k < 0:
        raise ValidationError(f"server count {k} is negative")
    B = 1.0
    for j in range(1, k + 1):
        B = a * B / (j + a * B)
    return B


def min_servers(a: float, epsilon: float) -> int:
    """Smallest k with erlang_loss(a, k) < epsilon.

    Always terminates: blocking decays to zero in k for any fixed load.
    Note the degenerate a = 0 still yields k* = 1, since with zero servers
    every arrival is blocked by definition (P_0 = 1).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon {epsilon} outside (0, 1)")
    if a < 0:
        raise ValidationError(f"offered load {a} is negative")
    k = 0
    B = 1.0
    while B >= epsilon:
        k += 1
        B = a * B / (k + a * B)
    return k


def nines(p: float) -> float:
    """Orders of magnitude of reliability; inf when blocking underflows
    to zero."""
    return math.inf if p == 0.0 else -math.log10(p)


def achieved_reliability(a: float, k: int) -> tuple[float, float]:
    """Blocking probability and its nines for a team of k supervisors."""
    p = erlang_loss(a, k)
    return p, nines(p)


def pooled_vs_summed(regions: list[list[HourlyRates]],
                     epsilon: float) -> list[tuple[int, int]]:
    """Per-hour (summed k*, pooled k*) across regions.

    Summed sizes each region's team separately and adds headcounts; pooled
    sizes one team against the sum of the regions' offered loads (offered
    loads add when independent task streams are aggregated).
    """
    if not regions:
        raise ValidationError("no regions given")
    hours = [r.hour for r in regions[0]]
    for rates in regions[1:]:
        if [r.hour for r in rates] != hours:
            raise ValidationError("regions disagree on the hour grid")
    out = []
    for idx in range(len(hours)):
        summed = sum(min_servers(rates[idx].offered_load, epsilon)
                     for rates in regions)
        pooled = min_servers(sum(rates[idx].offered_load for rates in regions),
                             epsilon)
        out.append((summed, pooled))
    return out
