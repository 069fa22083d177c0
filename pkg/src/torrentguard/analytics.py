"""Aggregate analyses over detection output and swarm observations.

Pure functions: publisher contribution curves, victim-vs-population country
ratios, detection-time-saving CDFs, per-user fake-download CDFs, and the
IP cost a publisher pays to stay ahead of the threshold. Display rounding is
kept separate from raw values so comparisons can use exact numbers.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from .swarm import SwarmSampleLog


class AnalyticsError(ValueError):
    pass


class EmptyInput(AnalyticsError):
    pass


class ZeroThreshold(AnalyticsError):
    pass


@dataclass(frozen=True)
class ContributionCurve:
    points: tuple  # (top-publisher fraction, cumulative share of fake torrents)

    def share_at(self, x: float) -> float:
        """Largest curve y whose x does not exceed the given fraction."""
        best = 0.0
        for px, py in self.points:
            if px <= x + 1e-12:
                best = py
        return best


@dataclass(frozen=True)
class CountryRatioRow:
    country: str
    victim_pct: float
    population_pct: float | None
    ratio: float | None  # raw value; None when the population share is unknown
    display_ratio: float | None  # rounded to 2 decimals for tables


@dataclass(frozen=True)
class Cdf:
    points: tuple  # (value, cumulative fraction), fraction reaching 1.0
    median: float | None  # None only for the empty CDF


@dataclass(frozen=True)
class CountermeasureCost:
    ips_per_day: float
    ips_per_month: float


def contribution_curve(counts: dict) -> ContributionCurve:
    total = sum(counts.values())
    if not counts or total <= 0:
        raise EmptyInput("need at least one publisher with a positive count")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    points = []
    running = 0
    for k, (_, count) in enumerate(ranked, start=1):
        running += count
        points.append((k / len(ranked), running / total))
    return ContributionCurve(points=tuple(points))


def country_ratio_table(victims: dict, population: dict) -> list[CountryRatioRow]:
    for name, mapping in (("victims", victims), ("population", population)):
        for country, pct in mapping.items():
            if pct < 0:
                raise AnalyticsError(f"{name} percentage for {country!r} is negative")
    rows = []
    for country in sorted(victims, key=lambda c: (-victims[c], c)):
        population_pct = population.get(country)
        if population_pct is None or population_pct == 0:
            rows.append(CountryRatioRow(country, victims[country],
                                        population_pct, None, None))
            continue
        ratio = victims[country] / population_pct
        rows.append(CountryRatioRow(country, victims[country], population_pct,
                                    ratio, round(ratio, 2)))
    return rows


def detection_savings_cdf(deltas: list) -> Cdf:
    if not deltas:
        raise EmptyInput("no deltas to summarize")
    ordered = sorted(float(d) for d in deltas)
    n = len(ordered)
    points = tuple((value, (i + 1) / n) for i, value in enumerate(ordered))
    return Cdf(points=points, median=statistics.median(ordered))


def downloads_per_user_cdf(logs: list[SwarmSampleLog]) -> Cdf:
    """Distinct fake torrents touched per downloader IP; empty logs give an
    empty CDF."""
    touched: dict[str, set] = {}
    for log in logs:
        for _, endpoints in log.samples:
            for endpoint in endpoints:
                touched.setdefault(endpoint.ip, set()).add(log.infohash.hex)
    if not touched:
        return Cdf(points=(), median=None)
    return detection_savings_cdf([len(hashes) for hashes in touched.values()])


def countermeasure_cost(accounts_per_day: float, k: int) -> CountermeasureCost:
    if k < 1:
        raise ZeroThreshold("threshold must be at least 1")
    if accounts_per_day < 0:
        raise AnalyticsError("accounts_per_day cannot be negative")
    per_day = accounts_per_day / k
    return CountermeasureCost(ips_per_day=per_day, ips_per_month=30.0 * per_day)


def render_csv(points) -> str:
    """Plot-ready x,y lines for any (x, y) point sequence."""
    return "".join(f"{x},{y}\n" for x, y in points)
