"""Monthly index series: aggregation, standardization, and the shared CSV format."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

STAGES = ("raw", "normalized", "standardized")


def parse_month(month: str) -> tuple[int, int]:
    """Split a ``YYYY-MM`` identifier into (year, month), validating both."""
    parts = month.split("-")
    if len(parts) != 2 or len(parts[0]) != 4:
        raise ValueError(f"bad month identifier: {month!r}")
    year, mon = int(parts[0]), int(parts[1])
    if not 1 <= mon <= 12:
        raise ValueError(f"bad month identifier: {month!r}")
    return year, mon


def month_range(start: str, end: str) -> list[str]:
    """All months from start to end inclusive, in calendar order."""
    y0, m0 = parse_month(start)
    y1, m1 = parse_month(end)
    if (y0, m0) > (y1, m1):
        raise ValueError(f"month range reversed: {start} > {end}")
    out = []
    y, m = y0, m0
    while (y, m) <= (y1, m1):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def quarter_of(month: str) -> str:
    year, mon = parse_month(month)
    return f"{year:04d}-Q{(mon - 1) // 3 + 1}"


def months_of_quarter(quarter: str) -> list[str]:
    year_s, q_s = quarter.split("-Q")
    year, q = int(year_s), int(q_s)
    if not 1 <= q <= 4:
        raise ValueError(f"bad quarter identifier: {quarter!r}")
    first = (q - 1) * 3 + 1
    return [f"{year:04d}-{m:02d}" for m in range(first, first + 3)]


def quarter_range(start: str, end: str) -> list[str]:
    """All quarters from start to end inclusive (``YYYY-Q#`` identifiers)."""
    first = months_of_quarter(start)[0]
    last = months_of_quarter(end)[-1]
    seen: list[str] = []
    for m in month_range(first, last):
        q = quarter_of(m)
        if not seen or seen[-1] != q:
            seen.append(q)
    return seen


@dataclass
class MonthlySeries:
    """An ordered month -> value map.

    ``values`` keeps calendar order and is contiguous over the series range;
    months with no observable value hold ``None`` so gaps stay explicit.
    """

    label: str
    stage: str
    values: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"unknown series stage: {self.stage!r}")

    def months(self) -> list[str]:
        return list(self.values)

    def observed(self) -> list[tuple[str, float]]:
        """(month, value) pairs with missing months dropped."""
        return [(m, v) for m, v in self.values.items() if v is not None]

    def observed_values(self) -> list[float]:
        return [v for v in self.values.values() if v is not None]

    def __len__(self) -> int:
        return len(self.values)


def aggregate_monthly(
    scores: Iterable[tuple[str, float]],
    stats,
    months: list[str] | None = None,
    label: str = "epu",
) -> MonthlySeries:
    """Sum per-document scores by month and divide by that month's article count.

    ``stats`` is either a corpus statistics object exposing ``docs_per_month``
    or a plain month -> article count mapping. The output spans the full month
    range contiguously; months with zero recorded articles are left missing.
    Per-month sums use exact summation, so the result does not depend on the
    order or partitioning of the score stream.
    """
    totals: Mapping[str, int]
    totals = stats.docs_per_month if hasattr(stats, "docs_per_month") else dict(stats)
    if not totals:
        raise ValueError("no monthly article counts: empty corpus statistics")

    per_month: dict[str, list[float]] = defaultdict(list)
    for month, score in scores:
        per_month[month].append(score)
    for month in per_month:
        if totals.get(month, 0) <= 0:
            raise ValueError(
                f"scores recorded for {month} but the corpus statistics "
                f"list no articles in that month"
            )

    if months is None:
        keys = sorted(totals)
        months = month_range(keys[0], keys[-1])

    values: dict[str, float | None] = {}
    for month in months:
        n = totals.get(month, 0)
        values[month] = math.fsum(per_month.get(month, ())) / n if n > 0 else None
    return MonthlySeries(label=label, stage="normalized", values=values)


def standardize(series: MonthlySeries, center: bool = True) -> MonthlySeries:
    """Rescale to unit population standard deviation (and zero mean by default).

    Missing months are excluded from the statistics and stay missing. A
    constant series has no defined z-score and raises.
    """
    obs = series.observed_values()
    if len(obs) < 2:
        raise ValueError(f"series {series.label!r} needs >= 2 observed months")
    mean = math.fsum(obs) / len(obs)
    var = math.fsum((v - mean) ** 2 for v in obs) / len(obs)
    if var == 0.0:
        raise ValueError(f"zero variance: series {series.label!r} is constant")
    sigma = math.sqrt(var)
    shift = mean if center else 0.0
    values = {
        m: None if v is None else (v - shift) / sigma for m, v in series.values.items()
    }
    return MonthlySeries(label=series.label, stage="standardized", values=values)


def write_series_csv(path: str | Path, series: MonthlySeries | Iterable[MonthlySeries]) -> None:
    """Write one or more series in the shared ``month,value,stage,label`` format."""
    series_list = [series] if isinstance(series, MonthlySeries) else list(series)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "value", "stage", "label"])
        for s in series_list:
            for month, value in s.values.items():
                writer.writerow([month, "" if value is None else repr(value), s.stage, s.label])


def read_series_csv(path: str | Path) -> list[MonthlySeries]:
    """Read series back from the shared CSV format, grouped by (label, stage)."""
    groups: dict[tuple[str, str], dict[str, float | None]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"month", "value", "stage", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            key = (row["label"], row["stage"])
            values = groups.setdefault(key, {})
            values[row["month"]] = float(row["value"]) if row["value"] != "" else None
    return [
        MonthlySeries(label=label, stage=stage, values=values)
        for (label, stage), values in groups.items()
    ]
