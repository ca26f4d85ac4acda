"""Regularization of uniform UTC series and fixed-length segment cutting.

Irregular readings are aggregated into hourly or daily bins
(mean/min/max/std, sample std). Days must meet the minimum-coverage rules
before their bins are retained: at hourly frequency every one of the 24
hour bins needs at least one reading, at daily frequency every aligned
3-hour window does. Coverage is judged on one qualification variable
(BG by default, the 5-minute heartbeat signal); the other variables
inherit the day's keep/exclude status. Missing bins are never imputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import US, VARIABLES, UniformSeries

HOUR_US = 3_600 * US
DAY_US = 24 * HOUR_US
WINDOW_3H_US = 3 * HOUR_US

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

FREQUENCIES = ("hourly", "daily")


def us_to_datetime(t: int) -> datetime:
    return _EPOCH + timedelta(microseconds=int(t))


def iso_weekday(day_start_us: int) -> int:
    """ISO weekday (Mon=1..Sun=7) of a UTC day start. 1970-01-01 was a Thursday."""
    return int((day_start_us // DAY_US + 3) % 7) + 1


@dataclass
class VariableBins:
    """Per-variable aggregates over retained bins, aligned by ``starts``."""

    starts: np.ndarray
    mean: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray
    std: np.ndarray  # NaN for single-reading bins
    count: np.ndarray

    def __len__(self) -> int:
        return len(self.starts)

    @staticmethod
    def empty() -> "VariableBins":
        z = np.empty(0)
        return VariableBins(
            starts=np.empty(0, dtype=np.int64),
            mean=z, vmin=z.copy(), vmax=z.copy(), std=z.copy(),
            count=np.empty(0, dtype=np.int64),
        )

    def select(self, mask: np.ndarray) -> "VariableBins":
        return VariableBins(
            starts=self.starts[mask], mean=self.mean[mask],
            vmin=self.vmin[mask], vmax=self.vmax[mask],
            std=self.std[mask], count=self.count[mask],
        )

    def mean_at(self, starts: np.ndarray) -> np.ndarray:
        """Means for the requested bin starts; NaN where the bin is absent."""
        out = np.full(len(starts), np.nan)
        if len(self.starts) == 0:
            return out
        idx = np.searchsorted(self.starts, starts)
        ok = (idx < len(self.starts)) & (self.starts[np.minimum(idx, len(self.starts) - 1)] == starts)
        out[ok] = self.mean[idx[ok]]
        return out


@dataclass
class RegularSeries:
    frequency: str
    source_id: str
    bins: dict[str, VariableBins]
    excluded_bins: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64)
    )
    qualified_days: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64)
    )

    def variables(self) -> tuple[str, ...]:
        return tuple(v for v in VARIABLES if v in self.bins and len(self.bins[v]) > 0)

    def to_rows(self) -> list[dict]:
        rows = []
        for var in VARIABLES:
            vb = self.bins.get(var)
            if vb is None:
                continue
            for i in range(len(vb)):
                rows.append(
                    {
                        "variable": var,
                        "bin_start": us_to_datetime(vb.starts[i]).isoformat(),
                        "mean": vb.mean[i],
                        "min": vb.vmin[i],
                        "max": vb.vmax[i],
                        "std": vb.std[i],
                        "count": int(vb.count[i]),
                    }
                )
        return rows

    def to_dict(self) -> dict:
        def clean(x):
            return None if np.isnan(x) else float(x)

        return {
            "frequency": self.frequency,
            "source_id": self.source_id,
            "bins": {
                var: [
                    {
                        "bin_start": us_to_datetime(vb.starts[i]).isoformat(),
                        "mean": float(vb.mean[i]),
                        "min": float(vb.vmin[i]),
                        "max": float(vb.vmax[i]),
                        "std": clean(vb.std[i]),
                        "count": int(vb.count[i]),
                    }
                    for i in range(len(vb))
                ]
                for var, vb in self.bins.items()
            },
            "excluded_bins": [us_to_datetime(t).isoformat() for t in self.excluded_bins],
            "qualified_days": [us_to_datetime(t).date().isoformat() for t in self.qualified_days],
        }


@dataclass(frozen=True)
class SegmentTag:
    """Calendar provenance of one segment row."""

    date: str  # ISO date for day segments, ISO week (e.g. 2018-W23) for weeks
    month: int
    weekday: int


@dataclass
class SegmentSet:
    """Fixed-length segments (24-point days or 7-point weeks) per variable."""

    kind: str  # "day" | "week"
    variables: tuple[str, ...]
    data: dict[str, np.ndarray]
    tags: list[SegmentTag]
    skipped_incomplete: int = 0

    def __len__(self) -> int:
        return len(self.tags)

    @property
    def segment_length(self) -> int:
        return 24 if self.kind == "day" else 7

    def to_matrix(self, variables: tuple[str, ...] | None = None) -> np.ndarray:
        """Stack to an (n_segments, n_variables, length) array."""
        use = tuple(variables) if variables is not None else self.variables
        missing = [v for v in use if v not in self.data]
        if missing:
            raise ValueError(f"variables not in segment set: {missing}")
        if len(self) == 0:
            return np.empty((0, len(use), self.segment_length))
        return np.stack([self.data[v] for v in use], axis=1)

    def subset(self, indices) -> "SegmentSet":
        idx = np.asarray(indices, dtype=np.int64)
        return SegmentSet(
            kind=self.kind,
            variables=self.variables,
            data={v: a[idx] for v, a in self.data.items()},
            tags=[self.tags[i] for i in idx],
            skipped_incomplete=self.skipped_incomplete,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "variables": list(self.variables),
            "tags": [
                {"date": t.date, "month": t.month, "weekday": t.weekday}
                for t in self.tags
            ],
            "data": {v: a.tolist() for v, a in self.data.items()},
            "skipped_incomplete": self.skipped_incomplete,
        }


def _aggregate_variable(times_us: np.ndarray, values: np.ndarray, width_us: int) -> VariableBins:
    present = ~np.isnan(values)
    t = times_us[present]
    v = values[present]
    if len(t) == 0:
        return VariableBins.empty()
    ids = (t // width_us) * width_us
    starts, inverse, counts = np.unique(ids, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=v)
    mean = sums / counts
    vmin = np.full(len(starts), np.inf)
    vmax = np.full(len(starts), -np.inf)
    np.minimum.at(vmin, inverse, v)
    np.maximum.at(vmax, inverse, v)
    dev = v - mean[inverse]
    ss = np.bincount(inverse, weights=dev * dev)
    with np.errstate(invalid="ignore"):
        std = np.where(counts > 1, np.sqrt(ss / np.maximum(counts - 1, 1)), np.nan)
    return VariableBins(
        starts=starts.astype(np.int64), mean=mean, vmin=vmin, vmax=vmax,
        std=std, count=counts.astype(np.int64),
    )


def aggregate_bins(series: UniformSeries, frequency: str) -> RegularSeries:
    """Bin aggregation before any coverage rule is applied."""
    if frequency not in FREQUENCIES:
        raise ValueError(f"frequency must be one of {FREQUENCIES}")
    width = HOUR_US if frequency == "hourly" else DAY_US
    bins = {
        v: _aggregate_variable(series.times_us, series.values[v], width)
        for v in VARIABLES
    }
    all_days = np.unique(
        np.concatenate([(vb.starts // DAY_US) * DAY_US for vb in bins.values()])
        if any(len(vb) for vb in bins.values())
        else np.empty(0, dtype=np.int64)
    )
    return RegularSeries(
        frequency=frequency, source_id=series.source_id, bins=bins,
        qualified_days=all_days.astype(np.int64),
    )


def qualify_day_hourly(hour_counts) -> bool:
    """Keep a day at hourly frequency iff all 24 hour bins have a reading."""
    counts = np.asarray(hour_counts)
    if counts.shape != (24,):
        raise ValueError("expected 24 per-hour counts")
    return bool(np.all(counts >= 1))


def qualify_day_daily(reading_times_us) -> bool:
    """Keep a day at daily frequency iff every aligned 3-hour window has a reading."""
    t = np.asarray(reading_times_us, dtype=np.int64)
    if len(t) == 0:
        return False
    windows = (t % DAY_US) // WINDOW_3H_US
    return bool(len(np.unique(windows)) == 8)


def _qualified_days(series: UniformSeries, frequency: str, qualify_variable: str) -> np.ndarray:
    values = series.values[qualify_variable]
    present = ~np.isnan(values)
    t = series.times_us[present]
    if len(t) == 0:
        return np.empty(0, dtype=np.int64)
    days = (t // DAY_US) * DAY_US
    kept = []
    for day in np.unique(days):
        in_day = t[days == day]
        if frequency == "hourly":
            hours = (in_day % DAY_US) // HOUR_US
            ok = qualify_day_hourly(np.bincount(hours, minlength=24)[:24])
        else:
            ok = qualify_day_daily(in_day)
        if ok:
            kept.append(day)
    return np.asarray(kept, dtype=np.int64)


def build_regular_series(
    series: UniformSeries, frequency: str, qualify_variable: str = "bg"
) -> RegularSeries:
    """Aggregate into bins, then drop bins of days failing the coverage rule."""
    if qualify_variable not in VARIABLES:
        raise ValueError(f"qualify_variable must be one of {VARIABLES}")
    pre = aggregate_bins(series, frequency)
    kept_days = _qualified_days(series, frequency, qualify_variable)
    kept_set = set(kept_days.tolist())

    bins: dict[str, VariableBins] = {}
    excluded: list[np.ndarray] = []
    for var, vb in pre.bins.items():
        day_of = (vb.starts // DAY_US) * DAY_US
        keep = np.isin(day_of, kept_days) if len(kept_days) else np.zeros(len(vb), dtype=bool)
        bins[var] = vb.select(keep)
        excluded.append(vb.starts[~keep])
    excluded_bins = (
        np.unique(np.concatenate(excluded)) if excluded else np.empty(0, dtype=np.int64)
    )
    return RegularSeries(
        frequency=frequency,
        source_id=series.source_id,
        bins=bins,
        excluded_bins=excluded_bins.astype(np.int64),
        qualified_days=kept_days,
    )


def extract_day_segments(
    regular: RegularSeries, variables: tuple[str, ...] | None = None
) -> SegmentSet:
    """One length-24 row of hourly means per fully qualified day per variable.

    Days where any requested variable misses an hour bin are skipped (and
    counted) so rows stay absent-free and tags align across variables.
    """
    if regular.frequency != "hourly":
        raise ValueError("day segments need an hourly RegularSeries")
    use = tuple(variables) if variables is not None else regular.variables()
    rows: dict[str, list[np.ndarray]] = {v: [] for v in use}
    tags: list[SegmentTag] = []
    skipped = 0
    for day in np.sort(regular.qualified_days):
        hour_starts = day + HOUR_US * np.arange(24, dtype=np.int64)
        per_var = {}
        complete = True
        for v in use:
            means = regular.bins[v].mean_at(hour_starts) if v in regular.bins else np.full(24, np.nan)
            if np.isnan(means).any():
                complete = False
                break
            per_var[v] = means
        if not complete:
            skipped += 1
            continue
        for v in use:
            rows[v].append(per_var[v])
        dt = us_to_datetime(day)
        tags.append(
            SegmentTag(date=dt.date().isoformat(), month=dt.month, weekday=iso_weekday(day))
        )
    data = {
        v: (np.vstack(rows[v]) if rows[v] else np.empty((0, 24))) for v in use
    }
    return SegmentSet(
        kind="day", variables=use, data=data, tags=tags, skipped_incomplete=skipped
    )


def extract_week_segments(
    regular: RegularSeries, variables: tuple[str, ...] | None = None
) -> SegmentSet:
    """Length-7 rows of daily means over Monday-anchored fully qualified weeks."""
    if regular.frequency != "daily":
        raise ValueError("week segments need a daily RegularSeries")
    use = tuple(variables) if variables is not None else regular.variables()
    qualified = set(np.sort(regular.qualified_days).tolist())
    anchors = sorted(
        {day - (iso_weekday(day) - 1) * DAY_US for day in qualified}
    )
    rows: dict[str, list[np.ndarray]] = {v: [] for v in use}
    tags: list[SegmentTag] = []
    skipped = 0
    for anchor in anchors:
        days = anchor + DAY_US * np.arange(7, dtype=np.int64)
        if not all(int(d) in qualified for d in days):
            continue
        per_var = {}
        complete = True
        for v in use:
            means = regular.bins[v].mean_at(days) if v in regular.bins else np.full(7, np.nan)
            if np.isnan(means).any():
                complete = False
                break
            per_var[v] = means
        if not complete:
            skipped += 1
            continue
        for v in use:
            rows[v].append(per_var[v])
        iso = us_to_datetime(anchor).isocalendar()
        tags.append(
            SegmentTag(
                date=f"{iso.year}-W{iso.week:02d}",
                month=us_to_datetime(anchor).month,
                weekday=1,
            )
        )
    data = {v: (np.vstack(rows[v]) if rows[v] else np.empty((0, 7))) for v in use}
    return SegmentSet(
        kind="week", variables=use, data=data, tags=tags, skipped_incomplete=skipped
    )


def longest_run(regular: RegularSeries) -> RegularSeries:
    """Longest run of consecutive qualified days (ties: earliest start)."""
    if regular.frequency != "daily":
        raise ValueError("longest_run operates on a daily RegularSeries")
    days = np.sort(regular.qualified_days)
    if len(days) == 0:
        return RegularSeries(
            frequency="daily", source_id=regular.source_id,
            bins={v: VariableBins.empty() for v in regular.bins},
        )
    # Split into runs where consecutive days differ by exactly one day.
    breaks = np.nonzero(np.diff(days) != DAY_US)[0] + 1
    runs = np.split(days, breaks)
    best = max(runs, key=len)  # max() keeps the earliest on ties
    bins = {}
    for var, vb in regular.bins.items():
        day_of = (vb.starts // DAY_US) * DAY_US
        bins[var] = vb.select(np.isin(day_of, best))
    return RegularSeries(
        frequency="daily", source_id=regular.source_id, bins=bins,
        qualified_days=np.asarray(best, dtype=np.int64),
    )
