"""Scaling, descriptive statistics, and distribution-fidelity validation.

z-score scaling uses the population standard deviation (the convention the
z-normalized distance machinery expects); descriptive statistics use the
sample standard deviation. The fidelity check compares the rank ordering of
group means between an irregular series and its resampled counterpart:
levels may shift, patterns must not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .ingest import UniformSeries, VARIABLES
from .resample import DAY_US, HOUR_US, RegularSeries, SegmentSet, iso_weekday, us_to_datetime

GROUPINGS = ("hour", "weekday", "month", "year")


class DegenerateScaleError(ValueError):
    """Raised when a constant series cannot be z-scored."""


@dataclass(frozen=True)
class ScalingParams:
    kind: str  # "zscore" | "minmax"
    location: float  # mean, or min
    scale: float  # population std, or max - min
    degenerate: bool = False
    scope: str = "global"

    def inverse(self, scaled) -> np.ndarray:
        arr = np.asarray(scaled, dtype=np.float64)
        if self.degenerate:
            return np.full_like(arr, self.location)
        return arr * self.scale + self.location


def zscore(series) -> tuple[np.ndarray, ScalingParams]:
    """(x - mean) / population std. Constant input is an error."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if len(x) < 2:
        raise ValueError("zscore needs at least 2 values")
    mu = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        raise DegenerateScaleError("degenerate scale: constant input")
    return (x - mu) / sigma, ScalingParams(kind="zscore", location=mu, scale=sigma)


def minmax_scale(series) -> tuple[np.ndarray, ScalingParams]:
    """(x - min) / (max - min) into [0, 1]; constant input maps to zeros."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if len(x) == 0:
        raise ValueError("minmax_scale needs at least 1 value")
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        params = ScalingParams(kind="minmax", location=lo, scale=0.0, degenerate=True)
        return np.zeros_like(x), params
    return (x - lo) / (hi - lo), ScalingParams(kind="minmax", location=lo, scale=hi - lo)


def scale_segments(
    segments: SegmentSet, kind: str = "minmax", scope: str = "global"
) -> tuple[SegmentSet, dict[str, ScalingParams]]:
    """Scale segment values per variable for clustering.

    ``scope="global"`` scales each variable over all segments jointly,
    preserving day-to-day amplitude differences; ``scope="per_segment"``
    rescales every row on its own (sensitivity runs).
    """
    if kind not in ("minmax", "zscore"):
        raise ValueError("kind must be 'minmax' or 'zscore'")
    if scope not in ("global", "per_segment"):
        raise ValueError("scope must be 'global' or 'per_segment'")
    fn = minmax_scale if kind == "minmax" else zscore
    data: dict[str, np.ndarray] = {}
    params: dict[str, ScalingParams] = {}
    for var in segments.variables:
        block = segments.data[var]
        if block.size == 0:
            data[var] = block.copy()
            params[var] = ScalingParams(kind=kind, location=0.0, scale=0.0, degenerate=True, scope=scope)
            continue
        if scope == "global":
            flat, p = fn(block.ravel())
            data[var] = flat.reshape(block.shape)
            params[var] = ScalingParams(p.kind, p.location, p.scale, p.degenerate, "global")
        else:
            rows = [fn(row)[0] for row in block]
            data[var] = np.vstack(rows)
            params[var] = ScalingParams(kind=kind, location=np.nan, scale=np.nan, scope="per_segment")
    return (
        SegmentSet(
            kind=segments.kind, variables=segments.variables, data=data,
            tags=list(segments.tags), skipped_incomplete=segments.skipped_incomplete,
        ),
        params,
    )


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    std: float  # NaN for single-element groups
    variance: float
    q1: float
    median: float
    q3: float
    outlier_count: int


def descriptive_stats(groups: Mapping, min_size: int = 1) -> dict:
    """Per-group mean/std/variance/quartiles and 1.5*IQR outlier counts.

    Groups with no values are omitted.
    """
    out = {}
    for key, values in groups.items():
        x = np.asarray(values, dtype=np.float64).ravel()
        x = x[~np.isnan(x)]
        if len(x) < max(min_size, 1):
            continue
        q1, med, q3 = np.percentile(x, [25, 50, 75])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        outliers = int(np.count_nonzero((x < lo) | (x > hi)))
        if len(x) > 1:
            std = float(x.std(ddof=1))
            var = float(x.var(ddof=1))
        else:
            std = float("nan")
            var = float("nan")
        out[key] = GroupStats(
            n=len(x), mean=float(x.mean()), std=std, variance=var,
            q1=float(q1), median=float(med), q3=float(q3), outlier_count=outliers,
        )
    return out


def mean_confidence_interval(sample, level: float = 0.95) -> tuple[float, float]:
    """Student-t confidence interval for the mean."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    if len(x) < 2:
        raise ValueError("confidence interval needs at least 2 values")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    mu = float(x.mean())
    s = float(x.std(ddof=1))
    if s == 0.0:
        return (mu, mu)
    half = float(sps.t.ppf(0.5 + level / 2.0, len(x) - 1)) * s / np.sqrt(len(x))
    return (mu - half, mu + half)


@dataclass
class GroupingComparison:
    ordering_identical: bool
    discordant_pairs: list[tuple]
    max_abs_discrepancy: float


@dataclass
class FidelityReport:
    per_grouping: dict[str, GroupingComparison]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "groupings": {
                name: {
                    "ordering_identical": cmp.ordering_identical,
                    "discordant_pairs": [list(p) for p in cmp.discordant_pairs],
                    "max_abs_discrepancy": cmp.max_abs_discrepancy,
                }
                for name, cmp in self.per_grouping.items()
            },
        }


def _compare_one(a: Mapping, b: Mapping) -> GroupingComparison:
    keys = sorted(a)
    discordant = []
    max_disc = 0.0
    for key in keys:
        max_disc = max(max_disc, abs(a[key] - b[key]))
    for i, ki in enumerate(keys):
        for kj in keys[i + 1 :]:
            sa = np.sign(a[ki] - a[kj])
            sb = np.sign(b[ki] - b[kj])
            if sa != sb:
                discordant.append((ki, kj))
    return GroupingComparison(
        ordering_identical=not discordant,
        discordant_pairs=discordant,
        max_abs_discrepancy=max_disc,
    )


def compare_groupings(a: Mapping[str, Mapping], b: Mapping[str, Mapping]) -> FidelityReport:
    """Check that group-mean rank orderings agree between two samplings.

    ``a`` and ``b`` map grouping names (hour/weekday/...) to ``{key: mean}``
    dictionaries. A report passes iff for every grouping the pairwise order
    of means is identical on both sides.
    """
    if set(a) != set(b):
        raise ValueError(f"grouping mismatch: {sorted(set(a) ^ set(b))}")
    per: dict[str, GroupingComparison] = {}
    for name in sorted(a):
        if set(a[name]) != set(b[name]):
            raise ValueError(
                f"group keys differ in {name!r}: {sorted(set(a[name]) ^ set(b[name]))}"
            )
        per[name] = _compare_one(a[name], b[name])
    return FidelityReport(per_grouping=per, passed=all(c.ordering_identical for c in per.values()))


def _group_keys(times_us: np.ndarray, by: str) -> np.ndarray:
    if by == "hour":
        return ((times_us % DAY_US) // HOUR_US).astype(np.int64)
    if by == "weekday":
        return np.asarray([iso_weekday((t // DAY_US) * DAY_US) for t in times_us], dtype=np.int64)
    if by in ("month", "year"):
        return np.asarray(
            [getattr(us_to_datetime(int(t)), by) for t in times_us], dtype=np.int64
        )
    raise ValueError(f"unknown grouping {by!r}")


def group_means_irregular(series: UniformSeries, variable: str, by: str) -> dict[int, float]:
    """Group means of raw readings by hour/weekday/month/year."""
    values = series.values[variable]
    present = ~np.isnan(values)
    t = series.times_us[present]
    v = values[present]
    if len(t) == 0:
        return {}
    keys = _group_keys(t, by)
    return {
        int(k): float(v[keys == k].mean()) for k in np.unique(keys)
    }


def group_means_regular(regular: RegularSeries, variable: str, by: str) -> dict[int, float]:
    """Group means of resampled bin means by hour/weekday/month/year."""
    vb = regular.bins.get(variable)
    if vb is None or len(vb) == 0:
        return {}
    keys = _group_keys(vb.starts, by)
    return {
        int(k): float(vb.mean[keys == k].mean()) for k in np.unique(keys)
    }


def fidelity_check(
    series: UniformSeries,
    regular: RegularSeries,
    variable: str,
    groupings: Sequence[str] = ("hour", "weekday", "month", "year"),
) -> FidelityReport:
    """Convenience composition: irregular vs resampled group-mean orderings.

    Only groups present on both sides are compared (the resampled side may
    have lost whole days to coverage rules, so restrict the irregular side
    to the same keys).
    """
    a: dict[str, dict[int, float]] = {}
    b: dict[str, dict[int, float]] = {}
    for by in groupings:
        ga = group_means_irregular(series, variable, by)
        gb = group_means_regular(regular, variable, by)
        shared = sorted(set(ga) & set(gb))
        a[by] = {k: ga[k] for k in shared}
        b[by] = {k: gb[k] for k in shared}
    return compare_groupings(a, b)


@dataclass
class HeatmapGrid:
    """Mean of daily means per (ISO weekday 1-7, month 1-12) cell."""

    variable: str
    cells: np.ndarray  # (7, 12), NaN where no data
    counts: np.ndarray  # (7, 12) int

    def to_rows(self) -> list[dict]:
        rows = []
        for wd in range(7):
            for mo in range(12):
                rows.append(
                    {
                        "weekday": wd + 1,
                        "month": mo + 1,
                        "value": self.cells[wd, mo],
                        "count": int(self.counts[wd, mo]),
                    }
                )
        return rows


def heatmap_grid(regular: RegularSeries, variable: str) -> HeatmapGrid:
    """Weekday-by-month grid of daily means (the calendar heatmap data)."""
    if regular.frequency != "daily":
        raise ValueError("heatmap_grid needs a daily RegularSeries")
    if variable not in VARIABLES:
        raise ValueError(f"unknown variable {variable!r}")
    sums = np.zeros((7, 12))
    counts = np.zeros((7, 12), dtype=np.int64)
    vb = regular.bins.get(variable)
    if vb is not None:
        for start, mean in zip(vb.starts, vb.mean):
            wd = iso_weekday(int(start)) - 1
            mo = us_to_datetime(int(start)).month - 1
            sums[wd, mo] += mean
            counts[wd, mo] += 1
    with np.errstate(invalid="ignore"):
        cells = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return HeatmapGrid(variable=variable, cells=cells, counts=counts)
