from datetime import datetime, timezone

import numpy as np
import pytest

from aidmine.ingest import US, UniformSeries
from aidmine.resample import (
    DAY_US,
    HOUR_US,
    aggregate_bins,
    build_regular_series,
    extract_day_segments,
    extract_week_segments,
    longest_run,
    qualify_day_daily,
    qualify_day_hourly,
)

BASE = int(datetime(2018, 6, 4, tzinfo=timezone.utc).timestamp()) * US  # a Monday


def make_series(hours, bg=None, iob=None, cob=None, base=BASE):
    """UniformSeries from reading offsets in hours relative to ``base``."""
    hours = np.asarray(hours, dtype=float)
    times = (base + (hours * HOUR_US)).astype(np.int64)
    order = np.argsort(times, kind="stable")
    times = times[order]
    n = len(times)

    def arr(values):
        if values is None:
            return np.full(n, np.nan)
        out = np.asarray(values, dtype=float)
        return out[order]

    return UniformSeries(
        source_id="test",
        times_us=times,
        values={"bg": arr(bg), "iob": arr(iob), "cob": arr(cob)},
    )


def full_day_hours(day=0, per_hour=1):
    step = 1.0 / per_hour
    return day * 24 + np.arange(0, 24, step)


def test_aggregate_two_point_bin():
    series = make_series([0.1, 0.5], bg=[2.0, 4.0])
    regular = aggregate_bins(series, "hourly")
    vb = regular.bins["bg"]
    assert len(vb) == 1
    assert vb.mean[0] == pytest.approx(3.0)
    assert vb.vmin[0] == 2.0 and vb.vmax[0] == 4.0
    assert vb.std[0] == pytest.approx(np.sqrt(2.0), abs=1e-12)
    assert vb.count[0] == 2


def test_aggregate_single_reading_has_no_std():
    series = make_series([0.25], bg=[5.0])
    vb = aggregate_bins(series, "hourly").bins["bg"]
    assert vb.mean[0] == 5.0 and vb.vmin[0] == 5.0 and vb.vmax[0] == 5.0
    assert np.isnan(vb.std[0])


def test_aggregate_five_minute_cadence_counts_twelve():
    hours = np.arange(0, 1, 5 / 60)
    series = make_series(hours, bg=np.full(len(hours), 100.0))
    vb = aggregate_bins(series, "hourly").bins["bg"]
    assert vb.count[0] == 12


def test_qualify_day_hourly_rules():
    assert qualify_day_hourly(np.ones(24))
    broken = np.ones(24)
    broken[13] = 0
    assert not qualify_day_hourly(broken)
    half = np.zeros(24)
    half[:13] = 1
    assert not qualify_day_hourly(half)
    with pytest.raises(ValueError):
        qualify_day_hourly(np.ones(23))


def test_qualify_day_daily_rules():
    one_per_window = (np.arange(8) * 3 + 0.5) * HOUR_US
    assert qualify_day_daily(one_per_window)
    missing = one_per_window[np.arange(8) != 2]  # nothing in [06:00, 09:00)
    assert not qualify_day_daily(missing)
    dense = np.arange(0, DAY_US, 5 * 60 * US)
    assert qualify_day_daily(dense)
    assert not qualify_day_daily([])


def test_build_daily_series_excludes_gapped_day():
    hours = np.concatenate([full_day_hours(d) for d in range(10)])
    bg = np.full(len(hours), 100.0)
    series = make_series(hours, bg=bg)
    full = build_regular_series(series, "daily")
    assert len(full.qualified_days) == 10
    assert len(full.excluded_bins) == 0

    # Drop a whole 3-hour window (hours 6-8) from day 4.
    in_day4 = (hours >= 4 * 24) & (hours < 5 * 24)
    gap = in_day4 & (hours % 24 >= 6) & (hours % 24 < 9)
    series2 = make_series(hours[~gap], bg=bg[~gap])
    partial = build_regular_series(series2, "daily")
    assert len(partial.qualified_days) == 9
    assert len(partial.bins["bg"]) == 9


def test_hourly_and_daily_retention_can_differ():
    # One reading per 3-hour window: daily keeps, hourly drops.
    hours = np.arange(8) * 3 + 0.5
    series = make_series(hours, bg=np.full(8, 100.0))
    assert len(build_regular_series(series, "daily").qualified_days) == 1
    assert len(build_regular_series(series, "hourly").qualified_days) == 0


def test_day_segments_reconstruct_hourly_means():
    rng = np.random.default_rng(0)
    hours = np.concatenate([full_day_hours(d, per_hour=2) for d in range(3)])
    bg = rng.normal(120, 10, len(hours))
    series = make_series(hours, bg=bg)
    regular = build_regular_series(series, "hourly")
    segments = extract_day_segments(regular, variables=("bg",))
    assert len(segments) == 3
    assert segments.data["bg"].shape == (3, 24)
    flattened = segments.data["bg"].ravel()
    assert np.allclose(flattened, regular.bins["bg"].mean, atol=1e-12)
    assert [t.weekday for t in segments.tags] == [1, 2, 3]
    assert segments.tags[0].date == "2018-06-04"


def test_day_segments_empty_input():
    series = make_series([], bg=[])
    segments = extract_day_segments(build_regular_series(series, "hourly"))
    assert len(segments) == 0


def test_day_segments_require_hourly_frequency():
    series = make_series(full_day_hours(), bg=np.full(24, 100.0))
    daily = build_regular_series(series, "daily")
    with pytest.raises(ValueError):
        extract_day_segments(daily)


def _daily_qualified_series(n_days, start_day=0):
    hours = np.concatenate([full_day_hours(start_day + d) for d in range(n_days)])
    return make_series(hours, bg=np.full(len(hours), 100.0))


def test_week_segments_monday_anchored():
    series = _daily_qualified_series(14)
    weeks = extract_week_segments(build_regular_series(series, "daily"))
    assert len(weeks) == 2
    assert weeks.data["bg"].shape == (2, 7)
    assert weeks.tags[0].date == "2018-W23"

    assert len(extract_week_segments(build_regular_series(_daily_qualified_series(13), "daily"))) == 1
    # Tuesday through Monday: 7 qualified days but not Monday-anchored.
    tue_mon = _daily_qualified_series(7, start_day=1)
    assert len(extract_week_segments(build_regular_series(tue_mon, "daily"))) == 0


def test_longest_run_selection_and_ties():
    mask = [1, 1, 0, 1, 1, 1]
    hours = np.concatenate([full_day_hours(d) for d, keep in enumerate(mask) if keep])
    series = make_series(hours, bg=np.full(len(hours), 100.0))
    run = longest_run(build_regular_series(series, "daily"))
    assert len(run.qualified_days) == 3
    assert run.qualified_days[0] == BASE + 3 * DAY_US

    tie = [1, 1, 0, 1, 1]
    hours = np.concatenate([full_day_hours(d) for d, keep in enumerate(tie) if keep])
    series = make_series(hours, bg=np.full(len(hours), 100.0))
    run = longest_run(build_regular_series(series, "daily"))
    assert run.qualified_days[0] == BASE  # earlier run wins the tie

    empty = longest_run(build_regular_series(make_series([], bg=[]), "daily"))
    assert len(empty.qualified_days) == 0


def test_longest_run_full_span():
    series = _daily_qualified_series(71)
    run = longest_run(build_regular_series(series, "daily"))
    assert len(run.qualified_days) == 71


def test_daily_mean_is_count_weighted_hourly_mean():
    rng = np.random.default_rng(1)
    # Uneven cadence: 1-4 readings per hour.
    hours = []
    for h in range(24):
        hours.extend(h + np.linspace(0, 0.9, rng.integers(1, 5)))
    hours = np.asarray(hours)
    bg = rng.normal(130, 15, len(hours))
    series = make_series(hours, bg=bg)
    hourly = build_regular_series(series, "hourly")
    daily = build_regular_series(series, "daily")
    hb = hourly.bins["bg"]
    weighted = float(np.sum(hb.mean * hb.count) / np.sum(hb.count))
    assert daily.bins["bg"].mean[0] == pytest.approx(weighted, abs=1e-9)


def test_joint_qualification_follows_bg():
    # IOB present all day, BG missing one hour: day dropped for all variables.
    hours = full_day_hours()
    bg = np.full(24, 100.0)
    bg[13] = np.nan
    series = make_series(hours, bg=bg, iob=np.full(24, 1.0))
    regular = build_regular_series(series, "hourly")
    assert len(regular.qualified_days) == 0
    assert len(regular.bins["iob"]) == 0
    assert len(regular.excluded_bins) > 0


def test_monotone_coverage_adding_readings_never_excludes():
    rng = np.random.default_rng(2)
    hours = np.sort(rng.uniform(0, 24, 40))
    bg = np.full(len(hours), 100.0)
    series = make_series(hours, bg=bg)
    kept_before = set(build_regular_series(series, "daily").qualified_days.tolist())
    extra = np.sort(np.concatenate([hours, rng.uniform(0, 24, 20)]))
    series2 = make_series(extra, bg=np.full(len(extra), 100.0))
    kept_after = set(build_regular_series(series2, "daily").qualified_days.tolist())
    assert kept_before <= kept_after
