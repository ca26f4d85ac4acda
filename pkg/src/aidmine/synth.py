"""Seeded synthetic device-log generator with planted ground truth.

Produces CSV logs in the ingest schema plus a JSON ground-truth file
(archetype per day, planted motif/discord week positions, gap windows,
expected qualified days). Signal shapes are simple parametric meal
responses, not physiological models: the point is recoverable structure.
Identical specs produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .ingest import US
from .matprof import default_exclusion_radius
from .resample import DAY_US, HOUR_US, WINDOW_3H_US

# Nominal per-variable signal amplitudes; noise_std is relative to these.
AMPLITUDE = {"iob": 4.0, "cob": 40.0, "bg": 50.0}

# Distinct weekday multipliers (Mon..Sun) so weekday group means are
# strictly ordered when weekday_effect > 0.
_WD_PATTERN = np.array([0.0, 2.0, 4.0, 6.0, 1.0, 3.0, 5.0]) / 6.0

# Day-of-week modulation for planted motif/discord weeks.
_MOTIF_WEEK_PATTERN = (1.0, 1.4, 0.7, 1.6, 0.8, 1.2, 0.6)
_DISCORD_WEEK_PATTERN = (1.0, 3.4, 0.3, 3.0, 0.2, 2.6, 0.9)


@dataclass(frozen=True)
class Archetype:
    """One day shape: meal schedule plus blood-glucose behavior."""

    name: str
    meal_hours: tuple[float, ...] = (7.0, 12.5, 19.0)
    meal_carbs: tuple[float, ...] = (45.0, 60.0, 75.0)
    bg_base: float = 110.0
    bg_meal_amp: float = 45.0
    night_rise: float = 0.0  # mg/dL bump centered around 05:30 UTC


EARLY_MEALS = Archetype("early-meals")
LATE_MEALS = Archetype(
    "late-meals-night-rise",
    meal_hours=(10.0, 15.0, 21.5),
    meal_carbs=(50.0, 55.0, 80.0),
    bg_base=115.0,
    bg_meal_amp=40.0,
    night_rise=35.0,
)
GRAZER = Archetype(
    "grazer",
    meal_hours=(8.0, 11.0, 14.0, 17.0, 20.0),
    meal_carbs=(25.0, 30.0, 25.0, 30.0, 35.0),
    bg_base=125.0,
    bg_meal_amp=30.0,
    night_rise=10.0,
)

DEFAULT_ARCHETYPES = (EARLY_MEALS, LATE_MEALS)
THREE_ARCHETYPES = (EARLY_MEALS, LATE_MEALS, GRAZER)


@dataclass(frozen=True)
class GapWindow:
    """Readings with nominal hour in [start_hour, end_hour) on ``day`` are
    withheld, simulating a system outage."""

    day: int
    start_hour: float
    end_hour: float


@dataclass
class SynthSpec:
    seed: int = 0
    days: int = 30
    start_date: str = "2018-03-05"  # a Monday
    interval_minutes: float = 5.0
    archetypes: tuple[Archetype, ...] = DEFAULT_ARCHETYPES
    archetype_labels: tuple[int, ...] | None = None  # per day; None = seeded draw
    noise_std: float = 0.0  # relative to AMPLITUDE per variable
    weekday_effect: float = 0.0
    seasonal_drift: float = 0.0
    time_jitter_minutes: float = 0.0
    gap_windows: tuple[GapWindow, ...] = ()
    utc_offsets: tuple[tuple[int, int], ...] = ((0, 0),)  # (from_day, minutes)
    omit_offset_stride: int = 0  # render every Nth eligible row offset-less
    motif_week_starts: tuple[int, int] | None = None  # day indices
    discord_week_start: int | None = None


@dataclass
class SynthResult:
    csv_path: Path
    truth_path: Path | None
    truth: dict
    rows_written: int


def _validate(spec: SynthSpec) -> None:
    if spec.days < 1:
        raise ValueError("spec must cover at least one day")
    if not spec.archetypes:
        raise ValueError("spec needs at least one archetype")
    if spec.archetype_labels is not None:
        if len(spec.archetype_labels) != spec.days:
            raise ValueError("archetype_labels must have one entry per day")
        if any(not 0 <= l < len(spec.archetypes) for l in spec.archetype_labels):
            raise ValueError("archetype label out of range")
    if not 0 < spec.interval_minutes <= 60:
        raise ValueError("interval_minutes must be in (0, 60]")
    for gw in spec.gap_windows:
        if not (0 <= gw.start_hour < gw.end_hour <= 24):
            raise ValueError(f"bad gap window {gw}")
        if not 0 <= gw.day < spec.days:
            raise ValueError(f"gap window day {gw.day} out of range")
    planted = []
    if spec.motif_week_starts is not None:
        planted.extend(spec.motif_week_starts)
    if spec.discord_week_start is not None:
        planted.append(spec.discord_week_start)
    for p in planted:
        if not 0 <= p <= spec.days - 7:
            raise ValueError(f"planted week at day {p} does not fit")
    for i, p in enumerate(planted):
        for q in planted[i + 1 :]:
            if abs(p - q) < 7:
                raise ValueError("planted weeks overlap")


def _cob_pulse(x: np.ndarray) -> np.ndarray:
    rise = np.clip(x / 0.25, 0.0, 1.0)
    decay = np.exp(-np.maximum(x - 0.25, 0.0) / 1.2)
    return np.where(x < 0, 0.0, rise * decay)


def _iob_pulse(x: np.ndarray) -> np.ndarray:
    y = x - 0.15  # dosing lag
    rise = np.clip(y / 0.4, 0.0, 1.0)
    decay = np.exp(-np.maximum(y - 0.4, 0.0) / 2.2)
    return np.where(y < 0, 0.0, rise * decay)


def _bg_bump(x: np.ndarray) -> np.ndarray:
    return np.where(x < 0, 0.0, (x / 1.0) * np.exp(1.0 - x / 1.0))


def _day_signals(hours: np.ndarray, arch: Archetype, f: float):
    """Noise-free iob/cob/bg at the given hours-of-day for one day."""
    iob = 1.0 + 0.5 * hours / 24.0
    cob = 4.0 + 2.5 * hours / 24.0
    bg_dev = 3.0 * hours / 24.0
    for meal, carbs in zip(arch.meal_hours, arch.meal_carbs):
        iob = iob + (carbs / 10.0) * _iob_pulse(hours - meal)
        cob = cob + carbs * _cob_pulse(hours - meal)
        bg_dev = bg_dev + arch.bg_meal_amp * (carbs / 60.0) * _bg_bump(hours - meal)
    if arch.night_rise:
        bg_dev = bg_dev + arch.night_rise * np.exp(-(((hours - 5.5) / 1.5) ** 2))
    return f * iob, f * cob, arch.bg_base + f * bg_dev


def _offset_for_day(spec: SynthSpec, day: int) -> int:
    minutes = 0
    for from_day, off in sorted(spec.utc_offsets):
        if day >= from_day:
            minutes = off
    return minutes


def _format_row(t_us: int, offset_minutes: int, carry_offset: bool, iob, cob, bg) -> str:
    base = datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(microseconds=int(t_us))
    if carry_offset:
        local = base.astimezone(timezone(timedelta(minutes=offset_minutes)))
        ts = local.isoformat()
    else:
        local = base + timedelta(minutes=offset_minutes)
        ts = local.replace(tzinfo=None).isoformat()
    return f"{ts},{iob:.4f},{cob:.4f},{bg:.4f}\n"


def generate(
    spec: SynthSpec,
    csv_path: str | Path,
    truth_path: str | Path | None = None,
) -> SynthResult:
    """Write a synthetic log CSV (timestamp,iob,cob,bg) plus its ground truth."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    n_arch = len(spec.archetypes)
    if spec.archetype_labels is not None:
        labels = np.asarray(spec.archetype_labels, dtype=np.int64)
    else:
        labels = rng.integers(0, n_arch, size=spec.days)
    if spec.motif_week_starts is not None:
        p, q = spec.motif_week_starts
        labels[q : q + 7] = labels[p : p + 7]  # the two weeks share one shape

    start_day = date.fromisoformat(spec.start_date)
    start_us = int(
        (datetime(start_day.year, start_day.month, start_day.day, tzinfo=timezone.utc)
         - datetime(1970, 1, 1, tzinfo=timezone.utc)).total_seconds() * US
    )
    per_day = int(round(24 * 60 / spec.interval_minutes))
    interval_us = int(round(spec.interval_minutes * 60 * US))
    jitter_cap = max(interval_us / 2.0 - US, 0.0)

    all_times: list[np.ndarray] = []
    all_vals: dict[str, list[np.ndarray]] = {"iob": [], "cob": [], "bg": []}
    for d in range(spec.days):
        wd = (start_day + timedelta(days=d)).isoweekday() - 1
        f = (1.0 + spec.weekday_effect * _WD_PATTERN[wd]) * (
            1.0 + spec.seasonal_drift * (d / max(spec.days - 1, 1))
        )
        if spec.motif_week_starts is not None:
            for wk in spec.motif_week_starts:
                if wk <= d < wk + 7:
                    f *= _MOTIF_WEEK_PATTERN[d - wk]
        if spec.discord_week_start is not None and spec.discord_week_start <= d < spec.discord_week_start + 7:
            f *= _DISCORD_WEEK_PATTERN[d - spec.discord_week_start]

        nominal_h = np.arange(per_day) * spec.interval_minutes / 60.0
        keep = np.ones(per_day, dtype=bool)
        for gw in spec.gap_windows:
            if gw.day == d:
                keep &= ~((nominal_h >= gw.start_hour) & (nominal_h < gw.end_hour))
        idx = np.nonzero(keep)[0]
        if len(idx) == 0:
            continue

        t_us = start_us + d * DAY_US + idx.astype(np.int64) * interval_us
        if spec.time_jitter_minutes > 0:
            jit = rng.normal(0.0, spec.time_jitter_minutes * 60 * US, size=len(idx))
            t_us = t_us + np.clip(jit, -jitter_cap, jitter_cap).astype(np.int64)
        hours = (t_us - (start_us + d * DAY_US)) / HOUR_US

        arch = spec.archetypes[int(labels[d])]
        iob, cob, bg = _day_signals(hours, arch, f)
        if spec.noise_std > 0:
            iob = iob + rng.normal(0.0, spec.noise_std * AMPLITUDE["iob"], len(idx))
            cob = cob + rng.normal(0.0, spec.noise_std * AMPLITUDE["cob"], len(idx))
            bg = bg + rng.normal(0.0, spec.noise_std * AMPLITUDE["bg"], len(idx))
        all_times.append(t_us)
        all_vals["iob"].append(np.maximum(iob, 0.0))
        all_vals["cob"].append(np.maximum(cob, 0.0))
        all_vals["bg"].append(np.clip(bg, 20.0, 900.0))

    times = np.concatenate(all_times) if all_times else np.empty(0, dtype=np.int64)
    vals = {v: (np.concatenate(a) if a else np.empty(0)) for v, a in all_vals.items()}

    csv_path = Path(csv_path)
    rows = 0
    last_carried: int | None = None
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp,iob,cob,bg\n")
        for i in range(len(times)):
            day_idx = int((times[i] - start_us) // DAY_US)
            off = _offset_for_day(spec, min(max(day_idx, 0), spec.days - 1))
            omit = (
                spec.omit_offset_stride > 0
                and rows > 0
                and rows % spec.omit_offset_stride == spec.omit_offset_stride - 1
                and last_carried == off
            )
            fh.write(
                _format_row(int(times[i]), off, not omit, vals["iob"][i], vals["cob"][i], vals["bg"][i])
            )
            if not omit:
                last_carried = off
            rows += 1

    truth = _ground_truth(spec, labels, times, start_us, start_day)
    truth_path = Path(truth_path) if truth_path is not None else None
    if truth_path is not None:
        truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True), encoding="utf-8")
    return SynthResult(csv_path=csv_path, truth_path=truth_path, truth=truth, rows_written=rows)


def _ground_truth(spec, labels, times, start_us, start_day) -> dict:
    qualified_hourly: list[str] = []
    qualified_daily: list[str] = []
    day_ids = (times - start_us) // DAY_US
    for d in range(spec.days):
        in_day = times[day_ids == d]
        iso = (start_day + timedelta(days=d)).isoformat()
        if len(in_day) == 0:
            continue
        hour_counts = np.bincount(((in_day - start_us) % DAY_US) // HOUR_US, minlength=24)
        if np.all(hour_counts[:24] >= 1):
            qualified_hourly.append(iso)
        window_counts = np.bincount(((in_day - start_us) % DAY_US) // WINDOW_3H_US, minlength=8)
        if np.all(window_counts[:8] >= 1):
            qualified_daily.append(iso)
    return {
        "seed": spec.seed,
        "days": spec.days,
        "start_date": spec.start_date,
        "interval_minutes": spec.interval_minutes,
        "archetype_names": [a.name for a in spec.archetypes],
        "archetype_per_day": [int(l) for l in labels],
        "dates": [(start_day + timedelta(days=d)).isoformat() for d in range(spec.days)],
        "gap_windows": [asdict(g) for g in spec.gap_windows],
        "offset_minutes_per_day": [_offset_for_day(spec, d) for d in range(spec.days)],
        "qualified_dates_hourly": qualified_hourly,
        "qualified_dates_daily": qualified_daily,
        "motif_week_starts": list(spec.motif_week_starts) if spec.motif_week_starts else None,
        "discord_week_start": spec.discord_week_start,
        "reading_count": int(len(times)),
    }


def _znorm(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / x.std()


def _context_phase(critical_slots, separation: int, beta: float, period: float) -> float:
    """Sine phase maximizing the smallest context contrast at the slots that
    neighbor the planted template copies."""
    best_phase, best = 0.0, -1.0
    for phase in np.linspace(0.0, 2.0 * np.pi, 60, endpoint=False):
        worst = min(
            abs(
                beta
                * (
                    np.sin(2.0 * np.pi * (c + separation) / period + phase)
                    - np.sin(2.0 * np.pi * c / period + phase)
                )
            )
            for c in critical_slots
        )
        if worst > best:
            best_phase, best = float(phase), worst
    return best_phase


def plant_motif_series(
    length_days: int,
    m: int,
    motif_positions: tuple[int, int],
    discord_position: int | None = None,
    noise_std: float = 0.0,
    seed: int = 0,
) -> tuple[np.ndarray, dict]:
    """Daily-mean series with a planted motif pair and a planted discord week.

    The background repeats a weekly pattern plus a slow incommensurate wave,
    so ordinary windows always have near-copies. The motif is an identical
    high-contrast template at both positions; the discord week deviates with
    growing swings toward its final day. ``noise_std`` is relative to the
    template's standard amplitude.

    The construction is verified against :func:`aidmine.matprof.matrix_profile_naive`
    before being returned: the motif pair must be the unique nearest pair and
    the discord window the unique profile maximum (for an end-of-series
    discord; an interior discord is only guaranteed to contain the maximum
    within its span). A construction whose margins fail verification raises
    ``ValueError``.
    """
    n = int(length_days)
    if m < 4:
        raise ValueError("planted construction needs a window length of at least 4")
    p, q = (int(x) for x in motif_positions)
    if p > q:
        p, q = q, p
    positions = [p, q] + ([int(discord_position)] if discord_position is not None else [])
    for pos in positions:
        if not 0 <= pos <= n - m:
            raise ValueError(f"planted window at {pos} does not fit in {n} days")
    for i, a in enumerate(positions):
        for b in positions[i + 1 :]:
            if abs(a - b) < m + 1:
                raise ValueError(f"planted windows at {a} and {b} overlap")
    if n < 4 * m:
        raise ValueError("series too short to support planted structure")

    rng = np.random.default_rng(seed)
    wave_period = m + 1.0 / 3.0
    beta = 1.05
    phase = _context_phase([p - 1, p + m], q - p, beta, wave_period)
    weekly = _znorm(rng.normal(0.0, 1.0, m))
    series = np.tile(weekly, -(-n // m))[:n].astype(float)
    series = series + beta * np.sin(2.0 * np.pi * np.arange(n) / wave_period + phase)

    template = np.empty(m)
    template[1 : m - 1] = 0.9 * _znorm(rng.normal(0.0, 1.0, m - 2))
    template[0] = weekly.max() + 1.9
    template[m - 1] = weekly.min() - 1.9
    series[p : p + m] = template
    series[q : q + m] = template

    noise = rng.normal(0.0, noise_std * float(template.std()), n) if noise_std > 0 else None

    truth = {
        "m": m,
        "motif_positions": [p, q],
        "discord_position": None if discord_position is None else int(discord_position),
        "exclusion_radius": default_exclusion_radius(m),
    }
    if discord_position is None:
        out = series if noise is None else series + noise
        _verify_planted(out, m, (p, q), None)
        return out, truth

    # Tail-weighted deviations: the anomaly energy grows toward the window
    # end, so windows seeing more of it rank strictly higher. The amplitude
    # and sign pattern come from a fixed menu; the first candidate whose
    # planted truth survives the naive-oracle check wins.
    d = int(discord_position)
    tail = np.arange(d + m - 3, d + m)
    grades = np.array([1.0, 1.6, 2.6])
    grades = grades / np.linalg.norm(grades)
    best = None
    for amp in (3.2, 2.6, 4.0, 2.0, 4.8, 1.5, 5.6, 1.2):
        for signs in ((1.0, -1.0, 1.0), (-1.0, 1.0, -1.0)):
            cand = series.copy()
            cand[tail] = cand[tail] + amp * grades * np.asarray(signs)
            out = cand if noise is None else cand + noise
            margin = _planted_margins(out, m, (p, q), d)
            if best is None or margin > best[0]:
                best = (margin, out)
            if margin >= 1.08:
                _verify_planted(out, m, (p, q), d)
                return out, truth
    if best[0] > 1.0:  # planted structure still strictly dominant
        _verify_planted(best[1], m, (p, q), d)
        return best[1], truth
    raise ValueError(
        f"could not plant a dominant discord for seed {seed} "
        f"(best margin {best[0]:.3f}); adjust positions or noise"
    )


def _planted_margins(series, m, motif_positions, discord_position) -> float:
    """Worst margin of the planted structure, per the naive reference."""
    from .matprof import matrix_profile_naive, top_discord, top_motif

    result = matrix_profile_naive(series, m)
    profile = result.profile
    p, q = motif_positions
    pair = max(profile[p], profile[q])
    others = np.delete(profile, [p, q])
    motif_margin = float(others.min() / max(pair, 1e-12))
    mo = top_motif(result)
    if sorted((mo.index_a, mo.index_b)) != sorted((p, q)):
        return 0.0
    if discord_position is None:
        return motif_margin
    rest = np.delete(profile, discord_position)
    discord_margin = float(profile[discord_position] / rest.max())
    if discord_position == len(series) - m:
        di = top_discord(result)
        if di.index != discord_position:
            return 0.0
    return min(motif_margin, discord_margin)


def _verify_planted(series, m, motif_positions, discord_position) -> None:
    from .matprof import matrix_profile_naive, top_discord, top_motif

    result = matrix_profile_naive(series, m)
    mo = top_motif(result)
    if sorted((mo.index_a, mo.index_b)) != sorted(motif_positions):
        raise ValueError("planted motif is not the nearest pair; construction failed")
    if discord_position is not None and discord_position == len(series) - m:
        di = top_discord(result)
        if di.index != discord_position:
            raise ValueError("planted discord is not the profile maximum; construction failed")
