"""Parsing and UTC uniforming of automated-insulin-delivery device logs.

Device logs arrive with heterogeneous timestamps: ISO-8601 with an offset,
ISO-8601 without one, or integer epoch milliseconds. Everything is
translated to UTC; rows without an offset inherit the offset of the nearest
preceding row that carried one, and rows with no usable timestamp are
dropped and counted. Gaps are never interpolated.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

VARIABLES = ("iob", "cob", "bg")
BG_RANGE = (10.0, 1000.0)  # mg/dL sanity bounds
US = 1_000_000  # microseconds per second

# Backward offset imputation older than this is flagged in the load report.
STALE_DONOR = timedelta(hours=24)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_EPOCH_MS_RE = re.compile(r"[+-]?\d+")


class RowRejection(ValueError):
    """A log row that cannot become a RawRecord; carries the reason."""


class DatasetError(ValueError):
    """Fatal problem with an input file or its schema."""


@dataclass(frozen=True)
class RawRecord:
    """One parsed log row. ``timestamp`` is offset-aware when the source
    carried an offset and naive otherwise."""

    timestamp: datetime
    iob: float | None = None
    cob: float | None = None
    bg: float | None = None

    def value(self, variable: str) -> float | None:
        return getattr(self, variable)


@dataclass
class UniformSeries:
    """Strictly increasing UTC series of (iob, cob, bg) observations.

    Times are stored as int64 epoch microseconds; absent observations are
    NaN in the per-variable value arrays.
    """

    source_id: str
    times_us: np.ndarray
    values: dict[str, np.ndarray]
    dropped_count: int = 0
    merged_count: int = 0
    stale_imputation_count: int = 0

    def __len__(self) -> int:
        return len(self.times_us)

    def instants(self) -> list[datetime]:
        return [_EPOCH + timedelta(microseconds=int(t)) for t in self.times_us]

    def to_records(self) -> list[RawRecord]:
        """Re-materialize as aware RawRecords (UTC)."""
        out = []
        for i, inst in enumerate(self.instants()):
            vals = {
                v: (None if np.isnan(self.values[v][i]) else float(self.values[v][i]))
                for v in VARIABLES
            }
            out.append(RawRecord(timestamp=inst, **vals))
        return out

    def span(self) -> tuple[datetime, datetime] | None:
        if len(self) == 0:
            return None
        inst = self.instants()
        return inst[0], inst[-1]


@dataclass
class LoadReport:
    """Accounting and coverage emitted alongside a loaded dataset."""

    path: str
    rows_read: int = 0
    rows_kept: int = 0
    rows_rejected: int = 0
    rows_dropped_no_offset: int = 0
    rows_merged_away: int = 0
    stale_imputation_count: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)
    span: tuple[str, str] | None = None
    coverage: dict[str, int] = field(default_factory=dict)

    @property
    def rows_dropped(self) -> int:
        return self.rows_rejected + self.rows_dropped_no_offset

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "rows_rejected": self.rows_rejected,
            "rows_dropped_no_offset": self.rows_dropped_no_offset,
            "rows_merged_away": self.rows_merged_away,
            "stale_imputation_count": self.stale_imputation_count,
            "rejections": [{"row": i, "reason": r} for i, r in self.rejections],
            "span": list(self.span) if self.span else None,
            "coverage": self.coverage,
        }


def parse_timestamp(text: str) -> datetime:
    """Parse ISO-8601 (with or without offset) or integer epoch milliseconds."""
    s = text.strip()
    if not s:
        raise RowRejection("missing timestamp")
    if _EPOCH_MS_RE.fullmatch(s):
        return _EPOCH + timedelta(milliseconds=int(s))
    iso = s[:-1] + "+00:00" if s.endswith(("Z", "z")) else s
    try:
        return datetime.fromisoformat(iso)
    except ValueError:
        raise RowRejection(f"malformed timestamp {text!r}") from None


def parse_record(row: Mapping[str, str | None], schema: Mapping[str, str]) -> RawRecord:
    """Turn one delimited row into a RawRecord or raise RowRejection.

    ``schema`` maps logical names (timestamp, iob, cob, bg) to column names;
    variables missing from the schema are treated as absent.
    """
    ts_col = schema.get("timestamp")
    if ts_col is None:
        raise DatasetError("schema does not name a timestamp column")
    ts = parse_timestamp(str(row.get(ts_col) or ""))

    parsed: dict[str, float | None] = {}
    for var in VARIABLES:
        col = schema.get(var)
        raw = row.get(col) if col is not None else None
        if raw is None or str(raw).strip() == "":
            parsed[var] = None
            continue
        try:
            val = float(str(raw).strip())
        except ValueError:
            raise RowRejection(f"non-numeric {var} value {raw!r}") from None
        if not np.isfinite(val):
            raise RowRejection(f"non-finite {var} value")
        if var == "bg" and not (BG_RANGE[0] <= val <= BG_RANGE[1]):
            raise RowRejection(f"bg value {val} outside sane range {BG_RANGE}")
        if var in ("iob", "cob") and val < 0:
            raise RowRejection(f"negative {var} value {val}")
        parsed[var] = val

    if all(parsed[v] is None for v in VARIABLES):
        raise RowRejection("no iob/cob/bg observation")
    return RawRecord(timestamp=ts, **parsed)


def uniform_to_utc(
    records: Iterable[RawRecord], source_id: str = ""
) -> UniformSeries:
    """Translate records (file order) to one strictly increasing UTC series.

    Offset-less timestamps inherit the offset of the nearest preceding row
    that had one; with no preceding offset the row is dropped and counted.
    Duplicate instants are merged by per-variable mean.
    """
    times: list[int] = []
    vals: dict[str, list[float]] = {v: [] for v in VARIABLES}
    dropped = 0
    stale = 0
    last_offset: timezone | None = None
    donor_wall: datetime | None = None

    for rec in records:
        ts = rec.timestamp
        if ts.tzinfo is None:
            if last_offset is None:
                dropped += 1
                continue
            if donor_wall is not None and abs(ts - donor_wall) > STALE_DONOR:
                stale += 1
            ts = ts.replace(tzinfo=last_offset)
        else:
            off = ts.utcoffset()
            last_offset = timezone(off) if off is not None else timezone.utc
            donor_wall = ts.replace(tzinfo=None)
        instant = ts.astimezone(timezone.utc)
        times.append(round((instant - _EPOCH).total_seconds() * US))
        for v in VARIABLES:
            val = rec.value(v)
            vals[v].append(np.nan if val is None else float(val))

    t = np.asarray(times, dtype=np.int64)
    order = np.argsort(t, kind="stable")
    t = t[order]
    arrays = {v: np.asarray(vals[v], dtype=np.float64)[order] for v in VARIABLES}

    uniq, inverse, counts = np.unique(t, return_inverse=True, return_counts=True)
    merged = int(len(t) - len(uniq))
    if merged:
        out = {}
        for v, arr in arrays.items():
            present = ~np.isnan(arr)
            n_present = np.bincount(inverse, weights=present.astype(float), minlength=len(uniq))
            sums = np.bincount(
                inverse, weights=np.where(present, arr, 0.0), minlength=len(uniq)
            )
            with np.errstate(invalid="ignore"):
                out[v] = np.where(n_present > 0, sums / np.maximum(n_present, 1), np.nan)
        arrays = out
        t = uniq

    return UniformSeries(
        source_id=source_id,
        times_us=t,
        values=arrays,
        dropped_count=dropped,
        merged_count=merged,
        stale_imputation_count=stale,
    )


def _iter_rows(path: Path) -> Iterable[Mapping[str, str | None]]:
    if path.suffix.lower() in (".json", ".jsonl", ".ndjson"):
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)
        return
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: empty file, no header row")
        yield from reader


def _check_header(path: Path, schema: Mapping[str, str]) -> None:
    if path.suffix.lower() in (".json", ".jsonl", ".ndjson"):
        return  # keys checked per object while parsing
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, no header row") from None
    for logical, col in schema.items():
        if col is not None and col not in header:
            raise DatasetError(f"{path}: schema column {col!r} ({logical}) not in header")


def load_dataset(
    path: str | Path,
    schema: Mapping[str, str],
    source_id: str | None = None,
) -> tuple[UniformSeries, LoadReport]:
    """Parse a CSV or line-delimited JSON log and uniform it to UTC."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"cannot read input file {path}")
    if "timestamp" not in schema:
        raise DatasetError("schema does not name a timestamp column")
    if not any(v in schema for v in VARIABLES):
        raise DatasetError("schema names none of iob/cob/bg")
    _check_header(path, schema)

    report = LoadReport(path=str(path))
    records: list[RawRecord] = []
    for idx, row in enumerate(_iter_rows(path)):
        report.rows_read += 1
        try:
            records.append(parse_record(row, schema))
        except RowRejection as rej:
            report.rows_rejected += 1
            report.rejections.append((idx, str(rej)))

    series = uniform_to_utc(records, source_id=source_id or path.stem)
    report.rows_dropped_no_offset = series.dropped_count
    report.rows_merged_away = series.merged_count
    report.stale_imputation_count = series.stale_imputation_count
    report.rows_kept = len(series)
    span = series.span()
    if span:
        report.span = (span[0].isoformat(), span[1].isoformat())
    report.coverage = {
        v: int(np.count_nonzero(~np.isnan(series.values[v]))) for v in VARIABLES
    }
    return series, report
