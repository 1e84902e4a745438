"""Loan-level CSV -> monthly aggregated default-rate series.

Pipeline order: parse -> filter resolved loans and encode target -> drop sparse
columns -> one-hot encode categoricals -> impute -> aggregate by issue month
-> merge the monthly macro series.  Every step is a pure frame -> frame
function; ``run_pipeline`` chains them and collects an :class:`IngestReport`.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import re
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

NUMERIC_FEATURES = (
    "annual_inc",
    "collection_recovery_fee",
    "delinq_amnt",
    "delinq_2yr",
    "int_rate",
    "installment",
    "last_pymnt_amnt",
    "loan_amnt",
    "open_acc",
    "pub_rec",
    "recoveries",
    "revol_bal",
    "total_acc",
    "total_pymnt",
    "total_rec_late_fee",
)
CATEGORICAL_FEATURES = ("home_ownership", "verification_status", "application_type")

# header name -> canonical field; vendor exports use issue_d / delinq_2yrs.
DEFAULT_SCHEMA: dict[str, str] = {
    "id": "id",
    "issue_month": "issue_month",
    "issue_d": "issue_month",
    "loan_status": "loan_status",
    "delinq_2yrs": "delinq_2yr",
    "varification_status": "verification_status",
    **{name: name for name in NUMERIC_FEATURES},
    **{name: name for name in CATEGORICAL_FEATURES},
}

ONGOING = None
DEFAULT_STATUS_MAP: dict[str, int | None] = {
    "Fully Paid": 0,
    "Charged Off": 1,
    "Default": 1,
    "Does not meet the credit policy. Status:Fully Paid": 0,
    "Does not meet the credit policy. Status:Charged Off": 1,
    "Current": ONGOING,
    "In Grace Period": ONGOING,
    "Late (16-30 days)": ONGOING,
    "Late (31-120 days)": ONGOING,
}

_MONTH_ABBR = {m: i + 1 for i, m in enumerate(
    ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"])}
_ISO_MONTH = re.compile(r"^(\d{4})-(\d{1,2})(?:-\d{1,2})?$")
_ABBR_MONTH = re.compile(r"^([A-Za-z]{3})-(\d{2}|\d{4})$")


class Month(NamedTuple):
    year: int
    month: int

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1


def parse_month(text: str) -> Month:
    """Accept ``YYYY-MM`` (optionally ``-DD``) or the vendor's ``Mon-YYYY``."""
    s = text.strip()
    m = _ISO_MONTH.match(s)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
    else:
        m = _ABBR_MONTH.match(s)
        if not m or m.group(1).lower() not in _MONTH_ABBR:
            raise DataError(f"unparseable month {text!r}")
        month = _MONTH_ABBR[m.group(1).lower()]
        year = int(m.group(2))
        if year < 100:
            year += 2000
    if not 1 <= month <= 12:
        raise DataError(f"month out of range in {text!r}")
    return Month(year, month)


def parse_number(text: str | None) -> float | None:
    """Lenient numeric cell parser: '13.56%', '1,200', ' 7 ' all work; junk -> None."""
    if text is None:
        return None
    s = text.strip().replace(",", "")
    if s.endswith("%"):
        s = s[:-1].strip()
    if not s:
        return None
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


@dataclass
class LoanRecord:
    id: str
    issue_month: Month
    loan_status: str
    numeric: dict[str, float | None]
    categorical: dict[str, str | None]
    target: int | None = None


@contextmanager
def _open_text(source):
    """Yield a text handle for a path, bytes, or text/binary stream; never closes caller streams."""
    if isinstance(source, (bytes, bytearray)):
        yield io.StringIO(source.decode("utf-8-sig"))
    elif isinstance(source, io.TextIOBase):
        yield source
    elif hasattr(source, "read"):
        wrapper = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
        try:
            yield wrapper
        finally:
            wrapper.detach()
    else:
        with open(source, encoding="utf-8-sig", newline="") as fh:
            yield fh


def parse_loans(source, schema: dict[str, str] | None = None) -> list[LoanRecord]:
    """Read loan rows from a path, byte string, or binary/text stream."""
    schema = DEFAULT_SCHEMA if schema is None else schema
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not any(h.strip() for h in header):
            raise DataError("loan CSV has no header row")
        header = [h.strip() for h in header]
        columns: dict[str, int] = {}
        ignored = []
        for idx, name in enumerate(header):
            canon = schema.get(name)
            if canon is None:
                ignored.append(name)
            elif canon not in columns:
                columns[canon] = idx
        if ignored:
            log.warning("ignoring %d column(s) not in schema: %s", len(ignored), ", ".join(ignored))
        for required in ("id", "issue_month", "loan_status"):
            if required not in columns:
                raise DataError(f"loan CSV header lacks required column {required!r}")
        numeric_cols = [(n, columns[n]) for n in NUMERIC_FEATURES if n in columns]
        cat_cols = [(n, columns[n]) for n in CATEGORICAL_FEATURES if n in columns]

        records: list[LoanRecord] = []
        seen: dict[str, int] = {}
        dupes: list[str] = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            rid = row[columns["id"]].strip()
            if not rid:
                raise DataError(f"empty id on data line {reader.line_num}")
            if rid in seen:
                if seen[rid] == 1:
                    dupes.append(rid)
                seen[rid] += 1
                continue
            seen[rid] = 1
            records.append(
                LoanRecord(
                    id=rid,
                    issue_month=parse_month(row[columns["issue_month"]]),
                    loan_status=row[columns["loan_status"]].strip(),
                    numeric={n: parse_number(row[i]) for n, i in numeric_cols},
                    categorical={n: (row[i].strip() or None) for n, i in cat_cols},
                )
            )
        if dupes:
            raise DataError(f"duplicate loan id(s): {', '.join(dupes)}")
        return records


def filter_and_encode_target(records: Iterable[LoanRecord],
                             status_map: dict[str, int | None] | None = None) -> list[LoanRecord]:
    """Keep resolved loans only; target 0 = paid off, 1 = default."""
    status_map = DEFAULT_STATUS_MAP if status_map is None else status_map
    out = []
    for rec in records:
        if rec.loan_status not in status_map:
            raise DataError(f"loan status {rec.loan_status!r} (id {rec.id}) is not in the status table")
        target = status_map[rec.loan_status]
        if target is ONGOING:
            continue
        if target not in (0, 1):
            raise DataError(f"status table maps {rec.loan_status!r} to {target!r}; expected 0, 1 or ongoing")
        out.append(replace(rec, target=int(target)))
    return out


@dataclass(frozen=True)
class FeatureFrame:
    """Loan-level design matrix.  NaN marks a missing numeric/indicator cell.

    ``categorical`` holds raw level strings until :func:`one_hot_encode`
    turns them into indicator columns listed in ``groups``.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    target: np.ndarray
    months: tuple[Month, ...]
    categorical: dict[str, tuple[str | None, ...]] = field(default_factory=dict)
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.months)
        if self.values.shape != (n, len(self.columns)):
            raise DataError(f"frame values shape {self.values.shape} != ({n}, {len(self.columns)})")
        if self.target.shape != (n,):
            raise DataError("target length does not match row count")
        for name, col in self.categorical.items():
            if len(col) != n:
                raise DataError(f"categorical column {name!r} has wrong length")

    @property
    def n_rows(self) -> int:
        return len(self.months)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def build_frame(records: list[LoanRecord]) -> FeatureFrame:
    if any(r.target is None for r in records):
        raise DataError("records must pass filter_and_encode_target before framing")
    numeric = [n for n in NUMERIC_FEATURES if any(n in r.numeric for r in records)]
    cats = [n for n in CATEGORICAL_FEATURES if any(n in r.categorical for r in records)]
    values = np.full((len(records), len(numeric)), np.nan)
    for i, rec in enumerate(records):
        for j, name in enumerate(numeric):
            v = rec.numeric.get(name)
            if v is not None:
                values[i, j] = v
    return FeatureFrame(
        columns=tuple(numeric),
        values=values,
        target=np.array([r.target for r in records], dtype=np.int64),
        months=tuple(r.issue_month for r in records),
        categorical={n: tuple(r.categorical.get(n) for r in records) for n in cats},
    )


def drop_sparse_features(frame: FeatureFrame, threshold: float = 0.8) -> tuple[FeatureFrame, list[str]]:
    """Drop numeric and categorical columns whose missing fraction exceeds ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    n = frame.n_rows
    if n == 0:
        return frame, []
    dropped = []
    keep = []
    for j, name in enumerate(frame.columns):
        frac = float(np.isnan(frame.values[:, j]).mean())
        if frac > threshold:
            dropped.append(name)
        else:
            keep.append(j)
    categorical = {}
    for name, col in frame.categorical.items():
        frac = sum(v is None for v in col) / n
        if frac > threshold:
            dropped.append(name)
        else:
            categorical[name] = col
    notes = frame.notes + tuple(f"dropped sparse column {d}" for d in dropped)
    out = replace(
        frame,
        columns=tuple(frame.columns[j] for j in keep),
        values=frame.values[:, keep],
        categorical=categorical,
        notes=notes,
    )
    return out, dropped


def one_hot_encode(frame: FeatureFrame, categorical_columns: Iterable[str] | None = None) -> FeatureFrame:
    """Replace each categorical column by ``col=level`` indicators (levels sorted).

    A missing category yields an all-NaN indicator group for :func:`impute`.
    """
    names = list(frame.categorical) if categorical_columns is None else list(categorical_columns)
    columns = list(frame.columns)
    blocks = [frame.values]
    groups = dict(frame.groups)
    notes = list(frame.notes)
    remaining = dict(frame.categorical)
    for name in names:
        col = remaining.pop(name)
        levels = sorted({v for v in col if v is not None})
        block = np.full((frame.n_rows, len(levels)), np.nan)
        index = {lvl: k for k, lvl in enumerate(levels)}
        for i, v in enumerate(col):
            if v is not None:
                block[i, :] = 0.0
                block[i, index[v]] = 1.0
        ind_names = tuple(f"{name}={lvl}" for lvl in levels)
        if len(levels) == 1:
            notes.append(f"constant indicator {ind_names[0]} (single observed level)")
        columns.extend(ind_names)
        blocks.append(block)
        groups[name] = ind_names
    return replace(
        frame,
        columns=tuple(columns),
        values=np.hstack(blocks) if blocks else frame.values,
        categorical=remaining,
        groups=groups,
        notes=tuple(notes),
    )


def impute(frame: FeatureFrame) -> FeatureFrame:
    """Median fill for numeric columns, modal-level fill for one-hot groups."""
    values = frame.values.copy()
    in_group = {c for cols in frame.groups.values() for c in cols}
    for group, cols in frame.groups.items():
        idx = [frame.columns.index(c) for c in cols]
        block = values[:, idx]
        missing = np.isnan(block).any(axis=1)
        if not idx or missing.all():
            raise DataError(f"categorical group {group!r} is entirely missing; cannot impute")
        if missing.any():
            counts = np.nansum(block[~missing], axis=0)
            pattern = np.zeros(len(idx))
            pattern[int(np.argmax(counts))] = 1.0  # ties -> first level in sorted order
            block[missing] = pattern
            values[:, idx] = block
    for j, name in enumerate(frame.columns):
        if name in in_group:
            continue
        col = values[:, j]
        missing = np.isnan(col)
        if missing.all() and col.size:
            raise DataError(f"column {name!r} is entirely missing; cannot impute")
        if missing.any():
            col[missing] = np.median(col[~missing])
    return replace(frame, values=values)


@dataclass(frozen=True)
class MonthlySeries:
    months: tuple[Month, ...]
    features: np.ndarray
    feature_names: tuple[str, ...]
    default_rate: np.ndarray
    macro: np.ndarray | None = None
    macro_name: str = "unemp_rate"
    gaps: tuple[Month, ...] = ()
    scaled: bool = False

    def __post_init__(self):
        n = len(self.months)
        if self.features.shape != (n, len(self.feature_names)):
            raise DataError(f"features shape {self.features.shape} != ({n}, {len(self.feature_names)})")
        if self.default_rate.shape != (n,):
            raise DataError("default_rate length does not match months")
        if any(b.ordinal <= a.ordinal for a, b in zip(self.months, self.months[1:])):
            raise DataError("months must be strictly increasing")
        if self.macro is not None:
            if self.macro.shape != (n,) or np.isnan(self.macro).any():
                raise DataError("macro must have exactly one value per month")
        if not self.scaled and n and (np.any(self.default_rate < 0) or np.any(self.default_rate > 1)):
            raise DataError("default_rate must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.months)

    def model_inputs(self, use_macro: bool) -> np.ndarray:
        if not use_macro:
            return self.features
        if self.macro is None:
            raise DataError(f"series has no {self.macro_name} column; cannot use macro feature")
        return np.column_stack([self.features, self.macro])

    def input_names(self, use_macro: bool) -> tuple[str, ...]:
        return self.feature_names + ((self.macro_name,) if use_macro else ())

    def slice(self, start: int, stop: int) -> "MonthlySeries":
        return replace(
            self,
            months=self.months[start:stop],
            features=self.features[start:stop],
            default_rate=self.default_rate[start:stop],
            macro=None if self.macro is None else self.macro[start:stop],
        )


def find_gaps(months: Iterable[Month]) -> tuple[Month, ...]:
    ords = [m.ordinal for m in months]
    gaps = []
    for a, b in zip(ords, ords[1:]):
        gaps.extend(Month(o // 12, o % 12 + 1) for o in range(a + 1, b))
    return tuple(gaps)


def aggregate_monthly(frame: FeatureFrame) -> MonthlySeries:
    """Per issue month: arithmetic mean of every feature and of the 0/1 target."""
    if np.isnan(frame.values).any():
        raise DataError("aggregate_monthly requires a fully imputed frame")
    if frame.categorical:
        raise DataError(f"categorical columns not encoded: {sorted(frame.categorical)}")
    months = sorted(set(frame.months))
    pos = {m: k for k, m in enumerate(months)}
    codes = np.array([pos[m] for m in frame.months], dtype=np.int64)
    counts = np.bincount(codes, minlength=len(months)).astype(np.float64)
    sums = np.zeros((len(months), len(frame.columns)))
    np.add.at(sums, codes, frame.values)
    defaults = np.bincount(codes, weights=frame.target.astype(np.float64), minlength=len(months))
    gaps = find_gaps(months)
    for g in gaps:
        log.info("no loans issued in %s; month left as a gap", g)
    return MonthlySeries(
        months=tuple(months),
        features=sums / counts[:, None] if months else np.zeros((0, len(frame.columns))),
        feature_names=frame.columns,
        default_rate=defaults / counts if months else np.zeros(0),
        gaps=gaps,
    )


def read_macro(source) -> dict[Month, float]:
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise DataError("macro CSV needs a header with month and rate columns")
        out: dict[Month, float] = {}
        dupes = []
        for row in reader:
            if not row or not row[0].strip():
                continue
            month = parse_month(row[0])
            value = parse_number(row[1] if len(row) > 1 else None)
            if value is None:
                raise DataError(f"macro value for {month} is missing or not numeric")
            if month in out:
                dupes.append(str(month))
            out[month] = value
        if dupes:
            raise DataError(f"duplicate macro month(s): {', '.join(dupes)}")
        return out


def merge_macro(series: MonthlySeries, macro_source, name: str = "unemp_rate") -> MonthlySeries:
    macro = read_macro(macro_source) if not isinstance(macro_source, dict) else macro_source
    missing = [str(m) for m in series.months if m not in macro]
    if missing:
        raise DataError(f"macro data missing month(s): {', '.join(missing)}")
    values = np.array([macro[m] for m in series.months], dtype=np.float64)
    return replace(series, macro=values, macro_name=name)


@dataclass(frozen=True)
class ScalerParams:
    names: tuple[str, ...]
    minimum: np.ndarray
    maximum: np.ndarray
    fitted_on: tuple[str, str]

    @property
    def constant(self) -> np.ndarray:
        return self.maximum == self.minimum

    def transform(self, x: np.ndarray, cols=slice(None)) -> np.ndarray:
        lo, hi = self.minimum[cols], self.maximum[cols]
        span = np.where(hi > lo, hi - lo, 1.0)
        return np.where(hi > lo, (x - lo) / span, 0.0)

    def inverse(self, z: np.ndarray, cols=slice(None)) -> np.ndarray:
        lo, hi = self.minimum[cols], self.maximum[cols]
        return z * (hi - lo) + lo

    def inverse_target(self, z: np.ndarray) -> np.ndarray:
        return self.inverse(np.asarray(z, dtype=np.float64), 0)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "minimum": [float(v) for v in self.minimum],
            "maximum": [float(v) for v in self.maximum],
            "fitted_on": list(self.fitted_on),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(tuple(d["names"]), np.array(d["minimum"], dtype=np.float64),
                   np.array(d["maximum"], dtype=np.float64), tuple(d["fitted_on"]))


def _stack(series: MonthlySeries) -> np.ndarray:
    cols = [series.default_rate[:, None], series.features]
    if series.macro is not None:
        cols.append(series.macro[:, None])
    return np.hstack(cols)


def fit_scaler(series: MonthlySeries, train_month_count: int) -> ScalerParams:
    """Min-max ranges from the first ``train_month_count`` months only.

    Column order: default_rate, features..., then macro if present.
    """
    if not 1 <= train_month_count <= len(series):
        raise DataError(f"train_month_count {train_month_count} outside 1..{len(series)}")
    train = _stack(series)[:train_month_count]
    names = ("default_rate",) + series.feature_names + ((series.macro_name,) if series.macro is not None else ())
    return ScalerParams(
        names=names,
        minimum=train.min(axis=0),
        maximum=train.max(axis=0),
        fitted_on=(str(series.months[0]), str(series.months[train_month_count - 1])),
    )


def apply_scaler(series: MonthlySeries, scaler: ScalerParams) -> MonthlySeries:
    z = scaler.transform(_stack(series))
    nf = len(series.feature_names)
    return replace(
        series,
        default_rate=z[:, 0],
        features=z[:, 1:1 + nf],
        macro=None if series.macro is None else z[:, 1 + nf],
        scaled=True,
    )


def invert_scaler(series: MonthlySeries, scaler: ScalerParams) -> MonthlySeries:
    x = scaler.inverse(_stack(series))
    nf = len(series.feature_names)
    return replace(
        series,
        default_rate=x[:, 0],
        features=x[:, 1:1 + nf],
        macro=None if series.macro is None else x[:, 1 + nf],
        scaled=False,
    )


@dataclass
class IngestReport:
    n_parsed: int = 0
    n_resolved: int = 0
    dropped_columns: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    gaps: list[str] = field(default_factory=list)
    rank_tests: list[dict] = field(default_factory=list)


def run_pipeline(loans_source, macro_source=None, *, status_map=None, threshold: float = 0.8,
                 schema=None) -> tuple[MonthlySeries, IngestReport]:
    from .ranktest import pairwise_rank_tests

    report = IngestReport()
    records = parse_loans(loans_source, schema)
    report.n_parsed = len(records)
    records = filter_and_encode_target(records, status_map)
    report.n_resolved = len(records)
    if not records:
        raise DataError("no resolved loans remain after status filtering")
    frame = build_frame(records)
    frame, dropped = drop_sparse_features(frame, threshold)
    report.dropped_columns = dropped
    for name, col in frame.categorical.items():
        report.rank_tests.extend(pairwise_rank_tests(name, col, frame.months, frame.target))
    frame = one_hot_encode(frame)
    frame = impute(frame)
    series = aggregate_monthly(frame)
    if macro_source is not None:
        series = merge_macro(series, macro_source)
    report.notes = list(frame.notes)
    report.gaps = [str(g) for g in series.gaps]
    return series, report


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series(series: MonthlySeries, path) -> None:
    """Aggregated interchange CSV: month,default_rate,unemp_rate,<features...>."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "default_rate", series.macro_name, *series.feature_names])
        for i, m in enumerate(series.months):
            macro = "" if series.macro is None else _fmt(series.macro[i])
            w.writerow([str(m), _fmt(series.default_rate[i]), macro, *(_fmt(v) for v in series.features[i])])


def read_series(source, macro_name: str = "unemp_rate") -> MonthlySeries:
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["month", "default_rate"]:
            raise DataError("aggregated CSV must start with columns month,default_rate")
        has_macro_col = len(header) > 2 and header[2] == macro_name
        feat_start = 3 if has_macro_col else 2
        names = tuple(header[feat_start:])
        months, rates, macro, feats = [], [], [], []
        for row in reader:
            if not row:
                continue
            months.append(parse_month(row[0]))
            rate = parse_number(row[1])
            if rate is None:
                raise DataError(f"default_rate missing for {row[0]}")
            rates.append(rate)
            if has_macro_col:
                macro.append(parse_number(row[2]))
            vals = [parse_number(c) for c in row[feat_start:]]
            if len(vals) != len(names) or any(v is None for v in vals):
                raise DataError(f"incomplete feature row for {row[0]}")
            feats.append(vals)
        if has_macro_col and any(v is None for v in macro):
            if all(v is None for v in macro):
                macro_arr = None
            else:
                raise DataError(f"{macro_name} has missing months")
        else:
            macro_arr = np.array(macro, dtype=np.float64) if has_macro_col else None
        return MonthlySeries(
            months=tuple(months),
            features=np.array(feats, dtype=np.float64).reshape(len(months), len(names)),
            feature_names=names,
            default_rate=np.array(rates, dtype=np.float64),
            macro=macro_arr,
            macro_name=macro_name,
            gaps=find_gaps(months),
        )
