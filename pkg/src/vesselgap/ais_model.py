"""Record types, delimited-text parsing and single-record validation."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence
from zoneinfo import ZoneInfo

REQUIRED_FIELDS = ("vessel_id", "ts", "lon", "lat")
OPTIONAL_FIELDS = ("sog", "cog")

# ITU-R M.1371 "not available" sentinels.
SOG_NOT_AVAILABLE = 102.3
COG_NOT_AVAILABLE = 360.0


class RejectReason(str, enum.Enum):
    INVALID_COORDINATES = "InvalidCoordinates"
    DUPLICATE_RECORD = "DuplicateRecord"
    OUT_OF_ORDER = "OutOfOrder"
    KINEMATIC_OUTLIER = "KinematicOutlier"
    MALFORMED_FIELD = "MalformedField"


class ParseError(ValueError):
    """A row could not be turned into an :class:`AisRecord`."""

    reason = RejectReason.MALFORMED_FIELD

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True, slots=True)
class AisRecord:
    vessel_id: str
    ts: int  # UTC epoch milliseconds
    lon: float
    lat: float
    sog: float | None = None
    cog: float | None = None


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lon: float
    lat: float
    ts: int | None = None


@dataclass(frozen=True)
class Schema:
    """Maps record fields to column positions of a delimited row.

    Build one from a header line with :meth:`from_header`; the default
    instance is the identity layout ``vessel_id,ts,lon,lat,sog,cog``.
    """

    vessel_id: int = 0
    ts: int = 1
    lon: int = 2
    lat: int = 3
    sog: int | None = 4
    cog: int | None = 5
    delimiter: str = ","
    ts_format: str | None = None
    ts_unit: str = "auto"
    tz: str = "UTC"

    @classmethod
    def from_header(
        cls,
        header: Sequence[str],
        columns: dict[str, str | None] | None = None,
        **options,
    ) -> "Schema":
        """Resolve column names in ``columns`` against ``header``.

        ``columns`` maps field name to column name; missing entries default
        to the field name itself. Optional fields whose column is absent
        from the header are left unmapped.
        """
        columns = dict(columns or {})
        names = [h.strip() for h in header]
        index: dict[str, int | None] = {}
        for f in REQUIRED_FIELDS + OPTIONAL_FIELDS:
            col = columns.get(f, f)
            if col is None or col not in names:
                if f in REQUIRED_FIELDS:
                    raise ParseError(f, f"required column {col!r} not in header")
                index[f] = None
            else:
                index[f] = names.index(col)
        return cls(**index, **options)

    @property
    def width(self) -> int:
        cols = [self.vessel_id, self.ts, self.lon, self.lat, self.sog, self.cog]
        return max(c for c in cols if c is not None) + 1


def parse_timestamp(raw: str, schema: Schema = Schema()) -> int:
    """Parse a timestamp cell into UTC epoch milliseconds."""
    raw = raw.strip()
    if not raw:
        raise ParseError("ts", "empty")
    if schema.ts_format:
        try:
            dt = datetime.strptime(raw, schema.ts_format)
        except ValueError as exc:
            raise ParseError("ts", str(exc)) from None
        return _to_ms(dt, schema.tz)
    unit = schema.ts_unit
    if unit in ("s", "ms") or (unit == "auto" and _looks_numeric(raw)):
        try:
            value = float(raw)
        except ValueError:
            raise ParseError("ts", f"not numeric: {raw!r}") from None
        if not math.isfinite(value):
            raise ParseError("ts", "not finite")
        if unit == "ms" or (unit == "auto" and abs(value) >= 1e11):
            return int(round(value))
        return int(round(value * 1000))
    text = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ParseError("ts", f"unparseable timestamp {raw!r}") from None
    return _to_ms(dt, schema.tz)


def _looks_numeric(raw: str) -> bool:
    return raw.lstrip("+-").replace(".", "", 1).replace("e", "", 1).isdigit()


def _to_ms(dt: datetime, tz: str) -> int:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc if tz == "UTC" else ZoneInfo(tz))
    delta = dt - datetime(1970, 1, 1, tzinfo=timezone.utc)
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def format_timestamp(ts_ms: int) -> str:
    """ISO-8601 UTC with millisecond precision, e.g. ``2024-01-05T10:00:00.000Z``."""
    dt = datetime.fromtimestamp(ts_ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ts_ms % 1000:03d}Z"


def _float(cells: Sequence[str], idx: int | None, name: str, required: bool) -> float | None:
    if idx is None:
        if required:
            raise ParseError(name, "column not mapped")
        return None
    if idx >= len(cells):
        if required:
            raise ParseError(name, "missing column")
        return None
    raw = cells[idx].strip()
    if not raw:
        if required:
            raise ParseError(name, "empty")
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(name, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ParseError(name, "not finite")
    return value


def parse_record(line: str | Sequence[str], schema: Schema = Schema()) -> AisRecord:
    """Parse one delimited row. Raises :class:`ParseError` on bad required fields."""
    if isinstance(line, str):
        cells = next(csv.reader([line], delimiter=schema.delimiter), [])
    else:
        cells = list(line)
    if schema.vessel_id >= len(cells) or not cells[schema.vessel_id].strip():
        raise ParseError("vessel_id", "missing")
    if schema.ts >= len(cells):
        raise ParseError("ts", "missing column")
    sog = _float(cells, schema.sog, "sog", False)
    cog = _float(cells, schema.cog, "cog", False)
    if sog is not None and sog >= SOG_NOT_AVAILABLE:
        sog = None
    if cog is not None and cog == COG_NOT_AVAILABLE:
        cog = None
    return AisRecord(
        vessel_id=cells[schema.vessel_id].strip(),
        ts=parse_timestamp(cells[schema.ts], schema),
        lon=_float(cells, schema.lon, "lon", True),
        lat=_float(cells, schema.lat, "lat", True),
        sog=sog,
        cog=cog,
    )


def serialize_record(rec: AisRecord, delimiter: str = ",") -> str:
    """Inverse of :func:`parse_record` under the identity :class:`Schema`."""
    cells = [
        rec.vessel_id,
        format_timestamp(rec.ts),
        repr(rec.lon),
        repr(rec.lat),
        "" if rec.sog is None else repr(rec.sog),
        "" if rec.cog is None else repr(rec.cog),
    ]
    buf = io.StringIO()
    csv.writer(buf, delimiter=delimiter, lineterminator="").writerow(cells)
    return buf.getvalue()


def validate_record(rec: AisRecord) -> AisRecord | RejectReason:
    """Return ``rec`` unchanged if it is plausible, else the reason it is not."""
    if not (-180.0 <= rec.lon <= 180.0 and -90.0 <= rec.lat <= 90.0):
        return RejectReason.INVALID_COORDINATES
    if rec.lon == 0.0 and rec.lat == 0.0:
        return RejectReason.INVALID_COORDINATES
    if rec.sog is not None and rec.sog < 0:
        return RejectReason.MALFORMED_FIELD
    if rec.cog is not None and not (0.0 <= rec.cog < 360.0):
        return RejectReason.MALFORMED_FIELD
    return rec


@dataclass
class ReadResult:
    records: list[AisRecord] = field(default_factory=list)
    rejected: dict[RejectReason, int] = field(default_factory=dict)

    def reject(self, reason: RejectReason, n: int = 1) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + n


def iter_rows(path: str | Path, delimiter: str = ",") -> Iterator[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        yield from csv.reader(fh, delimiter=delimiter)


def read_records(
    paths: Iterable[str | Path],
    columns: dict[str, str | None] | None = None,
    delimiter: str = ",",
    **schema_options,
) -> ReadResult:
    """Parse and validate every row of header-bearing delimited files."""
    out = ReadResult()
    for path in paths:
        rows = iter_rows(path, delimiter)
        header = next(rows, None)
        if header is None:
            continue
        schema = Schema.from_header(header, columns, delimiter=delimiter, **schema_options)
        for cells in rows:
            if not cells:
                continue
            try:
                rec = parse_record(cells, schema)
            except ParseError:
                out.reject(RejectReason.MALFORMED_FIELD)
                continue
            checked = validate_record(rec)
            if isinstance(checked, RejectReason):
                out.reject(checked)
            else:
                out.records.append(checked)
    return out
