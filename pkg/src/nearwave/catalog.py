"""Event ingestion, actor-class resolution and era filtering."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geo import GeoPoint

logger = logging.getLogger(__name__)

MAX_PERPETRATORS = 3


class SchemaError(ValueError):
    """Raised when a CSV file does not look like an event catalog."""


def fold_name(name: str) -> str:
    return name.strip().casefold()


@dataclass(frozen=True)
class Event:
    id: str
    date: dt.date
    location: GeoPoint
    perpetrators: tuple[str, ...]
    casualties: Optional[int] = None  # None means unknown, which is not 0

    def __post_init__(self):
        if not self.perpetrators or len(self.perpetrators) > MAX_PERPETRATORS:
            raise ValueError(f"event {self.id}: need 1-{MAX_PERPETRATORS} perpetrators")
        if self.casualties is not None and self.casualties < 0:
            raise ValueError(f"event {self.id}: negative casualties")


@dataclass(frozen=True)
class AffiliationRule:
    actor_name: str
    class_label: str
    start_date: Optional[dt.date] = None
    end_date: Optional[dt.date] = None

    def __post_init__(self):
        if self.start_date and self.end_date and self.start_date > self.end_date:
            raise ValueError(f"rule for {self.actor_name!r}: start after end")

    def active(self, day: dt.date) -> bool:
        if self.start_date is not None and day < self.start_date:
            return False
        if self.end_date is not None and day > self.end_date:
            return False
        return True


@dataclass(frozen=True)
class CsvSchema:
    """Column names of an event CSV and parsing options.

    Set ``date`` to None and name ``year``/``month``/``day`` columns for
    catalogs that split the date (a day or month of 0 means unknown and the
    row is rejected).
    """

    id: str = "id"
    date: Optional[str] = "date"
    lat: str = "lat"
    lon: str = "lon"
    perp1: str = "perp1"
    perp2: Optional[str] = "perp2"
    perp3: Optional[str] = "perp3"
    casualties: Optional[str] = "casualties"
    year: Optional[str] = None
    month: Optional[str] = None
    day: Optional[str] = None
    span: Optional[tuple[dt.date, dt.date]] = None
    max_reject_fraction: float = 0.5
    encoding: str = "utf-8"

    def __post_init__(self):
        if self.date is None and not (self.year and self.month and self.day):
            raise ValueError("schema needs a date column or year/month/day columns")

    @property
    def date_columns(self) -> list[str]:
        return [self.date] if self.date else [self.year, self.month, self.day]

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "CsvSchema":
        cfg = dict(cfg)
        if cfg.get("span"):
            lo, hi = cfg["span"]
            cfg["span"] = (parse_date(lo), parse_date(hi))
        return cls(**cfg)


@dataclass
class IngestResult:
    events: list[Event]
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def reject_count(self) -> int:
        return len(self.rejected)

    def report(self) -> dict:
        return {
            "accepted": len(self.events),
            "rejected": self.reject_count,
            "rejections": [{"row": r, "reason": why} for r, why in self.rejected],
        }


def parse_date(text) -> dt.date:
    if isinstance(text, dt.date):
        return text
    return dt.date.fromisoformat(str(text).strip())


def _parse_casualties(text: Optional[str]) -> Optional[int]:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if not math.isfinite(value) or value < 0 or value != int(value):
        return None
    return int(value)


def ingest_csv(path, schema: CsvSchema = CsvSchema()) -> IngestResult:
    """Read an event CSV, skipping malformed rows.

    Rows with missing or unparseable coordinates or dates are skipped and
    recorded in ``IngestResult.rejected`` as ``(line_number, reason)``.

    Raises:
        OSError: the file cannot be read.
        SchemaError: a required column is missing, or more than half of the
            rows were rejected.
    """
    path = Path(path)
    with path.open(newline="", encoding=schema.encoding) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = [schema.id, *schema.date_columns, schema.lat, schema.lon, schema.perp1]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        optional = [c for c in (schema.perp2, schema.perp3, schema.casualties) if c and c in header]

        events: list[Event] = []
        rejected: list[tuple[int, str]] = []
        seen: set[str] = set()
        for row in reader:
            line = reader.line_num
            try:
                events.append(_parse_row(row, schema, optional, seen))
            except ValueError as exc:
                rejected.append((line, str(exc)))

    total = len(events) + len(rejected)
    if total and len(rejected) / total > schema.max_reject_fraction:
        raise SchemaError(
            f"{path}: schema mismatch suspected ({len(rejected)}/{total} rows rejected)"
        )
    if rejected:
        logger.info("%s: %d rows rejected", path, len(rejected))
    return IngestResult(events, rejected)


def _row_date(row, schema: CsvSchema) -> dt.date:
    if schema.date:
        try:
            return parse_date(row.get(schema.date) or "")
        except ValueError:
            raise ValueError(f"bad date {row.get(schema.date)!r}") from None
    parts = [(row.get(c) or "").strip() for c in (schema.year, schema.month, schema.day)]
    try:
        y, m, d = (int(float(p)) for p in parts)
        return dt.date(y, m, d)
    except ValueError:
        raise ValueError(f"bad date {'-'.join(parts)!r}") from None


def _parse_row(row, schema: CsvSchema, optional, seen: set) -> Event:
    eid = (row.get(schema.id) or "").strip()
    if not eid:
        raise ValueError("empty id")
    if eid in seen:
        raise ValueError(f"duplicate id {eid}")
    day = _row_date(row, schema)
    if schema.span and not schema.span[0] <= day <= schema.span[1]:
        raise ValueError(f"date {day} outside catalog span")
    try:
        lat = float(row[schema.lat])
        lon = float(row[schema.lon])
    except (TypeError, ValueError):
        raise ValueError("bad coordinates") from None
    location = GeoPoint(lon=lon, lat=lat)

    names = [row.get(schema.perp1) or ""]
    for col in (schema.perp2, schema.perp3):
        if col in optional:
            names.append(row.get(col) or "")
    perps = tuple(n.strip() for n in names if n and n.strip())
    if not perps:
        raise ValueError("no perpetrator")
    casualties = None
    if schema.casualties in optional:
        casualties = _parse_casualties(row.get(schema.casualties))
    seen.add(eid)
    return Event(eid, day, location, perps, casualties)


def write_events_csv(events: Iterable[Event], path, schema: CsvSchema = CsvSchema()) -> None:
    """Write events in the ingest schema; ``ingest_csv`` reads them back unchanged."""
    if schema.date is None:
        raise ValueError("writing needs a single date column")
    cols = [schema.id, schema.date, schema.lat, schema.lon, schema.perp1, schema.perp2,
            schema.perp3, schema.casualties]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in events:
            perps = list(e.perpetrators) + [""] * (MAX_PERPETRATORS - len(e.perpetrators))
            w.writerow([
                e.id, e.date.isoformat(), repr(e.location.lat), repr(e.location.lon),
                *perps, "" if e.casualties is None else e.casualties,
            ])


def load_affiliations(path) -> list[AffiliationRule]:
    """Load a JSON array of ``{actor, class, start, end}`` objects."""
    with Path(path).open(encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a JSON array of rules")
    rules = []
    for item in raw:
        rules.append(AffiliationRule(
            actor_name=item["actor"],
            class_label=item["class"],
            start_date=parse_date(item["start"]) if item.get("start") else None,
            end_date=parse_date(item["end"]) if item.get("end") else None,
        ))
    return rules


class ClassifiedCatalog:
    """Events plus a class label -> event id index.

    An event may be listed under several classes. Column arrays (day
    ordinals, coordinates, casualties) are built once for the numeric code.
    """

    def __init__(self, events: Sequence[Event], class_index: Mapping[str, Iterable[str]],
                 era: Optional[tuple[dt.date, dt.date]] = None):
        self.events: tuple[Event, ...] = tuple(events)
        self._pos = {e.id: i for i, e in enumerate(self.events)}
        if len(self._pos) != len(self.events):
            raise ValueError("duplicate event ids")
        index = {}
        for label, ids in class_index.items():
            ids = frozenset(ids)
            unknown = ids - self._pos.keys()
            if unknown:
                raise ValueError(f"class {label!r} indexes unknown ids {sorted(unknown)[:5]}")
            index[label] = ids
        self.class_index: dict[str, frozenset[str]] = index
        if era is None and self.events:
            days = [e.date for e in self.events]
            era = (min(days), max(days))
        self.era = era

        self.ids = np.array([e.id for e in self.events], dtype=object)
        self.days = np.array([e.date.toordinal() for e in self.events], dtype=np.int64)
        self.lat = np.array([e.location.lat for e in self.events], dtype=float)
        self.lon = np.array([e.location.lon for e in self.events], dtype=float)
        self.casualties = np.array(
            [-1 if e.casualties is None else e.casualties for e in self.events], dtype=np.int64)

    def __len__(self):
        return len(self.events)

    @property
    def is_empty(self) -> bool:
        return not self.events

    @property
    def labels(self) -> list[str]:
        return sorted(self.class_index)

    def members(self, label: str) -> np.ndarray:
        """Sorted positions (into ``events``) of the events in class ``label``."""
        if label not in self.class_index:
            raise KeyError(f"unknown class {label!r}")
        return np.array(sorted(self._pos[i] for i in self.class_index[label]), dtype=np.int64)

    def positions(self, ids: Iterable[str]) -> np.ndarray:
        return np.array(sorted(self._pos[i] for i in ids), dtype=np.int64)

    def event(self, eid: str) -> Event:
        return self.events[self._pos[eid]]

    def with_class(self, label: str, ids: Iterable[str]) -> "ClassifiedCatalog":
        """Copy with an extra (possibly virtual) class, e.g. a provoked subset."""
        index = dict(self.class_index)
        index[label] = frozenset(ids)
        return ClassifiedCatalog(self.events, index, self.era)

    def subset(self, ids: Iterable[str]) -> "ClassifiedCatalog":
        keep = frozenset(ids)
        events = [e for e in self.events if e.id in keep]
        index = {k: v & keep for k, v in self.class_index.items()}
        return ClassifiedCatalog(events, index, self.era)


def classify(events: Iterable[Event], rules: Sequence[AffiliationRule], fallback_label: str,
             unknown_tokens: Iterable[str] = ("Unknown",),
             era: Optional[tuple[dt.date, dt.date]] = None) -> ClassifiedCatalog:
    """Resolve each event's perpetrators into classes.

    Every perpetrator name matching a rule active on the event date adds the
    rule's class. Names are compared trimmed and case-folded. Unknown tokens
    are ignored; an event whose perpetrators are all unknown is dropped. An
    event with at least one known name that matches no rule gets
    ``fallback_label``.
    """
    by_actor: dict[str, list[AffiliationRule]] = {}
    for rule in rules:
        by_actor.setdefault(fold_name(rule.actor_name), []).append(rule)
    unknown = {fold_name(t) for t in unknown_tokens}

    kept: list[Event] = []
    index: dict[str, set[str]] = {fallback_label: set()}
    for rule in rules:
        index.setdefault(rule.class_label, set())
    for e in events:
        known = [fold_name(p) for p in e.perpetrators if fold_name(p) not in unknown]
        if not known:
            continue
        labels = {r.class_label for name in known for r in by_actor.get(name, ()) if r.active(e.date)}
        if not labels:
            labels = {fallback_label}
        for label in labels:
            index[label].add(e.id)
        kept.append(e)
    return ClassifiedCatalog(kept, index, era)


def identity_rules(events: Iterable[Event], unknown_tokens=("Unknown",)) -> list[AffiliationRule]:
    """One open-ended rule per known actor, mapping it to itself as a class.

    Names equal after case folding are one actor; the class takes the first
    spelling in sorted order.
    """
    unknown = {fold_name(t) for t in unknown_tokens}
    names = sorted({p.strip() for e in events for p in e.perpetrators if fold_name(p) not in unknown})
    labels: dict[str, str] = {}
    for n in names:
        labels.setdefault(fold_name(n), n)
    return [AffiliationRule(n, n) for n in labels.values()]


def filter_era(catalog: ClassifiedCatalog, from_date: dt.date, to_date: dt.date) -> ClassifiedCatalog:
    """Keep events dated within ``[from_date, to_date]`` (inclusive)."""
    if from_date > to_date:
        raise ValueError(f"inverted era {from_date} > {to_date}")
    keep = [e for e in catalog.events if from_date <= e.date <= to_date]
    ids = {e.id for e in keep}
    index = {k: v & ids for k, v in catalog.class_index.items()}
    out = ClassifiedCatalog(keep, index, (from_date, to_date))
    if out.is_empty:
        logger.warning("era %s..%s leaves an empty catalog", from_date, to_date)
    return out
