import datetime as dt

import numpy as np
import pytest

from nearwave.catalog import ClassifiedCatalog, Event
from nearwave.geo import GeoPoint, great_circle_distance
from nearwave.synth import destination

D0 = dt.date(2014, 2, 2)


def ev(eid, day, lon, lat, perps=("A",), cas=None, start=D0):
    """Event ``day`` days after ``start``."""
    if isinstance(perps, str):
        perps = (perps,)
    return Event(eid, start + dt.timedelta(days=day), GeoPoint(lon, lat), tuple(perps), cas)


def by_perp(events, era=None):
    """Catalog whose classes are the perpetrator names themselves."""
    index = {}
    for e in events:
        for p in e.perpetrators:
            index.setdefault(p, set()).add(e.id)
    return ClassifiedCatalog(events, index, era)


def gaussian_blobs(centers, n, sigma_km, seed):
    rng = np.random.default_rng(seed)
    pts, truth = [], []
    for k, c in enumerate(centers):
        r = rng.normal(size=(n, 2)) * sigma_km
        lat, lon = destination(np.full(n, c.lat), np.full(n, c.lon),
                               np.hypot(r[:, 0], r[:, 1]), np.arctan2(r[:, 1], r[:, 0]))
        pts += [GeoPoint(float(b), float(a)) for a, b in zip(lat, lon)]
        truth += [k] * n
    return pts, np.array(truth)


def brute_force_pairs(catalog, windows, filt, scope=None):
    """Plain double loop over events: the reference for pair enumeration."""
    end = catalog.era[1]
    bounds = windows.bounds(end)
    src = catalog.class_index[filt.source_class]
    tgt = catalog.class_index[filt.target_class]
    if scope is not None:
        src, tgt = src & set(scope), tgt & set(scope)
    out = []
    for w, (lo, hi) in enumerate(bounds):
        for a in catalog.events:
            if a.id not in src or not lo <= a.date.toordinal() < hi:
                continue
            for b in catalog.events:
                if b.id not in tgt or b.id == a.id or not lo <= b.date.toordinal() < hi:
                    continue
                lag = (b.date - a.date).days
                if lag < 1:
                    continue
                d = great_circle_distance(a.location, b.location)
                if filt.max_km is not None and not d <= filt.max_km:
                    continue
                if filt.min_km is not None and not d > filt.min_km:
                    continue
                ca = -1 if a.casualties is None else a.casualties
                cb = -1 if b.casualties is None else b.casualties
                if filt.min_casualties_source is not None and ca < filt.min_casualties_source:
                    continue
                if filt.min_casualties_target is not None and cb < filt.min_casualties_target:
                    continue
                if filt.incremental and not (ca >= 0 and cb > ca):
                    continue
                out.append((w, a.id, b.id, lag))
    return sorted(out)


@pytest.fixture
def d0():
    return D0


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
