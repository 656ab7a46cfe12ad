"""``nearwave`` command line: synth, ingest, cluster, panel, react, scan, chain, wave.

Exit codes: 0 success, 1 hard error, 2 insufficient data.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import catalog as cat_mod
from .catalog import ClassifiedCatalog, CsvSchema, SchemaError, parse_date
from .cluster import DISCARDED, assign_by_spread, elbow_select, kmeans
from .geo import GeoPoint, great_circle_distance, spherical_centroid
from .pairs import PairFilter, WindowSpec, enumerate_pairs, provoked_subset
from .stats import (InsufficientDataError, bin_panel, correlate_terms, kld,
                    kld_distance_scan, panel_record, wave_regression, write_panel)
from .synth import generate, load_spec

EXIT_OK, EXIT_ERROR, EXIT_INSUFFICIENT = 0, 1, 2

DEFAULTS = {
    "events": None,
    "affiliations": None,
    "schema": {},
    "era": None,
    "fallback_class": "L",
    "unknown_tokens": ["Unknown"],
    "window_start": None,
    "window_weeks": 44,
    "window_count": None,
    "bin_weeks": None,  # 2 for near-repeat panels, 4 for near-reaction panels
    "max_km": None,
    "min_km": None,
    "min_pairs": 100,
    "min_casualties_source": None,
    "min_casualties_target": None,
    "incremental": False,
    "k_max": 15,
    "elbow_threshold": 0.075,
    "restarts": 16,
    "spread_multiplier": 3.0,
    "cluster_classes": None,
    "seed": 0,
    "out": ".",
    "force": False,
    "threads": 1,
    "scope_assignments": None,
    "scope_cluster": None,
    "dump_pairs": False,
    # subcommand arguments
    "spec": None,
    "source": None,
    "target": None,
    "class_a": None,
    "class_b": None,
    "klass": None,
    "distances": [10.0, 20.0, 50.0, 100.0, 200.0, 500.0],
    "span_weeks": None,
    "samples": 10,
    "windows_per_period": 4,
    "provoker": None,
    "responder": None,
    "response_max_km": 20.0,
    "response_max_weeks": 4,
    "k": None,
    "origin_cluster": None,
    "assignments": None,
}


class UsageError(ValueError):
    pass


class NoDataError(InsufficientDataError):
    pass


# --- configuration ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    add = common.add_argument
    add("--config", help="JSON config file; flags override its values")
    add("--events", default=S, help="event CSV")
    add("--affiliations", default=S, help="affiliation map JSON (default: actor name = class)")
    add("--era", default=S, help="FROM:TO in ISO dates")
    add("--fallback-class", default=S)
    add("--window-start", default=S, help="first window start date (default: era start)")
    add("--window-weeks", type=int, default=S)
    add("--window-count", type=int, default=S)
    add("--bin-weeks", type=int, default=S)
    band = common.add_mutually_exclusive_group()
    band.add_argument("--max-km", type=float, default=S)
    band.add_argument("--min-km", type=float, default=S)
    add("--min-pairs", type=int, default=S)
    add("--min-casualties-source", type=int, default=S)
    add("--min-casualties-target", type=int, default=S)
    add("--incremental", action="store_true", default=S)
    add("--k-max", type=int, default=S)
    add("--elbow-threshold", type=float, default=S)
    add("--restarts", type=int, default=S)
    add("--cluster-classes", type=_names, default=S)
    add("--seed", type=int, default=S)
    add("--out", default=S, help="output directory")
    add("--force", action="store_true", default=S, help="analyse insufficient panels anyway")
    add("--threads", type=int, default=S)
    add("--scope-assignments", default=S, help="cluster assignment CSV restricting pairs")
    add("--scope-cluster", type=int, default=S)
    add("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nearwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic event CSV")
    p.add_argument("--spec", default=S, help="generator spec JSON")
    sub.add_parser("ingest", parents=[common], help="validate and classify an event CSV")
    sub.add_parser("cluster", parents=[common], help="k-means + elbow + spread assignment")
    p = sub.add_parser("panel", parents=[common], help="latent-time panel against the REH")
    p.add_argument("--source", default=S)
    p.add_argument("--target", default=S)
    p.add_argument("--dump-pairs", action="store_true", default=S)
    p = sub.add_parser("react", parents=[common], help="mirror near-reaction panels and r")
    p.add_argument("--class-a", default=S)
    p.add_argument("--class-b", default=S)
    p = sub.add_parser("scan", parents=[common], help="KLD against distance threshold")
    p.add_argument("--class", dest="klass", default=S)
    p.add_argument("--distances", type=_floats, default=S)
    p.add_argument("--span-weeks", type=int, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--windows-per-period", type=int, default=S)
    p = sub.add_parser("chain", parents=[common], help="provoked vs unprovoked responses")
    p.add_argument("--provoker", default=S)
    p.add_argument("--responder", default=S)
    p.add_argument("--response-max-km", type=float, default=S)
    p.add_argument("--response-max-weeks", type=int, default=S)
    p = sub.add_parser("wave", parents=[common], help="first-event spread regression")
    p.add_argument("--class", dest="klass", default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--origin-cluster", type=int, default=S)
    p.add_argument("--assignments", default=S, help="cluster assignment CSV to reuse")
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    flags = {k: v for k, v in vars(args).items() if k in DEFAULTS}
    # a band flag replaces whichever band the config file chose
    if "max_km" in flags:
        cfg["min_km"] = None
    if "min_km" in flags:
        cfg["max_km"] = None
    cfg.update(flags)
    if args.command == "panel" and cfg["target"] is None:
        cfg["target"] = cfg["source"]
    return cfg


# --- shared steps ---------------------------------------------------------------

def _era(cfg) -> Optional[tuple[dt.date, dt.date]]:
    era = cfg["era"]
    if not era:
        return None
    if isinstance(era, str):
        era = era.split(":")
    lo, hi = era
    return parse_date(lo), parse_date(hi)


def load_catalog(cfg) -> tuple[ClassifiedCatalog, dict]:
    if not cfg["events"]:
        raise UsageError("--events is required")
    schema = CsvSchema.from_mapping(cfg["schema"] or {})
    result = cat_mod.ingest_csv(cfg["events"], schema)
    if cfg["affiliations"]:
        rules = cat_mod.load_affiliations(cfg["affiliations"])
    else:
        rules = cat_mod.identity_rules(result.events, cfg["unknown_tokens"])
    catalog = cat_mod.classify(result.events, rules, cfg["fallback_class"], cfg["unknown_tokens"])
    era = _era(cfg)
    if era:
        catalog = cat_mod.filter_era(catalog, *era)
    if catalog.is_empty:
        raise ValueError("catalog is empty after ingestion and filtering")
    return catalog, result.report()


def _window_spec(cfg, catalog: ClassifiedCatalog) -> WindowSpec:
    start = parse_date(cfg["window_start"]) if cfg["window_start"] else catalog.era[0]
    return WindowSpec(start, int(cfg["window_weeks"]), cfg["window_count"])


def _scope(cfg) -> Optional[set]:
    if not cfg["scope_assignments"]:
        return None
    if cfg["scope_cluster"] is None:
        raise UsageError("--scope-cluster is required with --scope-assignments")
    want = str(cfg["scope_cluster"])
    with open(cfg["scope_assignments"], newline="", encoding="utf-8") as fh:
        return {row["event_id"] for row in csv.DictReader(fh) if row["cluster"] == want}


def _filter(cfg, source: str, target: str) -> PairFilter:
    return PairFilter(
        source, target, max_km=cfg["max_km"], min_km=cfg["min_km"],
        min_casualties_source=cfg["min_casualties_source"],
        min_casualties_target=cfg["min_casualties_target"],
        incremental=bool(cfg["incremental"]))


def _bin_days(cfg, near_repeat: bool) -> int:
    weeks = cfg["bin_weeks"] or (2 if near_repeat else 4)
    return 7 * int(weeks)


def _build_panel(cfg, catalog, filt, scope=None):
    windows = _window_spec(cfg, catalog)
    pairs = enumerate_pairs(catalog, windows, filt, scope=scope, threads=int(cfg["threads"]))
    panel = bin_panel(pairs, windows.days, _bin_days(cfg, filt.near_repeat), int(cfg["min_pairs"]))
    terms = None
    if panel.sufficient or (cfg["force"] and panel.pair_count):
        terms = kld(panel, force=True).terms
    return pairs, panel, terms


def _insufficient(msg: str) -> None:
    print(f"nearwave: insufficient data: {msg}", file=sys.stderr)


def _out(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (dt.date,)):
        return obj.isoformat()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path: Path, record: dict) -> None:
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_echo(cfg) -> dict:
    return {k: cfg[k] for k in sorted(cfg)}


# --- commands ---------------------------------------------------------------------

def cmd_synth(cfg) -> int:
    if not cfg["spec"]:
        raise UsageError("--spec is required")
    spec = load_spec(cfg["spec"])
    events = generate(spec, int(cfg["seed"]))
    out = _out(cfg)
    cat_mod.write_events_csv(events, out / "events.csv")
    labels = {}
    for e in events:
        labels[e.perpetrators[0]] = labels.get(e.perpetrators[0], 0) + 1
    write_json(out / "synth_report.json",
               {"config": _config_echo(cfg), "events": len(events), "per_class": labels})
    return EXIT_OK


def cmd_ingest(cfg) -> int:
    catalog, report = load_catalog(cfg)
    out = _out(cfg)
    cat_mod.write_events_csv(catalog.events, out / "events_clean.csv")
    write_json(out / "ingest_report.json", {
        "config": _config_echo(cfg),
        "ingest": report,
        "era": list(catalog.era),
        "classified_events": len(catalog),
        "class_counts": {k: len(v) for k, v in sorted(catalog.class_index.items())},
    })
    return EXIT_OK


def _cluster_points(cfg, catalog, classes=None):
    classes = classes or cfg["cluster_classes"] or [
        c for c in catalog.labels if c != cfg["fallback_class"]]
    ids = sorted(set().union(*(catalog.class_index[c] for c in classes)))
    if not ids:
        raise ValueError(f"no events in classes {classes}")
    return classes, ids, [catalog.event(i).location for i in ids]


def cmd_cluster(cfg) -> int:
    catalog, report = load_catalog(cfg)
    classes, ids, points = _cluster_points(cfg, catalog)
    curve = elbow_select(points, int(cfg["k_max"]), float(cfg["elbow_threshold"]),
                         seed=int(cfg["seed"]), restarts=int(cfg["restarts"]),
                         threads=int(cfg["threads"]))
    model = curve.models[curve.k_star]
    fallback = cfg["fallback_class"]
    extra_ids = sorted(catalog.class_index.get(fallback, frozenset()) - set(ids))
    extra = assign_by_spread(model, [(i, catalog.event(i).location) for i in extra_ids],
                             float(cfg["spread_multiplier"]))
    out = _out(cfg)
    write_json(out / "cluster_report.json", {
        "config": _config_echo(cfg),
        "ingest": {"accepted": report["accepted"], "rejected": report["rejected"]},
        "clustered_classes": classes,
        "k_star": curve.k_star,
        "elbow_found": curve.elbow_found,
        "elbow": curve.table(),
        "clusters": [
            {"index": c, "lon": p.lon, "lat": p.lat, "spread_km": float(model.spreads[c]),
             "size": int(model.sizes[c]),
             "spread_assigned": sum(1 for v in extra.values() if v == c)}
            for c, p in enumerate(model.centroids)],
        "dbar_km": model.dbar,
        "discarded": sum(1 for v in extra.values() if v == DISCARDED),
    })
    with (out / "cluster_assignments.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", "cluster", "method"])
        for i, c in zip(ids, model.labels):
            w.writerow([i, int(c), "kmeans"])
        for i in extra_ids:
            w.writerow([i, extra[i], "spread"])
    return EXIT_OK


def cmd_panel(cfg) -> int:
    if not cfg["source"]:
        raise UsageError("--source is required")
    catalog, _ = load_catalog(cfg)
    filt = _filter(cfg, cfg["source"], cfg["target"])
    pairs, panel, terms = _build_panel(cfg, catalog, filt, _scope(cfg))
    out = _out(cfg)
    record = panel_record(panel, terms)
    record.update(config=_config_echo(cfg), source=filt.source_class, target=filt.target_class,
                  band=filt.band_label())
    write_panel(_jsonable(record), out / "panel.json", out / "panel.csv")
    if cfg["dump_pairs"]:
        pairs.to_csv(out / "pairs.csv")
    if terms is None:
        _insufficient(f"{panel.pair_count} pairs < {cfg['min_pairs']}")
        return EXIT_INSUFFICIENT
    return EXIT_OK


def cmd_react(cfg) -> int:
    a, b = cfg["class_a"], cfg["class_b"]
    if not a or not b:
        raise UsageError("--class-a and --class-b are required")
    catalog, _ = load_catalog(cfg)
    scope = _scope(cfg)
    _, p_ab, e_ab = _build_panel(cfg, catalog, _filter(cfg, a, b), scope)
    _, p_ba, e_ba = _build_panel(cfg, catalog, _filter(cfg, b, a), scope)
    record = {"config": _config_echo(cfg), "panel_ab": panel_record(p_ab, e_ab),
              "panel_ba": panel_record(p_ba, e_ba), "class_a": a, "class_b": b}
    status = EXIT_OK
    if e_ab is None or e_ba is None:
        record.update(r=None, classification=None, degenerate=None)
        _insufficient(f"pairs A->B {p_ab.pair_count}, B->A {p_ba.pair_count}, need {cfg['min_pairs']}")
        status = EXIT_INSUFFICIENT
    else:
        res = correlate_terms(e_ab, e_ba)
        record.update(r=res.r, classification=res.classification, degenerate=res.degenerate)
    out = _out(cfg)
    write_json(out / "react.json", record)
    with (out / "react.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_start_days", "t_end_days", "E_ab", "E_ba"])
        for i, (lo, hi) in enumerate(p_ab.edges):
            w.writerow([int(lo), int(hi), "" if e_ab is None else repr(float(e_ab[i])),
                        "" if e_ba is None else repr(float(e_ba[i]))])
    return status


def cmd_scan(cfg) -> int:
    label = cfg["klass"]
    if not label:
        raise UsageError("--class is required")
    catalog, _ = load_catalog(cfg)
    start = parse_date(cfg["window_start"]) if cfg["window_start"] else catalog.era[0]
    span = cfg["span_weeks"] or (catalog.era[1].toordinal() - start.toordinal() + 1) // 7
    rows = kld_distance_scan(
        catalog, label, cfg["distances"], start, int(span), int(cfg["samples"]),
        int(cfg["windows_per_period"]), int(cfg["window_weeks"]),
        _bin_days(cfg, True), int(cfg["seed"]), threads=int(cfg["threads"]))
    out = _out(cfg)
    with (out / "scan.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["distance_km", "mean_kld", "std_kld", "n_values"])
        for r in rows:
            w.writerow([repr(r.distance_km), repr(r.mean_kld), repr(r.std_kld), r.n_values])
    write_json(out / "scan.json", {"config": _config_echo(cfg), "span_weeks": int(span),
                                   "rows": [vars(r) for r in rows]})
    return EXIT_OK


def cmd_chain(cfg) -> int:
    b, a = cfg["provoker"], cfg["responder"]
    if not a or not b:
        raise UsageError("--provoker and --responder are required")
    catalog, _ = load_catalog(cfg)
    provoked = provoked_subset(catalog, b, a, float(cfg["response_max_km"]),
                               int(cfg["response_max_weeks"]))
    if not provoked:
        raise NoDataError(f"no provoked events: no {a} event follows {b} within "
                          f"{cfg['response_max_km']} km / {cfg['response_max_weeks']} weeks")
    virtual = f"({b}->{a})"
    chained = catalog.with_class(virtual, provoked)
    scope = _scope(cfg)
    _, p_prov, e_prov = _build_panel(cfg, chained, _filter(cfg, virtual, b), scope)
    _, p_gen, e_gen = _build_panel(cfg, catalog, _filter(cfg, a, b), scope)
    k_prov = None if e_prov is None else float(e_prov.sum())
    k_gen = None if e_gen is None else float(e_gen.sum())
    record = {
        "config": _config_echo(cfg),
        "provoked_count": len(provoked),
        "responder_count": len(catalog.class_index[a]),
        "provoked_panel": panel_record(p_prov, e_prov),
        "unprovoked_panel": panel_record(p_gen, e_gen),
        "kld_provoked": k_prov,
        "kld_unprovoked": k_gen,
        "kld_delta": None if k_prov is None or k_gen is None else k_prov - k_gen,
    }
    write_json(_out(cfg) / "chain.json", record)
    if k_prov is None or k_gen is None:
        _insufficient(f"pairs provoked {p_prov.pair_count}, unprovoked {p_gen.pair_count}, "
                      f"need {cfg['min_pairs']}")
        return EXIT_INSUFFICIENT
    return EXIT_OK


def _read_assignments(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["event_id"]: int(row["cluster"]) for row in csv.DictReader(fh)
                if row["cluster"] != DISCARDED}


def cmd_wave(cfg) -> int:
    label = cfg["klass"]
    if not label:
        raise UsageError("--class is required")
    catalog, _ = load_catalog(cfg)
    members = sorted(catalog.class_index[label])
    if cfg["assignments"]:
        assigned = _read_assignments(cfg["assignments"])
        labels = {i: assigned[i] for i in members if i in assigned}
    else:
        points = [catalog.event(i).location for i in members]
        k = cfg["k"]
        if k is None:
            k = elbow_select(points, int(cfg["k_max"]), float(cfg["elbow_threshold"]),
                             seed=int(cfg["seed"]), restarts=int(cfg["restarts"])).k_star
        model = kmeans(points, int(k), seed=int(cfg["seed"]), restarts=int(cfg["restarts"]),
                       ids=members)
        labels = model.assignments
    groups: dict[int, list] = {}
    for eid, c in labels.items():
        groups.setdefault(c, []).append(catalog.event(eid))
    if len(groups) < 3:
        raise NoDataError(f"need >= 3 clusters with {label} events, found {len(groups)}")
    centers = {c: spherical_centroid([e.location for e in evs]) for c, evs in groups.items()}
    first = {c: min(e.date for e in evs) for c, evs in groups.items()}
    origin = cfg["origin_cluster"]
    if origin is None:
        origin = min(first, key=lambda c: (first[c], c))
    if origin not in centers:
        raise UsageError(f"origin cluster {origin} has no {label} events")
    rows = [(c, first[c], great_circle_distance(centers[origin], centers[c]))
            for c in sorted(groups)]
    fit = wave_regression(rows)
    out = _out(cfg)
    write_json(out / "wave.json", {
        "config": _config_echo(cfg),
        "origin_cluster": origin,
        "points": [{"cluster": c, "first_date": d, "distance_km": km} for c, d, km in rows],
        "slope_km_per_year": fit.slope_km_per_year, "intercept_km": fit.intercept_km,
        "r": fit.r, "p": fit.p, "n": fit.n,
    })
    with (out / "wave.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "first_date", "distance_km"])
        for c, d, km in rows:
            w.writerow([c, d.isoformat(), repr(km)])
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "cluster": cmd_cluster, "panel": cmd_panel,
    "react": cmd_react, "scan": cmd_scan, "chain": cmd_chain, "wave": cmd_wave,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg)
    except InsufficientDataError as exc:
        print(f"nearwave: insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (UsageError, SchemaError, ValueError, KeyError, OSError) as exc:
        print(f"nearwave: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
