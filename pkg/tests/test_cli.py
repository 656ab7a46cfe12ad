import csv
import datetime as dt
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from nearwave.catalog import ingest_csv, write_events_csv
from nearwave.cli import main
from nearwave.geo import GeoPoint
from nearwave.synth import load_spec, generate

from conftest import ev, gaussian_blobs

POISSON = {"kind": "poisson", "rate": 5.0, "region": {"center": [44, 33], "radius_km": 60},
           "start": "2014-02-02", "end": "2014-12-06", "class": "A"}
EXCITED = {"kind": "excited", "classes": ["A", "B"], "background": [0.3, 0.3],
           "alpha": [[0.5, 0.2], [0.2, 0.0]], "tau": 10, "sigma": 5,
           "region": {"center": [44, 33], "radius_km": 300},
           "start": "2014-02-02", "end": "2015-12-31"}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def synth(tmp_path, spec, seed=0, name="syn"):
    out = tmp_path / name
    assert main(["synth", "--spec", str(write_json(tmp_path / f"{name}.json", spec)),
                 "--seed", str(seed), "--out", str(out)]) == 0
    return out / "events.csv"


def read(path):
    return json.loads(path.read_text())


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_entry_point_help():
    exe = shutil.which("nearwave")
    cmd = [exe] if exe else [sys.executable, "-m", "nearwave.cli"]
    res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ("synth", "ingest", "cluster", "panel", "react", "scan", "chain", "wave"):
        assert name in res.stdout


def test_synth_deterministic_and_roundtrip(tmp_path):
    a = synth(tmp_path, EXCITED, seed=4, name="a")
    b = synth(tmp_path, EXCITED, seed=4, name="b")
    assert a.read_bytes() == b.read_bytes()
    spec = load_spec(tmp_path / "a.json")
    assert ingest_csv(a).events == generate(spec, 4)
    report = read(a.parent / "synth_report.json")
    assert report["events"] == sum(report["per_class"].values())


def test_ingest_report(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("id,date,lat,lon,perp1,perp2,perp3,casualties\n"
                    "a,2014-03-01,33,44,X,,,1\n"
                    "b,2014-03-01,,44,X,,,1\n"
                    "c,2014-03-02,33,44,Unknown,,,\n"
                    "d,2014-03-03,33,44,Y,,,2\n")
    assert main(["ingest", "--events", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = read(tmp_path / "o" / "ingest_report.json")
    assert rep["ingest"]["accepted"] == 3 and rep["ingest"]["rejected"] == 1
    assert rep["classified_events"] == 2 and rep["class_counts"] == {"L": 0, "X": 1, "Y": 1}


def test_ingest_schema_from_config(tmp_path):
    path = tmp_path / "gtd.csv"
    path.write_text("eventid,iyear_date,latitude,longitude,gname,nkill\n"
                    "201401010001,2014-01-01,33.3,44.4,ISIL,3\n"
                    "201401010002,2014-01-02,2.0,45.3,Al-Shabaab,\n")
    cfg = write_json(tmp_path / "cfg.json", {"schema": {
        "id": "eventid", "date": "iyear_date", "lat": "latitude", "lon": "longitude",
        "perp1": "gname", "perp2": None, "perp3": None, "casualties": "nkill"}})
    assert main(["ingest", "--config", str(cfg), "--events", str(path), "--out", str(tmp_path)]) == 0
    assert read(tmp_path / "ingest_report.json")["classified_events"] == 2


def test_hard_errors(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("id,date,lat,lon,perp1,perp2,perp3,casualties\n")
    assert main(["cluster", "--events", str(empty), "--out", str(tmp_path)]) == 1
    assert main(["panel", "--events", str(tmp_path / "missing.csv"), "--source", "A"]) == 1
    assert main(["panel", "--source", "A"]) == 1
    bad = write_json(tmp_path / "bad.json", {"nonsense": 1})
    assert main(["ingest", "--config", str(bad), "--events", str(empty)]) == 1
    assert "error" in capsys.readouterr().err


def blob_csv(tmp_path):
    centers = [GeoPoint(0, 0), GeoPoint(27, 0), GeoPoint(13.5, 23)]
    pts, _ = gaussian_blobs(centers, 150, 50.0, seed=3)
    events = [ev(f"e{i:04d}", i % 300, p.lon, p.lat, "A") for i, p in enumerate(pts)]
    # fallback-class events: one on a blob, one far from all of them
    events += [ev("l0", 5, 0.1, 0.1, "Local"), ev("l1", 6, -60.0, -30.0, "Local")]
    path = tmp_path / "blobs.csv"
    write_events_csv(events, path)
    aff = write_json(tmp_path / "aff.json", [{"actor": "A", "class": "A"}])
    return path, aff


def test_cluster_three_blobs_deterministic(tmp_path):
    path, aff = blob_csv(tmp_path)
    argv = ["cluster", "--events", str(path), "--affiliations", str(aff), "--k-max", "3",
            "--restarts", "4", "--out", str(tmp_path / "o")]
    assert main(argv) == 0
    first = snapshot(tmp_path / "o")
    rep = read(tmp_path / "o" / "cluster_report.json")
    assert rep["k_star"] == 3 and rep["elbow_found"]
    assert sorted(c["size"] for c in rep["clusters"]) == [150, 150, 150]
    assert rep["discarded"] == 1
    rows = list(csv.DictReader((tmp_path / "o" / "cluster_assignments.csv").open()))
    by_id = {r["event_id"]: r for r in rows}
    assert by_id["l0"]["method"] == "spread" and by_id["l1"]["cluster"] == "discarded"
    assert main(argv) == 0
    assert snapshot(tmp_path / "o") == first


def test_panel_poisson_null(tmp_path):
    events = synth(tmp_path, POISSON)
    out = tmp_path / "p"
    assert main(["panel", "--events", str(events), "--source", "A", "--out", str(out),
                 "--dump-pairs"]) == 0
    rec = read(out / "panel.json")
    assert rec["pair_count"] >= 10_000 and rec["kld"] < 0.01
    assert rec["band"] == "max_km=20" and rec["w_days"] == 308 and rec["bin_days"] == 14
    assert sum(b["p_hat"] for b in rec["bins"]) == pytest.approx(1.0)
    assert len((out / "pairs.csv").read_text().splitlines()) == rec["pair_count"] + 1
    first = snapshot(out)
    assert main(["panel", "--events", str(events), "--source", "A", "--out", str(out),
                 "--dump-pairs"]) == 0
    assert snapshot(out) == first


ERA = ["--era", "2014-02-02:2014-12-31"]


def small_panel_csv(tmp_path):
    # 10 events at one spot on consecutive days give C(10, 2) = 45 pairs
    events = [ev(f"e{i}", i, 44, 33) for i in range(10)]
    events += [ev(f"f{i}", 20 + i, 50, 20) for i in range(4)]  # 6 more pairs
    path = tmp_path / "small.csv"
    write_events_csv(events, path)
    return path


def test_panel_insufficient_exit(tmp_path, capsys):
    path = small_panel_csv(tmp_path)
    out = tmp_path / "p"
    assert main(["panel", "--events", str(path), "--source", "A", *ERA,
                 "--out", str(out)]) == 2
    rec = read(out / "panel.json")
    assert rec["pair_count"] == 51 and rec["sufficient"] is False and rec["kld"] is None
    assert "insufficient" in capsys.readouterr().err
    assert main(["panel", "--events", str(path), "--source", "A", *ERA,
                 "--out", str(out), "--force"]) == 0
    assert read(out / "panel.json")["kld"] > 0
    assert main(["panel", "--events", str(path), "--source", "Z", "--out", str(out)]) == 1


def test_config_overridden_by_flags(tmp_path):
    path = small_panel_csv(tmp_path)
    cfg = write_json(tmp_path / "cfg.json", {"min_km": 100, "min_pairs": 10, "era": "2014-02-02:2014-12-31"})
    out = tmp_path / "p"
    assert main(["panel", "--config", str(cfg), "--events", str(path), "--source", "A", "--out", str(out)]) == 0
    rec = read(out / "panel.json")
    assert rec["band"] == "min_km=100" and rec["config"]["min_pairs"] == 10
    assert main(["panel", "--config", str(cfg), "--events", str(path), "--source", "A", "--out", str(out),
                 "--max-km", "20", "--min-pairs", "100"]) == 2
    rec = read(out / "panel.json")
    assert rec["band"] == "max_km=20" and rec["config"]["min_pairs"] == 100
    assert rec["config"]["min_km"] is None


def test_far_band_follows_reh(tmp_path):
    events = synth(tmp_path, EXCITED)
    out = tmp_path / "p"
    assert main(["panel", "--events", str(events), "--source", "A", "--min-km", "100", "--out", str(out),
                 "--window-weeks", "44"]) == 0
    far = read(out / "panel.json")["kld"]
    assert main(["panel", "--events", str(events), "--source", "A", "--out", str(out)]) == 0
    near = read(out / "panel.json")["kld"]
    assert far < 0.02 and near > 10 * far


def test_react(tmp_path):
    events = synth(tmp_path, EXCITED)
    out = tmp_path / "r"
    argv = ["react", "--events", str(events), "--class-a", "A", "--class-b", "B", "--out", str(out)]
    assert main(argv) == 0
    rec = read(out / "react.json")
    assert -1 <= rec["r"] <= 1 and rec["classification"].endswith("correlation")
    assert rec["panel_ab"]["bin_days"] == 28
    rows = (out / "react.csv").read_text().splitlines()
    assert rows[0] == "t_start_days,t_end_days,E_ab,E_ba" and len(rows) == 1 + 11
    first = snapshot(out)
    assert main(argv) == 0 and snapshot(out) == first


def test_scan(tmp_path):
    events = synth(tmp_path, POISSON)
    out = tmp_path / "s"
    argv = ["scan", "--events", str(events), "--class", "A", "--distances", "10,20,40",
            "--window-weeks", "8", "--span-weeks", "40", "--samples", "3", "--windows-per-period", "4",
            "--out", str(out), "--threads", "2"]
    assert main(argv) == 0
    rows = list(csv.DictReader((out / "scan.csv").open()))
    assert [float(r["distance_km"]) for r in rows] == [10, 20, 40]
    assert all(float(r["mean_kld"]) < 0.05 and int(r["n_values"]) == 12 for r in rows)
    first = snapshot(out)
    assert main(argv) == 0 and snapshot(out) == first
    assert main(argv[:-4] + ["--span-weeks", "10", "--out", str(out)]) == 1


CHAIN = {"kind": "excited", "classes": ["A", "B"], "background": [0.5, 0.5],
         "alpha": [[0, 0.3], [0.3, 0]], "region": {"center": [44, 33], "radius_km": 100},
         "start": "2014-01-01", "end": "2017-07-26"}


@pytest.mark.parametrize("boost", [1.0, 2.5])
def test_chain(tmp_path, boost):
    events = synth(tmp_path, dict(CHAIN, chain_boost=boost))
    out = tmp_path / "c"
    argv = ["chain", "--events", str(events), "--provoker", "B", "--responder", "A",
            "--window-start", "2014-03-12", "--out", str(out)]
    assert main(argv) == 0
    rec = read(out / "chain.json")
    assert rec["provoked_count"] > 0 and rec["provoked_panel"]["bin_days"] == 28
    assert rec["kld_delta"] == pytest.approx(rec["kld_provoked"] - rec["kld_unprovoked"])
    if boost == 1.0:
        assert abs(rec["kld_delta"]) < 0.02
    else:
        assert rec["kld_delta"] > 0
    first = snapshot(out)
    assert main(argv) == 0 and snapshot(out) == first


def test_chain_no_provoked(tmp_path, capsys):
    events = [ev("b", 0, 44, 33, "B"), ev("a", 100, 44, 33, "A")]
    path = tmp_path / "e.csv"
    write_events_csv(events, path)
    assert main(["chain", "--events", str(path), "--provoker", "B", "--responder", "A",
                 "--out", str(tmp_path)]) == 2
    assert "no provoked events" in capsys.readouterr().err


def wave_csv(tmp_path, n_clusters=6, speed=2400.0):
    rng = np.random.default_rng(0)
    events = []
    start = dt.date(2014, 1, 1)
    for c in range(n_clusters):
        km = 1500.0 * c
        lon = np.degrees(km / 6373.0)
        years = km / speed * (1 + 0.05 * rng.normal())
        first = max(0, int(round(years * 365.25)))
        pts, _ = gaussian_blobs([GeoPoint(lon, 0)], 20, 30.0, seed=c)
        for j, p in enumerate(pts):
            events.append(ev(f"c{c}-{j:02d}", first + 3 * j, p.lon, p.lat, "W", start=start))
    path = tmp_path / "wave.csv"
    write_events_csv(events, path)
    return path


def test_wave(tmp_path):
    path = wave_csv(tmp_path)
    out = tmp_path / "w"
    argv = ["wave", "--events", str(path), "--class", "W", "--k", "6", "--restarts", "4", "--out", str(out)]
    assert main(argv) == 0
    rec = read(out / "wave.json")
    assert rec["n"] == 6 and rec["p"] < 0.01
    assert rec["slope_km_per_year"] == pytest.approx(2400, rel=0.15)
    first = snapshot(out)
    assert main(argv) == 0 and snapshot(out) == first
    # too few clusters
    assert main(argv[:-4] + ["--k", "2", "--out", str(out)]) == 2


def test_wave_reuses_assignments(tmp_path):
    path = wave_csv(tmp_path)
    assign = tmp_path / "assign.csv"
    rows = ["event_id,cluster,method"]
    for e in ingest_csv(path).events:
        rows.append(f"{e.id},{int(e.id[1])},kmeans")
    assign.write_text("\n".join(rows) + "\n")
    out = tmp_path / "w"
    assert main(["wave", "--events", str(path), "--class", "W", "--assignments", str(assign),
                 "--origin-cluster", "0", "--out", str(out)]) == 0
    rec = read(out / "wave.json")
    assert [p["cluster"] for p in rec["points"]] == list(range(6))
    assert rec["points"][0]["distance_km"] == pytest.approx(0.0, abs=20)


def test_panel_scope_by_cluster(tmp_path):
    path, aff = blob_csv(tmp_path)
    assert main(["cluster", "--events", str(path), "--affiliations", str(aff), "--k-max", "3",
                 "--restarts", "4", "--out", str(tmp_path)]) == 0
    counts = []
    for c in range(3):
        assert main(["panel", "--events", str(path), "--affiliations", str(aff), "--source", "A",
                     "--scope-assignments", str(tmp_path / "cluster_assignments.csv"),
                     "--scope-cluster", str(c), "--max-km", "100", "--min-pairs", "1", *ERA,
                     "--out", str(tmp_path / f"s{c}")]) == 0
        counts.append(read(tmp_path / f"s{c}" / "panel.json")["pair_count"])
    assert main(["panel", "--events", str(path), "--affiliations", str(aff), "--source", "A",
                 "--max-km", "100", "--min-pairs", "1", *ERA, "--out", str(tmp_path / "all")]) == 0
    # blobs are ~3000 km apart, so every close pair lies inside one cluster
    assert sum(counts) == read(tmp_path / "all" / "panel.json")["pair_count"]
