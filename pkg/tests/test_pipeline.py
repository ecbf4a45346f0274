import json
import subprocess
import sys

import pytest

from seaflow import cli, io
from seaflow.errors import BadNumber, BadParams, SchemaMismatch
from seaflow.pipeline import PipelineConfig, run_command
from seaflow.synth import generate_synthetic

SMALL = {"synth": {"n_ports": 20, "n_regions": 4, "noise": "multinomial"},
         "optim": {"max_epochs": 2}, "model": {"layers": 1}}


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- parsing -------------------------------------------------------------------------

def test_valid_ports(tmp_path):
    p = write(tmp_path / "ports.csv", "port_id,name,lat,lon,country,region\n"
              "a,A,1,2,XX,R1\nb,B,-3,190,XX,R1\nc,C,0,0,YY,R2\n")
    ports = io.load_ports(p)
    assert [x.id for x in ports] == ["a", "b", "c"]
    assert ports[1].point.lon == pytest.approx(-170.0)


def test_latitude_out_of_range(tmp_path):
    p = write(tmp_path / "ports.csv", "port_id,name,lat,lon,country,region\na,A,1,2,XX,R1\nb,B,95,2,XX,R1\n")
    with pytest.raises(BadNumber) as e:
        io.load_ports(p)
    assert e.value.line == 3 and e.value.column == "lat"


def test_missing_column(tmp_path):
    p = write(tmp_path / "trips.csv", "year,src_port,trips\n2019,a,3\n")
    with pytest.raises(SchemaMismatch) as e:
        io.load_trips(p)
    assert e.value.line == 1 and e.value.column == "dst_port"


def test_bad_number_location(tmp_path):
    p = write(tmp_path / "trips.csv", "year,src_port,dst_port,trips\n2019,a,b,3\n2019,a,b,lots\n")
    with pytest.raises(BadNumber) as e:
        io.load_trips(p)
    assert e.value.line == 3 and e.value.column == "trips"
    d = e.value.to_dict()
    assert d["line"] == 3 and "trips" in d["message"]


def test_duplicate_port_id(tmp_path):
    p = write(tmp_path / "ports.csv", "port_id,name,lat,lon,country,region\na,A,1,2,XX,R1\na,B,1,2,XX,R1\n")
    with pytest.raises(SchemaMismatch):
        io.load_ports(p)


def test_write_read_roundtrip(tmp_path):
    w = generate_synthetic(n_ports=8, n_regions=2, seed=1)
    for kind, rows, loader in [("ports", io.ports_rows(w.ports), io.load_ports),
                               ("trips", io.trips_rows(w.trips), io.load_trips)]:
        p = io.write_table(tmp_path / f"{kind}.csv", kind, rows)
        again = io.write_table(tmp_path / f"{kind}2.csv", kind,
                               io.ports_rows(loader(p)) if kind == "ports" else io.trips_rows(loader(p)))
        assert p.read_bytes() == again.read_bytes()


# -- config -------------------------------------------------------------------------

def test_config_errors(tmp_path):
    with pytest.raises(SchemaMismatch):
        PipelineConfig.load(tmp_path / "nope.json")
    with pytest.raises(SchemaMismatch):
        PipelineConfig.from_dict({"sede": 3})
    with pytest.raises(BadParams):
        PipelineConfig.from_dict({"split": "loo"})
    with pytest.raises(BadParams):
        PipelineConfig.from_dict({}).require_seed()


# -- CLI ----------------------------------------------------------------------------

def test_cli_missing_config(tmp_path, capsys):
    code = cli.main(["metrics", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)])
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "SchemaMismatch" and err["command"] == "metrics"


def test_cli_subprocess_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "seaflow.cli", "build-net", "--config", str(tmp_path / "x.json")],
                       capture_output=True, text=True)
    assert r.returncode == 1
    assert json.loads(r.stderr.strip().splitlines()[-1])["error"] == "SchemaMismatch"


def test_cli_needs_seed(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", json.dumps({"synth": {"n_ports": 6, "n_regions": 2}}))
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "w")]) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "BadParams"


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    base = tmp_path_factory.mktemp("world")
    cfg = write(base / "syn.json", json.dumps(SMALL))
    assert cli.main(["synth", "--config", str(cfg), "--seed", "3", "--out", str(base / "w")]) == 0
    return base / "w"


def test_synth_byte_identical(world, tmp_path):
    cfg = write(tmp_path / "syn.json", json.dumps(SMALL))
    assert cli.main(["synth", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "w2")]) == 0
    for name in ("ports.csv", "trips.csv", "trade.csv", "env.csv", "searoutes.csv", "truth.json"):
        assert (world / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()


@pytest.fixture(scope="module")
def runs(world, tmp_path_factory):
    out = []
    for i in range(2):
        d = tmp_path_factory.mktemp(f"run{i}")
        assert cli.main(["run-all", "--config", str(world / "config.json"), "--out", str(d)]) == 0
        out.append(d)
    return out


def test_run_all_emits_everything(runs):
    names = {p.name for p in runs[0].iterdir()}
    for f in ("network_edges.csv", "metrics.csv", "complete_edges.csv", "linkpred_model.json",
              "predicted_links.csv", "flows_pred.csv", "history.csv", "metrics_report.json",
              "risk_distribution.csv", "bwra_report.json", "manifest_run-all.json"):
        assert f in names


def test_emitted_csvs_reparse(runs):
    kinds = {"network_edges.csv": "network_edges", "metrics.csv": "metrics",
             "complete_edges.csv": "complete_edges", "predicted_links.csv": "predicted_links",
             "flows_pred.csv": "flows_pred", "history.csv": "history",
             "risk_distribution.csv": "risk_distribution"}
    for name, kind in kinds.items():
        rows = io.read_table(runs[0] / name, kind)
        assert rows, name


def test_run_all_deterministic(runs):
    for name in ("flows_pred.csv", "metrics_report.json", "risk_distribution.csv", "history.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes(), name
    m0 = json.loads((runs[0] / "manifest_run-all.json").read_text())
    m1 = json.loads((runs[1] / "manifest_run-all.json").read_text())
    assert m0["outputs"] == m1["outputs"]


def test_flows_conserve_in_run(runs, world):
    rows = io.read_table(runs[0] / "flows_pred.csv", "flows_pred")
    out_flux = {}
    for t in io.load_trips(world / "trips.csv"):
        out_flux[t.src] = out_flux.get(t.src, 0.0) + t.trips
    pred = {}
    for r in rows:
        pred[r["src_port"]] = pred.get(r["src_port"], 0.0) + r["y_pred"]
    for src, total in pred.items():
        assert total == pytest.approx(out_flux[src], rel=1e-9)


def test_stagewise_equals_run_all(world, runs, tmp_path):
    cfg = PipelineConfig.load(world / "config.json")
    for step in ("build-net", "metrics", "complete", "linkpred-train", "linkpred-predict", "gravity-train"):
        run_command(step, cfg, tmp_path)
    assert (tmp_path / "flows_pred.csv").read_bytes() == (runs[0] / "flows_pred.csv").read_bytes()
