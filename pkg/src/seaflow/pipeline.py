"""Configuration and the stage commands behind the ``seaflow`` CLI.

Each command reads its inputs from the configured paths or from earlier
stages' outputs in the run directory, writes its declared artifacts, and
records a ``manifest_<command>.json`` with input/output hashes, the seed
and library versions.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, bwra, evalkit, io, linkpred, shipnet
from . import tensorcore as tc
from .errors import BadParams, SchemaMismatch
from .geo import DistanceProvider
from .gravity import ModelConfig, OptimConfig, assemble_samples, train
from .gravity.training import export_params
from .seeding import sub_seed
from .synth import GravityParams, generate_synthetic

log = logging.getLogger(__name__)

INPUT_KINDS = ("ports", "trips", "trade", "env", "searoutes")


@dataclass
class PipelineConfig:
    base_dir: Path
    inputs: dict
    seed: int | None = None
    pseudo_weight: float = shipnet.DEFAULT_PSEUDO_WEIGHT
    epsilon: float = 1e-12
    distance: dict = field(default_factory=lambda: {"mode": "haversine", "factor": 1.0})
    centrality_weight_mode: str = "trips"
    linkpred: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    optim: dict = field(default_factory=dict)
    split: str = "cv5"
    train_years: list | None = None
    test_years: list | None = None
    bwra: dict = field(default_factory=lambda: {"bin_width": 1.0, "standardize": False})
    synth: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise SchemaMismatch(f"config file {path} does not exist", path=str(path))
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise SchemaMismatch(f"config {path} is not valid JSON: {e.msg}", path=str(path), line=e.lineno) from None
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "PipelineConfig":
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise SchemaMismatch(f"unknown config keys {sorted(unknown)}")
        cfg = cls(base_dir=Path(base_dir), inputs=dict(raw.get("inputs", {})),
                  **{k: v for k, v in raw.items() if k != "inputs"})
        cfg.model_config()
        if cfg.split not in ("cv5", "train_test"):
            raise BadParams(f"split must be cv5 or train_test, got {cfg.split!r}")
        return cfg

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "base_dir"}

    def path(self, kind: str) -> Path | None:
        p = self.inputs.get(kind)
        return None if p is None else (self.base_dir / p)

    def require(self, kind: str) -> Path:
        p = self.path(kind)
        if p is None:
            raise SchemaMismatch(f"config has no input path for {kind!r}")
        if not p.exists():
            raise SchemaMismatch(f"input file {p} does not exist", path=str(p))
        return p

    def require_seed(self) -> int:
        if self.seed is None:
            raise BadParams("this command needs a seed (config 'seed' or --seed)")
        return int(self.seed)

    def provider(self) -> DistanceProvider:
        mode = self.distance.get("mode", "haversine")
        if mode == "table":
            return DistanceProvider(mode="table", table=io.load_searoutes(self.require("searoutes")))
        return DistanceProvider(mode=mode, factor=float(self.distance.get("factor", 1.0)))

    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.model)

    def optim_config(self) -> OptimConfig:
        return OptimConfig(**self.optim)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dump_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_manifest(out: Path, command: str, cfg: PipelineConfig | None, inputs, outputs, seed=None) -> Path:
    manifest = {
        "command": command,
        "seed": seed,
        "inputs": {Path(p).name: sha256(p) for p in inputs if p is not None and Path(p).exists()},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "versions": {"seaflow": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "config": cfg.to_dict() if cfg is not None else None,
    }
    return dump_json(out / f"manifest_{command}.json", manifest)


# ---------------------------------------------------------------------------
# shared loading

def _network(cfg: PipelineConfig, years=None):
    ports = io.load_ports(cfg.require("ports"))
    trips = io.load_trips(cfg.require("trips"))
    return shipnet.build_network(trips, ports, years=years)


def _out_or_input(cfg, out: Path, name: str) -> Path:
    p = out / name
    if not p.exists():
        raise SchemaMismatch(f"{name} not found in {out}; run the producing stage first", path=str(p))
    return p


def _load_metrics(path) -> shipnet.NodeMetrics:
    rows = io.read_table(path, "metrics")
    return shipnet.NodeMetrics(
        betweenness={r["port_id"]: r["betweenness"] for r in rows},
        closeness={r["port_id"]: r["closeness"] for r in rows},
        pagerank={r["port_id"]: r["pagerank"] for r in rows},
        straightness={r["port_id"]: r["straightness"] for r in rows},
        betweenness_norm={r["port_id"]: r["betweenness_norm"] for r in rows},
    )


def _load_complete(path, ports) -> shipnet.CompleteNetwork:
    rows = io.read_table(path, "complete_edges")
    return shipnet.CompleteNetwork(
        src=[r["src"] for r in rows], dst=[r["dst"] for r in rows],
        real=np.array([r["label"] == "real" for r in rows], dtype=bool),
        weight=np.array([r["weight"] for r in rows]),
        haversine_km=np.array([r["haversine_km"] for r in rows]),
        sea_km=np.array([r["sea_km"] for r in rows]),
        edge_importance=np.array([r["edge_importance"] for r in rows]),
        ports=ports,
    )


# ---------------------------------------------------------------------------
# commands

def cmd_synth(cfg: PipelineConfig, out: Path) -> list:
    seed = cfg.require_seed()
    s = dict(cfg.synth)
    params = GravityParams(**{k: s.pop(k) for k in list(s) if k in GravityParams.__dataclass_fields__})
    world = generate_synthetic(params=params, seed=seed, **s)
    files = [
        io.write_table(out / "ports.csv", "ports", io.ports_rows(world.ports)),
        io.write_table(out / "trips.csv", "trips", io.trips_rows(world.trips)),
        io.write_table(out / "trade.csv", "trade", io.trade_rows(world.trade)),
        io.write_table(out / "env.csv", "env", io.env_rows(world.env)),
        io.write_table(out / "searoutes.csv", "searoutes", io.searoutes_rows(world.sea_km)),
        dump_json(out / "truth.json", world.truth),
    ]
    run_cfg = {k: v for k, v in cfg.to_dict().items() if k != "synth"}
    run_cfg["inputs"] = {k: f"{k}.csv" for k in INPUT_KINDS}
    run_cfg["seed"] = seed
    files.append(dump_json(out / "config.json", run_cfg))
    write_manifest(out, "synth", cfg, [], files, seed)
    return files


def cmd_build_net(cfg: PipelineConfig, out: Path) -> list:
    net = _network(cfg)
    rows = [(s, d, float(w)) for (s, d), w in net.edges.items()]
    files = [io.write_table(out / "network_edges.csv", "network_edges", rows)]
    log.info("network: %d ports, %d edges, %.0f trips", len(net), len(net.edges), net.total_trips())
    write_manifest(out, "build-net", cfg, [cfg.path("ports"), cfg.path("trips")], files)
    return files


def cmd_metrics(cfg: PipelineConfig, out: Path) -> list:
    net = _network(cfg)
    m = shipnet.node_metrics(net, cfg.centrality_weight_mode)
    rows = [(p, m.betweenness[p], m.closeness[p], m.pagerank[p], m.straightness[p], m.betweenness_norm[p])
            for p in net.ports]
    files = [io.write_table(out / "metrics.csv", "metrics", rows)]
    write_manifest(out, "metrics", cfg, [cfg.path("ports"), cfg.path("trips")], files)
    return files


def cmd_complete(cfg: PipelineConfig, out: Path) -> list:
    net = _network(cfg)
    cn = shipnet.edge_importance(shipnet.make_complete(net, cfg.pseudo_weight, cfg.provider()), cfg.epsilon)
    rows = zip(cn.src, cn.dst, cn.labels(), cn.weight.tolist(), cn.haversine_km.tolist(),
               cn.sea_km.tolist(), cn.edge_importance.tolist())
    files = [io.write_table(out / "complete_edges.csv", "complete_edges", rows)]
    write_manifest(out, "complete", cfg, [cfg.path("ports"), cfg.path("trips"), cfg.path("searoutes")], files)
    return files


def cmd_linkpred_train(cfg: PipelineConfig, out: Path) -> list:
    seed = cfg.require_seed()
    ports = {p.id: p for p in io.load_ports(cfg.require("ports"))}
    src = _out_or_input(cfg, out, "complete_edges.csv")
    cn = _load_complete(src, ports)
    if cfg.linkpred.get("balance", True):
        cn = shipnet.stratified_sample_pseudo(cn, sub_seed(seed, "linkpred.sample"))
    X, y, _ = linkpred.link_rows(cn)
    k = int(cfg.linkpred.get("k", 5))
    log_features = bool(cfg.linkpred.get("log_features", True))
    search = linkpred.grid_search_cv(X, y, cfg.linkpred.get("grid"), k=k, seed=sub_seed(seed, "linkpred.folds"),
                                     log_features=log_features)
    model = linkpred.fit_logistic(X, y, seed=sub_seed(seed, "linkpred.fit"), log_features=log_features,
                                  **search["best"])
    _, pred = linkpred.predict_links(model, X)
    report = linkpred.classification_report(pred, y)
    payload = {
        "model": model.to_dict(),
        "best": search["best"],
        "cv_fold_accuracies": search["fold_accuracies"],
        "cv_mean_accuracy": search["mean_accuracy"],
        "grid": search["points"],
        "train_accuracy": report["accuracy"],
        "train_confusion": report["confusion"],
        "n_rows": int(len(y)),
    }
    files = [dump_json(out / "linkpred_model.json", payload)]
    write_manifest(out, "linkpred-train", cfg, [src], files, seed)
    return files


def cmd_linkpred_predict(cfg: PipelineConfig, out: Path) -> list:
    ports = {p.id: p for p in io.load_ports(cfg.require("ports"))}
    src = _out_or_input(cfg, out, "complete_edges.csv")
    model_path = _out_or_input(cfg, out, "linkpred_model.json")
    cn = _load_complete(src, ports)
    model = linkpred.LogisticModel.from_dict(json.loads(model_path.read_text())["model"])
    X, _, pairs = linkpred.link_rows(cn)
    prob, label = linkpred.predict_links(model, X)
    rows = [(s, d, float(p), int(lab)) for (s, d), p, lab in zip(pairs, prob, label)]
    files = [io.write_table(out / "predicted_links.csv", "predicted_links", rows)]
    write_manifest(out, "linkpred-predict", cfg, [src, model_path], files)
    return files


def _samples(cfg, links, metrics, years=None):
    net = _network(cfg, years)
    trade = io.load_trade(cfg.require("trade")) if cfg.path("trade") else {}
    provider = cfg.provider()
    # links for ports with no activity in the period contribute nothing
    return assemble_samples(links, net, metrics, trade, provider=provider)


def cmd_gravity_train(cfg: PipelineConfig, out: Path) -> list:
    seed = cfg.require_seed()
    links_path = _out_or_input(cfg, out, "predicted_links.csv")
    metrics_path = _out_or_input(cfg, out, "metrics.csv")
    links = io.load_predicted_links(links_path)
    metrics = _load_metrics(metrics_path)
    mcfg, ocfg = cfg.model_config(), cfg.optim_config()
    if cfg.split == "train_test":
        train_years = cfg.train_years or [2017, 2018]
        test_years = cfg.test_years or [2019]
        tr = _samples(cfg, links, metrics, (min(train_years), max(train_years)))
        te = _samples(cfg, links, metrics, (min(test_years), max(test_years)))
        result = train(mcfg, tr, "train_test", sub_seed(seed, "gravity"), ocfg, test_samples=te)
    else:
        samples = _samples(cfg, links, metrics)
        result = train(mcfg, samples, "cv5", sub_seed(seed, "gravity"), ocfg)

    flows = io.write_table(out / "flows_pred.csv", "flows_pred", [r[:4] for r in result.predictions])
    history = io.write_table(out / "history.csv", "history", [
        (mcfg.family, h["fold"], h["epoch"], h["train_loss"], h["val_cpc"], h["lr"], h["lr_reduced"])
        for h in result.history_rows()
    ])
    folds = dump_json(out / "folds.json", {r[0]: r[4] for r in result.predictions})
    files = [flows, history, folds]
    for f, fit in enumerate(result.fits):
        if fit.params is not None:
            ckpt = out / f"model_fold{f}.ckpt"
            tc.save_checkpoint(ckpt, export_params(fit))
            files.append(ckpt)
    files.append(dump_json(out / "gravity_model.json", {
        "model": mcfg.to_dict(), "optim": ocfg.to_dict(), "split": cfg.split,
        "fold_cpc": result.fold_cpc, "mean_cpc": result.mean_cpc,
        "scalers": [fit.scaler.to_dict() for fit in result.fits],
        "best_epochs": [fit.best_epoch for fit in result.fits],
        "lr_events": [fit.lr_events for fit in result.fits],
    }))
    write_manifest(out, "gravity-train", cfg, [links_path, metrics_path, cfg.path("trips"), cfg.path("trade")],
                   files, seed)
    return files


def cmd_gravity_eval(cfg: PipelineConfig, out: Path) -> list:
    flows_path = _out_or_input(cfg, out, "flows_pred.csv")
    rows = io.read_table(flows_path, "flows_pred")
    folds_path = out / "folds.json"
    fold_of = json.loads(folds_path.read_text()) if folds_path.exists() else {}
    grouped = {}
    for r in rows:
        grouped.setdefault(fold_of.get(r["src_port"], "all"), []).append((r["src_port"], r["y_true"], r["y_pred"]))
    folds = {name: evalkit.FlowComparison.from_rows(rs) for name, rs in sorted(grouped.items())}
    report = evalkit.report(folds)
    files = [dump_json(out / "metrics_report.json", report)]
    write_manifest(out, "gravity-eval", cfg, [flows_path, folds_path], files)
    return files


def cmd_bwra(cfg: PipelineConfig, out: Path) -> list:
    env = io.load_env(cfg.require("env"))
    net = _network(cfg)
    opts = {"bin_width": 1.0, "standardize": False, **cfg.bwra}
    bins = opts.get("bins") or bwra.default_bins(env, float(opts["bin_width"]), bool(opts["standardize"]))
    true_flows = [(s, d, float(w)) for (s, d), w in net.edges.items()]
    dists = [bwra.risk_distribution(true_flows, env, bins, "true", bool(opts["standardize"]))]
    flows_path = out / "flows_pred.csv"
    report = {"bins": [float(b) for b in bins], "true_mass": dists[0].total}
    if flows_path.exists():
        family = cfg.model_config().family
        model_rows = [(r["src_port"], r["dest_region"], r["y_pred"]) for r in io.read_table(flows_path, "flows_pred")]
        modeled = bwra.disaggregate(model_rows, net)
        dists.append(bwra.risk_distribution(modeled, env, bins, family, bool(opts["standardize"])))
        report["model"] = family
        report["model_mass"] = dists[1].total
        try:
            report["correlation"] = bwra.compare_distributions(dists[0], dists[1])
        except bwra.DegenerateDistribution as e:
            report["correlation"] = None
            report["correlation_error"] = str(e)
    rows = [row for d in dists for row in d.rows()]
    files = [io.write_table(out / "risk_distribution.csv", "risk_distribution", rows),
             dump_json(out / "bwra_report.json", report)]
    write_manifest(out, "bwra", cfg, [cfg.path("env"), cfg.path("trips"), flows_path], files)
    return files


COMMANDS = {
    "synth": cmd_synth,
    "build-net": cmd_build_net,
    "metrics": cmd_metrics,
    "complete": cmd_complete,
    "linkpred-train": cmd_linkpred_train,
    "linkpred-predict": cmd_linkpred_predict,
    "gravity-train": cmd_gravity_train,
    "gravity-eval": cmd_gravity_eval,
    "bwra": cmd_bwra,
}

RUN_ALL = ("build-net", "metrics", "complete", "linkpred-train", "linkpred-predict",
           "gravity-train", "gravity-eval", "bwra")


def run_command(name: str, cfg: PipelineConfig, out) -> list:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if name == "run-all":
        cfg.require_seed()
        files = []
        for step in RUN_ALL:
            log.info("run-all: %s", step)
            files.extend(COMMANDS[step](cfg, out))
        write_manifest(out, "run-all", cfg, [cfg.path(k) for k in INPUT_KINDS], files, cfg.seed)
        return files
    if name not in COMMANDS:
        raise BadParams(f"unknown command {name!r}")
    return COMMANDS[name](cfg, out)
