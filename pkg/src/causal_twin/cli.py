"""Command-line entry point: ``causal-twin <command> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 validation gate
failure (twin rejected), 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

from .artifacts import ArtifactError
from .attribution import per_feature_drift_sweep, rank_features
from .classifiers import GBT, RANDOM_FOREST, evaluate, load_model, save_model, train
from .config import ConfigError, PipelineConfig, load_config
from .discovery import PcConfig, PcTrace, finalize_dag, pc_discover
from .drift import (DriftScenario, bootstrap_breaking_point, breaking_point,
                    run_scenario, write_bootstrap_csv)
from .graph import BackgroundKnowledge, GraphError, MixedGraph, structural_hamming_distance
from .monitors import MonitorConfig, monitor_stream
from .reporting import PlotDataError, RunManifest, config_hash, emit_curve_plotdata
from .scm import FitConfig, FitError, Scm, fit_scm, load_scm, sample, save_scm
from .tabular import (Dataset, IngestError, SchemaError, SplitSpec, ingest_csv,
                      load_missing_policy, load_schema, split)
from .validation import validate_twin

logger = logging.getLogger("causal_twin")

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_RUNTIME = 0, 2, 3, 4


class GateFailure(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} path is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def read_data(csv_path: str | Path, schema_path: str | Path) -> Dataset:
    schema = load_schema(_require(schema_path, "schema"))
    return ingest_csv(_require(csv_path, "data"), schema, load_missing_policy(schema_path))


def read_data_for(scm: Scm, csv_path: str | Path) -> Dataset:
    return ingest_csv(_require(csv_path, "data"), scm.columns)


def _json_out(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@contextmanager
def _timed(manifest: RunManifest, label: str):
    t0 = time.perf_counter()
    yield
    manifest.timing[label] = round(time.perf_counter() - t0, 3)


def _finish(manifest: RunManifest, path: str | None) -> None:
    if path:
        manifest.write(path)


def _args_hash(args) -> str:
    return config_hash({k: v for k, v in vars(args).items() if not callable(v)})


def _seed(args, default: int = 0) -> int:
    return default if args.seed is None else args.seed


def discover_graph(ds: Dataset, pc: PcConfig, bk: BackgroundKnowledge | None,
                   orientation: str) -> tuple[MixedGraph, PcTrace]:
    trace = PcTrace()
    g = pc_discover(ds, bk, pc, trace)
    if orientation != "none":
        g = finalize_dag(g, orientation, bk)
    return g, trace


def _graph_doc(g: MixedGraph, trace: PcTrace, reference: MixedGraph | None) -> dict:
    doc = g.to_dict()
    doc["n_tests"] = trace.n_tests
    if reference is not None:
        doc["shd_vs_reference"] = structural_hamming_distance(g, reference)
    return doc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_discover(args) -> int:
    ds = read_data(args.data, args.schema)
    bk = BackgroundKnowledge.load(_require(args.constraints, "constraints")) \
        if args.constraints else None
    pc = PcConfig(alpha=args.alpha, max_cond_set=args.max_cond_set, ci_test=args.ci_test)
    m = RunManifest("discover", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "discover"):
        g, trace = discover_graph(ds, pc, bk, args.orientation)
    ref = MixedGraph.load(_require(args.reference, "reference graph")) if args.reference else None
    _json_out(args.out, _graph_doc(g, trace, ref))
    m.add_input("data", args.data)
    m.add_output("graph", args.out)
    _finish(m, args.manifest)
    return EXIT_OK


def cmd_fit(args) -> int:
    ds = read_data(args.data, args.schema)
    g = MixedGraph.load(_require(args.graph, "graph"))
    sigma = args.noise_sigma if args.noise_sigma == "matched" else float(args.noise_sigma)
    cfg = FitConfig(seed=_seed(args), noise_sigma=sigma, link_noise=args.link_noise,
                    center_parents=not args.no_center)
    m = RunManifest("fit", _args_hash(args), {"seed": cfg.seed})
    with _timed(m, "fit"):
        scm = fit_scm(ds, g, cfg)
    save_scm(scm, args.out)
    m.add_input("data", args.data)
    m.add_input("graph", args.graph)
    m.add_output("scm", args.out)
    _finish(m, args.manifest)
    return EXIT_OK


def cmd_validate(args) -> int:
    scm = load_scm(_require(args.scm, "scm"))
    real = read_data_for(scm, args.data)
    models = [load_model(_require(p, "model")) for p in args.model or ()]
    valid = read_data_for(scm, args.valid) if args.valid else None
    target = args.target or (models[0].target if models else None)
    m = RunManifest("validate", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "validate"):
        rep = validate_twin(scm, real, valid, models, target, args.n_mc, _seed(args),
                            args.rmsea_threshold, args.gap_tolerance)
    rep.to_csv(args.out)
    m.add_output("validation", args.out)
    _finish(m, args.manifest)
    if not rep.accepted:
        raise GateFailure(f"twin rejected (RMSEA {rep.fit.rmsea:.4f}); see {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = read_data(args.data, args.schema)
    m = RunManifest("train", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "train"):
        model = train(ds, args.target, args.kind, seed=_seed(args))
    save_model(model, args.out)
    m.add_input("data", args.data)
    m.add_output("model", args.out)
    _finish(m, args.manifest)
    return EXIT_OK


def _load_scenario(path) -> DriftScenario:
    try:
        return DriftScenario.load(_require(path, "scenario"))
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ConfigError(f"scenario {path}: {e}") from None


def cmd_simulate(args) -> int:
    scm = load_scm(_require(args.scm, "scm"))
    model = load_model(_require(args.model, "model"))
    sc = _load_scenario(args.scenario)
    m = RunManifest("simulate", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "simulate"):
        curve = run_scenario(scm, model, sc, _seed(args))
    curve.write_stream_csv(args.out)
    steps_out = args.steps_out or str(Path(args.out).with_suffix("")) + "_steps.csv"
    curve.write_steps_csv(steps_out)
    m.add_output("curve", args.out)
    m.add_output("steps", steps_out)
    for rule in ("consecutive_steps", "rwa_consistent"):
        bp = breaking_point(curve, sc.threshold, rule)
        m.outputs[f"breaking_point_{rule}"] = {"found": bp.found, "step": bp.step,
                                               "delta_crit": bp.delta_crit if bp.found else None}
    _finish(m, args.manifest)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    scm = load_scm(_require(args.scm, "scm"))
    model = load_model(_require(args.model, "model"))
    sc = _load_scenario(args.scenario)
    m = RunManifest("bootstrap", _args_hash(args), {"base_seed": _seed(args)})
    with _timed(m, "bootstrap"):
        summary = bootstrap_breaking_point(scm, model, sc, args.replications, _seed(args))
    write_bootstrap_csv(summary, args.out)
    m.add_output("bootstrap", args.out)
    _finish(m, args.manifest)
    return EXIT_OK


def _monitor_config(path) -> MonitorConfig:
    if not path:
        return MonitorConfig()
    doc = json.loads(_require(path, "monitor config").read_text(encoding="utf-8"))
    try:
        return MonitorConfig(**doc)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"monitor config {path}: {e}") from None


def run_monitors(scm: Scm, model, sc: DriftScenario, cfg: MonitorConfig, seed: int,
                 reference: Dataset | None = None):
    curve = run_scenario(scm, model, sc, seed, stream=False, keep_step_data=True)
    if reference is None:
        reference = sample(scm, cfg.reference_n, (seed, 4))
    return monitor_stream(curve.step_data, reference, cfg, model.target, curve.deltas,
                          curve.step_metric("precision"), curve.step_metric("f1"))


def cmd_monitor(args) -> int:
    scm = load_scm(_require(args.scm, "scm"))
    model = load_model(_require(args.model, "model"))
    sc = _load_scenario(args.scenario)
    cfg = _monitor_config(args.config)
    ref = read_data_for(scm, args.reference) if args.reference else None
    m = RunManifest("monitor", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "monitor"):
        rep = run_monitors(scm, model, sc, cfg, _seed(args), ref)
    rep.to_csv(args.out)
    m.add_output("monitors", args.out)
    m.outputs["footnote"] = rep.footnote
    _finish(m, args.manifest)
    return EXIT_OK


def run_attribution(scm: Scm, model, ds: Dataset, sc: DriftScenario, top_k: int, n_rows: int,
                    n_perms: int, seed: int):
    ranking = rank_features(model, ds, min(n_rows, ds.n_rows), n_perms, seed)
    return per_feature_drift_sweep(scm, model, ranking[:top_k], model.target, sc,
                                   sc.targets[0][2], seed)


def cmd_attribute(args) -> int:
    scm = load_scm(_require(args.scm, "scm"))
    model = load_model(_require(args.model, "model"))
    if args.target and args.target != model.target:
        raise ConfigError(f"model predicts {model.target!r}, not {args.target!r}")
    ds = read_data_for(scm, args.data)
    sc = _load_scenario(args.scenario) if args.scenario else \
        DriftScenario(((model.target, model.features[0], -0.5),))
    m = RunManifest("attribute", _args_hash(args), {"seed": _seed(args)})
    with _timed(m, "attribute"):
        rep = run_attribution(scm, model, ds, sc, args.top_k, args.n_rows, args.n_perms,
                              _seed(args))
    rep.to_csv(args.out)
    m.add_output("attribution", args.out)
    _finish(m, args.manifest)
    return EXIT_OK


def cmd_plot(args) -> int:
    metrics = tuple(args.metrics.split(",")) if args.metrics else ("precision", "recall", "f1")
    emit_curve_plotdata(_require(args.curve, "curve"), args.out, metrics, args.svg, args.tau,
                        metrics[0])
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

class _Stage:
    """Writes into ``*.partial`` files and renames them once the stage succeeds."""

    def __init__(self, name: str, out: Path, manifest: RunManifest):
        self.name, self.out, self.manifest = name, out, manifest
        self.files: list[tuple[Path, str]] = []

    def path(self, filename: str, label: str | None = None) -> Path:
        p = self.out / (filename + ".partial")
        self.files.append((p, label or Path(filename).stem))
        return p

    def commit(self) -> None:
        for p, label in self.files:
            final = p.with_suffix("")
            os.replace(p, final)
            self.manifest.add_output(label, final)


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path, seed: int | None = None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    ds = read_data(cfg.data.csv, cfg.data.schema)
    if cfg.data.target not in ds.names:
        raise ConfigError(f"target {cfg.data.target!r} is not a column of {cfg.data.csv}")
    bk = None
    if cfg.discover.constraints:
        bk = BackgroundKnowledge.load(_require(cfg.discover.constraints, "constraints"))
    ref = None
    if cfg.discover.reference_graph:
        ref = MixedGraph.load(_require(cfg.discover.reference_graph, "reference graph"))

    manifest = RunManifest("pipeline", config_hash(cfg.raw), {"seed": seed})
    manifest.add_input("data", cfg.data.csv)
    manifest.add_input("schema", cfg.data.schema)
    spec = SplitSpec(cfg.split.train_fraction, cfg.split.seed,
                     cfg.data.target if cfg.stratify else None)
    tr, va = split(ds, spec)
    state: dict = {"full": ds}
    gate_failed = False
    for name in cfg.stages:
        stage = _Stage(name, out, manifest)
        t0 = time.perf_counter()
        try:
            gate_failed = _run_stage(name, stage, cfg, state, tr, va, bk, ref, seed)
        except (ConfigError, GateFailure):
            raise
        except Exception as e:  # noqa: BLE001 - reported with the stage name
            manifest.timing[name] = round(time.perf_counter() - t0, 3)
            manifest.write(out / "manifest.json")
            raise StageError(name, e) from e
        stage.commit()
        manifest.timing[name] = round(time.perf_counter() - t0, 3)
        if gate_failed:
            break
    manifest.write(out / "manifest.json")
    if gate_failed:
        raise GateFailure(f"twin rejected; see {out / 'validation.csv'}")
    return EXIT_OK


def _run_stage(name, stage: _Stage, cfg: PipelineConfig, state: dict, tr: Dataset, va: Dataset,
               bk, ref, seed: int) -> bool:
    target = cfg.data.target
    if name == "discover":
        g, trace = discover_graph(state["full"], cfg.discover.pc, bk, cfg.discover.orientation)
        if not g.is_dag:
            raise GraphError("discovery left undirected edges; set orientation to lexicographic")
        _json_out(stage.path("graph.json"), _graph_doc(g, trace, ref))
        state["graph"] = g
    elif name == "fit":
        fc = cfg.fit
        scm = fit_scm(tr, state["graph"], FitConfig(**{**fc.__dict__, "seed": seed}))
        save_scm(scm, stage.path("scm.json"))
        state["scm"] = scm
    elif name == "train":
        hp = {GBT: cfg.train.gbt, RANDOM_FOREST: cfg.train.random_forest}
        state["models"] = {}
        for kind in cfg.train.kinds:
            model = train(tr, target, kind, hp[kind], seed)
            save_model(model, stage.path(f"model_{kind}.json"))
            state["models"][kind] = model
        state["model"] = state["models"][cfg.train.primary]
    elif name == "validate":
        v = cfg.validate
        rep = validate_twin(state["scm"], tr, va, list(state["models"].values()), target,
                            v.n_mc, seed, v.rmsea_threshold, v.gap_tolerance)
        rep.to_csv(stage.path("validation.csv"))
        baseline = {k: evaluate(mdl, va).as_dict() for k, mdl in state["models"].items()}
        _json_out(stage.path("baseline_metrics.json"), baseline)
        return not rep.accepted
    elif name == "simulate":
        curve = run_scenario(state["scm"], state["model"], cfg.scenario, seed)
        curve.write_stream_csv(stage.path("curve.csv"))
        curve.write_steps_csv(stage.path("curve_steps.csv"))
        bps = {}
        for rule in ("consecutive_steps", "rwa_consistent"):
            bp = breaking_point(curve, cfg.scenario.threshold, rule)
            bps[rule] = {"found": bp.found, "step": bp.step,
                         "delta_crit": bp.delta_crit if bp.found else None}
        _json_out(stage.path("breaking_point.json"), bps)
        emit_curve_plotdata(stage.files[0][0], stage.path("plot.csv"),
                            ("precision", "recall", "f1"), stage.path("plot.svg", "plot_svg"),
                            cfg.scenario.threshold.value
                            if cfg.scenario.threshold.metric == "precision" else None)
    elif name == "bootstrap":
        summary = bootstrap_breaking_point(state["scm"], state["model"], cfg.scenario,
                                           cfg.bootstrap_replications, seed)
        write_bootstrap_csv(summary, stage.path("bootstrap.csv"))
    elif name == "monitor":
        rep = run_monitors(state["scm"], state["model"], cfg.scenario, cfg.monitor, seed)
        rep.to_csv(stage.path("monitors.csv"))
    elif name == "attribute":
        a = cfg.attribute
        rep = run_attribution(state["scm"], state["model"], tr, cfg.scenario, a.top_k,
                              a.n_rows, a.n_perms, seed)
        rep.to_csv(stage.path("attribution.csv"))
    return False


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    return run_pipeline(cfg, args.out_dir, args.seed)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; every stage runs in one process")
    common.add_argument("--verbose", "-v", action="count", default=0)

    p = argparse.ArgumentParser(prog="causal-twin", parents=[common],
                                description="Causal digital twins for drift stress tests.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--manifest", default=None, help="write a run manifest here")
        return sp

    s = add("discover", cmd_discover, "learn a causal graph with PC")
    s.add_argument("--data", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--constraints")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--max-cond-set", type=int, default=3)
    s.add_argument("--ci-test", default="g_squared_discrete",
                   choices=("g_squared_discrete", "fisher_z"))
    s.add_argument("--orientation", default="lexicographic",
                   choices=("lexicographic", "fail", "none"))
    s.add_argument("--reference", help="graph JSON to report SHD against")
    s.add_argument("--out", required=True)

    s = add("fit", cmd_fit, "fit an SCM on data and a DAG")
    s.add_argument("--data", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--noise-sigma", default="matched")
    s.add_argument("--link-noise", default="gaussian_threshold",
                   choices=("gaussian_threshold", "bernoulli"))
    s.add_argument("--no-center", action="store_true", help="raw b + beta.pa predictors")
    s.add_argument("--out", required=True)

    s = add("validate", cmd_validate, "three-tier twin validation")
    s.add_argument("--scm", required=True)
    s.add_argument("--data", required=True, help="data the twin was fitted on")
    s.add_argument("--valid", help="held-out data for predictive consistency")
    s.add_argument("--model", action="append")
    s.add_argument("--target")
    s.add_argument("--n-mc", type=int, default=50000)
    s.add_argument("--rmsea-threshold", type=float, default=0.08)
    s.add_argument("--gap-tolerance", type=float, default=0.02)
    s.add_argument("--out", required=True)

    s = add("train", cmd_train, "train a classifier under test")
    s.add_argument("--data", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--kind", default=GBT, choices=(GBT, RANDOM_FOREST))
    s.add_argument("--out", required=True)

    s = add("simulate", cmd_simulate, "run one drift scenario")
    s.add_argument("--scm", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--steps-out")

    s = add("bootstrap", cmd_bootstrap, "bootstrap the breaking point")
    s.add_argument("--scm", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--replications", type=int, default=50)
    s.add_argument("--out", required=True)

    s = add("monitor", cmd_monitor, "run conventional drift monitors along a scenario")
    s.add_argument("--scm", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--reference")
    s.add_argument("--config")
    s.add_argument("--out", required=True)

    s = add("attribute", cmd_attribute, "Shapley ranking with per-feature drift sweeps")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--scm", required=True)
    s.add_argument("--target")
    s.add_argument("--scenario", help="template scenario (sizes, threshold, delta_max)")
    s.add_argument("--top-k", type=int, default=5)
    s.add_argument("--n-rows", type=int, default=100)
    s.add_argument("--n-perms", type=int, default=200)
    s.add_argument("--out", required=True)

    s = add("plot", cmd_plot, "plot-ready CSV (and SVG) from a curve CSV")
    s.add_argument("--curve", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--svg")
    s.add_argument("--tau", type=float)
    s.add_argument("--metrics", help="comma-separated, first one is drawn in the SVG")

    s = add("pipeline", cmd_pipeline, "run the configured stages end to end")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GateFailure as e:
        print(f"gate failure: {e}", file=sys.stderr)
        return EXIT_GATE
    except StageError as e:
        if isinstance(e.cause, (ConfigError, FileNotFoundError, SchemaError, IngestError)):
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, FileNotFoundError, SchemaError, IngestError, ArtifactError,
            PlotDataError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, GraphError, ValueError, KeyError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
