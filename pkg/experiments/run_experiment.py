"""
Monte-Carlo harness and command line entry point.

    python -m experiments.run_experiment simulate --config scenario3.yaml
    python -m experiments.run_experiment factors --config factors.yaml
    python -m experiments.run_experiment backtest --data returns.csv
"""
import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from estimators.errors import EstimationError, ValidationError
from estimators.location import spatial_median
from estimators.scatter import (
    ScatterKind,
    reg_tyler,
    regtyler_alpha_default,
    sample_covariance,
    spatial_sign_covariance,
    symmetrize,
)
from estimators.spectral import DEFAULT_MAX_FACTORS, FactorCountMethod, eigendecompose, estimate_num_factors
from experiments.evaluate import check_metrics, score
from experiments.pipelines import PipelineSpec, fit_pipeline
from experiments.utils import ConfigError, ensure_dir, load_config, timestamp, to_jsonable, write_json
from models.factor_model import sample
from models.scenario import ScenarioSpec, scenario_preset
from reports.builder import ReportBuilder

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["pipeline", "metric", "mean", "sd", "failures"]
FACTOR_COLUMNS = ["d", "method", "m_hat", "frequency"]
FORMATS = ("csv", "json", "text")

# failures that exclude a replicate instead of aborting the run
REPLICATE_ERRORS = (EstimationError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class ReplicateResult:
    pipeline: str
    metric: str
    value: float
    replicate: int
    elapsed: float


@dataclass
class ExperimentConfig:
    scenario: ScenarioSpec
    pipelines: List[PipelineSpec]
    reps: int = 50
    metrics: List[str] = field(default_factory=lambda: ["sigma0_max"])
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValidationError(f"reps must be >= 1, got {self.reps}")
        if not self.pipelines:
            raise ValidationError("at least one pipeline is required")
        names = [p.name for p in self.pipelines]
        if len(set(names)) != len(names):
            raise ValidationError(f"pipeline names must be unique: {names}")
        check_metrics(self.metrics)

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "ExperimentConfig":
        """Build from a merged config with 'scenario', 'pipelines' and 'experiment' sections."""
        for section in ("scenario", "pipelines"):
            if section not in cfg:
                raise ConfigError(f"Missing required config section: {section}")
        exp = cfg.get("experiment") or {}
        scenario_cfg = dict(cfg["scenario"])
        if "n" in exp:
            scenario_cfg["n"] = int(exp["n"])
        if "preset" in scenario_cfg:
            scenario = scenario_preset(scenario_cfg.pop("preset"), **scenario_cfg)
        else:
            scenario = ScenarioSpec.from_dict(scenario_cfg)
        return cls(
            scenario=scenario,
            pipelines=[PipelineSpec.from_dict(p) for p in cfg["pipelines"]],
            reps=int(exp.get("reps", 50)),
            metrics=list(exp.get("metrics", ["sigma0_max"])),
            seed=int(exp.get("seed", 0)),
            threads=int(exp.get("threads", 1)),
        )


@dataclass
class ExperimentResult:
    table: pd.DataFrame
    replicates: List[ReplicateResult]
    failures: Dict[str, int]


def replicate_generators(seed: int, reps: int, key: int = 0) -> List[np.random.Generator]:
    """One independent stream per replicate."""
    children = np.random.SeedSequence([seed, key]).spawn(reps)
    return [np.random.default_rng(child) for child in children]


def _run_replicate(cfg: ExperimentConfig, model, tail, loadings, truth, rep: int, rng) -> tuple:
    results: List[ReplicateResult] = []
    failed: List[str] = []
    X = sample(model, tail, cfg.scenario.n, loadings=loadings, rng=rng)
    try:
        mu = spatial_median(X).mu_hat
    except REPLICATE_ERRORS as e:
        logger.warning("replicate %d: spatial median failed (%s); all pipelines skipped", rep, e)
        return results, [p.name for p in cfg.pipelines]

    for spec in cfg.pipelines:
        start = time.perf_counter()
        try:
            fit = fit_pipeline(X, spec, m=cfg.scenario.m, mu=mu, m_report=cfg.scenario.m)
            values = [(metric, score(metric, fit, truth)) for metric in cfg.metrics]
        except REPLICATE_ERRORS as e:
            logger.warning("replicate %d: pipeline %s failed: %s", rep, spec.name, e)
            failed.append(spec.name)
            continue
        elapsed = time.perf_counter() - start
        if any(v is not None and not np.isfinite(v) for _, v in values):
            logger.warning("replicate %d: pipeline %s produced a non-finite score", rep, spec.name)
            failed.append(spec.name)
            continue
        results.extend(
            ReplicateResult(spec.name, metric, v, rep, elapsed) for metric, v in values if v is not None
        )
    return results, failed


def aggregate(replicates: List[ReplicateResult], pipelines: List[str], metrics: List[str], failures: Dict[str, int]) -> pd.DataFrame:
    """Mean and sample sd (ddof=1, 0 below two values) per (pipeline, metric), in config order."""
    rows = []
    for name in pipelines:
        for metric in metrics:
            values = np.array(
                [r.value for r in replicates if r.pipeline == name and r.metric == metric], dtype=float
            )
            if values.size == 0 and failures.get(name, 0) == 0:
                # metric not produced by this pipeline
                continue
            mean = float(values.mean()) if values.size else float("nan")
            sd = float(values.std(ddof=1)) if values.size >= 2 else (0.0 if values.size else float("nan"))
            rows.append({"pipeline": name, "metric": metric, "mean": mean, "sd": sd, "failures": int(failures.get(name, 0))})
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentResult:
    """Simulate, fit every pipeline, score, aggregate over replicates."""
    model, tail, loadings, truth = cfg.scenario.build()
    generators = replicate_generators(cfg.seed, cfg.reps)
    logger.info(
        "running %d replicates of n=%d, d=%d (%s) for %s",
        cfg.reps, cfg.scenario.n, cfg.scenario.d, tail.name, [p.name for p in cfg.pipelines],
    )

    def job(rep: int):
        return _run_replicate(cfg, model, tail, loadings, truth, rep, generators[rep])

    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        outcomes = list(tqdm(pool.map(job, range(cfg.reps)), total=cfg.reps, desc="replicates", disable=not progress))

    replicates: List[ReplicateResult] = []
    failures: Dict[str, int] = {p.name: 0 for p in cfg.pipelines}
    for results, failed in outcomes:
        replicates.extend(results)
        for name in failed:
            failures[name] += 1

    table = aggregate(replicates, [p.name for p in cfg.pipelines], cfg.metrics, failures)
    return ExperimentResult(table, replicates, failures)


@dataclass
class FactorCountConfig:
    scenario: ScenarioSpec
    d_grid: List[int]
    reps: int = 100
    methods: List[str] = field(default_factory=lambda: ["ER", "GR"])
    M: int = DEFAULT_MAX_FACTORS
    scatter_kind: ScatterKind = ScatterKind.SPATIAL_SIGN
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValidationError(f"reps must be >= 1, got {self.reps}")
        if not self.d_grid:
            raise ValidationError("d_grid must not be empty")
        for d in self.d_grid:
            if d < self.scenario.m + 2:
                raise ValidationError(f"d={d} is too small for m={self.scenario.m}; need d >= m + 2")
        try:
            self.methods = [FactorCountMethod(m).value for m in self.methods]
            self.scatter_kind = ScatterKind(self.scatter_kind)
        except ValueError as e:
            raise ValidationError(f"Bad factors section: {e}") from e
        if self.scatter_kind is ScatterKind.TYLER_PLUGIN:
            raise ValidationError("factor counting supports Sample, SpatialSign and RegTyler scatter")

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "FactorCountConfig":
        if "scenario" not in cfg:
            raise ConfigError("Missing required config section: scenario")
        fc = cfg.get("factors") or {}
        scenario_cfg = dict(cfg["scenario"])
        if "n" in fc:
            scenario_cfg["n"] = int(fc["n"])
        if "preset" in scenario_cfg:
            scenario = scenario_preset(scenario_cfg.pop("preset"), **scenario_cfg)
        else:
            scenario = ScenarioSpec.from_dict(scenario_cfg)
        exp = cfg.get("experiment") or {}
        return cls(
            scenario=scenario,
            d_grid=[int(d) for d in fc.get("d_grid", [scenario.d])],
            reps=int(fc.get("reps", 100)),
            methods=list(fc.get("methods", ["ER", "GR"])),
            M=int(fc.get("M", DEFAULT_MAX_FACTORS)),
            scatter_kind=fc.get("scatter_kind", ScatterKind.SPATIAL_SIGN.value),
            seed=int(fc.get("seed", exp.get("seed", 0))),
            threads=int(fc.get("threads", exp.get("threads", 1))),
        )


def _raw_scatter(X: np.ndarray, kind: ScatterKind) -> np.ndarray:
    if kind is ScatterKind.SAMPLE:
        return sample_covariance(X, normalize_to_scatter=True).matrix
    if kind is ScatterKind.REG_TYLER:
        X_sym = symmetrize(X)
        return reg_tyler(X_sym, regtyler_alpha_default(X_sym, n=X.shape[0])).matrix
    return spatial_sign_covariance(X, spatial_median(X).mu_hat).matrix


def run_factor_count_experiment(cfg: FactorCountConfig, progress: bool = False) -> pd.DataFrame:
    """Frequency of each selected factor count per (d, method)."""
    rows = []
    for d in cfg.d_grid:
        scenario = cfg.scenario.with_dimension(d)
        model, tail, loadings, _ = scenario.build()
        n = scenario.n
        M = min(cfg.M, min(n, d) - 2)
        if M < 1:
            raise ValidationError(f"n={n}, d={d} leave no room for a factor count search")
        generators = replicate_generators(cfg.seed, cfg.reps, key=d)

        def job(rep: int) -> Optional[Dict[str, int]]:
            X = sample(model, tail, n, loadings=loadings, rng=generators[rep])
            try:
                eigs, _ = eigendecompose(_raw_scatter(X, cfg.scatter_kind))
                return {m: estimate_num_factors(eigs, M=M, method=m, n=n, d=d).m_hat for m in cfg.methods}
            except REPLICATE_ERRORS as e:
                logger.warning("d=%d replicate %d failed: %s", d, rep, e)
                return None

        with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
            picks = list(tqdm(pool.map(job, range(cfg.reps)), total=cfg.reps, desc=f"d={d}", disable=not progress))
        picks = [p for p in picks if p is not None]
        for method in cfg.methods:
            chosen = np.array([p[method] for p in picks], dtype=int)
            for m_hat in range(1, M + 1):
                freq = float(np.mean(chosen == m_hat)) if chosen.size else float("nan")
                rows.append({"d": d, "method": method, "m_hat": m_hat, "frequency": freq})
    return pd.DataFrame(rows, columns=FACTOR_COLUMNS)


def table_records(table: pd.DataFrame) -> List[Dict[str, Any]]:
    records = table.astype(object).where(pd.notna(table), None).to_dict(orient="records")
    return to_jsonable(records)


def emit(table: pd.DataFrame, fmt: str, path: Optional[str] = None, title: str = "") -> str:
    """Serialize a result table as csv, json or aligned text; written to path when given."""
    if fmt not in FORMATS:
        raise ValidationError(f"Unknown format {fmt!r}. Expected one of: {FORMATS}")
    if fmt == "csv":
        text = table.to_csv(index=False)
    elif fmt == "json":
        text = json.dumps(table_records(table), indent=2) + "\n"
    else:
        text = ReportBuilder().render(table, title=title)
    if path is not None:
        ensure_dir(os.path.dirname(os.path.abspath(path)))
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text


# command line

def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(description="Robust high-dimensional scatter estimation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser):
        sp.add_argument("--config", help="Experiment config (path, or file name under config/)")
        sp.add_argument("--out", help="Output file (default: logs/<timestamp>/table.<format>)")
        sp.add_argument("--format", choices=FORMATS, default="csv", help="Output format")
        sp.add_argument("--threads", type=int, help="Worker threads")

    sim = sub.add_parser("simulate", help="Monte-Carlo estimation errors per pipeline")
    common(sim)
    sim.add_argument("--reps", type=int, help="Override experiment.reps")
    sim.add_argument("--seed", type=int, help="Override experiment.seed")
    sim.add_argument("--pipelines", nargs="+", help="Preset pipeline names to run instead of the config list")

    fac = sub.add_parser("factors", help="Frequency of the selected number of factors")
    common(fac)
    fac.add_argument("--reps", type=int, help="Override factors.reps")
    fac.add_argument("--seed", type=int, help="Override the seed")

    bt = sub.add_parser("backtest", help="Rolling minimum-variance portfolio backtest")
    common(bt)
    bt.add_argument("--data", help="Wide CSV of daily returns (date column + one column per ticker)")
    bt.add_argument("--window", type=int, help="Training window in months")
    bt.add_argument("--rebalance", choices=["monthly"], help="Rebalance frequency")
    bt.add_argument("--pipelines", help="Config file whose 'pipelines' list replaces backtest.pipelines")
    return p.parse_args(argv)


def configure_logging(cfg: Dict[str, Any]):
    level = str((cfg.get("logging") or {}).get("level", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _output_paths(cfg: Dict[str, Any], args: argparse.Namespace, stem: str) -> tuple:
    """(run directory for metadata, table path)."""
    if args.out:
        out = Path(args.out)
        return out.parent, out
    run_dir = Path((cfg.get("logging") or {}).get("dir", "logs")) / timestamp()
    return run_dir, run_dir / f"{stem}.{args.format}"


def _simulate(cfg: Dict[str, Any], args: argparse.Namespace) -> Path:
    exp = dict(cfg.get("experiment") or {})
    for key in ("reps", "seed", "threads"):
        if getattr(args, key, None) is not None:
            exp[key] = getattr(args, key)
    cfg = {**cfg, "experiment": exp}
    if args.pipelines:
        cfg["pipelines"] = list(args.pipelines)
    experiment = ExperimentConfig.from_dict(cfg)
    print(f"🧪 Scenario: n={experiment.scenario.n}, d={experiment.scenario.d}, tail={experiment.scenario.tail}")
    print(f"   Pipelines: {', '.join(p.name for p in experiment.pipelines)}")
    print(f"   Replicates: {experiment.reps} (seed {experiment.seed}, {experiment.threads} thread(s))")

    result = run_experiment(experiment, progress=True)
    run_dir, table_path = _output_paths(cfg, args, "table")
    ensure_dir(str(run_dir))
    emit(result.table, args.format, str(table_path), title="Estimation error (mean, sd over replicates)")
    write_json(str(run_dir / "replicates.json"), [asdict(r) for r in result.replicates])
    write_json(
        str(run_dir / "metadata.json"),
        {
            "command": "simulate",
            "timestamp": run_dir.name,
            "config_file": args.config,
            "scenario": experiment.scenario.to_dict(),
            "pipelines": [p.to_dict() for p in experiment.pipelines],
            "reps": experiment.reps,
            "metrics": experiment.metrics,
            "seed": experiment.seed,
            "threads": experiment.threads,
            "failures": result.failures,
            "table_file": table_path.name,
            "format": args.format,
        },
    )
    print(ReportBuilder().render(result.table, title="Results"))
    if any(result.failures.values()):
        print(f"⚠️  Failed replicates: {result.failures}")
    return run_dir


def _factors(cfg: Dict[str, Any], args: argparse.Namespace) -> Path:
    fc = dict(cfg.get("factors") or {})
    for key in ("reps", "seed", "threads"):
        if getattr(args, key, None) is not None:
            fc[key] = getattr(args, key)
    experiment = FactorCountConfig.from_dict({**cfg, "factors": fc})
    print(f"🧪 Factor count: d in {experiment.d_grid}, n={experiment.scenario.n}, methods {experiment.methods}")
    table = run_factor_count_experiment(experiment, progress=True)
    run_dir, table_path = _output_paths(cfg, args, "factors")
    ensure_dir(str(run_dir))
    emit(table, args.format, str(table_path), title="Frequency of the estimated number of factors")
    write_json(
        str(run_dir / "metadata.json"),
        {
            "command": "factors",
            "timestamp": run_dir.name,
            "config_file": args.config,
            "scenario": experiment.scenario.to_dict(),
            "d_grid": experiment.d_grid,
            "reps": experiment.reps,
            "methods": experiment.methods,
            "M": experiment.M,
            "scatter_kind": experiment.scatter_kind.value,
            "seed": experiment.seed,
            "table_file": table_path.name,
            "format": args.format,
        },
    )
    return run_dir


def _backtest(cfg: Dict[str, Any], args: argparse.Namespace) -> Path:
    from data.load_data import ingest_csv
    from experiments.backtest import rolling_backtest

    bt = dict(cfg.get("backtest") or {})
    data_path = args.data or bt.get("data")
    if not data_path:
        raise ConfigError("backtest needs --data or backtest.data")
    if args.pipelines:
        pipelines_cfg = load_config(args.pipelines).get("pipelines")
        if not pipelines_cfg:
            raise ConfigError(f"{args.pipelines} has no 'pipelines' list")
    else:
        pipelines_cfg = bt.get("pipelines", [{"preset": "POET-SS", "factor_count": "GR"}, {"preset": "POET-TME", "factor_count": "GR"}])
    pipelines = [PipelineSpec.from_dict(p) for p in pipelines_cfg]
    window = args.window if args.window is not None else int(bt.get("window_months", 120))
    rebalance = args.rebalance or bt.get("rebalance", "monthly")
    threads = args.threads if args.threads is not None else int(bt.get("threads", 1))

    panel = ingest_csv(data_path, date_column=bt.get("date_column", "date"), ticker_filter=bt.get("tickers"))
    print(f"📊 Panel: {len(panel.dates)} days x {len(panel.tickers)} assets ({len(panel.dropped)} dropped)")
    print(f"   Pipelines: {', '.join(p.name for p in pipelines)}; window {window} months, {rebalance} rebalancing")
    report = rolling_backtest(panel, pipelines, window_months=window, rebalance=rebalance, threads=threads)
    risks, weights = report.to_frames()

    run_dir, table_path = _output_paths(cfg, args, "risk")
    ensure_dir(str(run_dir))
    emit(risks, args.format, str(table_path), title="Annualized out-of-sample risk")
    write_json(str(table_path.with_name(table_path.stem + "_weights.json")), weights)
    write_json(
        str(run_dir / "metadata.json"),
        {
            "command": "backtest",
            "timestamp": run_dir.name,
            "config_file": args.config,
            "data": str(data_path),
            "tickers": panel.tickers,
            "dropped": panel.dropped,
            "pipelines": [p.to_dict() for p in pipelines],
            "window_months": window,
            "rebalance": rebalance,
            "gaps": report.gaps,
            "table_file": table_path.name,
            "format": args.format,
        },
    )
    print(ReportBuilder().render(risks, title="Annualized risk"))
    if report.gaps:
        print(f"⚠️  {len(report.gaps)} skipped (date, pipeline) fits, see metadata.json")
    return run_dir


COMMANDS = {"simulate": _simulate, "factors": _factors, "backtest": _backtest}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)

    print("🚀 Robust Scatter Experiment Runner")
    print("=" * 50)
    try:
        print("📋 Loading configuration...")
        cfg = load_config(args.config)
        configure_logging(cfg)
        print(f"  ✅ Loaded config/base.yaml{' and ' + args.config if args.config else ''}")

        run_dir = COMMANDS[args.command](cfg, args)

        print(f"\n🎉 {args.command} completed!")
        print(f"   Results saved to: {run_dir}")
        print("\nNext steps:")
        print(f"   1. Re-render: python quick_evaluate.py --run-dir {run_dir} --format text")
        return 0
    except (ValidationError, FileNotFoundError) as e:
        print(f"\n❌ Configuration error: {e}")
        return 2
    except Exception as e:
        logger.exception("run failed")
        print(f"\n❌ Experiment failed: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
