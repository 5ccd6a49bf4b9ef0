"""End-to-end driver: fit, summarise, measure the trade-off, write artifacts.

Config files are flat ``key = value`` lines (``#`` starts a comment).  Keys:

    responses, predictors          input CSV paths (header row required)
    output_dir                     where artifacts go
    mode                           random | fixed
    point_mass                     true | false  (false = alternative prior)
    model_prior                    uniform | multiplicity_adjusted
    n_iter, burn_in, thin          chain length controls
    k                              predictor factor count
    prior_scale_loadings, prior_shape_idio, prior_scale_idio, prior_var_mu
    grid_size, grid_ratio          lambda grid
    kappa                          comma-separated thresholds in (0, 0.5]
    band                           central credible band for the loss gap
    replicates                     Monte Carlo replicates R
    seed                           master seed

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy

from . import __version__
from .artifacts import (emit_graph, emit_tradeoff_table, ingest, write_draws,
                        write_moments, write_path, write_table)
from .dss_summary import build_lasso_problem, compute_moments
from .exceptions import ConfigError, DegenerateGridError, PipelineError
from .factor_x import FactorConfig
from .gibbs_ssvs import SsvsConfig, inclusion_frequencies, run_chain
from .loss_gap import LossGapResult, SelectedModel, delta_samples, select_model
from .model_core import Dataset
from .path_solver import SummaryPath, lambda_grid, solve_path
from .synthetic import generate_synthetic

log = logging.getLogger(__name__)

DEFAULT_KAPPAS = (0.02, 0.04, 0.125, 0.325, 0.475, 0.4975)


@dataclass(frozen=True)
class RunConfig:
    responses: Optional[str] = None
    predictors: Optional[str] = None
    output_dir: str = "surselect_out"
    mode: str = "random"
    point_mass: bool = True
    model_prior: str = "uniform"
    n_iter: int = 3000
    burn_in: int = 1000
    thin: int = 2
    k: int = 3
    prior_scale_loadings: float = 1.0
    prior_shape_idio: float = 2.0
    prior_scale_idio: float = 1.0
    prior_var_mu: float = 100.0
    grid_size: int = 50
    grid_ratio: float = 1e-3
    kappa: Tuple[float, ...] = DEFAULT_KAPPAS
    band: float = 0.75
    replicates: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "fixed"):
            raise ConfigError("mode must be 'random' or 'fixed'")
        for kap in self.kappa:
            if not 0.0 < kap <= 0.5:
                raise ConfigError(f"kappa {kap} outside (0, 0.5]")
        if not 0.0 < self.band < 1.0:
            raise ConfigError("band must lie in (0, 1)")
        if self.replicates < 1 or self.grid_size < 2:
            raise ConfigError("replicates must be >= 1 and grid_size >= 2")

    @property
    def ssvs(self) -> SsvsConfig:
        return SsvsConfig(n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin,
                          model_prior=self.model_prior, point_mass=self.point_mass,
                          seed=self.seed)

    @property
    def factor(self) -> FactorConfig:
        return FactorConfig(k=self.k, prior_scale_loadings=self.prior_scale_loadings,
                            prior_shape_idio=self.prior_shape_idio,
                            prior_scale_idio=self.prior_scale_idio,
                            prior_var_mu=self.prior_var_mu)

    def check_inputs(self) -> None:
        for key in ("responses", "predictors"):
            val = getattr(self, key)
            if val is None or not Path(val).is_file():
                raise ConfigError(f"{key} file not found: {val}")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    raw = raw.strip()
    if key == "kappa":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if isinstance(default, bool):
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str, base_dir: Path = Path(".")) -> Dict[str, object]:
    values: Dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"config line {n}: {exc}") from None
    for key in ("responses", "predictors", "output_dir"):
        if key in values and not Path(str(values[key])).is_absolute():
            values[key] = str(base_dir / str(values[key]))
    return values


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    values = parse_config_text(path.read_text(), path.parent)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: RunConfig
    dataset: Dataset
    draws: list
    moments: object
    path: SummaryPath
    loss_gap: LossGapResult
    selections: Dict[float, SelectedModel]
    timings: Dict[str, float] = field(default_factory=dict)

    def selected_support(self, kappa: float) -> frozenset:
        return self.selections[kappa].support


def _stage(name, timings, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc
    timings[name] = time.perf_counter() - t0
    log.info("stage %s done in %.2fs", name, timings[name])
    return out


def summarize(dataset: Dataset, config: RunConfig, draws=None,
              timings: Optional[Dict[str, float]] = None) -> RunReport:
    """Run every in-memory stage on an already ingested dataset."""
    timings = {} if timings is None else timings
    if draws is None:
        draws = _stage("gibbs", timings, run_chain, dataset, config.ssvs, config.factor)
    X_obs = dataset.X if config.mode == "fixed" else None
    moments = _stage("moments", timings, compute_moments, draws, config.mode, X_obs)
    problem = _stage("lasso_problem", timings, build_lasso_problem, moments)
    try:
        grid = _stage("grid", timings, lambda_grid, problem, config.grid_size,
                      config.grid_ratio)
    except PipelineError as exc:
        if not isinstance(exc.__cause__, DegenerateGridError):
            raise
        # every draw excludes every predictor: the whole path is zero
        log.warning("degenerate lambda grid: %s", exc.__cause__)
        grid = np.zeros(1)
    path = _stage("path", timings, solve_path, problem, grid)
    rng = np.random.default_rng([config.seed, 1])
    result = _stage("loss_gap", timings, delta_samples, path, draws, config.replicates,
                    config.mode, X_obs, rng, config.band)
    selections = {kap: select_model(result, path, kap) for kap in config.kappa}
    return RunReport(config, dataset, draws, moments, path, result, selections, timings)


def write_artifacts(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = report.dataset
    write_draws(out / "draws.npz", report.draws, ds)
    write_moments(out / "moments.csv", report.moments)
    write_path(out / "path.csv", report.path, ds.response_names, ds.predictor_names)
    emit_tradeoff_table(report.loss_gap, out / "tradeoff.csv", report.path.support_sizes)
    sel_rows = []
    for kap, sel in report.selections.items():
        tag = format(kap * 100, "g").replace(".", "p")
        emit_graph(sel.support, ds.response_names, ds.predictor_names,
                   out / f"graph_kappa_{tag}.dot", name=f"kappa_{tag}")
        active = sorted({ds.predictor_names[i] for _, i in sel.support})
        sel_rows.append((float(kap), sel.index, float(sel.lambda_), len(sel.support),
                         int(sel.fallback), ";".join(active)))
    write_table(out / "selections.csv", ("kappa", "grid_index", "lambda", "support_size",
                                         "fallback", "predictors"), sel_rows)
    (out / "run_report.txt").write_text(_report_text(report))


def _report_text(report: RunReport) -> str:
    cfg, ds = report.config, report.dataset
    incl = inclusion_frequencies(report.draws)
    lines = [
        f"surselect {__version__}",
        f"python {platform.python_version()}, numpy {np.__version__}, scipy {scipy.__version__}",
        f"seed {cfg.seed}",
        f"scenario mode={cfg.mode} point_mass={cfg.point_mass}",
        "",
        "[config]",
        *(f"{k} = {v}" for k, v in dataclasses.asdict(cfg).items()),
        "",
        "[data]",
        f"N = {ds.N}, q = {ds.q}, p = {ds.p}",
        "responses: " + ", ".join(ds.response_names),
        "predictors: " + ", ".join(ds.predictor_names),
        "response means: " + ", ".join(format(v, ".12g") for v in ds.y_mean),
        "predictor means: " + ", ".join(format(v, ".12g") for v in ds.x_mean),
        "",
        "[posterior]",
        f"retained draws = {len(report.draws)}",
        "inclusion frequency: " + ", ".join(
            f"{n}={format(v, '.4g')}" for n, v in zip(ds.predictor_names, incl)),
        "",
        "[selection]",
    ]
    for kap, sel in report.selections.items():
        active = sorted({ds.predictor_names[i] for _, i in sel.support})
        flag = " (fallback: no lambda qualified)" if sel.fallback else ""
        lines.append(f"kappa = {kap:g}: lambda = {sel.lambda_:.6g}, "
                     f"{len(sel.support)} links, predictors = {active}{flag}")
    lines += ["", "[timing seconds]",
              *(f"{k} = {v:.3f}" for k, v in report.timings.items()), ""]
    return "\n".join(lines)


def run_pipeline(config: RunConfig) -> RunReport:
    config.check_inputs()
    timings: Dict[str, float] = {}
    dataset = _stage("ingest", timings, ingest, config.responses, config.predictors)
    report = summarize(dataset, config, timings=timings)
    _stage("write", timings, write_artifacts, report, config.output_dir)
    return report


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _bool(s: str) -> bool:
    return _coerce("point_mass", s)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surselect",
                                 description="Posterior summary variable selection for SUR models")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--responses")
    run.add_argument("--predictors")
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=("random", "fixed"))
    run.add_argument("--point-mass", type=_bool, metavar="BOOL")
    run.add_argument("--kappa", type=lambda s: _coerce("kappa", s),
                     help="comma-separated thresholds")
    run.add_argument("--grid-size", type=int)
    run.add_argument("--output-dir")
    run.add_argument("--n-iter", type=int)
    run.add_argument("--burn-in", type=int)
    run.add_argument("--replicates", type=int)
    run.add_argument("-v", "--verbose", action="store_true")

    syn = sub.add_parser("synth", help="write a synthetic data set")
    syn.add_argument("--out-dir", required=True)
    syn.add_argument("--N", type=int, default=500)
    syn.add_argument("--q", type=int, default=5)
    syn.add_argument("--p", type=int, default=10)
    syn.add_argument("--support", default="0,1,2",
                     help="comma-separated active predictor indices")
    syn.add_argument("--signal", type=float, default=1.0)
    syn.add_argument("--noise", type=float, default=0.5)
    syn.add_argument("--seed", type=int, default=0)
    return ap


def _cmd_run(args) -> int:
    overrides = dict(responses=args.responses, predictors=args.predictors, seed=args.seed,
                     mode=args.mode, point_mass=args.point_mass, kappa=args.kappa,
                     grid_size=args.grid_size, output_dir=args.output_dir,
                     n_iter=args.n_iter, burn_in=args.burn_in, replicates=args.replicates)
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        config = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    report = run_pipeline(config)
    for kap, sel in report.selections.items():
        active = sorted({report.dataset.predictor_names[i] for _, i in sel.support})
        print(f"kappa={kap:g}: {len(sel.support)} links; predictors {active}")
    print(f"artifacts written to {config.output_dir}")
    return 0


def _cmd_synth(args) -> int:
    support = [int(s) for s in args.support.split(",") if s.strip()]
    data, truth = generate_synthetic(N=args.N, q=args.q, p=args.p, true_support=support,
                                     signal=args.signal, noise=args.noise, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "responses.csv", data.response_names,
                (tuple(float(v) for v in row) for row in data.Y + data.y_mean))
    write_table(out / "predictors.csv", data.predictor_names,
                (tuple(float(v) for v in row) for row in data.X + data.x_mean))
    rows = [(data.predictor_names[i], data.response_names[j], float(truth.beta[i, j]))
            for i in range(data.p) for j in range(data.q)]
    write_table(out / "truth_beta.csv", ("predictor", "response", "beta"), rows)
    print(f"wrote synthetic data to {out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False)
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_synth(args)
    except (PipelineError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
