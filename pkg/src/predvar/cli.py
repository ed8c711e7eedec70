"""Experiment command line: generate, fit, evaluate, sweep.

Option precedence is command line > config file (JSON, keys matching the
long option names with dashes replaced by underscores) > built-in
defaults.  Set ``PREDVAR_LOG`` to debug/info/warning/error for logging.
Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration
error.
"""

from __future__ import annotations

import logging
import os

import click
import numpy as np

from . import io as pio
from . import lorenz, metrics
from .estimation import FitConfig
from .exceptions import ConfigError, FormatError, PredvarError
from .metrics import ALGORITHMS

log = logging.getLogger("predvar")

DEFAULT_ORDER = 2
DEFAULT_SWEEP_COUNTS = list(range(1000, 10001, 1000))

_FIT_CONFIG_KEYS = (
    "outer_tol",
    "outer_max_iter",
    "inner_tol",
    "inner_max_iter",
    "ridge",
    "scale",
)


def _setup_logging() -> None:
    level = os.environ.get("PREDVAR_LOG", "warning").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = "WARNING"
    logging.basicConfig(
        level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s"
    )


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = pio.read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def _resolve(cli_value, cfg: dict, key: str, default=None):
    if cli_value is not None and cli_value != ():
        return cli_value
    if key in cfg:
        return cfg[key]
    return default


def _fit_config(cfg: dict) -> FitConfig:
    kwargs = {k: cfg[k] for k in _FIT_CONFIG_KEYS if k in cfg}
    return FitConfig(**kwargs)


def _run(body) -> None:
    """Map package errors onto the documented exit codes."""
    try:
        body()
    except (ConfigError, FormatError) as exc:
        raise click.UsageError(str(exc)) from exc  # exit code 2
    except (PredvarError, np.linalg.LinAlgError) as exc:
        log.debug("failure detail", exc_info=True)
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc  # exit 1


@click.group()
def main() -> None:
    """Reduced-dimensional VAR experiments with oblique projections."""
    _setup_logging()


@main.command()
@click.option("--case", default=None, help="Dataset source: paper | orth | model.")
@click.option("--data", default=None, type=click.Path(), help="Params JSON for --case model.")
@click.option("--seed", default=None, type=int, multiple=True, help="Generator seed.")
@click.option("--out", default=None, type=click.Path(), help="Output directory.")
@click.option("--format", "fmt", default=None, type=click.Choice(["csv", "json"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def generate(case, data, seed, out, fmt, config_path) -> None:
    """Generate a synthetic dataset (y, v_true, truth metadata)."""

    def body():
        cfg = _load_config(config_path)
        case_name = _resolve(case, cfg, "case", "paper")
        seeds = _resolve(seed, cfg, "seed", 0)
        the_seed = seeds[0] if isinstance(seeds, (tuple, list)) else seeds
        outdir = _resolve(out, cfg, "out")
        if outdir is None:
            raise ConfigError("--out is required")
        table_fmt = _resolve(fmt, cfg, "format", "csv")
        if case_name == "paper":
            dataset = lorenz.paper_case_study(
                the_seed,
                center_latent=cfg.get("center_latent", True),
                noise_cov_mode=cfg.get("noise_cov_mode", "per-channel"),
            )
        elif case_name == "orth":
            dataset = lorenz.orth_case_study(
                the_seed,
                center_latent=cfg.get("center_latent", True),
                noise_cov_mode=cfg.get("noise_cov_mode", "per-channel"),
            )
        elif case_name == "model":
            params_path = _resolve(data, cfg, "data")
            if params_path is None:
                raise ConfigError("--case model needs --data pointing at a params JSON")
            doc = pio.read_json(params_path)
            from .model import PredVarParams  # local to keep startup light

            params = PredVarParams(
                loadings=pio.matrix_from_obj(doc["loadings"], "loadings"),
                static_loadings=pio.matrix_from_obj(
                    doc["static_loadings"], "static_loadings"
                ),
                innovation_cov=pio.matrix_from_obj(
                    doc["innovation_cov"], "innovation_cov"
                ),
                static_noise_cov=pio.matrix_from_obj(
                    doc["static_noise_cov"], "static_noise_cov"
                ),
                var_coeffs=tuple(
                    pio.matrix_from_obj(b, "var_coeffs") for b in doc["var_coeffs"]
                ),
            )
            dataset = lorenz.model_case_study(
                params, n=int(cfg.get("n_samples", lorenz.N_CASE_SAMPLES)), seed=the_seed
            )
        else:
            raise ConfigError(f"unknown case {case_name!r}")
        pio.save_dataset(dataset, outdir, table_fmt)
        log.info("wrote dataset (%s, seed %s) to %s", case_name, the_seed, outdir)
        click.echo(outdir)

    _run(body)


@main.command()
@click.option("--data", default=None, type=click.Path(exists=True), help="Dataset directory.")
@click.option("--algo", default=None, type=click.Choice(sorted(ALGORITHMS)))
@click.option("--order", default=None, type=int)
@click.option("--latent-dim", default=None, type=int)
@click.option("--out", default=None, type=click.Path(), help="Run directory for model.json.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def fit(data, algo, order, latent_dim, out, config_path) -> None:
    """Fit a model to a dataset's training split."""

    def body():
        cfg = _load_config(config_path)
        datadir = _resolve(data, cfg, "data")
        outdir = _resolve(out, cfg, "out")
        if datadir is None or outdir is None:
            raise ConfigError("--data and --out are required")
        dataset = pio.load_dataset(datadir)
        algorithm = _resolve(algo, cfg, "algo", "predvar")
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
        s = int(_resolve(order, cfg, "order", DEFAULT_ORDER))
        ell = _resolve(latent_dim, cfg, "latent_dim", dataset.params_true.latent_dim)
        y_train, _ = dataset.split("train")
        result = ALGORITHMS[algorithm](y_train, s, int(ell), _fit_config(cfg))
        pio.save_fit(result, outdir)
        log.info(
            "%s fit: %d iterations, converged=%s", algorithm, result.iterations,
            result.converged,
        )
        click.echo(os.path.join(outdir, "model.json"))

    _run(body)


@main.command()
@click.option("--data", default=None, type=click.Path(exists=True), help="Dataset directory.")
@click.option("--out", default=None, type=click.Path(), help="Run directory holding model.json.")
@click.option("--format", "fmt", default=None, type=click.Choice(["csv", "json"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def evaluate(data, out, fmt, config_path) -> None:
    """Evaluate a fitted model on its dataset's train and test splits."""

    def body():
        cfg = _load_config(config_path)
        datadir = _resolve(data, cfg, "data")
        outdir = _resolve(out, cfg, "out")
        if datadir is None or outdir is None:
            raise ConfigError("--data and --out are required")
        table_fmt = _resolve(fmt, cfg, "format", "csv")
        dataset = pio.load_dataset(datadir)
        result = pio.load_fit(outdir)
        report = metrics.evaluate_fit(dataset, result)
        pio.save_report(report, outdir, table_fmt)
        traces = {
            (split, sensor): metrics.sensor_traces(dataset, result, sensor, split)
            for split in ("train", "test")
            for sensor in range(dataset.y.shape[1])
        }
        pio.save_traces(traces, outdir, table_fmt)
        log.info(
            "projector distance %.4f, angle %.2f deg",
            report.projector_distance,
            report.signal_angle_deg,
        )
        click.echo(os.path.join(outdir, "report.json"))

    _run(body)


@main.command()
@click.option("--data", default=None, type=click.Path(exists=True), help="Dataset directory.")
@click.option("--algo", default=None, multiple=True,
              type=click.Choice(sorted(ALGORITHMS) + ["all"]))
@click.option("--order", default=None, type=int)
@click.option("--latent-dim", default=None, type=int)
@click.option("--seed", default=None, type=int, multiple=True)
@click.option("--jobs", default=None, type=int)
@click.option("--out", default=None, type=click.Path())
@click.option("--format", "fmt", default=None, type=click.Choice(["csv", "json"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def sweep(data, algo, order, latent_dim, seed, jobs, out, fmt, config_path) -> None:
    """Sweep sample counts x algorithms x seeds; one results table."""

    def body():
        cfg = _load_config(config_path)
        datadir = _resolve(data, cfg, "data")
        outdir = _resolve(out, cfg, "out")
        if datadir is None or outdir is None:
            raise ConfigError("--data and --out are required")
        dataset = pio.load_dataset(datadir)
        algos = _resolve(algo, cfg, "algo", ["all"])
        if isinstance(algos, str):
            algos = [algos]
        if "all" in algos:
            algos = sorted(ALGORITHMS)
        seeds = _resolve(seed, cfg, "seed", [dataset.seed])
        if not isinstance(seeds, (list, tuple)):
            seeds = [seeds]
        counts = cfg.get("sample_counts", DEFAULT_SWEEP_COUNTS)
        counts = [c for c in counts if c <= dataset.n_samples]
        s = int(_resolve(order, cfg, "order", DEFAULT_ORDER))
        n_jobs = int(_resolve(jobs, cfg, "jobs", 1))
        table_fmt = _resolve(fmt, cfg, "format", "csv")
        ell = _resolve(latent_dim, cfg, "latent_dim")
        cells = metrics.consistency_sweep(
            dataset,
            counts,
            list(algos),
            list(seeds),
            order=s,
            latent_dim=None if ell is None else int(ell),
            config=_fit_config(cfg),
            jobs=n_jobs,
        )
        pio.save_sweep(cells, outdir, table_fmt)
        failures = sum(1 for c in cells if c.error)
        log.info("sweep finished: %d cells, %d failed", len(cells), failures)
        click.echo(os.path.join(outdir, f"sweep.{table_fmt}"))

    _run(body)


if __name__ == "__main__":
    main()
