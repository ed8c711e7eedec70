"""Evaluation of fitted models against ground-truth decompositions.

All reported quantities are in the original (unscaled) units of the data.
Residual series are aligned so the first ``order`` samples of a split serve
only as prediction history; the four residual covariances therefore share
one sample window and are directly comparable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg, lorenz
from .baselines import fit_oneshot, fit_orth
from .estimation import FitConfig, FitResult, Scaling, fit_predvar
from .exceptions import ConfigError, InsufficientData, OrderError, PredvarError
from .model import oblique_projector, predict_series, weights_from_loadings

ALGORITHMS = {
    "predvar": fit_predvar,
    "orth": fit_orth,
    "oneshot": fit_oneshot,
}


@dataclass(frozen=True, eq=False)
class SplitMetrics:
    """Residual covariances over one data split (all p x p matrices)."""

    split: str
    meas_recon_cov: np.ndarray
    meas_pred_cov: np.ndarray
    sig_recon_cov: np.ndarray
    sig_pred_cov: np.ndarray
    truth_noise_cov: np.ndarray


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Full evaluation of one fit against one dataset."""

    splits: dict[str, SplitMetrics]
    em_sig_pred_cov: np.ndarray
    projector_distance: float
    signal_angle_deg: float
    signal_angle_max_deg: float


def truth_result(dataset: lorenz.SyntheticDataset) -> FitResult:
    """Wrap a dataset's generating parameters as an exact, unscaled fit."""
    params = dataset.params_true
    weights = weights_from_loadings(params)
    residual_cov = linalg.symmetrize(
        params.loadings @ params.innovation_cov @ params.loadings.T
        + params.static_loadings @ params.static_noise_cov @ params.static_loadings.T
    )
    return FitResult(
        algorithm="truth",
        order=params.order,
        latent_dim=params.latent_dim,
        params=params,
        weights=weights,
        residual_cov=residual_cov,
        iterations=0,
        converged=True,
        objective_trace=np.empty((0, 2)),
        scaling=Scaling.identity(params.n_channels),
    )


def residual_covariances(
    dataset: lorenz.SyntheticDataset, fit: FitResult, split: str = "test"
) -> SplitMetrics:
    """Sample covariances of the four residual series plus the truth reference.

    * measurement reconstruction: data minus its projection onto the
      estimated signal subspace;
    * measurement prediction: data minus the one-step-ahead prediction
      through the fitted latent VAR;
    * signal reconstruction / prediction: the same two estimates compared
      against the true signal part instead of the raw data;
    * truth reference: data minus the true signal part (the static noise
      stream itself).
    """
    if fit.params.var_coeffs is None:
        raise OrderError("evaluation requires fitted latent VAR coefficients")
    y, v_true = dataset.split(split)
    s = fit.order
    if y.shape[0] < s + 3:
        raise InsufficientData(
            f"split {split!r} has {y.shape[0]} samples; need more than {s + 2}"
        )
    center = fit.scaling.center
    true_signal = v_true @ dataset.params_true.loadings.T

    v_hat = fit.extract(y)
    v_pred = predict_series(fit.params.var_coeffs, v_hat)
    recon_signal = (y - center) @ fit.projector().T
    pred_signal = v_pred @ fit.loadings_original().T

    window = slice(s, None)
    resid_recon = y[window] - (recon_signal[window] + center)
    resid_pred = y[window] - (pred_signal + center)
    resid_sig_recon = recon_signal[window] - true_signal[window]
    resid_sig_pred = pred_signal - true_signal[window]
    resid_truth = y[window] - true_signal[window]

    return SplitMetrics(
        split=split,
        meas_recon_cov=linalg.sample_covariance(resid_recon),
        meas_pred_cov=linalg.sample_covariance(resid_pred),
        sig_recon_cov=linalg.sample_covariance(resid_sig_recon),
        sig_pred_cov=linalg.sample_covariance(resid_sig_pred),
        truth_noise_cov=linalg.sample_covariance(resid_truth),
    )


def em_signal_prediction_cov(fit: FitResult) -> np.ndarray:
    """Model-implied covariance of the one-step signal prediction error."""
    loadings = fit.loadings_original()
    return linalg.symmetrize(loadings @ fit.params.innovation_cov @ loadings.T)


def _true_projector(dataset: lorenz.SyntheticDataset) -> np.ndarray:
    params = dataset.params_true
    weights = weights_from_loadings(params)
    return oblique_projector(params.loadings, weights.dlv)


def projector_distance(dataset: lorenz.SyntheticDataset, fit: FitResult) -> float:
    """Frobenius distance between the true and fitted oblique projectors."""
    return linalg.frobenius_distance(_true_projector(dataset), fit.projector())


def signal_subspace_angle(
    dataset: lorenz.SyntheticDataset, fit: FitResult, aggregate: str = "mean"
) -> float:
    """Canonical-angle distance (degrees) between true and fitted signal spans."""
    angles = linalg.canonical_angles(
        dataset.params_true.loadings, fit.loadings_original()
    )
    if aggregate == "mean":
        return float(angles.mean())
    if aggregate == "max":
        return float(angles.max())
    raise ConfigError(f"unknown aggregate {aggregate!r}")


def sensor_traces(
    dataset: lorenz.SyntheticDataset,
    fit: FitResult,
    sensor: int,
    split: str = "test",
) -> dict[str, np.ndarray]:
    """Aligned per-sensor series for trace plots.

    Returns the true signal, its reconstruction and one-step prediction,
    and the two error series, each of length ``split length - order``.
    """
    if fit.params.var_coeffs is None:
        raise OrderError("traces require fitted latent VAR coefficients")
    y, v_true = dataset.split(split)
    p = y.shape[1]
    if not 0 <= sensor < p:
        raise IndexError(f"sensor {sensor} out of range 0..{p - 1}")
    s = fit.order
    center = fit.scaling.center

    true_signal = (v_true @ dataset.params_true.loadings.T)[s:, sensor]
    v_hat = fit.extract(y)
    recon = ((y - center) @ fit.projector().T)[s:, sensor]
    pred = (predict_series(fit.params.var_coeffs, v_hat) @ fit.loadings_original().T)[
        :, sensor
    ]
    return {
        "true_signal": true_signal,
        "reconstructed": recon,
        "predicted": pred,
        "reconstruction_error": recon - true_signal,
        "prediction_error": pred - true_signal,
    }


def evaluate_fit(
    dataset: lorenz.SyntheticDataset,
    fit: FitResult,
    splits: tuple[str, ...] = ("train", "test"),
) -> EvalReport:
    """Assemble the full evaluation report for one fit."""
    return EvalReport(
        splits={name: residual_covariances(dataset, fit, name) for name in splits},
        em_sig_pred_cov=em_signal_prediction_cov(fit),
        projector_distance=projector_distance(dataset, fit),
        signal_angle_deg=signal_subspace_angle(dataset, fit, "mean"),
        signal_angle_max_deg=signal_subspace_angle(dataset, fit, "max"),
    )


@dataclass(frozen=True)
class SweepCell:
    """One (sample count, algorithm, seed) entry of a consistency sweep."""

    samples: int
    algorithm: str
    seed: int | None
    projector_distance: float
    signal_angle_deg: float
    converged: bool
    error: str | None = None


def _sweep_cell(
    dataset: lorenz.SyntheticDataset,
    samples: int,
    algorithm: str,
    seed: int | None,
    order: int,
    latent_dim: int,
    config: FitConfig,
) -> SweepCell:
    try:
        data = lorenz.regenerate(dataset, seed)
        fit = ALGORITHMS[algorithm](data.y[:samples], order, latent_dim, config)
        return SweepCell(
            samples=samples,
            algorithm=algorithm,
            seed=seed,
            projector_distance=projector_distance(data, fit),
            signal_angle_deg=signal_subspace_angle(data, fit),
            converged=fit.converged,
        )
    except (PredvarError, np.linalg.LinAlgError) as exc:
        return SweepCell(
            samples=samples,
            algorithm=algorithm,
            seed=seed,
            projector_distance=float("nan"),
            signal_angle_deg=float("nan"),
            converged=False,
            error=f"{type(exc).__name__}: {exc}",
        )


def consistency_sweep(
    dataset: lorenz.SyntheticDataset,
    sample_counts,
    algorithms,
    seeds,
    order: int = 2,
    latent_dim: int | None = None,
    config: FitConfig | None = None,
    jobs: int = 1,
) -> list[SweepCell]:
    """Fit every (count, algorithm, seed) cell on the first ``count`` samples.

    Datasets are regenerated per seed with the generator settings stored on
    ``dataset``.  Failing cells are recorded with an error label instead of
    aborting the sweep, so result tables stay rectangular.  Cell order in
    the result is deterministic regardless of ``jobs``.
    """
    config = config or FitConfig()
    ell = dataset.params_true.latent_dim if latent_dim is None else latent_dim
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise ConfigError(f"unknown algorithm(s) {unknown}; pick from {sorted(ALGORITHMS)}")
    for count in sample_counts:
        if not 1 < count <= dataset.n_samples:
            raise ConfigError(
                f"sample count {count} outside 2..{dataset.n_samples}"
            )
    cells = [
        (count, algorithm, seed)
        for seed in seeds
        for algorithm in algorithms
        for count in sample_counts
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(
                pool.map(
                    lambda cell: _sweep_cell(dataset, *cell, order, ell, config), cells
                )
            )
    return [_sweep_cell(dataset, *cell, order, ell, config) for cell in cells]
