"""Benchmark estimators sharing the main algorithm's data plumbing.

``fit_orth`` keeps the alternation but replaces the constrained weight
rebuild with the pseudo-inverse transpose of the loadings, so extraction
ignores the oblique noise geometry.  ``fit_oneshot`` skips alternation
entirely: it reads the signal subspace off a full-dimensional VAR in one
shot and estimates the latent dynamics once.  The subspace stage is a
truncated-SVD stand-in for eigendecomposition-based one-shot subspace
identification; comparisons against it are qualitative.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import linalg
from .estimation import (
    FitConfig,
    FitResult,
    Scaling,
    _alternating_fit,
    _complete_params,
    _solve_spd,
    _trace_objectives,
    build_stacks,
    constrained_weights,
    extract_dlvs,
    update_dynamics,
)
from .exceptions import ConfigError, RankError
from .model import as_time_series


def fit_orth(
    y, order: int, latent_dim: int, config: FitConfig | None = None
) -> FitResult:
    """Alternating fit with orthogonal (pseudo-inverse) latent extraction.

    The returned weights satisfy ``weights.dlv.T @ loadings == I`` by
    construction but are not orthonormal, and the residual-covariance
    constraint is not enforced.
    """
    return _alternating_fit(
        y, order, latent_dim, config or FitConfig(), "orthogonal", "orth"
    )


def fit_oneshot(
    y, order: int, latent_dim: int, config: FitConfig | None = None
) -> FitResult:
    """One-shot subspace fit: full VAR, truncated SVD, single dynamics pass.

    Stage 1 fits an unrestricted VAR to the scaled measurements, stacks its
    lag coefficients side by side, and takes the top ``latent_dim`` left
    singular vectors as the signal subspace; the weights then come from the
    same residual-covariance constraint the main algorithm uses.  Stage 2
    extracts the latent series and estimates its VAR coefficients exactly
    once -- no alternation, so ``iterations`` is always 1.
    """
    y = as_time_series(y)
    p = y.shape[1]
    if not 1 <= latent_dim < p:
        raise ConfigError(f"latent dimension {latent_dim} must lie in [1, {p - 1}]")
    config = config or FitConfig()
    scaling = Scaling.fit(y) if config.scale else Scaling.identity(p)
    stacks = build_stacks(scaling.apply(y), order)

    # Stage 1: unrestricted VAR on the measurements.  Minimum-norm least
    # squares keeps the stage well defined when the lagged measurements are
    # rank deficient (exactly low-rank data); ridge callers get the
    # regularised normal equations instead.
    design = np.hstack([stacks.meas_lag(order - j) for j in range(1, order + 1)])
    target = stacks.meas_lag(order)
    if config.ridge:
        gram = design.T @ design + config.ridge * np.eye(design.shape[1])
        coef = _solve_spd(
            gram, design.T @ target, "measurement lag design is rank deficient"
        )
    else:
        coef = scipy.linalg.lstsq(design, target, cond=linalg.RANK_RTOL)[0]
    full_resid = target - design @ coef
    residual_cov = linalg.symmetrize(full_resid.T @ full_resid / stacks.n_samples)

    # The lag coefficients stacked side by side have rank at most latent_dim
    # under the model; their leading left subspace estimates the signal span.
    coeff_sheet = coef.T  # p x (order * p), lag-1 block first
    svd = linalg.svd_full(coeff_sheet)
    sigmas = svd.singular_values
    if sigmas[-latent_dim] <= 1e-12 * max(sigmas[-1], 1e-300):
        raise RankError(
            f"stacked VAR coefficients expose fewer than {latent_dim} signal directions"
        )
    basis = svd.left_vectors[:, -latent_dim:]

    dlv_weights, static_weights = constrained_weights(basis, residual_cov)
    cross = dlv_weights.T @ basis
    try:
        loadings = np.linalg.solve(cross.T, basis.T).T
    except np.linalg.LinAlgError as exc:
        raise RankError("signal subspace is degenerate under the weights") from exc

    # Stage 2: one pass of latent extraction and dynamics estimation.
    stacks = extract_dlvs(stacks, dlv_weights)
    coeff_stack, innovation_cov = update_dynamics(stacks, config.ridge)
    params, weights = _complete_params(
        loadings, dlv_weights, static_weights, residual_cov, coeff_stack, innovation_cov
    )
    trace = np.array(
        [_trace_objectives(stacks, coeff_stack, loadings, residual_cov, innovation_cov)]
    )
    return FitResult(
        algorithm="oneshot",
        order=order,
        latent_dim=latent_dim,
        params=params,
        weights=weights,
        residual_cov=residual_cov,
        iterations=1,
        converged=True,
        objective_trace=trace,
        scaling=scaling,
    )
