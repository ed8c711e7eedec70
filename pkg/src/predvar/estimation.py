"""Alternating estimation of latent VAR dynamics and oblique loadings.

The driver alternates two least-squares stages on lag-stacked data until the
oblique projector stops moving:

1. dynamics stage -- regress the newest extracted latent block on its lags
   to refresh the VAR coefficients and innovation covariance;
2. loadings stage -- regress the newest measurement block on the *predicted*
   latent values to refresh the loadings and measurement residual
   covariance, then rebuild the weights from the residual-covariance
   constraint (the noise-extracting weights must not see the dynamic part).

Regressing on predicted rather than extracted latent values is what makes
the loadings stage noise-aware; the regression-on-extracted variant (the
LaVAR-CCA-style update) is a different estimator and is deliberately not
used here.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .exceptions import (
    ConfigError,
    DimensionError,
    InsufficientData,
    InvalidInput,
    OrderError,
    RankError,
    SingularCovariance,
    SingularGram,
)
from .model import PredVarParams, WeightMatrices, as_time_series, predict_series


@dataclass(frozen=True)
class FitConfig:
    """Tolerances and caps for the alternating fit.

    Termination is measured as the relative Frobenius change of the oblique
    projector between successive iterations, for both loops.
    """

    outer_tol: float = 1e-6
    outer_max_iter: int = 500
    inner_tol: float = 1e-8
    inner_max_iter: int = 100
    ridge: float = 0.0
    scale: bool = True

    def __post_init__(self):
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.outer_max_iter < 1 or self.inner_max_iter < 1:
            raise ConfigError("iteration caps must be at least 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be nonnegative")


@dataclass(frozen=True, eq=False)
class Scaling:
    """Per-channel affine map applied to the data before fitting."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, y: np.ndarray) -> "Scaling":
        std = y.std(axis=0)
        return cls(center=y.mean(axis=0), scale=np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, dim: int) -> "Scaling":
        return cls(center=np.zeros(dim), scale=np.ones(dim))

    def apply(self, y: np.ndarray) -> np.ndarray:
        return (y - self.center) / self.scale

    def restore(self, y_scaled: np.ndarray) -> np.ndarray:
        return y_scaled * self.scale + self.center


@dataclass(frozen=True, eq=False)
class StackedData:
    """Lag-aligned views of a series for order-``s`` regressions.

    Block ``i`` (for i = 0..s) holds samples ``i .. i+N-1`` of the series,
    so block ``s`` is the regression target and the earlier blocks are its
    lags.  ``dlv_history`` concatenates the extracted latent blocks in
    lag-1-first order, matching the row layout of the stacked coefficient
    matrix (lag-1 block on top).
    """

    series: np.ndarray
    order: int
    dlv_series: np.ndarray | None = None
    dlv_history: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.series.shape[0] - self.order

    @property
    def n_channels(self) -> int:
        return self.series.shape[1]

    def meas_lag(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.order:
            raise DimensionError(f"lag block {i} out of range 0..{self.order}")
        return self.series[i : i + self.n_samples]

    def dlv_lag(self, i: int) -> np.ndarray:
        if self.dlv_series is None:
            raise InvalidInput("latent series not extracted yet")
        if not 0 <= i <= self.order:
            raise DimensionError(f"lag block {i} out of range 0..{self.order}")
        return self.dlv_series[i : i + self.n_samples]


def build_stacks(y, order: int) -> StackedData:
    """Validate a series and prepare its lag blocks for an order-s fit."""
    y = as_time_series(y)
    if order < 1:
        raise OrderError(f"autoregressive order must be >= 1, got {order}")
    if y.shape[0] < order + 2:
        raise InsufficientData(
            f"need at least {order + 2} samples for order {order}, got {y.shape[0]}"
        )
    return StackedData(series=y, order=order)


def init_weights(y, latent_dim: int) -> np.ndarray:
    """Principal directions used to seed the weight iteration.

    Returns the ``latent_dim`` most energetic left singular vectors of the
    sample second-moment matrix (an orthonormal p x l block).
    """
    y = as_time_series(y)
    p = y.shape[1]
    if not 1 <= latent_dim < p:
        raise ConfigError(f"latent dimension {latent_dim} must lie in [1, {p - 1}]")
    moment = linalg.symmetrize(y.T @ y / y.shape[0])
    vals, vecs = np.linalg.eigh(moment)
    if vals[-latent_dim] <= 1e-12 * max(vals[-1], 1e-300):
        raise RankError(
            f"second-moment matrix has fewer than {latent_dim} energetic directions"
        )
    return vecs[:, : p - latent_dim - 1 : -1].copy()


def extract_dlvs(stacks: StackedData, dlv_weights: np.ndarray) -> StackedData:
    """Extract the latent series through the weights and rebuild lag blocks."""
    dlv_weights = linalg.as_matrix(dlv_weights, "dlv_weights")
    if dlv_weights.shape[0] != stacks.n_channels:
        raise DimensionError(
            f"weights have {dlv_weights.shape[0]} rows, series has {stacks.n_channels} channels"
        )
    v = stacks.series @ dlv_weights
    n, s = stacks.n_samples, stacks.order
    history = np.hstack([v[s - j : s - j + n] for j in range(1, s + 1)])
    return dataclasses.replace(stacks, dlv_series=v, dlv_history=history)


def _solve_spd(gram: np.ndarray, rhs: np.ndarray, err: str) -> np.ndarray:
    try:
        cho = scipy.linalg.cho_factor(linalg.symmetrize(gram), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularGram(err) from exc
    return scipy.linalg.cho_solve(cho, rhs)


def update_dynamics(
    stacks: StackedData, ridge: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares VAR coefficients for the extracted latent series.

    Returns the stacked coefficient matrix (lag-1 block on top, each block
    a transposed lag coefficient) and the innovation covariance of the
    regression residuals (1/N normalization).
    """
    if stacks.dlv_history is None:
        raise InvalidInput("extract the latent series before updating dynamics")
    design = stacks.dlv_history
    target = stacks.dlv_lag(stacks.order)
    gram = design.T @ design
    if ridge:
        gram = gram + ridge * np.eye(gram.shape[0])
    coeff_stack = _solve_spd(
        gram, design.T @ target, "latent lag design is rank deficient at ridge=0"
    )
    resid = target - design @ coeff_stack
    innovation_cov = linalg.symmetrize(resid.T @ resid / stacks.n_samples)
    return coeff_stack, innovation_cov


def lag_coeffs(coeff_stack: np.ndarray, latent_dim: int) -> tuple[np.ndarray, ...]:
    """Split a stacked coefficient matrix into per-lag coefficient matrices."""
    coeff_stack = linalg.as_matrix(coeff_stack, "coeff_stack")
    rows, ell = coeff_stack.shape
    if ell != latent_dim or rows % latent_dim:
        raise DimensionError(
            f"stack of shape {coeff_stack.shape} does not split into {latent_dim}-sized lags"
        )
    order = rows // latent_dim
    return tuple(
        coeff_stack[j * latent_dim : (j + 1) * latent_dim].T.copy() for j in range(order)
    )


def stack_lag_coeffs(var_coeffs) -> np.ndarray:
    """Inverse of :func:`lag_coeffs`."""
    return np.vstack([np.asarray(b, dtype=float).T for b in var_coeffs])


def _gaussian_objective(resid: np.ndarray, cov: np.ndarray, what: str) -> float:
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise SingularCovariance(f"{what} is not positive definite")
    try:
        cho = scipy.linalg.cho_factor(linalg.symmetrize(cov), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovariance(f"{what} is not positive definite") from exc
    quad = float(np.sum(resid.T * scipy.linalg.cho_solve(cho, resid.T)))
    return resid.shape[0] * logdet + quad


def dlv_objective(
    stacks: StackedData, coeff_stack: np.ndarray, innovation_cov: np.ndarray
) -> float:
    """Negative log-likelihood shape for the latent one-step residuals."""
    if stacks.dlv_history is None:
        raise InvalidInput("extract the latent series before evaluating the objective")
    resid = stacks.dlv_lag(stacks.order) - stacks.dlv_history @ coeff_stack
    return _gaussian_objective(resid, innovation_cov, "innovation covariance")


def update_loadings(
    stacks: StackedData, coeff_stack: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Regress measurements on predicted latent values.

    Returns the loadings and the measurement residual covariance (1/N).
    The predicted latent values come from the lag design and the stacked
    coefficients, not from the extracted latent block itself.
    """
    if stacks.dlv_history is None:
        raise InvalidInput("extract the latent series before updating loadings")
    predicted = stacks.dlv_history @ coeff_stack
    target = stacks.meas_lag(stacks.order)
    gram = predicted.T @ predicted
    sol = _solve_spd(
        gram, predicted.T @ target, "predicted latent values are rank deficient"
    )
    loadings = sol.T
    resid = target - predicted @ loadings.T
    residual_cov = linalg.symmetrize(resid.T @ resid / stacks.n_samples)
    return loadings, residual_cov


def proj_objective(
    stacks: StackedData,
    coeff_stack: np.ndarray,
    loadings: np.ndarray,
    residual_cov: np.ndarray,
) -> float:
    """Negative log-likelihood shape for the measurement one-step residuals."""
    if stacks.dlv_history is None:
        raise InvalidInput("extract the latent series before evaluating the objective")
    predicted = stacks.dlv_history @ coeff_stack
    resid = stacks.meas_lag(stacks.order) - predicted @ loadings.T
    return _gaussian_objective(resid, residual_cov, "measurement residual covariance")


def _trace_objectives(
    stacks: StackedData,
    coeff_stack: np.ndarray,
    loadings: np.ndarray,
    residual_cov: np.ndarray,
    innovation_cov: np.ndarray,
) -> tuple[float, float]:
    """Objective pair for diagnostics; NaN where a covariance is singular.

    Exactly low-rank data produces a singular measurement residual
    covariance, for which the Gaussian objective is undefined; the fit
    itself terminates on projector change, so diagnostics record NaN
    instead of failing.
    """
    try:
        dlv = dlv_objective(stacks, coeff_stack, innovation_cov)
    except SingularCovariance:
        dlv = float("nan")
    try:
        proj = proj_objective(stacks, coeff_stack, loadings, residual_cov)
    except SingularCovariance:
        proj = float("nan")
    return dlv, proj


def constrained_weights(
    loadings: np.ndarray, residual_cov: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild weights so the static part stays clear of the dynamic part.

    The static weights span the left null space of the loadings; the latent
    weights are the least-excited left directions of ``residual_cov @
    static_weights``, which zeroes the cross-covariance between extracted
    latent innovations and static noise.  Both blocks are orthonormal.
    """
    loadings = linalg.as_matrix(loadings, "loadings")
    residual_cov = linalg.as_matrix(residual_cov, "residual_cov")
    p, ell = loadings.shape
    if residual_cov.shape != (p, p):
        raise DimensionError("residual covariance does not match the channel count")
    s_vals = np.linalg.svd(loadings, compute_uv=False)
    if s_vals[-1] <= linalg.RANK_RTOL * max(s_vals[0], 1e-300):
        raise RankError("loadings lost column rank")
    static_weights = linalg.left_null_basis(loadings, p - ell)
    coupled = linalg.symmetrize(residual_cov) @ static_weights
    dlv_weights = linalg.left_null_basis(coupled, ell)
    return dlv_weights, static_weights


@dataclass(frozen=True, eq=False)
class ObliqueFit:
    """Output of the loadings/weights stage."""

    loadings: np.ndarray
    dlv_weights: np.ndarray
    static_weights: np.ndarray
    residual_cov: np.ndarray
    iterations: int
    converged: bool


def _projector_change(proj: np.ndarray, prev: np.ndarray | None) -> float:
    if prev is None:
        return np.inf
    return float(
        np.linalg.norm(proj - prev, "fro") / max(np.linalg.norm(prev, "fro"), 1e-300)
    )


def fit_oblique(
    stacks: StackedData,
    coeff_stack: np.ndarray,
    dlv_weights: np.ndarray,
    config: FitConfig | None = None,
) -> ObliqueFit:
    """Iterate the loadings/weights stage with the dynamics held fixed.

    Each pass refreshes the loadings and residual covariance from the
    current predictions, rebuilds both weight blocks from the constraint,
    and re-extracts the latent series; it stops when the oblique projector
    settles (relative Frobenius change below ``inner_tol``).
    """
    config = config or FitConfig()
    if stacks.dlv_history is None:
        stacks = extract_dlvs(stacks, dlv_weights)
    prev_proj = None
    loadings = static_weights = residual_cov = None
    converged = False
    iterations = 0
    for iterations in range(1, config.inner_max_iter + 1):
        loadings, residual_cov = update_loadings(stacks, coeff_stack)
        dlv_weights, static_weights = constrained_weights(loadings, residual_cov)
        stacks = extract_dlvs(stacks, dlv_weights)
        proj = loadings @ dlv_weights.T
        if _projector_change(proj, prev_proj) < config.inner_tol:
            converged = True
            break
        prev_proj = proj
    return ObliqueFit(
        loadings=loadings,
        dlv_weights=dlv_weights,
        static_weights=static_weights,
        residual_cov=residual_cov,
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted model plus fit diagnostics.

    Parameters and weights are stored in the scaled data space (where the
    latent weights of the main algorithm are orthonormal); ``scaling``
    carries the per-channel affine map, and the ``*_original`` accessors
    report everything in the units of the data passed to the fit.
    """

    algorithm: str
    order: int
    latent_dim: int
    params: PredVarParams
    weights: WeightMatrices
    residual_cov: np.ndarray
    iterations: int
    converged: bool
    objective_trace: np.ndarray
    scaling: Scaling

    # -- unit conversion -------------------------------------------------
    def loadings_original(self) -> np.ndarray:
        return self.params.loadings * self.scaling.scale[:, None]

    def static_loadings_original(self) -> np.ndarray:
        return self.params.static_loadings * self.scaling.scale[:, None]

    def dlv_weights_original(self) -> np.ndarray:
        return self.weights.dlv / self.scaling.scale[:, None]

    def static_weights_original(self) -> np.ndarray:
        return self.weights.static / self.scaling.scale[:, None]

    def residual_cov_original(self) -> np.ndarray:
        return self.residual_cov * np.outer(self.scaling.scale, self.scaling.scale)

    def params_original(self) -> PredVarParams:
        return PredVarParams(
            loadings=self.loadings_original(),
            static_loadings=self.static_loadings_original(),
            innovation_cov=self.params.innovation_cov,
            static_noise_cov=self.params.static_noise_cov,
            var_coeffs=self.params.var_coeffs,
        )

    def projector(self, original_units: bool = True) -> np.ndarray:
        if original_units:
            return self.loadings_original() @ self.dlv_weights_original().T
        return self.params.loadings @ self.weights.dlv.T

    # -- application to data ---------------------------------------------
    def extract(self, y) -> np.ndarray:
        """Latent series extracted from original-unit measurements."""
        y = as_time_series(y)
        return (y - self.scaling.center) @ self.dlv_weights_original()

    def predict(self, y) -> np.ndarray:
        """One-step-ahead measurement predictions for ``y[order:]``."""
        v = self.extract(y)
        predicted = predict_series(self.params.var_coeffs, v)
        return predicted @ self.loadings_original().T + self.scaling.center

    # -- diagnostics -------------------------------------------------------
    def identity_residuals(self) -> tuple[float, float]:
        """Mismatch of the two at-convergence identities.

        Returns ``(|weights.T @ loadings - I|_F, relative mismatch between
        the weighted residual covariance and the innovation covariance)``.
        """
        gram = self.weights.dlv.T @ self.params.loadings
        first = float(np.linalg.norm(gram - np.eye(self.latent_dim), "fro"))
        weighted = self.weights.dlv.T @ self.residual_cov @ self.weights.dlv
        denom = max(np.linalg.norm(self.params.innovation_cov, "fro"), 1e-12)
        second = float(
            np.linalg.norm(weighted - self.params.innovation_cov, "fro") / denom
        )
        return first, second


def _complete_params(
    loadings: np.ndarray,
    dlv_weights: np.ndarray,
    static_weights: np.ndarray,
    residual_cov: np.ndarray,
    coeff_stack: np.ndarray,
    innovation_cov: np.ndarray,
) -> tuple[PredVarParams, WeightMatrices]:
    """Fill in the static loadings and static noise covariance.

    The static loadings are the unique completion that makes the stacked
    weights and stacked loadings exact duals; the static noise covariance
    is the residual covariance seen through the static weights.
    """
    ell = loadings.shape[1]
    weights = WeightMatrices(dlv=dlv_weights, static=static_weights)
    full_loadings = np.linalg.solve(weights.stacked.T, np.eye(loadings.shape[0]))
    static_loadings = full_loadings[:, ell:]
    static_noise_cov = linalg.symmetrize(
        static_weights.T @ residual_cov @ static_weights
    )
    params = PredVarParams(
        loadings=loadings,
        static_loadings=static_loadings,
        innovation_cov=innovation_cov,
        static_noise_cov=static_noise_cov,
        var_coeffs=lag_coeffs(coeff_stack, ell),
    )
    return params, weights


def _alternating_fit(
    y,
    order: int,
    latent_dim: int,
    config: FitConfig,
    weight_rule: str,
    algorithm: str,
) -> FitResult:
    y = as_time_series(y)
    p = y.shape[1]
    if not 1 <= latent_dim < p:
        raise ConfigError(f"latent dimension {latent_dim} must lie in [1, {p - 1}]")
    scaling = Scaling.fit(y) if config.scale else Scaling.identity(p)
    stacks = build_stacks(scaling.apply(y), order)
    dlv_weights = init_weights(stacks.series, latent_dim)

    prev_proj = None
    converged = False
    trace = []
    iterations = 0
    loadings = residual_cov = None
    for iterations in range(1, config.outer_max_iter + 1):
        stacks = extract_dlvs(stacks, dlv_weights)
        coeff_stack, innovation_cov = update_dynamics(stacks, config.ridge)
        if weight_rule == "constrained":
            stage = fit_oblique(stacks, coeff_stack, dlv_weights, config)
            loadings, residual_cov = stage.loadings, stage.residual_cov
            dlv_weights = stage.dlv_weights
        elif weight_rule == "orthogonal":
            loadings, residual_cov = update_loadings(stacks, coeff_stack)
            dlv_weights = orth_weights(loadings)
        else:  # pragma: no cover - internal misuse
            raise ConfigError(f"unknown weight rule {weight_rule!r}")
        trace.append(
            _trace_objectives(stacks, coeff_stack, loadings, residual_cov, innovation_cov)
        )
        proj = loadings @ dlv_weights.T
        if _projector_change(proj, prev_proj) < config.outer_tol:
            converged = True
            break
        prev_proj = proj

    # Consistency pass: refresh everything against the final weights so the
    # at-convergence identities hold exactly rather than to tolerance order.
    stacks = extract_dlvs(stacks, dlv_weights)
    coeff_stack, innovation_cov = update_dynamics(stacks, config.ridge)
    loadings, residual_cov = update_loadings(stacks, coeff_stack)
    static_weights = linalg.left_null_basis(loadings, p - latent_dim)
    params, weights = _complete_params(
        loadings, dlv_weights, static_weights, residual_cov, coeff_stack, innovation_cov
    )
    return FitResult(
        algorithm=algorithm,
        order=order,
        latent_dim=latent_dim,
        params=params,
        weights=weights,
        residual_cov=residual_cov,
        iterations=iterations,
        converged=converged,
        objective_trace=np.asarray(trace, dtype=float).reshape(-1, 2),
        scaling=scaling,
    )


def orth_weights(loadings: np.ndarray) -> np.ndarray:
    """Pseudo-inverse-transpose weights: extraction ignores obliqueness."""
    loadings = linalg.as_matrix(loadings, "loadings")
    s_vals = np.linalg.svd(loadings, compute_uv=False)
    if s_vals[-1] <= linalg.RANK_RTOL * max(s_vals[0], 1e-300):
        raise RankError("loadings lost column rank")
    gram = loadings.T @ loadings
    return np.linalg.solve(gram, loadings.T).T


def fit_predvar(
    y, order: int, latent_dim: int, config: FitConfig | None = None
) -> FitResult:
    """Fit the reduced-dimensional VAR with oblique projections.

    Alternates the dynamics stage and the constrained loadings/weights
    stage from a principal-directions start, finishing with one
    consistency pass; see the module docstring.  Non-convergence within
    ``outer_max_iter`` returns a flagged result rather than raising.
    """
    return _alternating_fit(
        y, order, latent_dim, config or FitConfig(), "constrained", "predvar"
    )
