"""Model types for reduced-dimensional VAR processes with oblique noise.

The measurement model splits a p-dimensional series into a dynamic part,
driven by an l-dimensional latent VAR, and a serially independent static
part::

    y[k] = loadings @ v[k] + static_loadings @ noise[k]
    v[k] = sum_j var_coeffs[j] @ v[k-j-1] + innovation[k]

The two loading blocks need not be orthogonal; they only need to form a
nonsingular matrix when stacked side by side.  The dual weight matrices
(the inverse transpose of that stack) recover the latent series exactly:
``v[k] = weights.dlv.T @ y[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import (
    DimensionError,
    InvalidCovariance,
    InvalidInput,
    NotDualPair,
    OrderError,
    SingularLoadings,
    SingularTransform,
    UnstableDynamics,
)

DUALITY_TOL = 1e-8


def as_time_series(x, name: str = "series") -> np.ndarray:
    """Coerce to a finite 2-D float array with at least one row."""
    out = linalg.as_matrix(x, name)
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise InvalidInput(f"{name} must have at least one row and one column")
    return out


def check_covariance(cov, dim: int, name: str) -> np.ndarray:
    """Validate a symmetric positive semidefinite matrix of size ``dim``."""
    cov = linalg.as_matrix(cov, name)
    if cov.shape != (dim, dim):
        raise DimensionError(f"{name} must be {dim}x{dim}, got {cov.shape}")
    scale = max(float(np.linalg.norm(cov, "fro")), 1.0)
    if np.linalg.norm(cov - cov.T, "fro") > 1e-12 * scale:
        raise InvalidCovariance(f"{name} is not symmetric")
    eigvals = np.linalg.eigvalsh(linalg.symmetrize(cov))
    if eigvals[0] < -1e-10 * scale:
        raise InvalidCovariance(f"{name} has negative eigenvalue {eigvals[0]:.3e}")
    return linalg.symmetrize(cov)


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, clamping tiny negative modes."""
    vals, vecs = np.linalg.eigh(linalg.symmetrize(cov))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True, eq=False)
class WeightMatrices:
    """Dual weights: ``dlv`` extracts the latent series, ``static`` the noise."""

    dlv: np.ndarray
    static: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.hstack([self.dlv, self.static])


@dataclass(frozen=True, eq=False)
class PredVarParams:
    """Full parameter set of the reduced-dimensional VAR model.

    ``var_coeffs`` may be None for datasets whose latent dynamics are not
    a VAR (e.g. the chaotic-flow case studies).
    """

    loadings: np.ndarray
    static_loadings: np.ndarray
    innovation_cov: np.ndarray
    static_noise_cov: np.ndarray
    var_coeffs: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        loadings = linalg.as_matrix(self.loadings, "loadings")
        p, ell = loadings.shape
        stat = linalg.as_matrix(self.static_loadings, "static_loadings")
        if stat.shape != (p, p - ell):
            raise DimensionError(
                f"static_loadings must be {p}x{p - ell}, got {stat.shape}"
            )
        if not 1 <= ell < p:
            raise DimensionError(f"latent dimension {ell} must lie in [1, {p - 1}]")
        stacked = np.hstack([loadings, stat])
        s_vals = np.linalg.svd(stacked, compute_uv=False)
        if s_vals[-1] <= 1e-10 * s_vals[0]:
            raise SingularLoadings("stacked loadings matrix is numerically singular")
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "static_loadings", stat)
        object.__setattr__(
            self, "innovation_cov", check_covariance(self.innovation_cov, ell, "innovation_cov")
        )
        object.__setattr__(
            self,
            "static_noise_cov",
            check_covariance(self.static_noise_cov, p - ell, "static_noise_cov"),
        )
        if self.var_coeffs is not None:
            coeffs = tuple(linalg.as_matrix(b, "var coefficient") for b in self.var_coeffs)
            if not coeffs:
                raise OrderError("var_coeffs must contain at least one lag matrix")
            for b in coeffs:
                if b.shape != (ell, ell):
                    raise DimensionError(f"each VAR coefficient must be {ell}x{ell}")
            object.__setattr__(self, "var_coeffs", coeffs)

    @property
    def n_channels(self) -> int:
        return self.loadings.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.loadings.shape[1]

    @property
    def order(self) -> int:
        return 0 if self.var_coeffs is None else len(self.var_coeffs)


@dataclass(frozen=True, eq=False)
class ReducedRankVar:
    """Equivalent full-dimensional VAR with rank-limited coefficient matrices."""

    coeffs: tuple[np.ndarray, ...]
    residual_cov: np.ndarray


def dual_weights(loadings, static_loadings) -> WeightMatrices:
    """Inverse-transpose weights of the stacked loadings.

    The returned pair satisfies ``[dlv static].T @ [loadings static_loadings]
    == I`` to machine precision.
    """
    loadings = linalg.as_matrix(loadings, "loadings")
    static_loadings = linalg.as_matrix(static_loadings, "static_loadings")
    stacked = np.hstack([loadings, static_loadings])
    if stacked.shape[0] != stacked.shape[1]:
        raise DimensionError("stacked loadings must be square")
    s_vals = np.linalg.svd(stacked, compute_uv=False)
    if s_vals[-1] <= 1e-10 * s_vals[0]:
        raise SingularLoadings("stacked loadings matrix is numerically singular")
    inv_t = np.linalg.solve(stacked.T, np.eye(stacked.shape[0]))
    ell = loadings.shape[1]
    return WeightMatrices(dlv=inv_t[:, :ell], static=inv_t[:, ell:])


def weights_from_loadings(params: PredVarParams) -> WeightMatrices:
    """Dual weights of a parameter set's loading blocks."""
    return dual_weights(params.loadings, params.static_loadings)


def oblique_projector(loadings, dlv_weights) -> np.ndarray:
    """Idempotent projector onto span(loadings) along the weights' null space."""
    loadings = linalg.as_matrix(loadings, "loadings")
    dlv_weights = linalg.as_matrix(dlv_weights, "dlv_weights")
    if loadings.shape != dlv_weights.shape:
        raise DimensionError("loadings and weights must share a shape")
    gram = dlv_weights.T @ loadings
    if np.linalg.norm(gram - np.eye(gram.shape[0]), "fro") > DUALITY_TOL:
        raise NotDualPair("weights.T @ loadings deviates from the identity")
    return loadings @ dlv_weights.T


def companion_matrix(var_coeffs) -> np.ndarray:
    """Companion form of a latent VAR; stability means spectral radius < 1."""
    coeffs = [linalg.as_matrix(b, "var coefficient") for b in var_coeffs]
    if not coeffs:
        raise OrderError("need at least one coefficient matrix")
    ell = coeffs[0].shape[0]
    s = len(coeffs)
    top = np.hstack(coeffs)
    if s == 1:
        return top
    lower = np.eye(ell * (s - 1), ell * s)
    return np.vstack([top, lower])


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def one_step_predict(var_coeffs, history) -> np.ndarray:
    """Predict the next latent sample from the last ``s`` samples.

    ``history`` is time-ordered oldest first, so its final row is the most
    recent sample (the lag-1 regressor).
    """
    coeffs = [linalg.as_matrix(b, "var coefficient") for b in var_coeffs]
    history = linalg.as_matrix(history, "history")
    s = len(coeffs)
    if history.shape != (s, coeffs[0].shape[0]):
        raise DimensionError(
            f"history must be {s}x{coeffs[0].shape[0]}, got {history.shape}"
        )
    pred = np.zeros(coeffs[0].shape[0])
    for j, b in enumerate(coeffs, start=1):
        pred += b @ history[s - j]
    return pred


def predict_series(var_coeffs, series) -> np.ndarray:
    """One-step predictions for ``series[s:]`` from its own lagged samples."""
    coeffs = [linalg.as_matrix(b, "var coefficient") for b in var_coeffs]
    series = as_time_series(series)
    s = len(coeffs)
    m = series.shape[0]
    if m <= s:
        raise DimensionError(f"series of length {m} has no window beyond order {s}")
    pred = np.zeros((m - s, series.shape[1]))
    for j, b in enumerate(coeffs, start=1):
        pred += series[s - j : m - j] @ b.T
    return pred


def simulate(
    params: PredVarParams,
    n: int,
    seed: int | None = None,
    burn_in: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n + order`` samples of measurements and latent states.

    The latent VAR starts from zero history and runs ``burn_in`` extra steps
    that are discarded, so the retained stretch is effectively stationary.
    The extra ``order`` samples keep lagged-regression bookkeeping simple
    downstream.  Deterministic per seed.
    """
    if params.var_coeffs is None:
        raise OrderError("simulate requires latent VAR coefficients")
    if n < 1:
        raise InvalidInput(f"sample count must be positive, got {n}")
    if burn_in < 0:
        raise InvalidInput("burn_in must be nonnegative")
    comp = companion_matrix(params.var_coeffs)
    radius = spectral_radius(comp)
    if radius >= 1.0:
        raise UnstableDynamics(f"companion spectral radius {radius:.6f} >= 1")

    s = params.order
    ell = params.latent_dim
    p = params.n_channels
    total = burn_in + n + s
    rng = np.random.default_rng(seed)
    innovations = rng.standard_normal((total, ell)) @ psd_sqrt(params.innovation_cov).T
    static_noise = rng.standard_normal((n + s, p - ell)) @ psd_sqrt(
        params.static_noise_cov
    ).T

    v = np.zeros((total + s, ell))
    coeffs = params.var_coeffs
    for k in range(s, total + s):
        step = innovations[k - s]
        for j, b in enumerate(coeffs, start=1):
            step = step + b @ v[k - j]
        v[k] = step
    v_kept = v[s + burn_in :]
    y = v_kept @ params.loadings.T + static_noise @ params.static_loadings.T
    return y, v_kept


def to_reduced_rank_var(params: PredVarParams) -> ReducedRankVar:
    """Fold the latent VAR into measurement space.

    Each lag coefficient becomes ``loadings @ B_j @ dlv_weights.T`` (rank at
    most the latent dimension) and the one-step residual covariance combines
    the projected innovation and static-noise covariances.
    """
    if params.var_coeffs is None:
        raise OrderError("reduced-rank form requires latent VAR coefficients")
    weights = weights_from_loadings(params)
    coeffs = tuple(
        params.loadings @ b @ weights.dlv.T for b in params.var_coeffs
    )
    residual_cov = (
        params.loadings @ params.innovation_cov @ params.loadings.T
        + params.static_loadings @ params.static_noise_cov @ params.static_loadings.T
    )
    return ReducedRankVar(coeffs=coeffs, residual_cov=linalg.symmetrize(residual_cov))


def equivalent_transform(params: PredVarParams, m, m_bar) -> PredVarParams:
    """Re-express the model in transformed latent/static bases.

    The transformed parameter set generates the same measurement
    distribution: the oblique projector, the folded coefficient matrices and
    the measurement residual covariance are all invariant.
    """
    m = linalg.as_matrix(m, "m")
    m_bar = linalg.as_matrix(m_bar, "m_bar")
    ell = params.latent_dim
    p = params.n_channels
    if m.shape != (ell, ell) or m_bar.shape != (p - ell, p - ell):
        raise DimensionError("transform blocks have wrong shapes")
    for name, mat in (("m", m), ("m_bar", m_bar)):
        s_vals = np.linalg.svd(mat, compute_uv=False)
        if s_vals[-1] <= 1e-12 * s_vals[0]:
            raise SingularTransform(f"{name} is numerically singular")
    m_inv = np.linalg.solve(m, np.eye(ell))
    m_bar_inv = np.linalg.solve(m_bar, np.eye(p - ell))
    coeffs = None
    if params.var_coeffs is not None:
        coeffs = tuple(m @ b @ m_inv for b in params.var_coeffs)
    return PredVarParams(
        loadings=params.loadings @ m_inv,
        static_loadings=params.static_loadings @ m_bar_inv,
        innovation_cov=linalg.symmetrize(m @ params.innovation_cov @ m.T),
        static_noise_cov=linalg.symmetrize(m_bar @ params.static_noise_cov @ m_bar.T),
        var_coeffs=coeffs,
    )
