"""Estimator-style front end over the functional fitting routines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .baselines import fit_oneshot, fit_orth
from .estimation import FitConfig, fit_predvar
from .exceptions import ConfigError
from .model import as_time_series

_FITTERS = {"predvar": fit_predvar, "orth": fit_orth, "oneshot": fit_oneshot}


class PredVAR(TransformerMixin, BaseEstimator):
    """Reduced-dimensional VAR with oblique signal/noise separation.

    Parameters
    ----------
    latent_dim : int
        Dimension of the dynamic latent subspace (must be < n_features).
    order : int, default 2
        Autoregressive order of the latent dynamics.
    algorithm : {"predvar", "orth", "oneshot"}, default "predvar"
        Fitting routine: the alternating oblique algorithm, its
        orthogonal-extraction variant, or the one-shot subspace baseline.
    scale : bool, default True
        Z-score each channel before fitting (recommended).

    The remaining parameters mirror :class:`~predvar.estimation.FitConfig`.

    Attributes
    ----------
    result_ : FitResult
        Full fit output (scaled-space parameters plus scaling).
    loadings_ : ndarray of shape (n_features, latent_dim)
        Signal loadings in original units.
    weights_ : ndarray of shape (n_features, latent_dim)
        Latent extraction weights in original units.
    latent_coeffs_ : tuple of ndarray
        Fitted VAR coefficient matrices of the latent series.
    projector_ : ndarray of shape (n_features, n_features)
        Oblique projector onto the estimated signal subspace.
    """

    def __init__(
        self,
        latent_dim=None,
        order=2,
        algorithm="predvar",
        outer_tol=1e-6,
        outer_max_iter=500,
        inner_tol=1e-8,
        inner_max_iter=100,
        ridge=0.0,
        scale=True,
    ):
        self.latent_dim = latent_dim
        self.order = order
        self.algorithm = algorithm
        self.outer_tol = outer_tol
        self.outer_max_iter = outer_max_iter
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.ridge = ridge
        self.scale = scale

    def _fit_config(self) -> FitConfig:
        return FitConfig(
            outer_tol=self.outer_tol,
            outer_max_iter=self.outer_max_iter,
            inner_tol=self.inner_tol,
            inner_max_iter=self.inner_max_iter,
            ridge=self.ridge,
            scale=self.scale,
        )

    def fit(self, X, y=None):
        """Fit the model to a row-per-sample series ``X``."""
        if self.latent_dim is None:
            raise ConfigError("latent_dim must be set before fitting")
        if self.algorithm not in _FITTERS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; pick from {sorted(_FITTERS)}"
            )
        X = as_time_series(X, "X")
        result = _FITTERS[self.algorithm](
            X, self.order, self.latent_dim, self._fit_config()
        )
        self.result_ = result
        self.n_features_in_ = X.shape[1]
        self.loadings_ = result.loadings_original()
        self.weights_ = result.dlv_weights_original()
        self.latent_coeffs_ = result.params.var_coeffs
        self.innovation_cov_ = result.params.innovation_cov
        self.residual_cov_ = result.residual_cov_original()
        self.projector_ = result.projector()
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("this PredVAR instance is not fitted yet")

    def transform(self, X) -> np.ndarray:
        """Extract the latent series from measurements."""
        self._check_fitted()
        return self.result_.extract(as_time_series(X, "X"))

    def inverse_transform(self, V) -> np.ndarray:
        """Map a latent series back to the measurement space (signal part)."""
        self._check_fitted()
        V = as_time_series(V, "V")
        return V @ self.loadings_.T + self.result_.scaling.center

    def predict(self, X) -> np.ndarray:
        """One-step-ahead measurement predictions for ``X[order:]``."""
        self._check_fitted()
        return self.result_.predict(as_time_series(X, "X"))
