"""Closed-form ridge baseline over standardized bandpower features.

Features are z-scored with stored population moments (a small epsilon under
the root keeps constant columns harmless), a bias column of ones is
appended, and the multi-output weights come from the regularized normal
equations. The penalty applies to the full weight matrix, bias row
included; many ridge variants exempt the bias, this one deliberately does
not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError

__all__ = ["RidgeModel", "fit_ridge", "predict_ridge"]

STANDARDIZE_EPS = 1e-6


@dataclass
class RidgeModel:
    """Stored standardization moments plus augmented-design weights."""

    mu: np.ndarray
    sigma: np.ndarray
    W: np.ndarray  # (D+1) x n_outputs, bias row last
    lambda_ridge: float

    @property
    def n_features(self) -> int:
        return self.mu.shape[0]

    def snapshot(self) -> dict:
        return {
            "schema_version": 1,
            "model_kind": "ar",
            "mu": self.mu.copy(),
            "sigma": self.sigma.copy(),
            "W": self.W.copy(),
            "lambda_ridge": self.lambda_ridge,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "RidgeModel":
        if int(snap.get("schema_version", -1)) != 1:
            raise ConfigError("unsupported ridge snapshot version")
        return cls(
            mu=np.array(snap["mu"], dtype=float),
            sigma=np.array(snap["sigma"], dtype=float),
            W=np.array(snap["W"], dtype=float),
            lambda_ridge=float(snap["lambda_ridge"]),
        )

    # evaluation drives all models through the same fit/predict surface
    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict_ridge(self, x)


def fit_ridge(X: np.ndarray, Y: np.ndarray, lambda_ridge: float = 1e-3) -> RidgeModel:
    """Fit the standardized, bias-augmented ridge map from X (N x D) to Y (N x 2).

    Uses population (1/N) variance with ``1e-6`` added inside the square
    root, so constant feature columns standardize to zero instead of
    dividing by zero.
    """
    if lambda_ridge <= 0:
        raise ConfigError("lambda_ridge must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if X.shape[0] < 1:
        raise InvalidInputError("need at least one sample")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidInputError("non-finite training data")

    mu = X.mean(axis=0)
    sigma = np.sqrt(np.mean((X - mu) ** 2, axis=0) + STANDARDIZE_EPS)
    Xb = np.column_stack([(X - mu) / sigma, np.ones(X.shape[0])])
    d1 = Xb.shape[1]
    G = Xb.T @ Xb + lambda_ridge * np.eye(d1)
    W = np.linalg.solve(G, Xb.T @ Y)
    return RidgeModel(mu=mu, sigma=sigma, W=W, lambda_ridge=float(lambda_ridge))


def predict_ridge(model: RidgeModel, x: np.ndarray) -> np.ndarray:
    """Map a D-vector (or N x D batch) through the stored moments and weights."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.n_features:
        raise InvalidInputError(
            f"expected {model.n_features} features, got {x2.shape[1]}"
        )
    xb = np.column_stack([(x2 - model.mu) / model.sigma, np.ones(x2.shape[0])])
    out = xb @ model.W
    return out[0] if single else out
