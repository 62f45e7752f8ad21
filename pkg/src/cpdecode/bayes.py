"""Online Bayesian multi-output linear regression with forgetting.

The decoder keeps the sufficient statistics (SXX, SXY) of a linear-Gaussian
model and solves the regularized normal equations for the posterior-mean
weights. A Gaussian prior with either a shared (isotropic) or per-feature
(ARD) precision shrinks the solution; during streaming use, mini-batches of
buffered observations are folded into the statistics under a forgetting
factor, the weights are re-solved, and a small empirical-Bayes step nudges
the noise variance and prior precisions from the residuals. A separate
per-axis residual-power tracker (R) follows noise-level changes without
feeding back into the weight solve.
"""

from __future__ import annotations

from copy import deepcopy
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import ConfigError, InvalidInputError

__all__ = ["PriorSpec", "SufficientStats", "BayesDecoder", "solve_map"]

ALPHA_MIN = 1e-6
ALPHA_MAX = 1e6
WEIGHT_SQ_FLOOR = 1e-12
EIG_FLOOR = 1e-10


@dataclass
class PriorSpec:
    """Gaussian weight prior: shared precision or one precision per feature.

    ``kind`` is "isotropic" (scalar ``alpha``) or "ard" (``alpha`` is a
    D-vector; features whose precision grows large are effectively pruned).
    """

    kind: str = "ard"
    alpha: float | np.ndarray = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("isotropic", "ard"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "isotropic":
            self.alpha = float(self.alpha)
            if self.alpha <= 0:
                raise ConfigError("prior precision must be positive")
        else:
            self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
            if np.any(self.alpha <= 0):
                raise ConfigError("prior precisions must be positive")

    def precision_diag(self, n_features: int) -> np.ndarray:
        """Diagonal of the prior precision matrix as a D-vector."""
        if self.kind == "isotropic":
            return np.full(n_features, self.alpha)
        if self.alpha.shape[0] == 1 and n_features > 1:
            # scalar seed for an ARD prior: broadcast once, then track per-feature
            self.alpha = np.full(n_features, float(self.alpha[0]))
        if self.alpha.shape[0] != n_features:
            raise ConfigError(
                f"ARD prior has {self.alpha.shape[0]} precisions for D={n_features}"
            )
        return self.alpha


@dataclass
class SufficientStats:
    """The (SXX, SXY) pair that fully determines the weight solution."""

    sxx: np.ndarray
    sxy: np.ndarray

    @classmethod
    def zeros(cls, n_features: int, n_outputs: int = 2) -> "SufficientStats":
        return cls(np.zeros((n_features, n_features)), np.zeros((n_features, n_outputs)))

    @classmethod
    def from_data(cls, X: np.ndarray, Y: np.ndarray) -> "SufficientStats":
        sxx = X.T @ X
        return cls(0.5 * (sxx + sxx.T), X.T @ Y)

    def scale_and_add(self, lam: float, other: "SufficientStats") -> None:
        """In-place forgetting update: stats <- lam * stats + other."""
        self.sxx = lam * self.sxx + other.sxx
        self.sxx = 0.5 * (self.sxx + self.sxx.T)
        self.sxy = lam * self.sxy + other.sxy


def solve_map(stats: SufficientStats, sigma2: float, prior: PriorSpec) -> np.ndarray:
    """Posterior-mean weights: solve (SXX + sigma2 * A) W = SXY.

    The system is symmetric positive definite by construction and is
    factorized as such; if the factorization fails numerically the
    pseudoinverse is used instead.
    """
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be positive")
    if not (np.all(np.isfinite(stats.sxx)) and np.all(np.isfinite(stats.sxy))):
        raise InvalidInputError("non-finite sufficient statistics")
    d = stats.sxx.shape[0]
    M = stats.sxx + sigma2 * np.diag(prior.precision_diag(d))
    try:
        W = sla.solve(M, stats.sxy, assume_a="pos")
        if not np.all(np.isfinite(W)):
            raise np.linalg.LinAlgError("non-finite solution")
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
        W = np.linalg.pinv(M) @ stats.sxy
    # C order so predictions stay bit-identical across snapshot round trips
    return np.ascontiguousarray(W)


def _pinv_diagonal(M: np.ndarray) -> np.ndarray:
    """Diagonal of the pseudoinverse of a symmetric matrix.

    Eigendecomposition with eigenvalues below ``EIG_FLOOR`` dropped; cheap
    at the feature counts this decoder runs at.
    """
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    inv_w = np.zeros_like(w)
    keep = w > EIG_FLOOR
    inv_w[keep] = 1.0 / w[keep]
    return (V * V) @ inv_w


class BayesDecoder:
    """Streaming Bayesian linear decoder mapping D features to 2 outputs.

    Parameters follow the standard configuration: observation noise
    ``sigma2`` starts at 0.01, the forgetting factor is 0.98, updates fire
    every 50 buffered packets, and the residual-power tracker R uses
    smoothing 0.05 with clip range [0.001, 1.0]. Set ``eb_enabled=False``
    to freeze the hyperparameters (useful for exact batch-equivalence
    checks).
    """

    def __init__(
        self,
        prior: PriorSpec | None = None,
        sigma2_init: float = 0.01,
        forget: float = 0.98,
        update_interval: int = 50,
        beta_r: float = 0.05,
        r_min: float = 0.001,
        r_max: float = 1.0,
        eb_enabled: bool = True,
        n_outputs: int = 2,
    ):
        if not (0 <= forget <= 1):
            raise ConfigError("forgetting factor must be in [0, 1]")
        if update_interval < 1:
            raise ConfigError("update interval must be >= 1")
        if not (0 < beta_r < 1):
            raise ConfigError("beta_r must be in (0, 1)")
        if not (0 < r_min < r_max):
            raise ConfigError("need 0 < r_min < r_max")
        if sigma2_init <= 0:
            raise ConfigError("sigma2_init must be positive")
        self.prior = prior if prior is not None else PriorSpec()
        self.sigma2 = float(sigma2_init)
        self.forget = float(forget)
        self.update_interval = int(update_interval)
        self.beta_r = float(beta_r)
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        self.eb_enabled = bool(eb_enabled)
        self.n_outputs = n_outputs
        self.R = np.full(n_outputs, np.clip(sigma2_init, r_min, r_max))
        self.stats: SufficientStats | None = None
        self.W: np.ndarray | None = None
        self._buf_x: list[np.ndarray] = []
        self._buf_y: list[np.ndarray] = []
        self._buf_r: list[np.ndarray] = []

    # -- calibration ------------------------------------------------------

    def fit(self, X: np.ndarray, Y: np.ndarray) -> "BayesDecoder":
        """Calibrate from scratch on an N x D / N x 2 batch."""
        X, Y = self._check_xy(X, Y)
        self.prior.precision_diag(X.shape[1])  # materialize/validate dimensions
        self.stats = SufficientStats.from_data(X, Y)
        self.W = solve_map(self.stats, self.sigma2, self.prior)
        return self

    def accumulate(self, X: np.ndarray, Y: np.ndarray) -> "BayesDecoder":
        """Fold another calibration batch into the statistics (no forgetting)."""
        X, Y = self._check_xy(X, Y)
        block = SufficientStats.from_data(X, Y)
        if self.stats is None:
            self.prior.precision_diag(X.shape[1])
            self.stats = block
        else:
            self.stats.scale_and_add(1.0, block)
        self.W = solve_map(self.stats, self.sigma2, self.prior)
        return self

    # -- online operation --------------------------------------------------

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predict outputs for one D-vector or an N x D batch."""
        self._require_fitted()
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("non-finite features passed to predict")
        return x @ self.W

    def observe(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Feed one labeled packet; returns the pre-update residual.

        Every call updates the residual-power tracker and buffers the pair.
        Once ``update_interval`` pairs have accumulated, the sufficient
        statistics take a forgetting-factor update, the weights are
        re-solved, and (unless disabled) the empirical-Bayes step adjusts
        sigma2 and the prior precisions.
        """
        self._require_fitted()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("non-finite observation")
        r = y - x @ self.W
        self.update_r(r)
        self._buf_x.append(x)
        self._buf_y.append(y)
        self._buf_r.append(r)
        if len(self._buf_x) >= self.update_interval:
            self._run_update_cycle()
        return r

    def update_r(self, r: np.ndarray) -> np.ndarray:
        """Track per-axis residual power with a clipped EWMA."""
        clipped = np.clip(r * r, self.r_min, self.r_max)
        self.R = (1.0 - self.beta_r) * self.R + self.beta_r * clipped
        return self.R

    def _run_update_cycle(self) -> None:
        Xb = np.stack(self._buf_x)
        Yb = np.stack(self._buf_y)
        Rb = np.stack(self._buf_r)  # residuals under the pre-update weights
        self.stats.scale_and_add(self.forget, SufficientStats.from_data(Xb, Yb))
        self.W = solve_map(self.stats, self.sigma2, self.prior)
        if self.eb_enabled:
            self.eb_update(Rb)
        self._buf_x.clear()
        self._buf_y.clear()
        self._buf_r.clear()

    def eb_update(self, residuals: np.ndarray) -> None:
        """Empirical-Bayes refresh of sigma2 and the prior precisions.

        The noise variance takes an EWMA step toward the mini-batch mean
        squared residual. Precisions move toward gamma_j / mean-square
        weight, where gamma_j = 1 - alpha_j * Sigma_jj comes from the
        diagonal of the (pseudo)inverse posterior curvature; gamma is
        clipped to [0, 1] and the weight mass floored so the update cannot
        diverge when a feature is fully pruned.
        """
        self._require_fitted()
        residuals = np.asarray(residuals, dtype=float)
        self.sigma2 = 0.9 * self.sigma2 + 0.1 * float(np.mean(residuals**2))
        d = self.stats.sxx.shape[0]
        alpha = self.prior.precision_diag(d)
        M = self.stats.sxx + self.sigma2 * np.diag(alpha)
        sigma_diag = _pinv_diagonal(M)
        gamma = np.clip(1.0 - alpha * sigma_diag, 0.0, 1.0)
        if self.prior.kind == "ard":
            w2 = np.maximum(np.mean(self.W**2, axis=1), WEIGHT_SQ_FLOOR)
            self.prior.alpha = np.clip(
                0.9 * alpha + 0.1 * gamma / w2, ALPHA_MIN, ALPHA_MAX
            )
        else:
            w2 = max(float(np.mean(self.W**2)), WEIGHT_SQ_FLOOR)
            self.prior.alpha = float(
                np.clip(0.9 * self.prior.alpha + 0.1 * float(np.mean(gamma)) / w2,
                        ALPHA_MIN, ALPHA_MAX)
            )

    # -- persistence --------------------------------------------------------

    def snapshot(self) -> dict:
        """State as a documented key-value container (see README)."""
        self._require_fitted()
        return {
            "schema_version": 1,
            "model_kind": "bayes_ard" if self.prior.kind == "ard" else "bayes_iso",
            "prior_kind": self.prior.kind,
            "alpha": np.asarray(self.prior.alpha, dtype=float),
            "W": self.W.copy(),
            "sxx": self.stats.sxx.copy(),
            "sxy": self.stats.sxy.copy(),
            "sigma2": self.sigma2,
            "R": self.R.copy(),
            "forget": self.forget,
            "update_interval": self.update_interval,
            "beta_r": self.beta_r,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "eb_enabled": self.eb_enabled,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "BayesDecoder":
        if int(snap.get("schema_version", -1)) != 1:
            raise ConfigError("unsupported decoder snapshot version")
        alpha = snap["alpha"]
        prior = PriorSpec(
            kind=str(snap["prior_kind"]),
            alpha=float(alpha) if np.ndim(alpha) == 0 else np.asarray(alpha),
        )
        dec = cls(
            prior=prior,
            sigma2_init=float(snap["sigma2"]),
            forget=float(snap["forget"]),
            update_interval=int(snap["update_interval"]),
            beta_r=float(snap["beta_r"]),
            r_min=float(snap["r_min"]),
            r_max=float(snap["r_max"]),
            eb_enabled=bool(snap["eb_enabled"]),
        )
        dec.stats = SufficientStats(
            np.array(snap["sxx"], dtype=float), np.array(snap["sxy"], dtype=float)
        )
        dec.W = np.array(snap["W"], dtype=float)
        dec.R = np.array(snap["R"], dtype=float)
        return dec

    def clone(self) -> "BayesDecoder":
        """Deep copy, e.g. to compare online adaptation against a frozen twin."""
        return deepcopy(self)

    # -- helpers ------------------------------------------------------------

    def _require_fitted(self) -> None:
        if self.W is None or self.stats is None:
            raise InvalidInputError("decoder has not been fitted")

    def _check_xy(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[0] != Y.shape[0]:
            raise InvalidInputError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        if Y.shape[1] != self.n_outputs:
            raise InvalidInputError(f"Y must have {self.n_outputs} columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidInputError("non-finite calibration data")
        return X, Y
