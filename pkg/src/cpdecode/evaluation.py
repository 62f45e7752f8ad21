"""Evaluation protocols: calibration/evaluation splits, prediction modes,
online adaptation, session-accumulative training, and NMSE scoring."""

from __future__ import annotations

import time
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from .bayes import BayesDecoder, PriorSpec
from .errors import (
    ConfigError,
    InsufficientDataError,
    InvalidInputError,
    UndefinedMetricError,
)
from .labels import LabelStream, integrate_acceleration, to_acceleration
from .ridge import fit_ridge
from .signal_pipeline import PacketStream

__all__ = [
    "RunData",
    "ModelSpec",
    "RunReport",
    "nmse",
    "run_protocol",
    "session_accumulative",
    "aggregate",
]

MODES = ("velocity", "acceleration")
MODEL_KINDS = ("bayes_ard", "bayes_iso", "ar", "external")


def nmse(V: np.ndarray, Vhat: np.ndarray) -> float:
    """Normalized mean squared error between true and predicted velocities.

    Sum of squared 2-D errors over the total motion energy; 0 is perfect,
    1 is what an all-zero prediction scores.
    """
    V = np.asarray(V, dtype=float)
    Vhat = np.asarray(Vhat, dtype=float)
    if V.shape != Vhat.shape:
        raise InvalidInputError(f"shape mismatch: {V.shape} vs {Vhat.shape}")
    energy = float(np.sum(V * V))
    if energy <= 0.0:
        raise UndefinedMetricError("true velocities carry zero energy")
    return float(np.sum((V - Vhat) ** 2)) / energy


@dataclass
class RunData:
    """One run's aligned feature and label streams plus identifying metadata."""

    packets: PacketStream
    labels: LabelStream
    subject: str = "S00"
    session: int = 1
    condition: str = "NA"
    run: int = 1

    @property
    def n_packets(self) -> int:
        return min(self.packets.n_packets, self.labels.n_packets)


@dataclass
class ModelSpec:
    """Which decoder to run and with what hyperparameters.

    ``kind`` is one of bayes_ard, bayes_iso, ar, external. Bayes decoders
    adapt online during evaluation unless ``online=False``; ar and external
    predictions are always frozen. ``external`` scores precomputed
    predictions (aligned to packet indices of the run) and is how EEGNet or
    any out-of-process model enters the protocol.
    """

    kind: str = "bayes_ard"
    online: bool = True
    sigma2_init: float = 0.01
    forget: float = 0.98
    update_interval: int = 50
    beta_r: float = 0.05
    r_min: float = 0.001
    r_max: float = 1.0
    alpha_init: float = 1.0
    eb_enabled: bool = True
    lambda_ridge: float = 1e-3
    predictions: np.ndarray | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")

    @property
    def report_label(self) -> str:
        return self.label or self.kind

    def build_decoder(self) -> BayesDecoder:
        prior = PriorSpec(
            kind="ard" if self.kind == "bayes_ard" else "isotropic",
            alpha=self.alpha_init,
        )
        return BayesDecoder(
            prior=prior,
            sigma2_init=self.sigma2_init,
            forget=self.forget,
            update_interval=self.update_interval,
            beta_r=self.beta_r,
            r_min=self.r_min,
            r_max=self.r_max,
            eb_enabled=self.eb_enabled,
        )


@dataclass
class RunReport:
    """Per-run evaluation outcome; serializes to one CSV/JSON row."""

    subject: str
    session: int
    condition: str
    run: int
    model: str
    mode: str
    nmse: float
    n_calib: int
    n_eval: int
    wall_time: float
    n_history: int = 0
    v0_source: str = "true_velocity_at_split"
    label_source: str = "velocity"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _split_index(n: int) -> int:
    return n // 2


def _targets_for_mode(labels: LabelStream, mode: str) -> np.ndarray:
    if mode == "velocity":
        return labels.Y
    if mode == "acceleration":
        return to_acceleration(labels.Y, labels.dt)
    raise ConfigError(f"unknown prediction mode {mode!r}")


def _evaluate_half(
    model,
    spec: ModelSpec,
    X: np.ndarray,
    labels: LabelStream,
    targets: np.ndarray,
    n_calib: int,
    mode: str,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Predict over packets [n_calib, N), integrate if needed, score NMSE.

    Returns (nmse, V_true_eval, V_hat_eval).
    """
    N = X.shape[0]
    if spec.kind == "external":
        preds = spec.predictions
        if preds is None:
            raise ConfigError("external model spec lacks predictions")
        preds = np.asarray(preds, dtype=float)
        if preds.shape[0] < N:
            raise InvalidInputError(
                f"external predictions cover {preds.shape[0]} packets, run has {N}"
            )
        Yhat = preds[n_calib:N]
        if not np.all(np.isfinite(Yhat)):
            missing = np.flatnonzero(~np.isfinite(Yhat).all(axis=1)) + n_calib
            raise InvalidInputError(
                f"external predictions missing/non-finite at packets {missing[:5].tolist()}..."
            )
    elif spec.kind.startswith("bayes") and spec.online:
        rows = []
        for k in range(n_calib, N):
            rows.append(model.predict(X[k]))
            model.observe(X[k], targets[k])
        Yhat = np.stack(rows)
    else:
        Yhat = model.predict(X[n_calib:N])

    V_true = labels.Y[n_calib:N]
    if mode == "acceleration":
        v0 = labels.Y[n_calib - 1]
        V_hat = integrate_acceleration(Yhat, v0, labels.dt)
    else:
        V_hat = Yhat
    return nmse(V_true, V_hat), V_true, V_hat


def run_protocol(
    run: RunData,
    spec: ModelSpec,
    mode: str = "velocity",
    return_traces: bool = False,
):
    """Mid-run protocol: calibrate on the first half, evaluate on the rest.

    The split index is ``floor(N/2)`` (an odd packet goes to evaluation).
    In velocity mode the decoder maps features to contemporaneous velocity
    and NMSE is computed directly; in acceleration mode it maps to
    finite-difference accelerations, whose predictions are integrated back
    to velocity from the true velocity at the split before scoring. Bayes
    decoders keep adapting from the true labels during evaluation; the
    ridge baseline and external predictions stay frozen.

    Returns a :class:`RunReport`, plus ``(t, V_true, V_hat)`` for the
    evaluation half when ``return_traces`` is set.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown prediction mode {mode!r}")
    if run.packets.n_packets != run.labels.n_packets:
        raise InvalidInputError(
            "run streams are not aligned; call labels.align_streams first"
        )
    N = run.n_packets
    if N < 4:
        raise InsufficientDataError(f"run too short to split: N={N} < 4")
    n_calib = _split_index(N)
    X = run.packets.X_bp
    targets = _targets_for_mode(run.labels, mode)

    t0 = time.perf_counter()
    model = None
    if spec.kind in ("bayes_ard", "bayes_iso"):
        model = spec.build_decoder().fit(X[:n_calib], targets[:n_calib])
    elif spec.kind == "ar":
        model = fit_ridge(X[:n_calib], targets[:n_calib], spec.lambda_ridge)
    score, V_true, V_hat = _evaluate_half(
        model, spec, X, run.labels, targets, n_calib, mode
    )
    wall = time.perf_counter() - t0

    report = RunReport(
        subject=run.subject,
        session=run.session,
        condition=run.condition,
        run=run.run,
        model=spec.report_label,
        mode=mode,
        nmse=score,
        n_calib=n_calib,
        n_eval=N - n_calib,
        wall_time=wall,
        label_source=run.labels.mode,
    )
    if return_traces:
        return report, (run.packets.t[n_calib:N], V_true, V_hat)
    return report


def session_accumulative(
    sessions: list[list[RunData]],
    spec: ModelSpec,
    mode: str = "velocity",
) -> list[RunReport]:
    """Evaluate sessions in order, calibrating each from all earlier ones.

    Session 1 falls back to the mid-run protocol. For session s > 1 the
    calibration data is the concatenation of every run of sessions 1..s-1:
    Bayes decoders accumulate sufficient statistics run by run (plain
    summation; forgetting applies only to online update cycles), the ridge
    baseline refits (and restandardizes) on the concatenated block. Each
    run of session s is then scored on its evaluation half, with its own
    copy of the calibrated model so runs stay independent.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown prediction mode {mode!r}")
    reports: list[RunReport] = []
    for s_idx, runs in enumerate(sessions):
        if s_idx == 0:
            reports.extend(run_protocol(run, spec, mode) for run in runs)
            continue

        history = [run for sess in sessions[:s_idx] for run in sess]
        n_history = sum(run.n_packets for run in history)
        base = None
        if spec.kind in ("bayes_ard", "bayes_iso"):
            base = spec.build_decoder()
            for run in history:
                n = run.n_packets
                targets = _targets_for_mode(run.labels, mode)
                base.accumulate(run.packets.X_bp[:n], targets[:n])
        elif spec.kind == "ar":
            X_hist = np.concatenate([r.packets.X_bp[: r.n_packets] for r in history])
            Y_hist = np.concatenate(
                [_targets_for_mode(r.labels, mode)[: r.n_packets] for r in history]
            )
            base = fit_ridge(X_hist, Y_hist, spec.lambda_ridge)

        for run in runs:
            N = run.n_packets
            if N < 4:
                raise InsufficientDataError(f"run too short to split: N={N} < 4")
            n_calib = _split_index(N)
            X = run.packets.X_bp
            targets = _targets_for_mode(run.labels, mode)
            model = base.clone() if isinstance(base, BayesDecoder) else base
            t0 = time.perf_counter()
            score, _, _ = _evaluate_half(
                model, spec, X, run.labels, targets, n_calib, mode
            )
            wall = time.perf_counter() - t0
            reports.append(
                RunReport(
                    subject=run.subject,
                    session=run.session,
                    condition=run.condition,
                    run=run.run,
                    model=spec.report_label,
                    mode=mode,
                    nmse=score,
                    n_calib=0,
                    n_eval=N - n_calib,
                    wall_time=wall,
                    n_history=n_history,
                    label_source=run.labels.mode,
                )
            )
    return reports


def aggregate(reports: list[RunReport] | pd.DataFrame) -> dict[str, pd.DataFrame]:
    """Summarize reports per model and mode.

    Returns three tables: ``summary`` (median/mean/SD/count of NMSE per
    model x mode; SD is the population SD), ``by_group`` (the same, broken
    out per subject/session/condition), and ``ratios`` (pairwise mean
    log-NMSE differences per mode, back-transformed to geometric-mean
    ratios). Modes are never pooled.
    """
    if isinstance(reports, pd.DataFrame):
        df = reports.copy()
    else:
        if not reports:
            raise InvalidInputError("no reports to aggregate")
        df = pd.DataFrame([r.to_dict() for r in reports])

    def _stats(g: pd.Series) -> pd.Series:
        return pd.Series(
            {
                "median": g.median(),
                "mean": g.mean(),
                "sd": g.std(ddof=0),
                "count": g.count(),
            }
        )

    summary = df.groupby(["model", "mode"])["nmse"].apply(_stats).unstack().reset_index()
    group_cols = [c for c in ("subject", "session", "condition") if c in df.columns]
    by_group = (
        df.groupby(["model", "mode", *group_cols])["nmse"]
        .apply(_stats)
        .unstack()
        .reset_index()
    )

    rows = []
    for mode, sub in df.groupby("mode"):
        mean_logs = (
            sub.assign(log_nmse=np.log(np.maximum(sub["nmse"], 1e-300)))
            .groupby("model")["log_nmse"]
            .mean()
        )
        models = sorted(mean_logs.index)
        for i, a in enumerate(models):
            for b in models[i + 1 :]:
                diff = mean_logs[a] - mean_logs[b]
                rows.append(
                    {
                        "mode": mode,
                        "model_a": a,
                        "model_b": b,
                        "log_diff": diff,
                        "geomean_ratio": float(np.exp(diff)),
                    }
                )
    ratios = pd.DataFrame(
        rows, columns=["mode", "model_a", "model_b", "log_diff", "geomean_ratio"]
    )
    return {"summary": summary, "by_group": by_group, "ratios": ratios}
